//! Monolithic mixed solve of `(ε, v)_V + b(u, v) = l(v)`, `b(δu, ε) = 0`.
//!
//! Dense LU on the full saddle-point system; only meant for small meshes as
//! an independent check of the condensed solve.

use super::dofs::{Constraints, DofMap};
use super::element::ElementSystem;
use crate::error::{DpgError, Result};
use nalgebra::{DMatrix, DVector};

/// Trial solution and per-element Riesz representation of the residual.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedSolution {
    pub solution: Vec<f64>,
    pub epsilon: Vec<DVector<f64>>,
}

impl MixedSolution {
    /// `‖ε‖_V` per element.
    pub fn epsilon_norms(&self, elements: &[ElementSystem]) -> Vec<f64> {
        self.epsilon
            .iter()
            .zip(elements)
            .map(|(eps, sys)| eps.dot(&(&sys.gram * eps)).max(0.0).sqrt())
            .collect()
    }
}

pub fn solve_mixed_reference(
    elements: &[ElementSystem],
    map: &DofMap,
    constraints: &Constraints,
) -> Result<MixedSolution> {
    if elements.len() != map.n_elements() {
        return Err(DpgError::DimensionMismatch(format!(
            "{} element systems for {} elements",
            elements.len(),
            map.n_elements()
        )));
    }
    constraints.validate(map.n_dofs())?;
    let n = map.n_dofs();
    let mut free_index = vec![usize::MAX; n];
    let mut n_free = 0;
    for (g, slot) in free_index.iter_mut().enumerate() {
        if constraints.get(g).is_none() {
            *slot = n_free;
            n_free += 1;
        }
    }
    let row_offsets: Vec<usize> = elements
        .iter()
        .scan(0, |acc, s| {
            let start = *acc;
            *acc += s.gram.nrows();
            Some(start)
        })
        .collect();
    let n_test: usize = elements.iter().map(|s| s.gram.nrows()).sum();
    let dim = n_test + n_free;
    let mut k = DMatrix::zeros(dim, dim);
    let mut f = DVector::zeros(dim);

    for (e, sys) in elements.iter().enumerate() {
        let r0 = row_offsets[e];
        let nt = sys.gram.nrows();
        k.view_mut((r0, r0), (nt, nt)).copy_from(&sys.gram);
        let mut load = sys.load.clone();
        for (i, g) in map.element_dofs(e).into_iter().enumerate() {
            let (terms, offset) = constraints.expand(g);
            if offset != 0.0 {
                load -= offset * sys.form.column(i);
            }
            for (gj, w) in terms {
                let c = n_test + free_index[gj];
                for row in 0..nt {
                    let v = w * sys.form[(row, i)];
                    k[(r0 + row, c)] += v;
                    k[(c, r0 + row)] += v;
                }
            }
        }
        f.rows_mut(r0, nt).copy_from(&load);
    }

    let x = k
        .lu()
        .solve(&f)
        .ok_or_else(|| DpgError::Singular("mixed saddle-point system".into()))?;
    let mut solution = vec![0.0; n];
    for g in 0..n {
        if free_index[g] != usize::MAX {
            solution[g] = x[n_test + free_index[g]];
        }
    }
    constraints.apply(&mut solution);
    let epsilon = elements
        .iter()
        .enumerate()
        .map(|(e, s)| x.rows(row_offsets[e], s.gram.nrows()).into_owned())
        .collect();
    Ok(MixedSolution { solution, epsilon })
}
