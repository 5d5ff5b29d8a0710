//! Global scatter of condensed element systems and the band solve.
//!
//! Constraints are eliminated during the scatter: each local column is
//! expanded into free unknowns plus an offset, so the reduced matrix stays
//! symmetric. Constrained rows become identity rows and are filled in after
//! the solve.

use super::dofs::{Constraints, DofMap};
use super::element::ElementSystem;
use crate::banded::{BandCholesky, SymBand};
use crate::error::{DpgError, Result};
use nalgebra::{DMatrix, DVector};

/// Reduced global system and its DOF map.
#[derive(Debug, Clone)]
pub struct GlobalSystem {
    pub matrix: SymBand,
    pub rhs: Vec<f64>,
    pub map: DofMap,
}

type Expansion = (Vec<Vec<(usize, f64)>>, Vec<f64>);

fn expand_element(map: &DofMap, constraints: &Constraints, e: usize) -> Expansion {
    let dofs = map.element_dofs(e);
    let mut terms = Vec::with_capacity(dofs.len());
    let mut offsets = Vec::with_capacity(dofs.len());
    for g in dofs {
        let (t, o) = constraints.expand(g);
        terms.push(t);
        offsets.push(o);
    }
    (terms, offsets)
}

/// Half bandwidth of the reduced matrix.
pub fn reduced_bandwidth(map: &DofMap, constraints: &Constraints) -> usize {
    let mut bw = map.bandwidth();
    for e in 0..map.n_elements() {
        let (terms, _) = expand_element(map, constraints, e);
        let all: Vec<usize> = terms.iter().flatten().map(|&(g, _)| g).collect();
        if let (Some(lo), Some(hi)) = (all.iter().min(), all.iter().max()) {
            bw = bw.max(hi - lo);
        }
    }
    bw
}

/// Scatters element normal matrices into the reduced band matrix.
pub fn assemble_reduced_matrix(
    map: &DofMap,
    constraints: &Constraints,
    normals: &[DMatrix<f64>],
) -> Result<SymBand> {
    check_count(map, normals.len())?;
    constraints.validate(map.n_dofs())?;
    let n = map.n_dofs();
    let mut a = SymBand::zeros(n, reduced_bandwidth(map, constraints));
    for (e, ae) in normals.iter().enumerate() {
        let (terms, _) = expand_element(map, constraints, e);
        if ae.nrows() != terms.len() {
            return Err(DpgError::DimensionMismatch(format!(
                "element {e} matrix has {} columns, map expects {}",
                ae.nrows(),
                terms.len()
            )));
        }
        for i in 0..terms.len() {
            for j in 0..terms.len() {
                let v = ae[(i, j)];
                if v == 0.0 {
                    continue;
                }
                // full local loop, lower global triangle only
                for &(gi, wi) in &terms[i] {
                    for &(gj, wj) in &terms[j] {
                        if gi >= gj {
                            a.add(gi, gj, wi * wj * v);
                        }
                    }
                }
            }
        }
    }
    for c in constraints.items() {
        a.isolate(c.dof, 1.0);
    }
    Ok(a)
}

/// Scatters element right-hand sides `b_e - A_e o_e` into the reduced vector.
pub fn assemble_reduced_rhs(
    map: &DofMap,
    constraints: &Constraints,
    normals: &[&DMatrix<f64>],
    rhs: &[DVector<f64>],
) -> Result<Vec<f64>> {
    check_count(map, rhs.len())?;
    check_count(map, normals.len())?;
    let mut b = vec![0.0; map.n_dofs()];
    for e in 0..rhs.len() {
        let (terms, offsets) = expand_element(map, constraints, e);
        let mut be = rhs[e].clone();
        if offsets.iter().any(|&o| o != 0.0) {
            be -= normals[e] * DVector::from_column_slice(&offsets);
        }
        for (i, t) in terms.iter().enumerate() {
            for &(g, w) in t {
                b[g] += w * be[i];
            }
        }
    }
    for c in constraints.items() {
        b[c.dof] = 0.0;
    }
    Ok(b)
}

fn check_count(map: &DofMap, n: usize) -> Result<()> {
    if n != map.n_elements() {
        return Err(DpgError::DimensionMismatch(format!(
            "{n} element systems for {} elements",
            map.n_elements()
        )));
    }
    Ok(())
}

/// Builds the reduced global system from element systems.
pub fn assemble_global(
    elements: &[ElementSystem],
    map: &DofMap,
    constraints: &Constraints,
) -> Result<GlobalSystem> {
    let normals: Vec<DMatrix<f64>> = elements.iter().map(|s| s.normal.clone()).collect();
    let refs: Vec<&DMatrix<f64>> = normals.iter().collect();
    let rhs: Vec<DVector<f64>> = elements.iter().map(|s| s.rhs.clone()).collect();
    Ok(GlobalSystem {
        rhs: assemble_reduced_rhs(map, constraints, &refs, &rhs)?,
        matrix: assemble_reduced_matrix(map, constraints, &normals)?,
        map: map.clone(),
    })
}

/// Factorizes a reduced matrix, mapping failure to a singular-system error.
pub fn factorize(matrix: &SymBand) -> Result<BandCholesky> {
    matrix.cholesky().map_err(|e| {
        DpgError::Singular(format!(
            "global DPG matrix not positive definite ({e}); missing boundary conditions?"
        ))
    })
}

/// Solves a factorized reduced system with one step of iterative refinement
/// and fills in constrained values.
pub fn solve_factored(
    matrix: &SymBand,
    factor: &BandCholesky,
    rhs: &[f64],
    constraints: &Constraints,
) -> Result<Vec<f64>> {
    let mut u = factor.solve(rhs);
    let r: Vec<f64> = matrix
        .mul_vec(&u)
        .iter()
        .zip(rhs)
        .map(|(au, b)| b - au)
        .collect();
    let du = factor.solve(&r);
    for (ui, di) in u.iter_mut().zip(&du) {
        *ui += di;
    }
    let res = relative_residual(matrix, &u, rhs);
    if !res.is_finite() {
        return Err(DpgError::NonFinite("global solve".into()));
    }
    if res > 1e-8 {
        return Err(DpgError::Singular(format!(
            "global residual {res:e} after refinement"
        )));
    }
    constraints.apply(&mut u);
    Ok(u)
}

/// `‖A u - b‖ / ‖b‖`, or `‖A u‖` when `b = 0`.
pub fn relative_residual(matrix: &SymBand, u: &[f64], b: &[f64]) -> f64 {
    let au = matrix.mul_vec(u);
    let num: f64 = au.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if den > 0.0 {
        num / den
    } else {
        num
    }
}

/// Scatters, constrains and solves the condensed DPG system.
pub fn solve_dpg_system(
    elements: &[ElementSystem],
    map: &DofMap,
    constraints: &Constraints,
) -> Result<Vec<f64>> {
    let sys = assemble_global(elements, map, constraints)?;
    let factor = factorize(&sys.matrix)?;
    solve_factored(&sys.matrix, &factor, &sys.rhs, constraints)
}

/// Local slice of a global vector for element `e`.
pub fn gather(map: &DofMap, e: usize, u: &[f64]) -> DVector<f64> {
    DVector::from_iterator(
        map.element_dofs(e).len(),
        map.element_dofs(e).into_iter().map(|g| u[g]),
    )
}
