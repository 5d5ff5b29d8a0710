//! Residual error indicator `η_e² = r_eᵀ G_e⁻¹ r_e`, `r_e = l_e - B_e u_e`.

use super::dofs::DofMap;
use super::element::{cholesky, ElementSystem};
use super::global::gather;
use crate::error::{DpgError, Result};

/// Per-element and global residual norms.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorIndicator {
    pub per_element: Vec<f64>,
    pub global: f64,
}

impl ErrorIndicator {
    pub fn from_squares(squares: Vec<f64>) -> Self {
        let global = squares.iter().sum::<f64>().sqrt();
        Self {
            per_element: squares.into_iter().map(f64::sqrt).collect(),
            global,
        }
    }
}

pub fn error_indicator(
    elements: &[ElementSystem],
    map: &DofMap,
    solution: &[f64],
) -> Result<ErrorIndicator> {
    if solution.len() != map.n_dofs() || elements.len() != map.n_elements() {
        return Err(DpgError::DimensionMismatch(format!(
            "solution of length {} for {} dofs",
            solution.len(),
            map.n_dofs()
        )));
    }
    let mut squares = Vec::with_capacity(elements.len());
    for (e, sys) in elements.iter().enumerate() {
        let ue = gather(map, e, solution);
        let r = &sys.load - &sys.form * ue;
        let chol = cholesky(&sys.gram)?;
        let y = chol
            .l()
            .solve_lower_triangular(&r)
            .ok_or_else(|| DpgError::Singular("triangular solve".into()))?;
        squares.push(y.norm_squared());
    }
    Ok(ErrorIndicator::from_squares(squares))
}
