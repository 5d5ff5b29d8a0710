//! Element-local Gram and form matrices and their condensation.
//!
//! Local trial columns are ordered `[field | trace | flux]`:
//!
//! * primal: `u_0..u_p | - | q̂_left, q̂_right`
//! * ultraweak: `u_0..u_p, ϑ_0..ϑ_p | û_left, û_right | f̂_left, f̂_right`
//!
//! Local test rows are `v_0..v_q` (primal) or `v_0..v_q, ω_0..ω_q`
//! (ultraweak) with `q = p + Δp`.
//!
//! The flux unknowns carry the physical flux `a u_x` at the node, one value
//! per skeleton node. Integrating `-(a u')'` by parts on an element gives
//! `(a u', v') - [a u' v]`, so a flux column holds `-n v(endpoint)` with
//! outward normal `n = -1` on the left and `+1` on the right.

use super::forms::{Coefficients, FormSpec, Formulation, NormSpec};
use crate::error::{DpgError, Result};
use crate::mesh::{BasisSet, Element, QuadratureRule};
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

/// Left or right end of an element.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn normal(self) -> f64 {
        match self {
            Side::Left => -1.0,
            Side::Right => 1.0,
        }
    }

    pub const BOTH: [Side; 2] = [Side::Left, Side::Right];
}

/// Index bookkeeping for the local element system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LocalLayout {
    pub formulation: Formulation,
    pub trial_len: usize,
    pub test_len: usize,
}

impl LocalLayout {
    pub fn new(formulation: Formulation, trial: &BasisSet, test: &BasisSet) -> Self {
        Self {
            formulation,
            trial_len: trial.len(),
            test_len: test.len(),
        }
    }

    pub fn n_cols(&self) -> usize {
        match self.formulation {
            Formulation::Primal => self.trial_len + 2,
            Formulation::Ultraweak => 2 * self.trial_len + 4,
        }
    }

    pub fn n_rows(&self) -> usize {
        match self.formulation {
            Formulation::Primal => self.test_len,
            Formulation::Ultraweak => 2 * self.test_len,
        }
    }

    /// Columns of the value field `u`.
    pub fn u_cols(&self) -> std::ops::Range<usize> {
        0..self.trial_len
    }

    /// Columns of the gradient field `ϑ` (ultraweak only).
    pub fn theta_cols(&self) -> Option<std::ops::Range<usize>> {
        match self.formulation {
            Formulation::Primal => None,
            Formulation::Ultraweak => Some(self.trial_len..2 * self.trial_len),
        }
    }

    /// Column of the value trace `û` (ultraweak only).
    pub fn trace_col(&self, side: Side) -> Option<usize> {
        match self.formulation {
            Formulation::Primal => None,
            Formulation::Ultraweak => Some(2 * self.trial_len + side as usize),
        }
    }

    pub fn flux_col(&self, side: Side) -> usize {
        match self.formulation {
            Formulation::Primal => self.trial_len + side as usize,
            Formulation::Ultraweak => 2 * self.trial_len + 2 + side as usize,
        }
    }

    /// Rows of the `ω` test functions (ultraweak only).
    pub fn omega_rows(&self) -> Option<std::ops::Range<usize>> {
        match self.formulation {
            Formulation::Primal => None,
            Formulation::Ultraweak => Some(self.test_len..2 * self.test_len),
        }
    }
}

/// Basis values and physical derivatives at every quadrature point.
struct Tabulation {
    x: Vec<f64>,
    jw: Vec<f64>,
    values: Vec<Vec<f64>>,
    derivs: Vec<Vec<f64>>,
}

impl Tabulation {
    fn new(element: &Element, basis: &BasisSet, quad: &QuadratureRule) -> Self {
        let jac = element.jacobian();
        let mut t = Tabulation {
            x: Vec::with_capacity(quad.len()),
            jw: Vec::with_capacity(quad.len()),
            values: Vec::with_capacity(quad.len()),
            derivs: Vec::with_capacity(quad.len()),
        };
        for (&xi, &w) in quad.points.iter().zip(&quad.weights) {
            let (v, d) = basis.eval_unchecked(xi);
            t.x.push(element.map(xi));
            t.jw.push(w * jac);
            t.values.push(v);
            t.derivs.push(d.into_iter().map(|di| di / jac).collect());
        }
        t
    }
}

fn endpoint_values(basis: &BasisSet, side: Side) -> Vec<f64> {
    let xi = match side {
        Side::Left => -1.0,
        Side::Right => 1.0,
    };
    basis.eval_unchecked(xi).0
}

/// Gram matrix `G_ij = (v_i, v_j)_V` of the enriched test space on one element.
pub fn assemble_gram(
    element: &Element,
    norm: &NormSpec,
    test: &BasisSet,
    quad: &QuadratureRule,
) -> Result<DMatrix<f64>> {
    norm.validate()?;
    let tab = Tabulation::new(element, test, quad);
    let nt = test.len();
    let w = norm.weights;
    let coeffs = &norm.coefficients;
    let g: DMatrix<f64> = match norm.formulation {
        Formulation::Primal => {
            let mut g = DMatrix::zeros(nt, nt);
            for q in 0..tab.x.len() {
                let a = coeffs.diffusion.eval(tab.x[q]);
                let (v, d) = (&tab.values[q], &tab.derivs[q]);
                for i in 0..nt {
                    for j in 0..nt {
                        g[(i, j)] +=
                            tab.jw[q] * (w.l2 * v[i] * v[j] + w.first * a * a * d[i] * d[j]);
                    }
                }
            }
            g
        }
        Formulation::Ultraweak => {
            let n = 2 * nt;
            let mut g = DMatrix::zeros(n, n);
            let dtt = norm.dt_theta;
            // per test function: (adjoint ϑ-component, adjoint u-component, L2 value)
            let mut comp = vec![(0.0, 0.0, 0.0); n];
            for q in 0..tab.x.len() {
                let x = tab.x[q];
                let (a, b, c) = (
                    coeffs.diffusion.eval(x),
                    coeffs.convection.eval(x),
                    coeffs.reaction.eval(x),
                );
                let (v, d) = (&tab.values[q], &tab.derivs[q]);
                for i in 0..nt {
                    comp[i] = (dtt * (a * d[i] + b * v[i]), (1.0 + dtt * c) * v[i], v[i]);
                    comp[nt + i] = (v[i], d[i], v[i]);
                }
                for i in 0..n {
                    for j in 0..n {
                        let same_block = (i < nt) == (j < nt);
                        let l2 = if same_block { comp[i].2 * comp[j].2 } else { 0.0 };
                        g[(i, j)] += tab.jw[q]
                            * (w.first * comp[i].0 * comp[j].0
                                + w.second * comp[i].1 * comp[j].1
                                + w.l2 * l2);
                    }
                }
            }
            g
        }
    };
    let g = 0.5 * (&g + g.transpose());
    if Cholesky::new(g.clone()).is_none() {
        return Err(DpgError::NotPositiveDefinite(format!(
            "Gram matrix on element {}",
            element.index
        )));
    }
    Ok(g)
}

/// Bilinear-form pieces on one element, all `test × trial`.
///
/// The step matrix is `mass + Δτθ·operator + constraint`; the explicit
/// load operator is `mass - Δτ(1-θ)·operator`.
#[derive(Debug, Clone, PartialEq)]
pub struct FormBlocks {
    /// `(u, v)`.
    pub mass: DMatrix<f64>,
    /// Weak form of `L`: `(a u', v') + (b u', v) + (c u, v) - ⟨n q̂, v⟩`.
    pub operator: DMatrix<f64>,
    /// Ultraweak definition of the gradient: `(ϑ, ω) + (u, ω') - ⟨n û, ω⟩`.
    pub constraint: DMatrix<f64>,
}

/// Assembles the mass, operator and constraint blocks for one element.
pub fn form_blocks(
    element: &Element,
    coeffs: &Coefficients,
    formulation: Formulation,
    trial: &BasisSet,
    test: &BasisSet,
    quad: &QuadratureRule,
) -> FormBlocks {
    let layout = LocalLayout::new(formulation, trial, test);
    let (nr, nc) = (layout.n_rows(), layout.n_cols());
    let (np, nq) = (trial.len(), test.len());
    let tt = Tabulation::new(element, trial, quad);
    let vt = Tabulation::new(element, test, quad);
    let mut mass = DMatrix::zeros(nr, nc);
    let mut op = DMatrix::zeros(nr, nc);
    let mut con = DMatrix::zeros(nr, nc);

    for q in 0..tt.x.len() {
        let x = tt.x[q];
        let jw = tt.jw[q];
        let (a, b, c) = (
            coeffs.diffusion.eval(x),
            coeffs.convection.eval(x),
            coeffs.reaction.eval(x),
        );
        let (u, du) = (&tt.values[q], &tt.derivs[q]);
        let (v, dv) = (&vt.values[q], &vt.derivs[q]);
        match formulation {
            Formulation::Primal => {
                for i in 0..nq {
                    for j in 0..np {
                        mass[(i, j)] += jw * u[j] * v[i];
                        op[(i, j)] += jw * (a * du[j] * dv[i] + b * du[j] * v[i] + c * u[j] * v[i]);
                    }
                }
            }
            Formulation::Ultraweak => {
                for i in 0..nq {
                    for j in 0..np {
                        // v rows
                        mass[(i, j)] += jw * u[j] * v[i];
                        op[(i, j)] += jw * c * u[j] * v[i];
                        op[(i, np + j)] += jw * (a * u[j] * dv[i] + b * u[j] * v[i]);
                        // ω rows
                        con[(nq + i, np + j)] += jw * u[j] * v[i];
                        con[(nq + i, j)] += jw * u[j] * dv[i];
                    }
                }
            }
        }
    }

    for side in Side::BOTH {
        let vals = endpoint_values(test, side);
        let n = side.normal();
        let fc = layout.flux_col(side);
        for i in 0..nq {
            op[(i, fc)] -= n * vals[i];
        }
        if let Some(tc) = layout.trace_col(side) {
            for i in 0..nq {
                con[(nq + i, tc)] -= n * vals[i];
            }
        }
    }

    FormBlocks {
        mass,
        operator: op,
        constraint: con,
    }
}

impl FormBlocks {
    /// Implicit step matrix `B`.
    pub fn step_matrix(&self, form: &FormSpec) -> DMatrix<f64> {
        &self.mass + form.implicit_weight() * &self.operator + &self.constraint
    }

    /// Explicit load operator: `l = E u^n`.
    pub fn load_matrix(&self, form: &FormSpec) -> DMatrix<f64> {
        &self.mass - form.explicit_weight() * &self.operator
    }
}

/// Step matrix `B` and load `l` for one element given the previous local state.
pub fn assemble_element_forms(
    element: &Element,
    form: &FormSpec,
    trial: &BasisSet,
    test: &BasisSet,
    quad: &QuadratureRule,
    previous: &[f64],
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    form.validate()?;
    let blocks = form_blocks(element, &form.coefficients, form.formulation, trial, test, quad);
    let b = blocks.step_matrix(form);
    if previous.len() != b.ncols() {
        return Err(DpgError::DimensionMismatch(format!(
            "previous state has {} entries, element has {} trial columns",
            previous.len(),
            b.ncols()
        )));
    }
    let l = blocks.load_matrix(form) * DVector::from_column_slice(previous);
    Ok((b, l))
}

pub(crate) fn cholesky(g: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(g.clone())
        .ok_or_else(|| DpgError::NotPositiveDefinite("Gram matrix Cholesky failed".into()))
}

/// `A = Bᵀ G⁻¹ B`, `b = Bᵀ G⁻¹ l` through the Cholesky factor of `G`.
pub fn condense_element(
    g: &DMatrix<f64>,
    b: &DMatrix<f64>,
    l: &DVector<f64>,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    if g.nrows() != g.ncols() || g.nrows() != b.nrows() || l.len() != b.nrows() {
        return Err(DpgError::DimensionMismatch(format!(
            "G {}x{}, B {}x{}, l {}",
            g.nrows(),
            g.ncols(),
            b.nrows(),
            b.ncols(),
            l.len()
        )));
    }
    let chol = cholesky(g)?;
    let lower = chol.l();
    let w = lower
        .solve_lower_triangular(b)
        .ok_or_else(|| DpgError::Singular("triangular solve".into()))?;
    let lt = lower
        .solve_lower_triangular(l)
        .ok_or_else(|| DpgError::Singular("triangular solve".into()))?;
    let a = w.transpose() * &w;
    let rhs = w.transpose() * lt;
    Ok((a, rhs))
}

/// Local DPG system of one element.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementSystem {
    pub gram: DMatrix<f64>,
    pub form: DMatrix<f64>,
    pub load: DVector<f64>,
    pub normal: DMatrix<f64>,
    pub rhs: DVector<f64>,
}

impl ElementSystem {
    pub fn new(gram: DMatrix<f64>, form: DMatrix<f64>, load: DVector<f64>) -> Result<Self> {
        let (normal, rhs) = condense_element(&gram, &form, &load)?;
        Ok(Self {
            gram,
            form,
            load,
            normal,
            rhs,
        })
    }

    /// Builds the system for one θ-step from scratch.
    pub fn build(
        element: &Element,
        form: &FormSpec,
        norm: &NormSpec,
        trial: &BasisSet,
        test: &BasisSet,
        quad: &QuadratureRule,
        previous: &[f64],
    ) -> Result<Self> {
        let gram = assemble_gram(element, norm, test, quad)?;
        let (b, l) = assemble_element_forms(element, form, trial, test, quad, previous)?;
        Self::new(gram, b, l)
    }

    pub fn n_cols(&self) -> usize {
        self.form.ncols()
    }
}

/// Quadrature size that integrates every element integrand exactly.
pub fn quadrature_points(test_order: usize, coeffs: &Coefficients) -> usize {
    test_order + 2 + coeffs.max_degree()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dpg::forms::{NormWeights, Poly};
    use crate::mesh::gauss_rule;

    fn unit() -> Element {
        Element::new(0, 0.0, 1.0)
    }

    #[test]
    fn l2_gram_of_constant_is_width() {
        let e = Element::new(0, 2.0, 2.75);
        let norm = NormSpec::l2(Formulation::Primal, 1.0);
        let g = assemble_gram(&e, &norm, &BasisSet::trial(0), &gauss_rule(2).unwrap()).unwrap();
        assert_eq!(g.shape(), (1, 1));
        assert!((g[(0, 0)] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn primal_gram_is_mass_plus_stiffness() {
        // dt = 1, sigma = sqrt(2) => a = 1 and G = M + K
        let form = FormSpec::new(
            Formulation::Primal,
            Coefficients::black_scholes(0.0, 2f64.sqrt()),
            1.0,
            1.0,
        );
        let norm = NormSpec::for_form(&form);
        let g = assemble_gram(&unit(), &norm, &BasisSet::trial(1), &gauss_rule(3).unwrap()).unwrap();
        let expect = [[1.0 / 3.0 + 1.0, 1.0 / 6.0 - 1.0], [1.0 / 6.0 - 1.0, 1.0 / 3.0 + 1.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((g[(i, j)] - expect[i][j]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn ultraweak_gram_is_spd() {
        let form = FormSpec::new(
            Formulation::Ultraweak,
            Coefficients::asian_reduced(0.09, 0.05, 1.0),
            0.01,
            1.0,
        );
        let norm = NormSpec::for_form(&form);
        let test = BasisSet::enriched_test(1, 2);
        let q = gauss_rule(7).unwrap();
        for e in [Element::new(0, -2.0, -1.96), Element::new(1, -0.02, 0.02)] {
            assert!(assemble_gram(&e, &norm, &test, &q).is_ok());
        }
    }

    #[test]
    fn zero_l2_weight_is_rejected() {
        let mut norm = NormSpec::l2(Formulation::Primal, 1.0);
        norm.weights = NormWeights {
            l2: 0.0,
            first: 1.0,
            second: 0.0,
        };
        assert!(assemble_gram(&unit(), &norm, &BasisSet::trial(1), &gauss_rule(2).unwrap()).is_err());
    }

    #[test]
    fn explicit_euler_field_block_is_mass() {
        let coeffs = Coefficients::black_scholes(0.05, 0.3);
        let form = FormSpec::new(Formulation::Primal, coeffs.clone(), 0.37, 0.0);
        let trial = BasisSet::trial(1);
        let test = BasisSet::enriched_test(1, 2);
        let q = gauss_rule(5).unwrap();
        let blocks = form_blocks(&unit(), &coeffs, Formulation::Primal, &trial, &test, &q);
        let b = blocks.step_matrix(&form);
        for i in 0..test.len() {
            for j in 0..trial.len() {
                assert!((b[(i, j)] - blocks.mass[(i, j)]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn flux_columns_follow_outward_normal() {
        let coeffs = Coefficients::black_scholes(0.05, 0.3);
        let form = FormSpec::new(Formulation::Primal, coeffs.clone(), 0.1, 1.0);
        let trial = BasisSet::trial(1);
        let test = BasisSet::enriched_test(1, 2);
        let q = gauss_rule(5).unwrap();
        let layout = LocalLayout::new(Formulation::Primal, &trial, &test);
        let (b, _) = assemble_element_forms(&unit(), &form, &trial, &test, &q, &[0.0; 4]).unwrap();
        let left = endpoint_values(&test, Side::Left);
        let right = endpoint_values(&test, Side::Right);
        for i in 0..test.len() {
            // column = -n Δτθ v(endpoint)
            assert!((b[(i, layout.flux_col(Side::Left))] - 0.1 * left[i]).abs() < 1e-15);
            assert!((b[(i, layout.flux_col(Side::Right))] + 0.1 * right[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let form = FormSpec::new(Formulation::Ultraweak, Coefficients::zero(), 0.1, 1.0);
        let r = assemble_element_forms(
            &unit(),
            &form,
            &BasisSet::trial(1),
            &BasisSet::enriched_test(1, 2),
            &gauss_rule(5).unwrap(),
            &[0.0; 3],
        );
        assert!(matches!(r, Err(DpgError::DimensionMismatch(_))));
    }

    #[test]
    fn condense_with_identity_gram() {
        let b = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 0.5, -1.0, 3.0, 0.0]);
        let l = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let (a, rhs) = condense_element(&DMatrix::identity(3, 3), &b, &l).unwrap();
        assert!((a - b.transpose() * &b).abs().max() < 1e-14);
        assert!((rhs - b.transpose() * l).abs().max() < 1e-14);
    }

    #[test]
    fn condense_square_consistency() {
        let g = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, -1.0, 3.0]);
        let w = DVector::from_vec(vec![0.3, -0.7]);
        let l = &b * &w;
        let (a, rhs) = condense_element(&g, &b, &l).unwrap();
        let u = a.lu().solve(&rhs).unwrap();
        assert!((u - w).abs().max() < 1e-13);
    }

    #[test]
    fn variable_coefficient_poly_is_used() {
        let coeffs = Coefficients::new(Poly::zero(), Poly::zero(), Poly::linear(0.0, 1.0));
        let trial = BasisSet::trial(0);
        let test = BasisSet::trial(0);
        let q = gauss_rule(3).unwrap();
        let blocks = form_blocks(&unit(), &coeffs, Formulation::Primal, &trial, &test, &q);
        // (x u, v) on [0, 1] with u = v = 1
        assert!((blocks.operator[(0, 0)] - 0.5).abs() < 1e-15);
    }
}
