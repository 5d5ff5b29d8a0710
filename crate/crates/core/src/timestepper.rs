//! θ-method time marching on top of the condensed DPG system.
//!
//! With `u^{n+1}` the unknown and `E = mass - Δτ(1-θ)·operator`, every step
//! solves `B u^{n+1} ≈ E u^n + s` in the DPG sense. Per element the step
//! stores `W = L⁻¹B`, `Ẽ = L⁻¹E` (`G = L Lᵀ`), the normal matrix `WᵀW` and
//! `R = WᵀẼ`, so a step is one matrix-vector product per element plus a band
//! back-substitution with a factor computed once per `Δτ`.

use crate::banded::{BandCholesky, SymBand};
use crate::dpg::element::{assemble_gram, cholesky, form_blocks};
use crate::dpg::global::{
    assemble_reduced_matrix, assemble_reduced_rhs, factorize, gather, relative_residual,
    solve_factored,
};
use crate::dpg::{Constraints, ErrorIndicator, FormSpec, SpaceDiscretization};
use crate::error::{DpgError, Result};
use crate::models::BoundaryCondition;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

/// Ascending times to maturity `0 = τ_0 < τ_1 < … < τ_N = T`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeGrid {
    taus: Vec<f64>,
}

impl TimeGrid {
    /// `N_τ` equal steps `Δτ = T / N_τ`.
    pub fn uniform(maturity: f64, steps: usize) -> Result<Self> {
        if steps == 0 || !(maturity > 0.0) {
            return Err(DpgError::InvalidParameter(format!(
                "time grid needs T > 0 and N_tau >= 1, got T = {maturity}, N_tau = {steps}"
            )));
        }
        Ok(Self {
            taus: (0..=steps)
                .map(|i| maturity * i as f64 / steps as f64)
                .collect(),
        })
    }

    /// Steps no longer than `dt_target` that land exactly on every breakpoint.
    ///
    /// Each window `[b_i, b_{i+1}]` gets `N_i = ceil(L_i / dt_target)` equal
    /// sub-steps.
    pub fn with_breakpoints(maturity: f64, breakpoints: &[f64], dt_target: f64) -> Result<Self> {
        if !(dt_target > 0.0) || !(maturity > 0.0) {
            return Err(DpgError::InvalidParameter(format!("time step {dt_target}")));
        }
        let tol = 1e-12 * maturity;
        let mut marks: Vec<f64> = breakpoints
            .iter()
            .copied()
            .filter(|&b| b > tol && b < maturity - tol)
            .collect();
        marks.sort_by(f64::total_cmp);
        marks.dedup_by(|a, b| (*a - *b).abs() <= tol);
        marks.insert(0, 0.0);
        marks.push(maturity);
        let mut taus = vec![0.0];
        for w in marks.windows(2) {
            let len = w[1] - w[0];
            let n = ((len / dt_target) - 1e-9).ceil().max(1.0) as usize;
            for i in 1..n {
                taus.push(w[0] + len * i as f64 / n as f64);
            }
            taus.push(w[1]);
        }
        Ok(Self { taus })
    }

    pub fn taus(&self) -> &[f64] {
        &self.taus
    }

    pub fn steps(&self) -> usize {
        self.taus.len() - 1
    }

    pub fn maturity(&self) -> f64 {
        *self.taus.last().unwrap()
    }

    pub fn dt(&self, k: usize) -> f64 {
        self.taus[k + 1] - self.taus[k]
    }
}

/// Per-step diagnostics.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct StepDiagnostics {
    pub tau: f64,
    pub eta: f64,
    pub lcp_iterations: Option<usize>,
    pub lcp_residual: Option<f64>,
}

/// DOF vectors at every time level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransientSolution {
    pub taus: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// One entry per step; `diagnostics[k]` belongs to `states[k + 1]`.
    pub diagnostics: Vec<StepDiagnostics>,
}

impl TransientSolution {
    pub fn final_state(&self) -> &[f64] {
        self.states.last().unwrap()
    }

    pub fn max_eta(&self) -> f64 {
        self.diagnostics.iter().fold(0.0, |m, d| m.max(d.eta))
    }
}

#[derive(Debug, Clone)]
struct StepElement {
    lower: DMatrix<f64>,
    w: DMatrix<f64>,
    et: DMatrix<f64>,
    normal: DMatrix<f64>,
    r: DMatrix<f64>,
}

/// Condensed θ-step for one `Δτ`, with the global factor cached for a fixed
/// constraint structure.
#[derive(Debug, Clone)]
pub struct ThetaStepper {
    form: FormSpec,
    elements: Vec<StepElement>,
    matrix: SymBand,
    factor: BandCholesky,
}

impl ThetaStepper {
    /// Condenses every element and factorizes the reduced matrix for the
    /// structure of `template` (offsets are ignored).
    pub fn new(
        disc: &SpaceDiscretization,
        dt: f64,
        theta: f64,
        template: &Constraints,
    ) -> Result<Self> {
        let form = disc.form_spec(dt, theta);
        form.validate()?;
        let norm = disc.norm_spec(&form);
        let elements: Vec<StepElement> = disc
            .mesh()
            .elements()
            .collect::<Vec<_>>()
            .par_iter()
            .map(|el| -> Result<StepElement> {
                let gram = assemble_gram(el, &norm, disc.test(), disc.quad())?;
                let blocks = form_blocks(
                    el,
                    &form.coefficients,
                    form.formulation,
                    disc.trial(),
                    disc.test(),
                    disc.quad(),
                );
                let lower = cholesky(&gram)?.l();
                let w = lower
                    .solve_lower_triangular(&blocks.step_matrix(&form))
                    .ok_or_else(|| DpgError::Singular("triangular solve".into()))?;
                let et = lower
                    .solve_lower_triangular(&blocks.load_matrix(&form))
                    .ok_or_else(|| DpgError::Singular("triangular solve".into()))?;
                let wt = w.transpose();
                let a = &wt * &w;
                let normal = 0.5 * (&a + a.transpose());
                let r = &wt * &et;
                Ok(StepElement {
                    lower,
                    w,
                    et,
                    normal,
                    r,
                })
            })
            .collect::<Result<_>>()?;
        let normals: Vec<DMatrix<f64>> = elements.iter().map(|e| e.normal.clone()).collect();
        let matrix = assemble_reduced_matrix(disc.map(), template, &normals)?;
        let factor = factorize(&matrix)?;
        Ok(Self {
            form,
            elements,
            matrix,
            factor,
        })
    }

    pub fn dt(&self) -> f64 {
        self.form.dt
    }

    pub fn theta(&self) -> f64 {
        self.form.theta
    }

    pub fn form(&self) -> &FormSpec {
        &self.form
    }

    /// Reduced global matrix (constrained rows are identity rows).
    pub fn matrix(&self) -> &SymBand {
        &self.matrix
    }

    pub fn factor(&self) -> &BandCholesky {
        &self.factor
    }

    /// Element normal matrices `BᵀG⁻¹B`.
    pub fn normals(&self) -> Vec<DMatrix<f64>> {
        self.elements.iter().map(|e| e.normal.clone()).collect()
    }

    /// Element right-hand sides `Bᵀ G⁻¹ (E u^n + s)`.
    pub fn element_rhs(
        &self,
        disc: &SpaceDiscretization,
        previous: &[f64],
        source: Option<&[DVector<f64>]>,
    ) -> Result<Vec<DVector<f64>>> {
        let map = disc.map();
        self.elements
            .iter()
            .enumerate()
            .map(|(e, el)| {
                let mut b = &el.r * gather(map, e, previous);
                if let Some(s) = source {
                    let st = el
                        .lower
                        .solve_lower_triangular(&s[e])
                        .ok_or_else(|| DpgError::Singular("triangular solve".into()))?;
                    b += el.w.transpose() * st;
                }
                Ok(b)
            })
            .collect()
    }

    /// Reduced global right-hand side for `constraints` (same structure as
    /// the template).
    pub fn reduced_rhs(
        &self,
        disc: &SpaceDiscretization,
        previous: &[f64],
        constraints: &Constraints,
        source: Option<&[DVector<f64>]>,
    ) -> Result<Vec<f64>> {
        let rhs = self.element_rhs(disc, previous, source)?;
        let normals: Vec<&DMatrix<f64>> = self.elements.iter().map(|e| &e.normal).collect();
        assemble_reduced_rhs(disc.map(), constraints, &normals, &rhs)
    }

    /// One linear θ-step.
    pub fn solve(
        &self,
        disc: &SpaceDiscretization,
        previous: &[f64],
        constraints: &Constraints,
        source: Option<&[DVector<f64>]>,
    ) -> Result<Vec<f64>> {
        let b = self.reduced_rhs(disc, previous, constraints, source)?;
        let u = solve_factored(&self.matrix, &self.factor, &b, constraints)?;
        if u.iter().any(|v| !v.is_finite()) {
            return Err(DpgError::NonFinite("state after time step".into()));
        }
        Ok(u)
    }

    /// Residual norms `‖Ẽ u^n + L⁻¹s - W u^{n+1}‖` per element.
    pub fn indicator(
        &self,
        disc: &SpaceDiscretization,
        previous: &[f64],
        next: &[f64],
        source: Option<&[DVector<f64>]>,
    ) -> Result<ErrorIndicator> {
        let map = disc.map();
        let mut squares = Vec::with_capacity(self.elements.len());
        for (e, el) in self.elements.iter().enumerate() {
            let mut r = &el.et * gather(map, e, previous) - &el.w * gather(map, e, next);
            if let Some(s) = source {
                r += el
                    .lower
                    .solve_lower_triangular(&s[e])
                    .ok_or_else(|| DpgError::Singular("triangular solve".into()))?;
            }
            squares.push(r.norm_squared());
        }
        Ok(ErrorIndicator::from_squares(squares))
    }

    /// `‖A u - b‖ / ‖b‖` of the reduced system.
    pub fn residual(&self, u: &[f64], b: &[f64]) -> f64 {
        relative_residual(&self.matrix, u, b)
    }
}

/// Advances one θ-step: `state_n → state_{n+1}`.
pub fn advance_theta(
    disc: &SpaceDiscretization,
    stepper: &ThetaStepper,
    state: &[f64],
    left: BoundaryCondition,
    right: BoundaryCondition,
) -> Result<Vec<f64>> {
    if state.len() != disc.n_dofs() {
        return Err(DpgError::DimensionMismatch(format!(
            "state of length {} for {} dofs",
            state.len(),
            disc.n_dofs()
        )));
    }
    if state.iter().any(|v| !v.is_finite()) {
        return Err(DpgError::NonFinite("state before time step".into()));
    }
    let c = disc.boundary_constraints(left, right)?;
    stepper.solve(disc, state, &c, None)
}

/// Result of a policy solve for one step.
#[derive(Debug, Clone)]
pub struct StepSolve {
    pub state: Vec<f64>,
    pub iterations: Option<usize>,
    pub residual: Option<f64>,
}

/// How a single step is solved and post-processed.
pub trait StepPolicy {
    /// Solves the reduced step system. The default is the linear solve.
    fn solve(
        &mut self,
        stepper: &ThetaStepper,
        rhs: &[f64],
        constraints: &Constraints,
        _previous: &[f64],
    ) -> Result<StepSolve> {
        Ok(StepSolve {
            state: solve_factored(stepper.matrix(), stepper.factor(), rhs, constraints)?,
            iterations: None,
            residual: None,
        })
    }

    /// Modifies the state reached at time to maturity `tau`.
    fn after_step(&mut self, _tau: f64, _state: &mut [f64]) -> Result<()> {
        Ok(())
    }
}

/// Plain linear stepping.
pub struct LinearPolicy;

impl StepPolicy for LinearPolicy {}

/// Per-step source loads in the test space, indexed by step.
pub type SourceFn<'a> = dyn Fn(usize, f64) -> Result<Vec<DVector<f64>>> + 'a;

/// Marches `initial` across `grid`.
///
/// `boundary(τ)` gives the boundary data at the end of each step. Steppers
/// are cached per distinct `Δτ` (relative tolerance `1e-9`) and per
/// constraint structure.
pub fn march(
    disc: &SpaceDiscretization,
    grid: &TimeGrid,
    theta: f64,
    initial: Vec<f64>,
    boundary: &dyn Fn(f64) -> Result<(BoundaryCondition, BoundaryCondition)>,
    source: Option<&SourceFn<'_>>,
    policy: &mut dyn StepPolicy,
) -> Result<TransientSolution> {
    if initial.len() != disc.n_dofs() {
        return Err(DpgError::DimensionMismatch(format!(
            "initial state of length {} for {} dofs",
            initial.len(),
            disc.n_dofs()
        )));
    }
    let mut cache: Vec<(f64, Vec<usize>, ThetaStepper)> = Vec::new();
    let mut states = Vec::with_capacity(grid.steps() + 1);
    let mut diagnostics = Vec::with_capacity(grid.steps());
    states.push(initial);
    for k in 0..grid.steps() {
        let dt = grid.dt(k);
        let tau = grid.taus()[k + 1];
        let (left, right) = boundary(tau)?;
        let constraints = disc.boundary_constraints(left, right)?;
        let structure: Vec<usize> = constraints.items().iter().map(|c| c.dof).collect();
        let idx = match cache
            .iter()
            .position(|(d, s, _)| (d - dt).abs() <= 1e-9 * dt && *s == structure)
        {
            Some(i) => i,
            None => {
                cache.push((dt, structure, ThetaStepper::new(disc, dt, theta, &constraints)?));
                cache.len() - 1
            }
        };
        let stepper = &cache[idx].2;
        let src = match source {
            Some(f) => Some(f(k, stepper.dt())?),
            None => None,
        };
        let prev = states.last().unwrap();
        let rhs = stepper.reduced_rhs(disc, prev, &constraints, src.as_deref())?;
        let solved = policy.solve(stepper, &rhs, &constraints, prev)?;
        let mut next = solved.state;
        if next.iter().any(|v| !v.is_finite()) {
            return Err(DpgError::NonFinite(format!("state at tau = {tau}")));
        }
        let eta = stepper.indicator(disc, prev, &next, src.as_deref())?.global;
        policy.after_step(tau, &mut next)?;
        diagnostics.push(StepDiagnostics {
            tau,
            eta,
            lcp_iterations: solved.iterations,
            lcp_residual: solved.residual,
        });
        states.push(next);
    }
    Ok(TransientSolution {
        taus: grid.taus().to_vec(),
        states,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dpg::{Coefficients, Formulation};
    use crate::mesh::Mesh1D;

    #[test]
    fn uniform_grid() {
        let g = TimeGrid::uniform(1.0, 4).unwrap();
        assert_eq!(g.steps(), 4);
        assert!((g.dt(2) - 0.25).abs() < 1e-15);
        assert!(TimeGrid::uniform(1.0, 0).is_err());
    }

    #[test]
    fn breakpoints_are_hit() {
        let g = TimeGrid::with_breakpoints(0.5, &[0.1, 0.25, 0.5], 0.04).unwrap();
        for b in [0.1, 0.25, 0.5] {
            assert!(g.taus().iter().any(|&t| (t - b).abs() < 1e-15));
        }
        for k in 0..g.steps() {
            assert!(g.dt(k) <= 0.04 + 1e-12);
        }
    }

    #[test]
    fn zero_operator_preserves_state() {
        for f in [Formulation::Primal, Formulation::Ultraweak] {
            let disc = SpaceDiscretization::new(
                Mesh1D::uniform(0.0, 1.0, 6).unwrap(),
                f,
                1,
                2,
                Coefficients::zero(),
            )
            .unwrap();
            let u0 = disc.interpolate_state(|x| (3.0 * x).sin(), |x, _| 3.0 * (3.0 * x).cos());
            let c = disc
                .boundary_constraints(
                    BoundaryCondition::Dirichlet(0.0),
                    BoundaryCondition::Dirichlet(3f64.sin()),
                )
                .unwrap();
            let st = ThetaStepper::new(&disc, 0.1, 1.0, &c).unwrap();
            let u1 = st.solve(&disc, &u0, &c, None).unwrap();
            for (a, b) in disc.nodal_values(&u0).iter().zip(disc.nodal_values(&u1)) {
                assert!((a - b).abs() < 1e-9, "{a} vs {b}");
            }
        }
    }
}
