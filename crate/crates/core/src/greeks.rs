//! Delta and Gamma from a pricing result, and the parameter-sensitivity PDE.
//!
//! In log price `x = ln S` the chain rule gives `Δ = u_x / S` and
//! `Γ = (u_xx - u_x) / S²`.

use crate::dpg::{form_blocks, Coefficients, Formulation, Poly, SpaceDiscretization};
use crate::dpg::global::gather;
use crate::error::{DpgError, Result};
use crate::models::{
    Contract, MarketParams, OptionRight, OptionStyle, TransformKind,
};
use crate::pricers::PricingResult;
use crate::timestepper::{march, LinearPolicy, TimeGrid, TransientSolution};
use crate::models::BoundaryCondition;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Delta and Gamma on the mesh nodes of the final time level.
#[derive(Debug, Clone, PartialEq)]
pub struct GreekField {
    pub spots: Vec<f64>,
    pub delta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub delta_at_spot: f64,
    pub gamma_at_spot: f64,
    /// Exercise-boundary price where Gamma jumps, if any (American only).
    pub gamma_jump: Option<f64>,
}

impl GreekField {
    /// Total variation of Delta over nodes with `lo <= S <= hi`.
    pub fn delta_variation(&self, lo: f64, hi: f64) -> f64 {
        let d: Vec<f64> = self
            .spots
            .iter()
            .zip(&self.delta)
            .filter(|(s, _)| **s >= lo && **s <= hi)
            .map(|(_, d)| *d)
            .collect();
        d.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
    }
}

fn require_log_price(result: &PricingResult) -> Result<()> {
    if result.transform.kind != TransformKind::LogPrice {
        return Err(DpgError::Unsupported(
            "Greeks are implemented for log-price contracts".into(),
        ));
    }
    Ok(())
}

/// Element-wise `(ϑ, ϑ')` at reference point `xi` of element `e`.
fn theta_pair(disc: &SpaceDiscretization, u: &[f64], e: usize, xi: f64) -> (f64, f64) {
    let map = disc.map();
    let (v, d) = disc.trial().eval(xi).expect("reference point");
    let jac = disc.mesh().element(e).jacobian();
    let mut th = 0.0;
    let mut dth = 0.0;
    for j in 0..v.len() {
        let g = u[map.gradient(e, j).unwrap()];
        th += v[j] * g;
        dth += d[j] * g / jac;
    }
    (th, dth)
}

/// Nodal `(u_x, u_xx)` of an ultraweak state: `ϑ` averaged over the two
/// elements that meet at a node, then differenced for `u_xx`. The broken
/// `ϑ` keeps a jump at the strike, so one-sided values are not used.
fn ultraweak_nodal_derivatives(disc: &SpaceDiscretization, u: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = disc.mesh().n_elements();
    let mut ux = vec![0.0; n + 1];
    let mut count = vec![0.0; n + 1];
    for e in 0..n {
        for (k, xi) in [(e, -1.0), (e + 1, 1.0)] {
            ux[k] += theta_pair(disc, u, e, xi).0;
            count[k] += 1.0;
        }
    }
    for k in 0..=n {
        ux[k] /= count[k];
    }
    let uxx = first_difference(disc.mesh().nodes(), &ux);
    (ux, uxx)
}

fn first_difference(nodes: &[f64], values: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    let mut d = vec![0.0; n];
    for k in 1..n - 1 {
        d[k] = (values[k + 1] - values[k - 1]) / (nodes[k + 1] - nodes[k - 1]);
    }
    if n > 1 {
        d[0] = (values[1] - values[0]) / (nodes[1] - nodes[0]);
        d[n - 1] = (values[n - 1] - values[n - 2]) / (nodes[n - 1] - nodes[n - 2]);
    }
    d
}

/// Nodal `(u_x, u_xx)` by central differences of nodal values.
fn difference_nodal_derivatives(nodes: &[f64], values: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = nodes.len();
    let h = nodes[1] - nodes[0];
    let mut ux = vec![0.0; n];
    let mut uxx = vec![0.0; n];
    for k in 1..n - 1 {
        ux[k] = (values[k + 1] - values[k - 1]) / (2.0 * h);
        uxx[k] = (values[k + 1] - 2.0 * values[k] + values[k - 1]) / (h * h);
    }
    if n > 2 {
        ux[0] = (values[1] - values[0]) / h;
        ux[n - 1] = (values[n - 1] - values[n - 2]) / h;
        uxx[0] = uxx[1];
        uxx[n - 1] = uxx[n - 2];
    }
    (ux, uxx)
}

fn interpolate_nodal(nodes: &[f64], values: &[f64], x: f64) -> f64 {
    let h = nodes[1] - nodes[0];
    let t = ((x - nodes[0]) / h).clamp(0.0, (nodes.len() - 1) as f64);
    let k = (t.floor() as usize).min(nodes.len() - 2);
    let w = t - k as f64;
    (1.0 - w) * values[k] + w * values[k + 1]
}

/// Delta read directly off the ultraweak gradient unknown `ϑ = u_x`.
pub fn delta_from_ultraweak(result: &PricingResult) -> Result<GreekField> {
    if result.disc.formulation() != Formulation::Ultraweak {
        return Err(DpgError::InvalidParameter(
            "implicit Delta needs an ultraweak result".into(),
        ));
    }
    derivatives(result)
}

/// Delta and Gamma from the final solution of any formulation.
pub fn gamma_from_solution(result: &PricingResult) -> Result<GreekField> {
    if result.disc.order() == 0 && result.disc.formulation() == Formulation::Ultraweak {
        return Err(DpgError::InvalidParameter(
            "Gamma needs a trial order of at least 1".into(),
        ));
    }
    derivatives(result)
}

/// Alias of [`gamma_from_solution`] for callers that only need Delta.
pub fn delta_from_solution(result: &PricingResult) -> Result<GreekField> {
    derivatives(result)
}

fn derivatives(result: &PricingResult) -> Result<GreekField> {
    require_log_price(result)?;
    let disc = &result.disc;
    let nodes = disc.mesh().nodes();
    let u = result.solution.final_state();
    let (ux, uxx) = match disc.formulation() {
        Formulation::Ultraweak => ultraweak_nodal_derivatives(disc, u),
        Formulation::Primal => difference_nodal_derivatives(nodes, &disc.nodal_values(u)),
    };
    let spots: Vec<f64> = nodes.iter().map(|x| x.exp()).collect();
    let delta: Vec<f64> = ux.iter().zip(&spots).map(|(d, s)| d / s).collect();
    let gamma: Vec<f64> = ux
        .iter()
        .zip(&uxx)
        .zip(&spots)
        .map(|((d, dd), s)| (dd - d) / (s * s))
        .collect();
    let s0 = result.market.spot;
    let x0 = s0.ln();
    if !(x0 >= nodes[0] && x0 <= nodes[nodes.len() - 1]) {
        return Err(DpgError::OutsideDomain(x0));
    }
    let ux0 = interpolate_nodal(nodes, &ux, x0);
    let uxx0 = interpolate_nodal(nodes, &uxx, x0);
    let gamma_jump = if result.contract.style == OptionStyle::American {
        detect_gamma_jump(result, &spots, &gamma)
    } else {
        None
    };
    Ok(GreekField {
        delta_at_spot: ux0 / s0,
        gamma_at_spot: (uxx0 - ux0) / (s0 * s0),
        spots,
        delta,
        gamma,
        gamma_jump,
    })
}

/// Gamma is zero where the put is exercised (`u = K - S`) and positive in
/// the continuation region; flag a jump of more than half the larger value
/// across the final exercise boundary.
fn detect_gamma_jump(result: &PricingResult, spots: &[f64], gamma: &[f64]) -> Option<f64> {
    let fb = crate::pricers::extract_exercise_boundary(result).ok()?;
    let sf = *fb.boundary.last()?;
    let k = spots.iter().position(|&s| s >= sf * (1.0 - 1e-12))?;
    if k < 2 || k + 2 >= spots.len() {
        return None;
    }
    let (left, right) = (gamma[k - 2], gamma[k + 2]);
    let jump = (right - left).abs();
    (jump > 0.5 * left.abs().max(right.abs()) && jump > 0.0).then_some(sf)
}

/// Parameter of a sensitivity solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SensitivityParameter {
    Spot,
    Rate,
    Vol,
}

/// Derivatives of `(a, b, c)` with respect to one parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivitySpec {
    pub parameter: SensitivityParameter,
    pub d_diffusion: Poly,
    pub d_convection: Poly,
    pub d_reaction: Poly,
}

impl SensitivitySpec {
    /// Black-Scholes coefficient derivatives in log price:
    /// `∂σ(a, b, c) = (σ, σ, 0)`, `∂r(a, b, c) = (0, -1, 1)`, spot none.
    pub fn black_scholes(parameter: SensitivityParameter, market: &MarketParams) -> Self {
        let s = market.vol;
        let (a, b, c) = match parameter {
            SensitivityParameter::Vol => (s, s, 0.0),
            SensitivityParameter::Rate => (0.0, -1.0, 1.0),
            SensitivityParameter::Spot => (0.0, 0.0, 0.0),
        };
        Self {
            parameter,
            d_diffusion: Poly::constant(a),
            d_convection: Poly::constant(b),
            d_reaction: Poly::constant(c),
        }
    }

    fn coefficients(&self) -> Coefficients {
        Coefficients::new(
            self.d_diffusion.clone(),
            self.d_convection.clone(),
            self.d_reaction.clone(),
        )
    }

    pub fn is_zero(&self) -> bool {
        self.coefficients().is_zero()
    }
}

/// `u_α` on the base grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityResult {
    pub parameter: SensitivityParameter,
    pub solution: TransientSolution,
    pub value_at_spot: f64,
}

/// Solves `w_τ + L w = -L_α u` with the base solution `u`, starting from
/// the parameter derivative of the payoff (zero for `r` and `σ`).
///
/// Flux unknowns carry `a u_x`, so the operator `L_α` sees them scaled by
/// `a_α / a`.
pub fn solve_sensitivity_pde(
    contract: &Contract,
    market: &MarketParams,
    spec: &SensitivitySpec,
    base: &PricingResult,
) -> Result<SensitivityResult> {
    if contract.style != OptionStyle::European || base.contract != *contract {
        return Err(DpgError::Unsupported(
            "the sensitivity PDE is implemented for the European base problem".into(),
        ));
    }
    if base.market != *market {
        return Err(DpgError::InvalidParameter(
            "base result was computed with different market parameters".into(),
        ));
    }
    let expected = SensitivitySpec::black_scholes(spec.parameter, market);
    let same = |p: &Poly, q: &Poly| (p.eval(0.0) - q.eval(0.0)).abs() <= 1e-12 && p.degree() == 0;
    if !(same(&spec.d_diffusion, &expected.d_diffusion)
        && same(&spec.d_convection, &expected.d_convection)
        && same(&spec.d_reaction, &expected.d_reaction))
    {
        return Err(DpgError::InvalidParameter(format!(
            "coefficient derivatives do not match the {:?} derivative of the base coefficients",
            spec.parameter
        )));
    }

    let disc = &base.disc;
    let theta = base.theta;
    let taus = base.solution.taus.clone();
    let grid = TimeGrid::uniform(market.maturity, taus.len() - 1)?;
    let zero = vec![0.0; disc.n_dofs()];
    if spec.is_zero() {
        let n = taus.len();
        return Ok(SensitivityResult {
            parameter: spec.parameter,
            solution: TransientSolution {
                taus: taus.clone(),
                states: vec![zero; n],
                diagnostics: Vec::new(),
            },
            value_at_spot: 0.0,
        });
    }

    let a = disc.coefficients().diffusion.eval(0.0);
    let flux_scale = spec.d_diffusion.eval(0.0) / a;
    let coeffs = spec.coefficients();
    let layout_flux: Vec<usize> = {
        let l = crate::dpg::LocalLayout::new(disc.formulation(), disc.trial(), disc.test());
        vec![
            l.flux_col(crate::dpg::Side::Left),
            l.flux_col(crate::dpg::Side::Right),
        ]
    };
    let ops: Vec<DMatrix<f64>> = disc
        .mesh()
        .elements()
        .map(|el| {
            let mut op =
                form_blocks(&el, &coeffs, disc.formulation(), disc.trial(), disc.test(), disc.quad())
                    .operator;
            for &c in &layout_flux {
                // form_blocks uses the unit flux pairing; rescale it
                let col = op.column(c) * flux_scale;
                op.set_column(c, &col);
            }
            op
        })
        .collect();
    let base_states = &base.solution.states;
    let source = |k: usize, dt: f64| -> Result<Vec<DVector<f64>>> {
        Ok(ops
            .iter()
            .enumerate()
            .map(|(e, op)| {
                let un = gather(disc.map(), e, &base_states[k]);
                let un1 = gather(disc.map(), e, &base_states[k + 1]);
                -(dt * (op * (theta * un1 + (1.0 - theta) * un)))
            })
            .collect())
    };
    let k = contract.strike;
    let boundary = |tau: f64| -> Result<(BoundaryCondition, BoundaryCondition)> {
        let d = match spec.parameter {
            SensitivityParameter::Rate => k * tau * (-market.rate * tau).exp(),
            _ => 0.0,
        };
        Ok(match contract.right {
            OptionRight::Call => (BoundaryCondition::Dirichlet(0.0), BoundaryCondition::Dirichlet(d)),
            OptionRight::Put => (BoundaryCondition::Dirichlet(-d), BoundaryCondition::Dirichlet(0.0)),
        })
    };
    let solution = march(disc, &grid, theta, zero, &boundary, Some(&source), &mut LinearPolicy)?;
    let value_at_spot = disc.value_at(solution.final_state(), market.spot.ln())?;
    Ok(SensitivityResult {
        parameter: spec.parameter,
        solution,
        value_at_spot,
    })
}
