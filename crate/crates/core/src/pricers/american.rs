use super::{formulation_tag, initial_state, run, spot_price, FreeBoundary, GridParams, PricingResult};
use crate::banded::SymBand;
use crate::dpg::global::solve_factored;
use crate::dpg::{Coefficients, Constraints};
use crate::error::{DpgError, Result};
use crate::mesh::Mesh1D;
use crate::models::{raw_payoff, Contract, MarketParams, OptionStyle, StateTransform};
use crate::timestepper::{StepPolicy, StepSolve, ThetaStepper, TimeGrid};
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// How the early-exercise constraint is enforced each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmericanMode {
    /// Discrete complementarity problem solved every step.
    Lcp,
    /// Unconstrained solve followed by `u = max(h, u)`.
    FreeBoundaryProjection,
}

/// Algorithm for the per-step complementarity problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LcpSolver {
    /// Primal-dual active set; falls back to PSOR if the set keeps changing.
    ActiveSet,
    /// Projected SOR only.
    Psor,
}

/// LCP solver settings. `omega` and `max_iterations` drive PSOR, the active
/// set is capped at `max_active_set_iterations` sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LcpConfig {
    pub solver: LcpSolver,
    pub omega: f64,
    pub max_iterations: usize,
    pub max_active_set_iterations: usize,
    pub tolerance: f64,
}

impl Default for LcpConfig {
    fn default() -> Self {
        Self {
            solver: LcpSolver::ActiveSet,
            omega: 1.4,
            max_iterations: 10_000,
            max_active_set_iterations: 50,
            tolerance: 1e-10,
        }
    }
}

impl LcpConfig {
    pub fn psor() -> Self {
        Self {
            solver: LcpSolver::Psor,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0 && self.omega < 2.0) {
            return Err(DpgError::InvalidParameter(format!(
                "PSOR relaxation must lie in (0, 2), got {}",
                self.omega
            )));
        }
        if self.max_iterations == 0 || !(self.tolerance > 0.0) {
            return Err(DpgError::InvalidParameter(
                "LCP iteration limit and tolerance must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Obstacle on the reduced unknowns: `Some(ψ)` where the value is bounded.
struct Obstacle {
    bound: Vec<Option<f64>>,
}

impl Obstacle {
    fn project(&self, u: &mut [f64]) {
        for (v, b) in u.iter_mut().zip(&self.bound) {
            if let Some(psi) = b {
                *v = v.max(*psi);
            }
        }
    }
}

/// `‖min(z - ψ, K z - F)‖∞ / max(1, ‖F‖∞)`, with `|K z - F|` on
/// unbounded rows.
fn complementarity_residual(k: &SymBand, z: &[f64], f: &[f64], obstacle: &Obstacle) -> f64 {
    let scale = f.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let mut worst = 0.0f64;
    for i in 0..z.len() {
        let r = k.row_dot(i, z) - f[i];
        let c = match obstacle.bound[i] {
            Some(psi) => (z[i] - psi).min(r).abs(),
            None => r.abs(),
        };
        worst = worst.max(c);
    }
    worst / scale
}

fn psor(
    k: &SymBand,
    f: &[f64],
    obstacle: &Obstacle,
    z: &mut [f64],
    cfg: &LcpConfig,
) -> Result<(usize, f64)> {
    let n = z.len();
    for it in 1..=cfg.max_iterations {
        for i in 0..n {
            let d = k.diag(i);
            let r = f[i] - k.row_dot(i, z);
            let mut v = z[i] + cfg.omega * r / d;
            if let Some(psi) = obstacle.bound[i] {
                v = v.max(psi);
            }
            z[i] = v;
        }
        if it % 5 == 0 || it == cfg.max_iterations {
            let res = complementarity_residual(k, z, f, obstacle);
            if res <= cfg.tolerance {
                return Ok((it, res));
            }
            if it == cfg.max_iterations {
                return Err(DpgError::LcpNotConverged {
                    iterations: it,
                    residual: res,
                });
            }
        }
    }
    unreachable!("loop returns on the last iteration")
}

/// Primal-dual active set: rows with `λ_i - K_ii (z_i - ψ_i) > 0` are pinned
/// to the obstacle and the rest solved exactly, until the set repeats.
/// Returns the number of linear solves, or `None` if the set never settled.
fn active_set(
    k: &SymBand,
    f: &[f64],
    obstacle: &Obstacle,
    z: &mut [f64],
    max_iterations: usize,
) -> Result<Option<usize>> {
    let n = z.len();
    let mut active = vec![false; n];
    for it in 1..=max_iterations {
        let mut changed = false;
        for i in 0..n {
            let a = match obstacle.bound[i] {
                Some(psi) => {
                    let lambda = k.row_dot(i, z) - f[i];
                    lambda - k.diag(i) * (z[i] - psi) > 0.0
                }
                None => false,
            };
            changed |= a != active[i];
            active[i] = a;
        }
        if !changed && it > 1 {
            return Ok(Some(it - 1));
        }
        let pinned: Vec<f64> = (0..n)
            .map(|i| if active[i] { obstacle.bound[i].unwrap() } else { 0.0 })
            .collect();
        let shift = k.mul_vec(&pinned);
        let mut reduced = k.clone();
        let mut rhs: Vec<f64> = (0..n).map(|i| f[i] - shift[i]).collect();
        for i in 0..n {
            if active[i] {
                reduced.isolate(i, 1.0);
                rhs[i] = pinned[i];
            }
        }
        let sol = reduced.cholesky()?.solve(&rhs);
        z.copy_from_slice(&sol);
    }
    Ok(None)
}

struct AmericanPolicy {
    mode: AmericanMode,
    lcp: LcpConfig,
    /// Payoff at every value DOF.
    psi: Vec<(usize, f64)>,
}

impl AmericanPolicy {
    fn obstacle(&self, n: usize, constraints: &Constraints) -> Obstacle {
        let mut bound = vec![None; n];
        for &(g, psi) in &self.psi {
            if constraints.get(g).is_none() {
                bound[g] = Some(psi);
            }
        }
        Obstacle { bound }
    }
}

impl StepPolicy for AmericanPolicy {
    fn solve(
        &mut self,
        stepper: &ThetaStepper,
        rhs: &[f64],
        constraints: &Constraints,
        _previous: &[f64],
    ) -> Result<StepSolve> {
        let obstacle = self.obstacle(rhs.len(), constraints);
        match self.mode {
            AmericanMode::FreeBoundaryProjection => {
                let mut u = solve_factored(stepper.matrix(), stepper.factor(), rhs, constraints)?;
                obstacle.project(&mut u);
                Ok(StepSolve {
                    state: u,
                    iterations: None,
                    residual: None,
                })
            }
            AmericanMode::Lcp => {
                // warm start from the projected unconstrained solution
                let mut z = stepper.factor().solve(rhs);
                obstacle.project(&mut z);
                let k = stepper.matrix();
                let settled = match self.lcp.solver {
                    LcpSolver::ActiveSet => {
                        active_set(k, rhs, &obstacle, &mut z, self.lcp.max_active_set_iterations)?
                    }
                    LcpSolver::Psor => None,
                };
                let (iterations, residual) = match settled {
                    Some(its) => {
                        let res = complementarity_residual(k, &z, rhs, &obstacle);
                        if res <= self.lcp.tolerance {
                            (its, res)
                        } else {
                            psor(k, rhs, &obstacle, &mut z, &self.lcp)?
                        }
                    }
                    None => psor(k, rhs, &obstacle, &mut z, &self.lcp)?,
                };
                constraints.apply(&mut z);
                Ok(StepSolve {
                    state: z,
                    iterations: Some(iterations),
                    residual: Some(residual),
                })
            }
        }
    }
}

/// American put with the early-exercise constraint on every value DOF.
pub fn price_american(
    contract: &Contract,
    market: &MarketParams,
    grid: &GridParams,
    mode: AmericanMode,
    lcp: LcpConfig,
) -> Result<(PricingResult, FreeBoundary)> {
    let start = Instant::now();
    if contract.style != OptionStyle::American {
        return Err(DpgError::InvalidParameter(format!(
            "price_american called with {:?}",
            contract.style
        )));
    }
    contract.validate(market)?;
    grid.validate()?;
    lcp.validate()?;
    let mut transform = StateTransform::for_contract(contract);
    transform.evaluation_point(market.spot)?;
    let mesh = Mesh1D::uniform_through(
        transform.x_min,
        transform.x_max,
        grid.n_elements,
        contract.strike.ln(),
    )?;
    transform.x_min = mesh.x_min();
    transform.x_max = mesh.x_max();
    let disc = grid.space(mesh, Coefficients::black_scholes(market.rate, market.vol))?;
    let times = TimeGrid::uniform(market.maturity, grid.n_steps)?;
    let u0 = initial_state(&disc, contract, false);
    let psi = disc
        .value_locations()
        .into_iter()
        .map(|(g, x)| (g, raw_payoff(contract, x)))
        .collect();
    let mut policy = AmericanPolicy { mode, lcp, psi };
    let solution = run(
        contract,
        market,
        &transform,
        &disc,
        &times,
        grid.theta,
        u0,
        &mut policy,
    )?;
    let price = spot_price(&disc, &transform, solution.final_state(), market.spot)?;
    let tag = match mode {
        AmericanMode::Lcp => "lcp",
        AmericanMode::FreeBoundaryProjection => "projection",
    };
    let result = PricingResult {
        method: format!("american/{}/{tag}", formulation_tag(grid.formulation)),
        contract: contract.clone(),
        market: *market,
        transform,
        disc,
        theta: grid.theta,
        solution,
        price,
        knocked_out: false,
        wall_time: start.elapsed(),
    };
    let boundary = extract_exercise_boundary(&result)?;
    Ok((result, boundary))
}

/// Exercise boundary from the contact set `|u - h| ≤ 1e-7 max(1, K)`.
///
/// For a put, `S_f(τ)` is the price of the largest mesh node in the money
/// where the solution touches the payoff.
pub fn extract_exercise_boundary(result: &PricingResult) -> Result<FreeBoundary> {
    if result.contract.style != OptionStyle::American {
        return Err(DpgError::InvalidParameter(
            "exercise boundary requires an American result".into(),
        ));
    }
    let tol = 1e-7 * result.contract.strike.max(1.0);
    let nodes = result.nodes();
    let payoff: Vec<f64> = nodes
        .iter()
        .map(|&x| raw_payoff(&result.contract, x))
        .collect();
    let mut boundary = Vec::with_capacity(result.steps() + 1);
    let mut exercise = Vec::with_capacity(result.steps() + 1);
    for step in 0..=result.steps() {
        let u = result.nodal_values(step);
        let contact: Vec<bool> = u
            .iter()
            .zip(&payoff)
            .map(|(&v, &h)| h > 0.0 && (v - h).abs() <= tol)
            .collect();
        let last = contact.iter().rposition(|&c| c).ok_or_else(|| {
            DpgError::NoContact(format!(
                "no node touches the payoff at tau = {}",
                result.solution.taus[step]
            ))
        })?;
        boundary.push(nodes[last].exp());
        exercise.push(contact);
    }
    Ok(FreeBoundary {
        taus: result.solution.taus.clone(),
        boundary,
        exercise,
        tolerance: tol,
    })
}
