use super::{formulation_tag, initial_state, spot_price, GridParams, PricingResult};
use crate::dpg::{Coefficients, WindowMask};
use crate::error::{DpgError, Result};
use crate::mesh::Mesh1D;
use crate::models::{
    boundary_values, Barriers, Contract, MarketParams, OptionStyle, StateTransform, LOG_DOMAIN,
};
use crate::timestepper::{march, LinearPolicy, StepPolicy, TimeGrid};
use std::time::Instant;

/// Margin in log price kept on each side of the barrier window, or `None`
/// when the full log domain is needed.
///
/// With the maturity monitored, the solution is zero outside the window at
/// every mask, so only diffusion over the longest gap between masks can
/// reach past it: `10 σ √gap + |r - σ²/2| gap` leaves `e^{-50}` of it.
pub fn barrier_margin(contract: &Contract, market: &MarketParams) -> Option<f64> {
    let schedule = contract.schedule();
    let t = market.maturity;
    if schedule.is_empty() || !schedule.monitors_maturity(t) {
        return None;
    }
    let taus = schedule.taus(t);
    let gap = taus.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    let gap = if gap > 0.0 { gap } else { t };
    let drift = (market.rate - 0.5 * market.vol * market.vol).abs();
    Some(10.0 * market.vol * gap.sqrt() + drift * gap)
}

/// Uniform mesh with `ln S_L` and `ln S_U` on nodes.
///
/// The domain is `[-6, 6]`, or the window widened by `margin` on each side
/// (clipped to `[-6, 6]`). The window gets `m` cells in proportion to its
/// share of the domain, at least one, and whole cells of the same width are
/// added on both sides.
pub fn barrier_mesh(barriers: &Barriers, n_elements: usize, margin: Option<f64>) -> Result<Mesh1D> {
    let lo = barriers.lower.ln().max(LOG_DOMAIN.0);
    let hi = barriers.upper.ln().min(LOG_DOMAIN.1);
    if !(lo < hi) {
        return Err(DpgError::InvalidParameter(
            "barrier window does not intersect the log domain".into(),
        ));
    }
    let (d_min, d_max) = match margin {
        Some(m) => ((lo - m).max(LOG_DOMAIN.0), (hi + m).min(LOG_DOMAIN.1)),
        None => LOG_DOMAIN,
    };
    let width = hi - lo;
    let m = ((n_elements as f64 * width / (d_max - d_min)).round() as usize).max(1);
    let h = width / m as f64;
    let cells = |len: f64| ((len / h) - 1e-9).ceil().max(0.0) as usize;
    let left = cells(lo - d_min);
    let right = cells(d_max - hi);
    Mesh1D::uniform(
        lo - left as f64 * h,
        hi + right as f64 * h,
        left + m + right,
    )
}

/// Applies the knockout mask at monitoring instants.
struct KnockoutPolicy {
    taus: Vec<f64>,
    mask: WindowMask,
    tol: f64,
}

impl StepPolicy for KnockoutPolicy {
    fn after_step(&mut self, tau: f64, state: &mut [f64]) -> Result<()> {
        if self.taus.iter().any(|&t| (t - tau).abs() <= self.tol) {
            self.mask.apply(state);
        }
        Ok(())
    }
}

/// Discretely monitored double-barrier option.
///
/// The time grid is split at every monitoring instant; between instants
/// the plain equation is marched, and at each instant the solution is set to
/// zero outside `[S_L, S_U]`. An empty schedule gives the European price.
pub fn price_barrier(
    contract: &Contract,
    market: &MarketParams,
    grid: &GridParams,
) -> Result<PricingResult> {
    let start = Instant::now();
    if contract.style != OptionStyle::DoubleBarrier {
        return Err(DpgError::InvalidParameter(format!(
            "price_barrier called with {:?}",
            contract.style
        )));
    }
    contract.validate(market)?;
    grid.validate()?;
    let barriers = contract.barriers.expect("validated");
    let schedule = contract.schedule();
    let t = market.maturity;

    // without monitoring the problem is the vanilla one, on the vanilla mesh
    let mesh = if schedule.is_empty() {
        Mesh1D::uniform_through(LOG_DOMAIN.0, LOG_DOMAIN.1, grid.n_elements, contract.strike.ln())?
    } else {
        barrier_mesh(&barriers, grid.n_elements, barrier_margin(contract, market))?
    };
    let mut transform = StateTransform::for_contract(contract);
    transform.x_min = mesh.x_min();
    transform.x_max = mesh.x_max();
    transform.evaluation_point(market.spot)?;
    let disc = grid.space(mesh, Coefficients::black_scholes(market.rate, market.vol))?;

    let tol = 1e-12 * t.max(1.0);
    let mask_taus: Vec<f64> = schedule.taus(t).into_iter().filter(|&x| x > tol).collect();
    let times = TimeGrid::with_breakpoints(t, &mask_taus, t / grid.n_steps as f64)?;
    let terminal_mask = schedule.monitors_maturity(t);
    let mask = disc.window_mask(barriers.lower.ln(), barriers.upper.ln());
    let mut u0 = initial_state(&disc, contract, terminal_mask);
    if terminal_mask {
        mask.apply(&mut u0);
    }

    let solution = if mask_taus.is_empty() {
        let boundary = |tau: f64| boundary_values(contract, market, &transform, tau);
        march(&disc, &times, grid.theta, u0, &boundary, None, &mut LinearPolicy)?
    } else {
        let mut policy = KnockoutPolicy {
            taus: mask_taus,
            mask,
            tol: 1e-9 * t,
        };
        let boundary = |tau: f64| boundary_values(contract, market, &transform, tau);
        march(&disc, &times, grid.theta, u0, &boundary, None, &mut policy)?
    };

    let knocked_out = !schedule.is_empty() && !barriers.contains(market.spot);
    let price = if knocked_out {
        0.0
    } else {
        spot_price(&disc, &transform, solution.final_state(), market.spot)?
    };
    Ok(PricingResult {
        method: format!("barrier/{}", formulation_tag(grid.formulation)),
        contract: contract.clone(),
        market: *market,
        transform,
        disc,
        theta: grid.theta,
        solution,
        price,
        knocked_out,
        wall_time: start.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn barriers_are_mesh_nodes() {
        let b = Barriers::new(95.0, 125.0);
        for margin in [None, Some(0.2)] {
            let mesh = barrier_mesh(&b, 256, margin).unwrap();
            match margin {
                None => assert!(mesh.x_min() <= -6.0 && mesh.x_max() >= 6.0),
                Some(d) => {
                    assert!(mesh.x_min() <= 95f64.ln() - d && mesh.x_max() >= 125f64.ln() + d);
                    assert!(mesh.x_max() - mesh.x_min() < 1.0);
                }
            }
            for s in [95.0f64, 125.0] {
                assert!(mesh.node_at(s.ln(), 1e-10).is_some());
            }
        }
    }

    #[test]
    fn margin_needs_monitored_maturity() {
        let m = MarketParams::new(0.1, 0.2, 100.0, 0.5);
        let b = Barriers::new(95.0, 125.0);
        let daily = Contract::double_barrier(
            crate::models::OptionRight::Call,
            100.0,
            b,
            crate::models::MonitoringSchedule::daily(0.5),
        );
        let d = barrier_margin(&daily, &m).unwrap();
        assert!((d - (10.0 * 0.2 * 0.002f64.sqrt() + 0.08 * 0.002)).abs() < 1e-12);
        let early = Contract::double_barrier(
            crate::models::OptionRight::Call,
            100.0,
            b,
            crate::models::MonitoringSchedule::new(vec![0.1, 0.2]),
        );
        assert!(barrier_margin(&early, &m).is_none());
    }
}
