use crate::dpg::SpaceDiscretization;
use crate::error::Result;
use crate::models::{Contract, MarketParams, StateTransform};
use crate::timestepper::TransientSolution;
use std::time::Duration;

/// Output of a pricing run.
#[derive(Debug, Clone)]
pub struct PricingResult {
    /// Short tag such as `european/primal` or `american/ultraweak/lcp`.
    pub method: String,
    pub contract: Contract,
    pub market: MarketParams,
    pub transform: StateTransform,
    pub disc: SpaceDiscretization,
    pub theta: f64,
    pub solution: TransientSolution,
    /// Price at the spot; 0 when the spot is already knocked out.
    pub price: f64,
    pub knocked_out: bool,
    pub wall_time: Duration,
}

impl PricingResult {
    pub fn nodes(&self) -> &[f64] {
        self.disc.mesh().nodes()
    }

    /// Values at the mesh nodes at time level `step`.
    pub fn nodal_values(&self, step: usize) -> Vec<f64> {
        self.disc.nodal_values(&self.solution.states[step])
    }

    pub fn final_nodal_values(&self) -> Vec<f64> {
        self.disc.nodal_values(self.solution.final_state())
    }

    pub fn steps(&self) -> usize {
        self.solution.states.len() - 1
    }

    /// PDE solution at state `x` and time level `step`.
    pub fn value_at_state(&self, x: f64, step: usize) -> Result<f64> {
        self.disc.value_at(&self.solution.states[step], x)
    }

    /// Price for another spot, read off the same final solution.
    pub fn price_at(&self, spot: f64) -> Result<f64> {
        let x = self.transform.evaluation_point(spot)?;
        Ok(self.transform.value_scaling(spot) * self.disc.value_at(self.solution.final_state(), x)?)
    }

    pub fn max_eta(&self) -> f64 {
        self.solution.max_eta()
    }

    /// Largest complementarity residual over all steps (LCP runs only).
    pub fn max_lcp_residual(&self) -> Option<f64> {
        self.solution
            .diagnostics
            .iter()
            .filter_map(|d| d.lcp_residual)
            .reduce(f64::max)
    }

    pub fn total_lcp_iterations(&self) -> Option<usize> {
        let it: Vec<usize> = self
            .solution
            .diagnostics
            .iter()
            .filter_map(|d| d.lcp_iterations)
            .collect();
        (!it.is_empty()).then(|| it.iter().sum())
    }
}

/// Exercise boundary `S_f(τ_n)` and the contact set on the mesh nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct FreeBoundary {
    pub taus: Vec<f64>,
    pub boundary: Vec<f64>,
    /// `exercise[n][k]`: node `k` is in the exercise region at step `n`.
    pub exercise: Vec<Vec<bool>>,
    pub tolerance: f64,
}

impl FreeBoundary {
    /// Whether `S_f` never increases by more than one cell in price terms.
    pub fn is_non_increasing(&self, cell: f64) -> bool {
        self.boundary.windows(2).all(|w| w[1].ln() <= w[0].ln() + cell)
    }
}
