//! European, American, Asian and double-barrier pricers.

mod american;
mod asian;
mod barrier;
mod european;
mod result;

pub use american::{extract_exercise_boundary, price_american, AmericanMode, LcpConfig, LcpSolver};
pub use asian::price_asian;
pub use barrier::{barrier_margin, barrier_mesh, price_barrier};
pub use european::price_european;
pub use result::{FreeBoundary, PricingResult};

use crate::dpg::{Coefficients, Formulation, NormWeights, SpaceDiscretization};
use crate::error::{DpgError, Result};
use crate::mesh::Mesh1D;
use crate::models::{payoff, payoff_slope, Contract, MarketParams, StateTransform};
use crate::timestepper::{march, StepPolicy, TimeGrid, TransientSolution};
use serde::{Deserialize, Serialize};

/// Spatial and temporal discretization parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridParams {
    pub formulation: Formulation,
    pub n_elements: usize,
    pub order: usize,
    pub delta_p: usize,
    pub n_steps: usize,
    pub theta: f64,
    pub norm_weights: Option<NormWeights>,
}

impl Default for GridParams {
    fn default() -> Self {
        Self {
            formulation: Formulation::Ultraweak,
            n_elements: 100,
            order: 1,
            delta_p: 2,
            n_steps: 100,
            theta: 1.0,
            norm_weights: None,
        }
    }
}

impl GridParams {
    pub fn new(formulation: Formulation, n_elements: usize, n_steps: usize) -> Self {
        Self {
            formulation,
            n_elements,
            n_steps,
            ..Self::default()
        }
    }

    pub fn with_theta(mut self, theta: f64) -> Self {
        self.theta = theta;
        self
    }

    pub fn with_order(mut self, order: usize) -> Self {
        self.order = order;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_elements == 0 || self.n_steps == 0 {
            return Err(DpgError::InvalidParameter(
                "n_elements and n_steps must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(DpgError::InvalidParameter(format!("theta {}", self.theta)));
        }
        if self.delta_p == 0 {
            return Err(DpgError::InvalidParameter("delta_p must be positive".into()));
        }
        Ok(())
    }

    pub(crate) fn space(&self, mesh: Mesh1D, coefficients: Coefficients) -> Result<SpaceDiscretization> {
        let d = SpaceDiscretization::new(mesh, self.formulation, self.order, self.delta_p, coefficients)?;
        Ok(match self.norm_weights {
            Some(w) => d.with_norm_weights(w),
            None => d,
        })
    }
}

pub(crate) fn formulation_tag(f: Formulation) -> &'static str {
    match f {
        Formulation::Primal => "primal",
        Formulation::Ultraweak => "ultraweak",
    }
}

/// Projection of the terminal payoff onto the trial space.
pub(crate) fn initial_state(disc: &SpaceDiscretization, contract: &Contract, masked: bool) -> Vec<f64> {
    let value = |x: f64| {
        if masked {
            payoff(contract, x)
        } else {
            crate::models::raw_payoff(contract, x)
        }
    };
    let slope = |x: f64, from_right: bool| {
        let inside = contract
            .barriers
            .map_or(true, |b| !masked || b.contains_log(x));
        if inside {
            payoff_slope(contract, x, from_right)
        } else {
            0.0
        }
    };
    disc.interpolate_state(value, slope)
}

/// Runs the θ-march with the contract's boundary data.
#[allow(clippy::too_many_arguments)]
pub(crate) fn run(
    contract: &Contract,
    market: &MarketParams,
    transform: &StateTransform,
    disc: &SpaceDiscretization,
    grid: &TimeGrid,
    theta: f64,
    initial: Vec<f64>,
    policy: &mut dyn StepPolicy,
) -> Result<TransientSolution> {
    let boundary = |tau: f64| crate::models::boundary_values(contract, market, transform, tau);
    march(disc, grid, theta, initial, &boundary, None, policy)
}

/// Price at the spot with the transform's scaling.
pub(crate) fn spot_price(
    disc: &SpaceDiscretization,
    transform: &StateTransform,
    state: &[f64],
    spot: f64,
) -> Result<f64> {
    let x = transform.evaluation_point(spot)?;
    Ok(transform.value_scaling(spot) * disc.value_at(state, x)?)
}
