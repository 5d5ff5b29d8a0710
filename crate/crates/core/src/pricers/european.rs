use super::{formulation_tag, initial_state, run, spot_price, GridParams, PricingResult};
use crate::dpg::Coefficients;
use crate::error::{DpgError, Result};
use crate::mesh::Mesh1D;
use crate::models::{Contract, MarketParams, OptionStyle, StateTransform};
use crate::timestepper::{LinearPolicy, TimeGrid};
use std::time::Instant;

/// European call or put in log price on `[-6, 6]`.
pub fn price_european(
    contract: &Contract,
    market: &MarketParams,
    grid: &GridParams,
) -> Result<PricingResult> {
    let start = Instant::now();
    if contract.style != OptionStyle::European {
        return Err(DpgError::InvalidParameter(format!(
            "price_european called with {:?}",
            contract.style
        )));
    }
    contract.validate(market)?;
    grid.validate()?;
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
    let method = format!("european/{}", formulation_tag(grid.formulation));
    let solution = run(
        contract,
        market,
        &transform,
        &disc,
        &times,
        grid.theta,
        u0,
        &mut LinearPolicy,
    )?;
    let price = spot_price(&disc, &transform, solution.final_state(), market.spot)?;
    Ok(PricingResult {
        method,
        contract: contract.clone(),
        market: *market,
        transform,
        disc,
        theta: grid.theta,
        solution,
        price,
        knocked_out: false,
        wall_time: start.elapsed(),
    })
}
