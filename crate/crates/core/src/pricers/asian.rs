use super::{formulation_tag, initial_state, run, spot_price, GridParams, PricingResult};
use crate::dpg::Coefficients;
use crate::error::{DpgError, Result};
use crate::mesh::Mesh1D;
use crate::models::{Contract, MarketParams, OptionStyle, StateTransform};
use crate::timestepper::{LinearPolicy, TimeGrid};
use std::time::Instant;

/// Fixed-strike arithmetic Asian call through the reduced equation on
/// `[-2, 2]`; the price is `S0 U(T, K/S0)`.
pub fn price_asian(
    contract: &Contract,
    market: &MarketParams,
    grid: &GridParams,
) -> Result<PricingResult> {
    let start = Instant::now();
    if contract.style != OptionStyle::AsianFixedStrike {
        return Err(DpgError::InvalidParameter(format!(
            "price_asian called with {:?}",
            contract.style
        )));
    }
    contract.validate(market)?;
    grid.validate()?;
    let transform = StateTransform::for_contract(contract);
    transform.evaluation_point(market.spot)?;
    let mesh = Mesh1D::uniform(transform.x_min, transform.x_max, grid.n_elements)?;
    let coeffs = Coefficients::asian_reduced(market.rate, market.vol, market.maturity);
    let disc = grid.space(mesh, coeffs)?;
    let times = TimeGrid::uniform(market.maturity, grid.n_steps)?;
    let u0 = initial_state(&disc, contract, false);
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
        method: format!("asian/{}", formulation_tag(grid.formulation)),
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
