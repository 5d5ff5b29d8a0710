//! The five subcommands, each producing one table.

use crate::config::{Axis, CompareCell, ContractConfig, Greek, RunConfig};
use crate::report::{Table, Value};
use dpg_core::greeks::{
    gamma_from_solution, solve_sensitivity_pde, GreekField, SensitivityParameter, SensitivitySpec,
};
use dpg_core::models::{MarketParams, OptionRight};
use dpg_core::oracles::{binomial_price, bs_price, mc_asian, mc_barrier, ExerciseStyle, McConfig};
use dpg_core::pricers::{
    price_american, price_asian, price_barrier, price_european, GridParams, PricingResult,
};
use dpg_core::{DpgError, Result};
use rayon::prelude::*;

pub fn price_contract(
    contract: &ContractConfig,
    market: &MarketParams,
    grid: &GridParams,
) -> Result<PricingResult> {
    let c = contract.contract(market.maturity);
    match contract {
        ContractConfig::European { .. } => price_european(&c, market, grid),
        ContractConfig::American { mode, lcp, .. } => {
            price_american(&c, market, grid, *mode, *lcp).map(|(r, _)| r)
        }
        ContractConfig::Asian { .. } => price_asian(&c, market, grid),
        ContractConfig::DoubleBarrier { .. } => price_barrier(&c, market, grid),
    }
}

fn sensitivity(r: &PricingResult, parameter: SensitivityParameter) -> Result<dpg_core::greeks::SensitivityResult> {
    let spec = SensitivitySpec::black_scholes(parameter, &r.market);
    solve_sensitivity_pde(&r.contract, &r.market, &spec, r)
}

fn greek_column(g: Greek) -> &'static str {
    match g {
        Greek::Delta => "delta",
        Greek::Gamma => "gamma",
        Greek::Vega => "vega",
        Greek::Rho => "rho",
    }
}

fn parameter(g: Greek) -> Option<SensitivityParameter> {
    match g {
        Greek::Vega => Some(SensitivityParameter::Vol),
        Greek::Rho => Some(SensitivityParameter::Rate),
        _ => None,
    }
}

pub fn price(cfg: &RunConfig) -> Result<Table> {
    let market = cfg.market.params();
    let grid = cfg.discretization.grid();
    let r = price_contract(&cfg.contract, &market, &grid)?;

    let mut columns = vec![
        "method", "spot", "strike", "rate", "vol", "maturity", "n_elements", "n_steps", "order",
        "theta", "price",
    ];
    columns.extend(cfg.greeks.iter().map(|&g| greek_column(g)));
    columns.extend(["eta_max", "lcp_max_residual", "lcp_iterations"]);

    let mut row: Vec<Value> = vec![
        r.method.as_str().into(),
        market.spot.into(),
        r.contract.strike.into(),
        market.rate.into(),
        market.vol.into(),
        market.maturity.into(),
        grid.n_elements.into(),
        grid.n_steps.into(),
        grid.order.into(),
        grid.theta.into(),
        r.price.into(),
    ];
    let field: Option<GreekField> = if cfg
        .greeks
        .iter()
        .any(|g| matches!(g, Greek::Delta | Greek::Gamma))
    {
        Some(gamma_from_solution(&r)?)
    } else {
        None
    };
    for &g in &cfg.greeks {
        let v = match (g, &field, parameter(g)) {
            (Greek::Delta, Some(f), _) => f.delta_at_spot,
            (Greek::Gamma, Some(f), _) => f.gamma_at_spot,
            (_, _, Some(p)) => sensitivity(&r, p)?.value_at_spot,
            _ => unreachable!("field computed for delta and gamma"),
        };
        row.push(v.into());
    }
    row.push(r.max_eta().into());
    row.push(r.max_lcp_residual().into());
    row.push(r.total_lcp_iterations().into());

    let mut t = Table::new(columns);
    t.push(row);
    Ok(t)
}

pub fn greeks(cfg: &RunConfig) -> Result<Table> {
    let market = cfg.market.params();
    let r = price_contract(&cfg.contract, &market, &cfg.discretization.grid())?;
    let field = gamma_from_solution(&r)?;
    let values = r.final_nodal_values();
    let extra: Vec<(Greek, Vec<f64>)> = cfg
        .greeks
        .iter()
        .filter_map(|&g| parameter(g).map(|p| (g, p)))
        .map(|(g, p)| {
            let s = sensitivity(&r, p)?;
            Ok((g, r.disc.nodal_values(s.solution.final_state())))
        })
        .collect::<Result<_>>()?;

    let mut columns = vec!["x", "s", "value", "delta", "gamma"];
    columns.extend(extra.iter().map(|(g, _)| greek_column(*g)));
    let mut t = Table::new(columns);
    for (k, &x) in r.nodes().iter().enumerate() {
        let mut row: Vec<Value> = vec![
            x.into(),
            field.spots[k].into(),
            values[k].into(),
            field.delta[k].into(),
            field.gamma[k].into(),
        ];
        row.extend(extra.iter().map(|(_, v)| Value::Num(v[k])));
        t.push(row);
    }
    Ok(t)
}

/// `(‖u - v‖₂ / ‖v‖₂, ‖u - v‖∞ / ‖v‖∞)` over the nodes.
fn relative_errors(u: &[f64], v: &[f64]) -> (f64, f64) {
    let (mut n2, mut d2, mut ni, mut di) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for (a, b) in u.iter().zip(v) {
        n2 += (a - b).powi(2);
        d2 += b * b;
        ni = ni.max((a - b).abs());
        di = di.max(b.abs());
    }
    ((n2 / d2).sqrt(), ni / di)
}

fn order(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}

pub fn converge(cfg: &RunConfig) -> Result<Table> {
    let market = cfg.market.params();
    let base = cfg.discretization.grid();
    let axis = cfg.converge.axis;
    let refine = |i: usize| {
        let mut g = base;
        match axis {
            Axis::Space => g.n_elements <<= i,
            Axis::Time => g.n_steps <<= i,
        }
        g
    };
    let closed_form = match cfg.contract {
        ContractConfig::European { right, strike } => Some((right, strike)),
        _ => None,
    };
    // without a closed form the next finer level serves as reference
    let n_runs = cfg.converge.levels + usize::from(closed_form.is_none());
    let runs: Vec<PricingResult> = (0..n_runs)
        .into_par_iter()
        .map(|i| price_contract(&cfg.contract, &market, &refine(i)))
        .collect::<Result<_>>()?;
    let reference = closed_form.is_none().then(|| &runs[n_runs - 1]);

    let mut t = Table::new([
        "level", "n_elements", "n_steps", "h", "dt", "l2_error", "linf_error", "l2_order",
        "linf_order", "reference",
    ]);
    let mut previous: Option<(f64, f64)> = None;
    for (i, r) in runs.iter().take(cfg.converge.levels).enumerate() {
        let exact: Vec<f64> = match (closed_form, reference) {
            (Some((right, strike)), _) => r
                .nodes()
                .iter()
                .map(|x| bs_price(x.exp(), strike, market.rate, market.vol, market.maturity, right))
                .collect(),
            (None, Some(reference)) => r
                .nodes()
                .iter()
                .map(|&x| reference.value_at_state(x, reference.steps()))
                .collect::<Result<_>>()?,
            (None, None) => unreachable!(),
        };
        let (l2, linf) = relative_errors(&r.final_nodal_values(), &exact);
        let g = refine(i);
        t.push(vec![
            i.into(),
            g.n_elements.into(),
            g.n_steps.into(),
            r.disc.mesh().h().into(),
            (market.maturity / g.n_steps as f64).into(),
            l2.into(),
            linf.into(),
            previous.map(|(p2, _)| order(p2, l2)).into(),
            previous.map(|(_, pi)| order(pi, linf)).into(),
            if closed_form.is_some() { "closed_form" } else { "finer_grid" }.into(),
        ]);
        previous = Some((l2, linf));
    }
    Ok(t)
}

struct Oracle {
    name: &'static str,
    price: f64,
    std_error: Option<f64>,
}

fn oracle(cfg: &RunConfig, cell: &CompareCell, market: &MarketParams) -> Result<Oracle> {
    if let Some(price) = cell.reference {
        return Ok(Oracle {
            name: "reference",
            price,
            std_error: None,
        });
    }
    let c = &cfg.compare;
    let m = market;
    let k = cell.strike;
    Ok(match &cfg.contract {
        ContractConfig::European { right, .. } => Oracle {
            name: "closed_form",
            price: bs_price(m.spot, k, m.rate, m.vol, m.maturity, *right),
            std_error: None,
        },
        ContractConfig::American { .. } => Oracle {
            name: "binomial",
            price: binomial_price(
                m.spot,
                k,
                m.rate,
                m.vol,
                m.maturity,
                c.binomial_steps,
                ExerciseStyle::American,
                OptionRight::Put,
            )?,
            std_error: None,
        },
        ContractConfig::Asian { .. } => {
            let e = mc_asian(m, k, &McConfig::new(c.mc_paths, c.mc_steps, cfg.seed))?;
            Oracle {
                name: "monte_carlo",
                price: e.price,
                std_error: Some(e.std_error),
            }
        }
        ContractConfig::DoubleBarrier { right, .. } => {
            let contract = cfg.contract.with_strike(k).contract(m.maturity);
            let barriers = contract.barriers.ok_or_else(|| {
                DpgError::InvalidParameter("double barrier without barriers".into())
            })?;
            let e = mc_barrier(
                m,
                k,
                *right,
                &barriers,
                &contract.schedule(),
                &McConfig::new(c.mc_paths, 1, cfg.seed),
            )?;
            Oracle {
                name: "monte_carlo",
                price: e.price,
                std_error: Some(e.std_error),
            }
        }
    })
}

pub fn compare(cfg: &RunConfig) -> Result<Table> {
    let grid = cfg.discretization.grid();
    let cells = cfg.compare.all_cells();
    let rows: Vec<(CompareCell, f64, Oracle)> = cells
        .par_iter()
        .map(|cell| {
            let mut market = cfg.market.params();
            market.vol = cell.vol;
            let contract = cfg.contract.with_strike(cell.strike);
            let dpg = price_contract(&contract, &market, &grid)?.price;
            Ok((*cell, dpg, oracle(cfg, cell, &market)?))
        })
        .collect::<Result<_>>()?;

    let tol = cfg.compare.tolerance;
    let mut columns = vec![
        "vol", "strike", "dpg_price", "oracle", "oracle_price", "std_error", "deviation",
    ];
    if tol.is_some() {
        columns.push("within_tolerance");
    }
    let mut t = Table::new(columns);
    for (cell, dpg, o) in rows {
        let dev = dpg - o.price;
        let mut row: Vec<Value> = vec![
            cell.vol.into(),
            cell.strike.into(),
            dpg.into(),
            o.name.into(),
            o.price.into(),
            o.std_error.into(),
            dev.into(),
        ];
        if let Some(tol) = tol {
            row.push((dev.abs() <= tol).into());
        }
        t.push(row);
    }
    Ok(t)
}

pub fn surface(cfg: &RunConfig) -> Result<Table> {
    let market = cfg.market.params();
    let r = price_contract(&cfg.contract, &market, &cfg.discretization.grid())?;
    let mut t = Table::new(["tau", "x", "u"]);
    for (k, &tau) in r.solution.taus.iter().enumerate() {
        for (&x, u) in r.nodes().iter().zip(r.nodal_values(k)) {
            t.push(vec![tau.into(), x.into(), u.into()]);
        }
    }
    Ok(t)
}
