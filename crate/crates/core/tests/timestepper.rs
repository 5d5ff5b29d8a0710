use dpg_core::dpg::{Coefficients, Formulation, Poly, SpaceDiscretization};
use dpg_core::mesh::Mesh1D;
use dpg_core::models::{BoundaryCondition, Contract, MarketParams, OptionRight};
use dpg_core::oracles::bs_price;
use dpg_core::pricers::{price_european, GridParams};
use dpg_core::timestepper::{march, LinearPolicy, TimeGrid};

fn heat(f: Formulation) -> SpaceDiscretization {
    let coeffs = Coefficients::new(Poly::constant(0.5), Poly::constant(-0.1), Poly::zero());
    SpaceDiscretization::new(Mesh1D::uniform(-1.0, 1.0, 20).unwrap(), f, 1, 2, coeffs).unwrap()
}

#[test]
fn constant_state_is_stationary() {
    for f in [Formulation::Primal, Formulation::Ultraweak] {
        for theta in [0.5, 1.0] {
            let disc = heat(f);
            let u0 = disc.interpolate_state(|_| 2.0, |_, _| 0.0);
            let grid = TimeGrid::uniform(1.0, 10).unwrap();
            let bc = |_tau: f64| Ok((BoundaryCondition::Dirichlet(2.0), BoundaryCondition::Dirichlet(2.0)));
            let sol = march(&disc, &grid, theta, u0, &bc, None, &mut LinearPolicy).unwrap();
            for v in disc.nodal_values(sol.final_state()) {
                assert!((v - 2.0).abs() < 1e-9, "{f:?} theta={theta}: {v}");
            }
        }
    }
}

#[test]
fn implicit_steps_stay_bounded_for_large_dt() {
    for f in [Formulation::Primal, Formulation::Ultraweak] {
        let disc = heat(f);
        let u0 = disc.interpolate_state(|x| (1.0 - x.abs()).max(0.0), |x, right| {
            if x < 0.0 || (x == 0.0 && !right) { 1.0 } else { -1.0 }
        });
        let grid = TimeGrid::uniform(50.0, 5).unwrap();
        let bc = |_tau: f64| Ok((BoundaryCondition::Dirichlet(0.0), BoundaryCondition::Dirichlet(0.0)));
        let sol = march(&disc, &grid, 1.0, u0, &bc, None, &mut LinearPolicy).unwrap();
        let mut last = f64::INFINITY;
        for s in &sol.states[1..] {
            let m = disc.nodal_values(s).iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(m <= 1.0 + 1e-9 && m <= last + 1e-12, "{f:?}: {m}");
            last = m;
        }
    }
}

#[test]
fn crank_nicolson_beats_backward_euler_in_time() {
    let m = MarketParams::new(0.05, 0.3, 100.0, 1.0);
    let c = Contract::european(OptionRight::Put, 100.0);
    // nodal L2 error; θ = 1/2 is not damped at the kink so S = K alone is a poor probe
    let err = |theta: f64, steps: usize| {
        let g = GridParams::new(Formulation::Ultraweak, 400, steps).with_theta(theta);
        let r = price_european(&c, &m, &g).unwrap();
        let (mut num, mut den) = (0.0, 0.0);
        for (x, u) in r.nodes().iter().zip(r.final_nodal_values()) {
            let e = bs_price(x.exp(), 100.0, 0.05, 0.3, 1.0, OptionRight::Put);
            num += (u - e).powi(2);
            den += e * e;
        }
        (num / den).sqrt()
    };
    let (be, cn) = (err(1.0, 20), err(0.5, 20));
    assert!(cn < be, "theta 0.5: {cn}, theta 1: {be}");
    let ratio = err(1.0, 10) / be;
    assert!(ratio > 1.5 && ratio < 2.6, "backward Euler halving ratio {ratio}");
}

#[test]
fn breakpoints_refine_the_grid() {
    let g = TimeGrid::with_breakpoints(1.0, &[0.25, 0.6], 0.1).unwrap();
    for b in [0.25, 0.6] {
        assert!(g.taus().iter().any(|t| (t - b).abs() < 1e-12));
    }
    assert!((0..g.steps()).all(|k| g.dt(k) <= 0.1 + 1e-12));
    assert!((g.maturity() - 1.0).abs() < 1e-15);
}
