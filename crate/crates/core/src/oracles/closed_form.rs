//! Black-Scholes closed forms.

use crate::models::OptionRight;
use libm::erfc;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// Standard normal distribution function through `erfc`, accurate in both tails.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

pub fn d1_d2(s: f64, k: f64, r: f64, sigma: f64, t: f64) -> (f64, f64) {
    let sd = sigma * t.sqrt();
    let d1 = ((s / k).ln() + (r + 0.5 * sigma * sigma) * t) / sd;
    (d1, d1 - sd)
}

/// European price. `σ = 0` gives the discounted intrinsic forward value.
pub fn bs_price(s: f64, k: f64, r: f64, sigma: f64, t: f64, right: OptionRight) -> f64 {
    let df = (-r * t).exp();
    if sigma <= 0.0 || t <= 0.0 {
        return match right {
            OptionRight::Call => (s - k * df).max(0.0),
            OptionRight::Put => (k * df - s).max(0.0),
        };
    }
    let (d1, d2) = d1_d2(s, k, r, sigma, t);
    match right {
        OptionRight::Call => s * norm_cdf(d1) - k * df * norm_cdf(d2),
        OptionRight::Put => k * df * norm_cdf(-d2) - s * norm_cdf(-d1),
    }
}

pub fn bs_delta(s: f64, k: f64, r: f64, sigma: f64, t: f64, right: OptionRight) -> f64 {
    let (d1, _) = d1_d2(s, k, r, sigma, t);
    match right {
        OptionRight::Call => norm_cdf(d1),
        OptionRight::Put => norm_cdf(d1) - 1.0,
    }
}

pub fn bs_gamma(s: f64, k: f64, r: f64, sigma: f64, t: f64) -> f64 {
    let (d1, _) = d1_d2(s, k, r, sigma, t);
    norm_pdf(d1) / (s * sigma * t.sqrt())
}

pub fn bs_vega(s: f64, k: f64, r: f64, sigma: f64, t: f64) -> f64 {
    let (d1, _) = d1_d2(s, k, r, sigma, t);
    s * norm_pdf(d1) * t.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atm_d1_d2() {
        let (d1, d2) = d1_d2(100.0, 100.0, 0.05, 0.2, 1.0);
        assert!((d1 - 0.35).abs() < 1e-15);
        assert!((d2 - 0.15).abs() < 1e-15);
        let c = bs_price(100.0, 100.0, 0.05, 0.2, 1.0, OptionRight::Call);
        assert!((c - 10.450583572185565).abs() < 1e-10);
    }

    #[test]
    fn zero_vol_limit() {
        let c = bs_price(120.0, 100.0, 0.0, 0.0, 1.0, OptionRight::Call);
        assert_eq!(c, 20.0);
        let c = bs_price(120.0, 100.0, 0.0, 1e-9, 1.0, OptionRight::Call);
        assert!((c - 20.0).abs() < 1e-9);
    }

    #[test]
    fn cdf_reference_values() {
        assert!((norm_cdf(0.0) - 0.5).abs() < 1e-16);
        assert!((norm_cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1e-14);
        assert!((norm_cdf(-5.0) / 2.866_515_718_791_946e-7 - 1.0).abs() < 1e-12);
    }
}
