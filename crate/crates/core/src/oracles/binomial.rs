//! Cox-Ross-Rubinstein binomial tree.

use crate::error::{DpgError, Result};
use crate::models::OptionRight;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExerciseStyle {
    European,
    American,
}

/// CRR price with `u = e^{σ√Δt}`, `d = 1/u`, `p = (e^{rΔt} - d)/(u - d)`.
#[allow(clippy::too_many_arguments)]
pub fn binomial_price(
    s: f64,
    k: f64,
    r: f64,
    sigma: f64,
    t: f64,
    n_steps: usize,
    style: ExerciseStyle,
    right: OptionRight,
) -> Result<f64> {
    if n_steps == 0 {
        return Err(DpgError::InvalidParameter("binomial tree needs N >= 1".into()));
    }
    if !(s > 0.0 && k > 0.0 && sigma > 0.0 && t > 0.0) {
        return Err(DpgError::InvalidParameter(
            "binomial tree needs positive S, K, sigma and T".into(),
        ));
    }
    let dt = t / n_steps as f64;
    let u = (sigma * dt.sqrt()).exp();
    let d = 1.0 / u;
    let growth = (r * dt).exp();
    let p = (growth - d) / (u - d);
    if !(p > 0.0 && p < 1.0) {
        return Err(DpgError::InvalidParameter(format!(
            "risk-neutral probability {p} outside (0, 1); use more steps"
        )));
    }
    let disc = 1.0 / growth;
    let intrinsic = |spot: f64| match right {
        OptionRight::Call => (spot - k).max(0.0),
        OptionRight::Put => (k - spot).max(0.0),
    };
    // spot[m] = S u^(m - N) for every lattice level m in 0..=2N
    let n = n_steps;
    let spot: Vec<f64> = (0..=2 * n)
        .map(|m| s * (sigma * dt.sqrt() * (m as f64 - n as f64)).exp())
        .collect();
    let mut v: Vec<f64> = (0..=n).map(|j| intrinsic(spot[2 * j])).collect();
    for step in (0..n).rev() {
        for j in 0..=step {
            let cont = disc * (p * v[j + 1] + (1.0 - p) * v[j]);
            v[j] = match style {
                ExerciseStyle::European => cont,
                ExerciseStyle::American => cont.max(intrinsic(spot[2 * j + n - step])),
            };
        }
    }
    Ok(v[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_step_by_hand() {
        let u = 0.2f64.exp();
        let d = 1.0 / u;
        let p = (1.0 - d) / (u - d);
        let expect = p * (100.0 * u - 100.0);
        let v = binomial_price(100.0, 100.0, 0.0, 0.2, 1.0, 1, ExerciseStyle::European, OptionRight::Call)
            .unwrap();
        assert!((v - expect).abs() < 1e-12);
        assert!((v - 9.966).abs() < 1e-3);
    }

    #[test]
    fn invalid_probability() {
        // r Δt larger than σ √Δt
        let r = binomial_price(100.0, 100.0, 0.5, 0.01, 1.0, 1, ExerciseStyle::European, OptionRight::Call);
        assert!(r.is_err());
    }
}
