use crate::error::{DpgError, Result};
use serde::{Deserialize, Serialize};

/// Broken variational formulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Formulation {
    /// Conforming `H^1` field plus a flux unknown on every mesh node.
    Primal,
    /// Discontinuous `(u, u_x)` fields plus value and flux traces on the skeleton.
    Ultraweak,
}

/// Polynomial in the space coordinate, lowest degree first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Poly(pub Vec<f64>);

impl Poly {
    pub fn constant(c: f64) -> Self {
        Self(vec![c])
    }

    pub fn linear(c0: f64, c1: f64) -> Self {
        Self(vec![c0, c1])
    }

    pub fn quadratic(c0: f64, c1: f64, c2: f64) -> Self {
        Self(vec![c0, c1, c2])
    }

    pub fn zero() -> Self {
        Self(vec![0.0])
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    /// Degree ignoring trailing zero coefficients.
    pub fn degree(&self) -> usize {
        self.0.iter().rposition(|&c| c != 0.0).unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0.0)
    }

    pub fn is_constant(&self) -> bool {
        self.degree() == 0
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self(self.0.iter().map(|c| c * s).collect())
    }
}

/// Coefficients of `L u = -(a u')' + b u' + c u`.
///
/// The pricing equations are written as `u_τ + L u = 0` in time to maturity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    pub diffusion: Poly,
    pub convection: Poly,
    pub reaction: Poly,
}

impl Coefficients {
    pub fn new(diffusion: Poly, convection: Poly, reaction: Poly) -> Self {
        Self {
            diffusion,
            convection,
            reaction,
        }
    }

    pub fn zero() -> Self {
        Self::new(Poly::zero(), Poly::zero(), Poly::zero())
    }

    /// Black-Scholes in log price `x = ln S`:
    /// `u_τ - σ²/2 u_xx - (r - σ²/2) u_x + r u = 0`.
    pub fn black_scholes(rate: f64, vol: f64) -> Self {
        let half_var = 0.5 * vol * vol;
        Self::new(
            Poly::constant(half_var),
            Poly::constant(-(rate - half_var)),
            Poly::constant(rate),
        )
    }

    /// Reduced fixed-strike Asian equation
    /// `u_τ - σ²x²/2 u_xx + (1/T + r x) u_x = 0` in divergence form.
    ///
    /// Moving the variable diffusion inside the derivative shifts `σ² x`
    /// into the convection term: `b(x) = 1/T + (r + σ²) x`.
    pub fn asian_reduced(rate: f64, vol: f64, maturity: f64) -> Self {
        let var = vol * vol;
        Self::new(
            Poly::quadratic(0.0, 0.0, 0.5 * var),
            Poly::linear(1.0 / maturity, rate + var),
            Poly::zero(),
        )
    }

    pub fn max_degree(&self) -> usize {
        self.diffusion
            .degree()
            .max(self.convection.degree())
            .max(self.reaction.degree())
    }

    pub fn is_zero(&self) -> bool {
        self.diffusion.is_zero() && self.convection.is_zero() && self.reaction.is_zero()
    }

    /// Checks `a(x) >= 0` on `[x_min, x_max]` by dense sampling.
    pub fn check_diffusion(&self, x_min: f64, x_max: f64) -> Result<()> {
        let n = 256;
        for i in 0..=n {
            let x = x_min + (x_max - x_min) * i as f64 / n as f64;
            let a = self.diffusion.eval(x);
            if a < -1e-14 {
                return Err(DpgError::InvalidParameter(format!(
                    "negative diffusion {a} at x = {x}"
                )));
            }
        }
        Ok(())
    }
}

/// One θ-step of `u_τ + L u = 0` in a chosen broken formulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormSpec {
    pub formulation: Formulation,
    pub coefficients: Coefficients,
    pub dt: f64,
    pub theta: f64,
}

impl FormSpec {
    pub fn new(formulation: Formulation, coefficients: Coefficients, dt: f64, theta: f64) -> Self {
        Self {
            formulation,
            coefficients,
            dt,
            theta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(DpgError::InvalidParameter(format!(
                "theta = {} outside [0, 1]",
                self.theta
            )));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(DpgError::InvalidParameter(format!("time step {}", self.dt)));
        }
        Ok(())
    }

    /// Weight of the implicit operator, `Δτ θ`.
    pub fn implicit_weight(&self) -> f64 {
        self.dt * self.theta
    }

    /// Weight of the explicit operator, `Δτ (1 - θ)`.
    pub fn explicit_weight(&self) -> f64 {
        self.dt * (1.0 - self.theta)
    }
}

/// Term weights of a test norm.
///
/// Primal: `l2 ‖v‖² + first ‖a v'‖²`.
///
/// Ultraweak: `first ‖Δτθ(a v' + b v) + ω‖² + second ‖(1 + Δτθ c) v + ω'‖²
/// + l2 (‖v‖² + ‖ω‖²)`, i.e. the adjoint graph norm of the step operator
/// plus an `L²` term that keeps it a norm element by element.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormWeights {
    pub l2: f64,
    pub first: f64,
    pub second: f64,
}

/// Inner product on the broken test space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormSpec {
    pub formulation: Formulation,
    pub weights: NormWeights,
    pub coefficients: Coefficients,
    pub dt_theta: f64,
}

impl NormSpec {
    /// Default norm for a step form.
    ///
    /// Primal: `(1/Δτ)‖v‖² + (1/Δτ²)‖a v'‖²`. Ultraweak: unit-weighted
    /// adjoint graph norm with `α = 1` on the `L²` term.
    pub fn for_form(form: &FormSpec) -> Self {
        let weights = match form.formulation {
            Formulation::Primal => NormWeights {
                l2: 1.0 / form.dt,
                first: 1.0 / (form.dt * form.dt),
                second: 0.0,
            },
            Formulation::Ultraweak => NormWeights {
                l2: 1.0,
                first: 1.0,
                second: 1.0,
            },
        };
        Self {
            formulation: form.formulation,
            weights,
            coefficients: form.coefficients.clone(),
            dt_theta: form.implicit_weight(),
        }
    }

    /// Plain `L²` inner product scaled by `weight`.
    pub fn l2(formulation: Formulation, weight: f64) -> Self {
        Self {
            formulation,
            weights: NormWeights {
                l2: weight,
                first: 0.0,
                second: 0.0,
            },
            coefficients: Coefficients::zero(),
            dt_theta: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let w = self.weights;
        if !(w.l2 > 0.0) || w.first < 0.0 || w.second < 0.0 {
            return Err(DpgError::InvalidParameter(format!(
                "norm weights must be non-negative with a positive L2 weight: {w:?}"
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poly_eval_and_degree() {
        let p = Poly::quadratic(1.0, 2.0, 3.0);
        assert_eq!(p.eval(2.0), 1.0 + 4.0 + 12.0);
        assert_eq!(p.degree(), 2);
        assert_eq!(Poly(vec![1.0, 0.0, 0.0]).degree(), 0);
        assert!(Poly::zero().is_zero());
    }

    #[test]
    fn black_scholes_coefficients() {
        let c = Coefficients::black_scholes(0.05, 0.2);
        assert!((c.diffusion.eval(0.3) - 0.02).abs() < 1e-15);
        assert!((c.convection.eval(0.3) + 0.03).abs() < 1e-15);
        assert!((c.reaction.eval(0.3) - 0.05).abs() < 1e-15);
    }

    #[test]
    fn asian_divergence_form() {
        // -(a u')' + b u' must equal -a u'' + (1/T + r x) u'
        let (r, s, t) = (0.09, 0.3, 1.0);
        let c = Coefficients::asian_reduced(r, s, t);
        for &x in &[-2.0, -0.5, 0.0, 0.7, 2.0] {
            let a_prime = s * s * x;
            let nondiv = c.convection.eval(x) - a_prime;
            assert!((nondiv - (1.0 / t + r * x)).abs() < 1e-14);
        }
        assert!(c.check_diffusion(-2.0, 2.0).is_ok());
    }

    #[test]
    fn theta_validation() {
        let f = FormSpec::new(Formulation::Primal, Coefficients::zero(), 0.1, 1.2);
        assert!(f.validate().is_err());
        let f = FormSpec::new(Formulation::Primal, Coefficients::zero(), 0.1, 0.5);
        assert!(f.validate().is_ok());
        assert!((f.implicit_weight() - 0.05).abs() < 1e-15);
    }
}
