//! Contracts, market data, state transforms, payoffs and boundary data.
//!
//! Vanilla, American and barrier problems live in log price `x = ln S` on
//! `[-6, 6]`. The fixed-strike Asian call uses the reduced variable
//! `x = (K - (1/T)∫₀ᵗ S) / S` on `[-2, 2]` and is priced as `S0 U(T, K/S0)`.

use crate::error::{DpgError, Result};
use serde::{Deserialize, Serialize};

/// Log-price truncation used for every non-Asian contract.
pub const LOG_DOMAIN: (f64, f64) = (-6.0, 6.0);
/// Truncation of the reduced Asian variable.
pub const ASIAN_DOMAIN: (f64, f64) = (-2.0, 2.0);

/// Flat Black-Scholes market.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketParams {
    pub rate: f64,
    pub vol: f64,
    pub spot: f64,
    pub maturity: f64,
}

impl MarketParams {
    pub fn new(rate: f64, vol: f64, spot: f64, maturity: f64) -> Self {
        Self {
            rate,
            vol,
            spot,
            maturity,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.rate, self.vol, self.spot, self.maturity]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(DpgError::InvalidParameter("non-finite market parameter".into()));
        }
        if self.vol <= 0.0 {
            return Err(DpgError::InvalidParameter(format!("volatility {}", self.vol)));
        }
        if self.maturity <= 0.0 {
            return Err(DpgError::InvalidParameter(format!("maturity {}", self.maturity)));
        }
        if self.spot <= 0.0 {
            return Err(DpgError::InvalidParameter(format!("spot {}", self.spot)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptionRight {
    Call,
    Put,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptionStyle {
    European,
    American,
    AsianFixedStrike,
    DoubleBarrier,
}

/// Knock-out window `[lower, upper]` in price units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Barriers {
    pub lower: f64,
    pub upper: f64,
}

impl Barriers {
    pub fn new(lower: f64, upper: f64) -> Self {
        Self { lower, upper }
    }

    /// Closed window test with a small tolerance in log space so that
    /// mesh nodes snapped onto `ln S_L`, `ln S_U` stay alive.
    pub fn contains_log(&self, x: f64) -> bool {
        let tol = 1e-9;
        x >= self.lower.ln() - tol && x <= self.upper.ln() + tol
    }

    pub fn contains(&self, s: f64) -> bool {
        s > 0.0 && self.contains_log(s.ln())
    }
}

/// Monitoring dates in calendar time, strictly increasing in `(0, T]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitoringSchedule {
    pub dates: Vec<f64>,
}

impl MonitoringSchedule {
    pub fn new(dates: Vec<f64>) -> Self {
        Self { dates }
    }

    pub fn empty() -> Self {
        Self { dates: Vec::new() }
    }

    /// `t_i = i T / n`, `i = 1..=n`.
    pub fn uniform(maturity: f64, n: usize) -> Self {
        Self {
            dates: (1..=n).map(|i| maturity * i as f64 / n as f64).collect(),
        }
    }

    /// 250 dates per maturity, i.e. `Δt = 0.004` for `T = 1`.
    pub fn daily(maturity: f64) -> Self {
        Self::uniform(maturity, 250)
    }

    /// 50 dates per maturity, i.e. `Δt = 0.02` for `T = 1`.
    pub fn weekly(maturity: f64) -> Self {
        Self::uniform(maturity, 50)
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn validate(&self, maturity: f64) -> Result<()> {
        let tol = 1e-12 * maturity;
        for w in self.dates.windows(2) {
            if !(w[1] > w[0]) {
                return Err(DpgError::InvalidParameter(
                    "monitoring dates must be strictly increasing".into(),
                ));
            }
        }
        if let (Some(&first), Some(&last)) = (self.dates.first(), self.dates.last()) {
            if first < 0.0 || last > maturity + tol {
                return Err(DpgError::InvalidParameter(format!(
                    "monitoring dates outside [0, {maturity}]"
                )));
            }
        }
        Ok(())
    }

    /// Monitoring instants in time to maturity `τ_i = T - t_i`, ascending.
    pub fn taus(&self, maturity: f64) -> Vec<f64> {
        let mut t: Vec<f64> = self
            .dates
            .iter()
            .map(|&d| (maturity - d).max(0.0))
            .collect();
        t.reverse();
        t
    }

    /// Whether the maturity itself is monitored.
    pub fn monitors_maturity(&self, maturity: f64) -> bool {
        self.dates
            .last()
            .is_some_and(|&d| (d - maturity).abs() <= 1e-12 * maturity.max(1.0))
    }
}

/// Option contract.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contract {
    pub style: OptionStyle,
    pub right: OptionRight,
    pub strike: f64,
    #[serde(default)]
    pub barriers: Option<Barriers>,
    #[serde(default)]
    pub monitoring: Option<MonitoringSchedule>,
}

impl Contract {
    pub fn european(right: OptionRight, strike: f64) -> Self {
        Self {
            style: OptionStyle::European,
            right,
            strike,
            barriers: None,
            monitoring: None,
        }
    }

    pub fn american_put(strike: f64) -> Self {
        Self {
            style: OptionStyle::American,
            ..Self::european(OptionRight::Put, strike)
        }
    }

    pub fn asian_call(strike: f64) -> Self {
        Self {
            style: OptionStyle::AsianFixedStrike,
            ..Self::european(OptionRight::Call, strike)
        }
    }

    pub fn double_barrier(
        right: OptionRight,
        strike: f64,
        barriers: Barriers,
        monitoring: MonitoringSchedule,
    ) -> Self {
        Self {
            style: OptionStyle::DoubleBarrier,
            right,
            strike,
            barriers: Some(barriers),
            monitoring: Some(monitoring),
        }
    }

    /// Monitoring schedule, empty when absent.
    pub fn schedule(&self) -> MonitoringSchedule {
        self.monitoring.clone().unwrap_or_else(MonitoringSchedule::empty)
    }

    pub fn validate(&self, market: &MarketParams) -> Result<()> {
        market.validate()?;
        if !(self.strike > 0.0 && self.strike.is_finite()) {
            return Err(DpgError::InvalidParameter(format!("strike {}", self.strike)));
        }
        match self.style {
            OptionStyle::DoubleBarrier => {
                let b = self.barriers.ok_or_else(|| {
                    DpgError::InvalidParameter("double barrier without barriers".into())
                })?;
                if !(b.lower > 0.0 && b.lower < b.upper && b.upper.is_finite()) {
                    return Err(DpgError::InvalidParameter(format!(
                        "barriers must satisfy 0 < S_L < S_U, got [{}, {}]",
                        b.lower, b.upper
                    )));
                }
                self.schedule().validate(market.maturity)?;
            }
            OptionStyle::AsianFixedStrike => {
                if self.right != OptionRight::Call {
                    return Err(DpgError::Unsupported(
                        "only fixed-strike Asian calls are supported".into(),
                    ));
                }
            }
            OptionStyle::American => {
                if self.right != OptionRight::Put {
                    return Err(DpgError::Unsupported(
                        "American calls without dividends equal European calls; only puts are priced"
                            .into(),
                    ));
                }
            }
            OptionStyle::European => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformKind {
    LogPrice,
    AsianReduced,
}

/// Map between asset price and PDE state variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateTransform {
    pub kind: TransformKind,
    pub x_min: f64,
    pub x_max: f64,
    /// Strike, used by the Asian map `x = K / S`.
    pub strike: f64,
}

impl StateTransform {
    pub fn for_contract(contract: &Contract) -> Self {
        let (kind, (x_min, x_max)) = match contract.style {
            OptionStyle::AsianFixedStrike => (TransformKind::AsianReduced, ASIAN_DOMAIN),
            _ => (TransformKind::LogPrice, LOG_DOMAIN),
        };
        Self {
            kind,
            x_min,
            x_max,
            strike: contract.strike,
        }
    }

    /// State coordinate of the asset price `s` at inception.
    pub fn to_state(&self, s: f64) -> Result<f64> {
        if !(s > 0.0) {
            return Err(DpgError::InvalidParameter(format!("price {s} must be positive")));
        }
        Ok(match self.kind {
            TransformKind::LogPrice => s.ln(),
            TransformKind::AsianReduced => self.strike / s,
        })
    }

    /// Asset price of the state coordinate `x`.
    pub fn to_price(&self, x: f64) -> f64 {
        match self.kind {
            TransformKind::LogPrice => x.exp(),
            TransformKind::AsianReduced => self.strike / x,
        }
    }

    /// State coordinate of `s`, rejecting points outside the truncated domain.
    pub fn evaluation_point(&self, s: f64) -> Result<f64> {
        let x = self.to_state(s)?;
        if !(x > self.x_min && x < self.x_max) {
            return Err(DpgError::OutsideDomain(x));
        }
        Ok(x)
    }

    /// Multiplier from the PDE solution to a price: `S0` for the Asian
    /// reduction, 1 otherwise.
    pub fn value_scaling(&self, spot: f64) -> f64 {
        match self.kind {
            TransformKind::LogPrice => 1.0,
            TransformKind::AsianReduced => spot,
        }
    }
}

/// Payoff at state `x`; barrier payoffs are masked to the window.
pub fn payoff(contract: &Contract, x: f64) -> f64 {
    let v = raw_payoff(contract, x);
    match (contract.style, contract.barriers) {
        (OptionStyle::DoubleBarrier, Some(b)) if !b.contains_log(x) => 0.0,
        _ => v,
    }
}

/// Payoff without any barrier mask.
pub fn raw_payoff(contract: &Contract, x: f64) -> f64 {
    match contract.style {
        OptionStyle::AsianFixedStrike => (-x).max(0.0),
        _ => match contract.right {
            OptionRight::Call => (x.exp() - contract.strike).max(0.0),
            OptionRight::Put => (contract.strike - x.exp()).max(0.0),
        },
    }
}

/// Terminal value with the barrier mask applied iff the maturity is monitored.
pub fn terminal_value(contract: &Contract, maturity: f64, x: f64) -> f64 {
    let v = raw_payoff(contract, x);
    if let (OptionStyle::DoubleBarrier, Some(b)) = (contract.style, contract.barriers) {
        if contract.schedule().monitors_maturity(maturity) && !b.contains_log(x) {
            return 0.0;
        }
    }
    v
}

/// One-sided `x`-derivative of the unmasked payoff, taken from the left
/// (`from_right = false`) or from the right.
pub fn payoff_slope(contract: &Contract, x: f64, from_right: bool) -> f64 {
    let beyond = |kink: f64| if from_right { x >= kink } else { x > kink };
    match contract.style {
        OptionStyle::AsianFixedStrike => {
            if beyond(0.0) {
                0.0
            } else {
                -1.0
            }
        }
        _ => {
            let k = contract.strike.ln();
            match contract.right {
                OptionRight::Call if beyond(k) => x.exp(),
                OptionRight::Put if !beyond(k) => -x.exp(),
                _ => 0.0,
            }
        }
    }
}

/// Boundary condition at one end of the domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BoundaryCondition {
    Dirichlet(f64),
    /// `u_xx = 0`: the solution is locally linear.
    ZeroCurvature,
}

impl BoundaryCondition {
    pub fn value(&self) -> Option<f64> {
        match self {
            BoundaryCondition::Dirichlet(v) => Some(*v),
            BoundaryCondition::ZeroCurvature => None,
        }
    }
}

/// Left and right boundary data at time to maturity `tau`.
pub fn boundary_values(
    contract: &Contract,
    market: &MarketParams,
    transform: &StateTransform,
    tau: f64,
) -> Result<(BoundaryCondition, BoundaryCondition)> {
    let t = market.maturity;
    if !(tau >= -1e-12 * t && tau <= t * (1.0 + 1e-12)) {
        return Err(DpgError::TimeOutOfRange { tau, maturity: t });
    }
    let tau = tau.clamp(0.0, t);
    let k = contract.strike;
    let disc = (-market.rate * tau).exp();
    let (lo, hi) = (transform.x_min, transform.x_max);
    use BoundaryCondition::*;
    Ok(match contract.style {
        OptionStyle::AsianFixedStrike => (ZeroCurvature, Dirichlet(0.0)),
        OptionStyle::American => (Dirichlet((k - lo.exp()).max(0.0)), Dirichlet(0.0)),
        OptionStyle::DoubleBarrier if knocked_out_by(contract, t, tau) => {
            (Dirichlet(0.0), Dirichlet(0.0))
        }
        _ => match contract.right {
            OptionRight::Call => (Dirichlet(0.0), Dirichlet(hi.exp() - k * disc)),
            OptionRight::Put => (Dirichlet(k * disc - lo.exp()), Dirichlet(0.0)),
        },
    })
}

/// Whether some monitoring instant lies in `[0, tau]` (time to maturity).
fn knocked_out_by(contract: &Contract, maturity: f64, tau: f64) -> bool {
    let tol = 1e-12 * maturity.max(1.0);
    contract
        .schedule()
        .dates
        .iter()
        .any(|&d| maturity - d <= tau + tol)
}

/// Zeroes `values[i]` wherever `xs[i]` is outside the barrier window.
pub fn apply_knockout(barriers: &Barriers, xs: &[f64], values: &mut [f64]) {
    for (v, &x) in values.iter_mut().zip(xs) {
        if !barriers.contains_log(x) {
            *v = 0.0;
        }
    }
}
