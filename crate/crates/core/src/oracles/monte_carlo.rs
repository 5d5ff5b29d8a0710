//! Monte Carlo references with exact log-normal transitions.
//!
//! Paths are simulated in fixed-size batches, each with its own ChaCha
//! stream, so results depend only on the seed and not on thread scheduling.
//! Batch sums are Kahan-compensated and reduced in batch order.

use crate::error::{DpgError, Result};
use crate::models::{Barriers, MarketParams, MonitoringSchedule, OptionRight};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

const BATCH: usize = 8192;

/// Simulation settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub n_paths: usize,
    /// Time steps for path-dependent averages (Asian only).
    pub n_steps: usize,
    pub seed: u64,
    pub antithetic: bool,
}

impl McConfig {
    pub fn new(n_paths: usize, n_steps: usize, seed: u64) -> Self {
        Self {
            n_paths,
            n_steps,
            seed,
            antithetic: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_paths == 0 || self.n_steps == 0 {
            return Err(DpgError::InvalidParameter(
                "Monte Carlo needs at least one path and one step".into(),
            ));
        }
        if self.antithetic && self.n_paths < 2 {
            return Err(DpgError::InvalidParameter(
                "antithetic sampling needs at least two paths".into(),
            ));
        }
        Ok(())
    }
}

/// Discounted mean payoff and its standard error.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McEstimate {
    pub price: f64,
    pub std_error: f64,
    /// Independent samples (antithetic pairs count once).
    pub samples: usize,
    /// Discounted mean of every batch, in batch order.
    pub batch_means: Vec<f64>,
}

#[derive(Default, Clone, Copy)]
struct Kahan {
    sum: f64,
    comp: f64,
}

impl Kahan {
    fn add(&mut self, x: f64) {
        let y = x - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }
}

#[derive(Default, Clone, Copy)]
struct BatchStats {
    sum: Kahan,
    sum_sq: Kahan,
    count: usize,
}

/// Simulates `ln S` at `times` (ascending, `> 0`) and averages `payoff`.
fn simulate(
    market: &MarketParams,
    cfg: &McConfig,
    times: &[f64],
    payoff: impl Fn(&[f64]) -> f64 + Sync,
) -> Result<McEstimate> {
    cfg.validate()?;
    market.validate()?;
    let samples = if cfg.antithetic { cfg.n_paths / 2 } else { cfg.n_paths };
    let n_batches = samples.div_ceil(BATCH);
    let drift = market.rate - 0.5 * market.vol * market.vol;
    let steps: Vec<(f64, f64)> = times
        .iter()
        .scan(0.0, |prev, &t| {
            let dt = t - *prev;
            *prev = t;
            Some((drift * dt, market.vol * dt.sqrt()))
        })
        .collect();
    let x0 = market.spot.ln();
    let df = (-market.rate * market.maturity).exp();

    let stats: Vec<BatchStats> = (0..n_batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(b as u64);
            let count = BATCH.min(samples - b * BATCH);
            let mut path = vec![0.0; steps.len()];
            let mut anti = vec![0.0; steps.len()];
            let mut st = BatchStats::default();
            for _ in 0..count {
                let (mut x, mut xa) = (x0, x0);
                for (k, &(m, s)) in steps.iter().enumerate() {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    x += m + s * z;
                    xa += m - s * z;
                    path[k] = x.exp();
                    anti[k] = xa.exp();
                }
                let v = if cfg.antithetic {
                    0.5 * (payoff(&path) + payoff(&anti))
                } else {
                    payoff(&path)
                };
                st.sum.add(v);
                st.sum_sq.add(v * v);
            }
            st.count = count;
            st
        })
        .collect();

    let mut sum = Kahan::default();
    let mut sum_sq = Kahan::default();
    let mut n = 0usize;
    for s in &stats {
        sum.add(s.sum.sum);
        sum_sq.add(s.sum_sq.sum);
        n += s.count;
    }
    let mean = sum.sum / n as f64;
    let var = if n > 1 {
        ((sum_sq.sum - n as f64 * mean * mean) / (n as f64 - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(McEstimate {
        price: df * mean,
        std_error: df * (var / n as f64).sqrt(),
        samples: n,
        batch_means: stats
            .iter()
            .map(|s| df * s.sum.sum / s.count as f64)
            .collect(),
    })
}

fn intrinsic(right: OptionRight, s: f64, k: f64) -> f64 {
    match right {
        OptionRight::Call => (s - k).max(0.0),
        OptionRight::Put => (k - s).max(0.0),
    }
}

/// European option by direct sampling of `S_T`.
pub fn mc_european(
    market: &MarketParams,
    strike: f64,
    right: OptionRight,
    cfg: &McConfig,
) -> Result<McEstimate> {
    simulate(market, cfg, &[market.maturity], |p| {
        intrinsic(right, p[0], strike)
    })
}

/// Fixed-strike arithmetic Asian call; the time average uses the
/// trapezoidal rule on `n_steps` equal intervals.
pub fn mc_asian(market: &MarketParams, strike: f64, cfg: &McConfig) -> Result<McEstimate> {
    let n = cfg.n_steps;
    let t = market.maturity;
    let times: Vec<f64> = (1..=n).map(|i| t * i as f64 / n as f64).collect();
    let s0 = market.spot;
    simulate(market, cfg, &times, |p| {
        let mut acc = 0.5 * (s0 + p[n - 1]);
        for v in &p[..n - 1] {
            acc += v;
        }
        (acc / n as f64 - strike).max(0.0)
    })
}

/// Discretely monitored double barrier: a path is void if `S` is outside
/// `[lower, upper]` at any monitoring date. `upper` may be infinite.
pub fn mc_barrier(
    market: &MarketParams,
    strike: f64,
    right: OptionRight,
    barriers: &Barriers,
    schedule: &MonitoringSchedule,
    cfg: &McConfig,
) -> Result<McEstimate> {
    schedule.validate(market.maturity)?;
    let t = market.maturity;
    let mut times: Vec<f64> = schedule.dates.iter().copied().filter(|&d| d > 0.0).collect();
    let monitored_at_zero = schedule.dates.first().is_some_and(|&d| d <= 0.0);
    if monitored_at_zero && !(market.spot >= barriers.lower && market.spot <= barriers.upper) {
        return Ok(McEstimate {
            price: 0.0,
            std_error: 0.0,
            samples: 0,
            batch_means: Vec::new(),
        });
    }
    let monitored = times.len();
    if times.last().is_none_or(|&d| (d - t).abs() > 1e-12 * t) {
        times.push(t);
    }
    let (lo, hi) = (barriers.lower, barriers.upper);
    simulate(market, cfg, &times, |p| {
        if p[..monitored].iter().any(|&s| s < lo || s > hi) {
            0.0
        } else {
            intrinsic(right, *p.last().unwrap(), strike)
        }
    })
}
