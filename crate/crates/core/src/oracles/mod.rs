//! Independent reference prices: closed form, CRR binomial, Monte Carlo.

pub mod binomial;
pub mod closed_form;
pub mod monte_carlo;

pub use binomial::{binomial_price, ExerciseStyle};
pub use closed_form::{bs_delta, bs_gamma, bs_price, bs_vega, d1_d2, norm_cdf, norm_pdf};
pub use monte_carlo::{mc_asian, mc_barrier, mc_european, McConfig, McEstimate};
