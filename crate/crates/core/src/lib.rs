//! Discontinuous Petrov-Galerkin (DPG) pricing of European, American, Asian
//! and discretely monitored double-barrier options under Black-Scholes.
//!
//! The crate is layered bottom-up:
//!
//! * [`mesh`]: uniform 1-D meshes, Lagrange bases, Gauss quadrature.
//! * [`dpg`]: element Gram/form matrices for the primal and ultraweak broken
//!   formulations, condensation to the normal equations, global assembly,
//!   the residual error indicator and a mixed-form reference solve.
//! * [`models`]: contracts, market data, payoffs and boundary data.
//! * [`timestepper`]: the θ-method on top of the condensed DPG system.
//! * [`pricers`]: European, American (LCP or projection), Asian and
//!   double-barrier pricers plus exercise-boundary extraction.
//! * [`greeks`]: Delta/Gamma from the solution and the sensitivity PDE.
//! * [`oracles`]: closed form, CRR binomial and Monte Carlo references.

pub mod banded;
pub mod dpg;
pub mod error;
pub mod greeks;
pub mod mesh;
pub mod models;
pub mod oracles;
pub mod pricers;
pub mod timestepper;

pub use error::{DpgError, Result};
