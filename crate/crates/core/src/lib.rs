//! Rare-event conditional expectations `E[X_k | Σ X_i > VaR_α]` for
//! copula-dependent losses, estimated with a constrained-copula SMC sampler,
//! plus rejection Monte Carlo and mixture importance-sampling baselines.

pub mod baselines;
pub mod copulas;
pub mod error;
pub mod estimators;
pub mod geometry;
pub mod harness;
pub mod jet;
pub mod marginals;
pub mod normal;
pub mod quantiles;
pub mod rng;
pub mod smc;

pub use copulas::{CopulaModel, CopulaSpec, Family};
pub use error::{Error, Result};
pub use marginals::{Marginal, MarginalModel};
