//! Stochastic co-optimization of transmission and generation expansion,
//! counterfactual construction, participant benefits, and beneficiaries-pay
//! cost allocation.

pub mod allocation;
pub mod benefits;
pub mod counterfactual;
pub mod error;
pub mod evaluate;
pub mod optimizer;
pub mod scenario;
pub mod system;
pub mod timeseries;

pub use error::{Error, Result};
