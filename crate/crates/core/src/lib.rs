//! Estimation of large non-stationary dynamic factor models.
//!
//! The observed panel is modelled as common I(1)/cointegrated factors entering
//! through (possibly lagged) loadings, plus idiosyncratic components that may be
//! stationary or integrated, plus optional local levels and local linear trends.
//! Parameters are estimated by quasi-maximum likelihood with the EM algorithm,
//! using a Kalman filter and fixed-interval smoother in the E-step.
//!
//! Module map:
//!
//! * [`model`] domain types and state-space assembly
//! * [`kalman`] filter, smoother, lag-one covariances and trace diagnostics
//! * [`init`] first-difference pre-estimators (iteration zero of EM)
//! * [`em`] E-step statistics, closed-form M-steps and the EM loop
//! * [`simulate`] Monte Carlo data-generating process
//! * [`competitors`] principal-components benchmark estimators
//! * [`bench`] metrics, replication runner and trace diagnostics
//! * [`io`] panel CSV, structured reports and run configuration
//! * [`cli`] the commands behind the `nsdfm` binary

pub mod bench;
pub mod cli;
pub mod competitors;
pub mod em;
pub mod error;
pub mod init;
pub mod io;
pub mod kalman;
pub mod linalg;
pub mod model;
pub mod simulate;

pub use error::{Error, Result};
pub use model::{ModelSpec, Panel, Params, StateLayout, StateSpace};
