//! Dynamic network connectedness for multivariate time series.
//!
//! The pipeline: ingest a panel, fit a VAR approximating model (least squares
//! or LASSO), compute H-step forecast-error variance decompositions under
//! Cholesky or generalized identification, row-normalize into a connectedness
//! table that doubles as a weighted directed network adjacency matrix, then
//! derive directional/total statistics, rolling paths, force-directed network
//! renderings, and companion tail-risk measures (MES, CoVaR).

pub mod connectedness;
pub mod error;
pub mod fevd;
pub mod ingest;
pub mod lasso;
pub mod linalg;
pub mod risk;
pub mod rolling;
pub mod sim;
pub mod var;
pub mod viz;

pub use error::{Error, ErrorCategory, Result};
