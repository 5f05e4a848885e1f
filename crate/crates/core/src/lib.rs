//! Depth-based weighted likelihood estimation for the multivariate Gaussian.
//!
//! Observations are weighted by comparing their empirical half-space depth
//! with the depth implied by the fitted Gaussian. The resulting depth Pearson
//! residuals drive a trimmed weight function, and the weighted score
//! equations are solved by iteratively reweighted least squares started from
//! many initial values.
//!
//! Modules:
//! - [`depth`]: exact and projection half-space depth, Gaussian population depth
//! - [`residuals`]: depth Pearson residuals, weight families, median trimming
//! - [`gaussian`]: Gaussian parameters, Mahalanobis distance, MLE, KL divergence
//! - [`estimator`]: IRWLS solver and multi-root search
//! - [`init`]: subsampling and depth-based starting values
//! - [`sim`]: contamination Monte Carlo harness and breakdown experiments
//! - [`config`]: JSON configuration schemas

pub mod config;
pub mod data;
pub mod depth;
pub mod error;
pub mod estimator;
pub mod gaussian;
pub mod init;
pub mod residuals;
pub mod rng;
pub mod sim;
pub mod special;

pub use data::DataMatrix;
pub use depth::{DepthMethod, DepthSelection, DepthVector, PopulationDepth};
pub use error::{Error, Result};
pub use estimator::{EstimatorConfig, FitFailure, FitResult, RootSet, ScatterNorm};
pub use gaussian::GaussianParams;
pub use init::{DeepCenter, InitSpec};
pub use residuals::{DprConfig, WeightFamily, WeightSpec};
pub use sim::{ContaminationSpec, GridConfig, SimulationReport};
