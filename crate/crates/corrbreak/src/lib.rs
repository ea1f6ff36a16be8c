//! Change point analysis for the correlation structure of non-stationary
//! time series.
//!
//! The observation model is `Y_i = mu(t_i) + e_i` on the grid `t_i = i/n`,
//! where both the trend and the variance of the errors may drift (the
//! variance may also jump once). The crate tests whether lag-k correlations
//! stay constant (`detect`), whether an estimated correlation break exceeds
//! a practitioner threshold (`relevant`), locates variance breaks, splits a
//! series into segments by binary segmentation, and ships a Monte Carlo
//! harness that reproduces the reference simulation studies at desk scale.
//!
//! Test statistics are CUSUMs of standardized residual lag products; their
//! critical values come from a wild multiplier bootstrap on centered block
//! sums, so no stationarity is needed under the null hypothesis. All
//! randomness is seeded and parallel execution never changes results.

pub mod classical;
pub mod error;
pub mod experiment;
pub mod ingest;
pub mod kernel;
pub mod pipeline;
pub mod relevant;
pub mod report;
pub mod rng;
pub mod segment;
pub mod series;
pub mod simulate;
pub mod smooth;
pub mod tuning;
pub mod varbreak;

pub use error::{Error, Result};
pub use kernel::KernelSpec;
pub use series::{lag_products, Series, Standardization};
pub use simulate::{draw_innovations, simulate, InnovationDist, PlsModel};
pub use smooth::{fit_mean, fit_variance, gcv_bandwidth, local_linear, Bandwidth};
pub use varbreak::{estimate_variance_break, VarBreakConfig};
