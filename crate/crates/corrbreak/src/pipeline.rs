//! The estimation pipeline every test shares: local linear mean fit,
//! variance-break search, (piecewise) variance fit, standardized lag
//! products.

use serde::{Deserialize, Serialize};

use crate::classical::{BootstrapConfig, LagSet};
use crate::error::Result;
use crate::kernel::KernelSpec;
use crate::report::ResolvedTuning;
use crate::series::{lag_products_with, Series, Standardization};
use crate::smooth::{fit_mean, fit_variance, Bandwidth, MeanFit, VarianceFit, DEFAULT_BANDWIDTH_GRID};
use crate::tuning::MvConfig;
use crate::varbreak::{estimate_variance_break, VarBreakConfig, VarianceBreak};

/// Whether the variance curve may jump at the estimated break.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum VarianceMode {
    /// Two-sided fit spliced at the estimated variance break.
    #[default]
    Piecewise,
    /// One global fit; appropriate when the variance drifts smoothly.
    Smooth,
}

/// Estimation choices shared by all tests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tuning {
    pub mean_bandwidth: Bandwidth,
    pub var_bandwidth: Bandwidth,
    pub kernel: KernelSpec,
    pub variance_mode: VarianceMode,
    /// Variance-break search tuning; `None` uses the length-based defaults
    /// `L = floor(3 n^(1/3))`, `zeta = 0.2`.
    pub var_break: Option<VarBreakConfig>,
    pub standardization: Standardization,
    pub mv: MvConfig,
}

impl Default for Tuning {
    fn default() -> Self {
        Tuning {
            mean_bandwidth: Bandwidth::Auto,
            var_bandwidth: Bandwidth::Auto,
            kernel: KernelSpec::Epanechnikov,
            variance_mode: VarianceMode::Piecewise,
            var_break: None,
            standardization: Standardization::Single,
            mv: MvConfig::default(),
        }
    }
}

/// Output of the shared pipeline.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub mean_fit: MeanFit,
    pub var_fit: VarianceFit,
    /// Search result behind the splice (piecewise mode only).
    pub var_break: Option<VarianceBreak>,
    /// Standardized lag products, one vector per lag, each padded to length n.
    pub products: Vec<Vec<f64>>,
    pub lags: Vec<usize>,
    pub contrast_window: usize,
    pub trim: f64,
    pub standardization: Standardization,
    pub kernel: KernelSpec,
    pub variance_mode: VarianceMode,
}

impl Prepared {
    pub fn resolved_tuning(&self, window: usize, boot: &BootstrapConfig) -> ResolvedTuning {
        ResolvedTuning {
            mean_bandwidth: self.mean_fit.bandwidth,
            var_bandwidth: self.var_fit.bandwidth,
            window,
            contrast_window: self.contrast_window,
            trim: self.trim,
            lags: self.lags.clone(),
            seed: boot.seed,
            alpha: boot.alpha,
            replications: boot.replications,
            kernel: self.kernel,
            standardization: self.standardization,
            variance_mode: self.variance_mode,
            variance_break: self.var_break.clone(),
        }
    }
}

/// Variance bandwidth candidates: the default grid capped at `0.9 b_n` so
/// the variance fit always smooths less than the mean fit.
pub fn capped_variance_grid(mean_bandwidth: f64) -> Vec<f64> {
    let cap = 0.9 * mean_bandwidth;
    let mut grid: Vec<f64> = DEFAULT_BANDWIDTH_GRID.iter().map(|g| g.min(cap)).collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

/// Run the shared pipeline.
pub fn prepare(series: &Series, lags: &LagSet, tuning: &Tuning) -> Result<Prepared> {
    let n = series.len();
    lags.validate_for_length(n)?;

    let mean_fit = fit_mean(series, &tuning.mean_bandwidth, tuning.kernel)?;

    let vb_config = tuning
        .var_break
        .unwrap_or_else(|| VarBreakConfig::for_length(n));
    let (var_break, break_index) = match tuning.variance_mode {
        VarianceMode::Piecewise => {
            let sq: Vec<f64> = mean_fit.residuals.iter().map(|e| e * e).collect();
            let vb = estimate_variance_break(&sq, &vb_config)?;
            let index = vb.index;
            (Some(vb), Some(index))
        }
        VarianceMode::Smooth => (None, None),
    };

    let var_bandwidth = match &tuning.var_bandwidth {
        Bandwidth::Auto => Bandwidth::AutoGrid(capped_variance_grid(mean_fit.bandwidth)),
        other => other.clone(),
    };
    let var_fit = fit_variance(&mean_fit.residuals, &var_bandwidth, break_index, tuning.kernel)?;

    let products = lags
        .lags()
        .iter()
        .map(|&lag| {
            lag_products_with(
                &mean_fit.residuals,
                &var_fit.curve,
                lag,
                tuning.standardization,
            )
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(Prepared {
        mean_fit,
        var_fit,
        var_break,
        products,
        lags: lags.lags().to_vec(),
        contrast_window: vb_config.window,
        trim: vb_config.trim,
        standardization: tuning.standardization,
        kernel: tuning.kernel,
        variance_mode: tuning.variance_mode,
    })
}
