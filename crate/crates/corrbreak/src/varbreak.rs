//! Location of an abrupt variance change from squared residuals.
//!
//! The contrast `M(i) = (1/L) (sum_{j=i-L+1}^{i} e_j^2 - sum_{j=i}^{i+L-1} e_j^2)`
//! compares adjacent moving windows; its absolute maximum over the trimmed
//! index range estimates the break location.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tuning for the moving-window contrast.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarBreakConfig {
    /// Window length `L`.
    pub window: usize,
    /// Trimming fraction `zeta`; the search runs over `[n*zeta, n*(1-zeta)]`.
    pub trim: f64,
}

impl VarBreakConfig {
    /// Defaults for a series of length `n`: `L = floor(3 n^(1/3))`, `zeta = 0.2`.
    pub fn for_length(n: usize) -> Self {
        VarBreakConfig {
            window: (3.0 * (n as f64).powf(1.0 / 3.0)).floor().max(2.0) as usize,
            trim: 0.2,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.window < 1 {
            return Err(Error::InvalidConfig("contrast window must be >= 1".into()));
        }
        if !(self.trim > 0.0 && self.trim < 0.5) {
            return Err(Error::InvalidConfig(format!(
                "trimming fraction must lie in (0, 0.5), got {}",
                self.trim
            )));
        }
        Ok(())
    }
}

/// Precomputed prefix sums for O(1) contrast evaluation.
pub struct ContrastScan<'a> {
    sq: &'a [f64],
    prefix: Vec<f64>,
    window: usize,
}

impl<'a> ContrastScan<'a> {
    pub fn new(sq_residuals: &'a [f64], window: usize) -> Self {
        let mut prefix = Vec::with_capacity(sq_residuals.len() + 1);
        prefix.push(0.0);
        let mut acc = 0.0;
        for &v in sq_residuals {
            acc += v;
            prefix.push(acc);
        }
        ContrastScan {
            sq: sq_residuals,
            prefix,
            window,
        }
    }

    /// Valid 1-based index range `L..=n-L+1`.
    pub fn valid_range(&self) -> (usize, usize) {
        (self.window, self.sq.len() + 1 - self.window)
    }

    /// `M(i)` for a 1-based index inside [`Self::valid_range`].
    pub fn at(&self, i: usize) -> Result<f64> {
        let (lo, hi) = self.valid_range();
        if i < lo || i > hi {
            return Err(Error::IndexOutOfRange { index: i, lo, hi });
        }
        let left = self.prefix[i] - self.prefix[i - self.window];
        let right = self.prefix[i + self.window - 1] - self.prefix[i - 1];
        Ok((left - right) / self.window as f64)
    }
}

/// One-off contrast evaluation; see [`ContrastScan`] for repeated queries.
pub fn contrast(sq_residuals: &[f64], window: usize, i: usize) -> Result<f64> {
    ContrastScan::new(sq_residuals, window).at(i)
}

/// Result of the variance-break search.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VarianceBreak {
    /// Break location on the unit interval, `k/n`.
    pub time: f64,
    /// 1-based break index `k`.
    pub index: usize,
    /// `max |M(i)|` over the trimmed range.
    pub max_contrast: f64,
    /// Heuristic no-break flag: the peak does not clear twice the robust
    /// scale of the contrast over the trimmed range.
    pub low_confidence: bool,
    /// The `2 * robust scale` threshold the flag compares against.
    pub threshold: f64,
}

/// Estimate the variance break location by maximizing `|M(i)|` over the
/// trimmed range; ties resolve to the smallest index.
pub fn estimate_variance_break(
    sq_residuals: &[f64],
    config: &VarBreakConfig,
) -> Result<VarianceBreak> {
    config.validate()?;
    let n = sq_residuals.len();
    let scan = ContrastScan::new(sq_residuals, config.window);
    let trim = (n as f64 * config.trim).floor() as usize;
    let (clo, chi) = scan.valid_range();
    let lo = trim.max(clo).max(1);
    let hi = (n + 1 - trim.min(n)).min(chi);
    if lo > hi {
        return Err(Error::SeriesTooShort {
            n,
            reason: format!(
                "trimmed range [{lo}, {hi}] is empty for window {} and trim {}",
                config.window, config.trim
            ),
        });
    }

    let mut contrasts = Vec::with_capacity(hi - lo + 1);
    let mut best = f64::NEG_INFINITY;
    let mut best_idx = lo;
    for i in lo..=hi {
        let m = scan.at(i)?;
        contrasts.push(m);
        if m.abs() > best {
            best = m.abs();
            best_idx = i;
        }
    }

    let threshold = 2.0 * robust_scale(&contrasts);
    Ok(VarianceBreak {
        time: best_idx as f64 / n as f64,
        index: best_idx,
        max_contrast: best,
        low_confidence: best <= threshold,
        threshold,
    })
}

/// 1.4826 * median absolute deviation, a robust stand-in for the sd.
fn robust_scale(values: &[f64]) -> f64 {
    let med = median(values);
    let dev: Vec<f64> = values.iter().map(|v| (v - med).abs()).collect();
    1.4826 * median(&dev)
}

fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n == 0 {
        return 0.0;
    }
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{standard_normal, stream_rng};
    use proptest::prelude::*;

    #[test]
    fn constant_input_has_zero_contrast() {
        let sq = vec![2.5; 30];
        let scan = ContrastScan::new(&sq, 5);
        let (lo, hi) = scan.valid_range();
        for i in lo..=hi {
            assert_eq!(scan.at(i).unwrap(), 0.0);
        }
    }

    #[test]
    fn step_example_window_two() {
        let sq = [1.0, 1.0, 1.0, 1.0, 9.0, 9.0, 9.0, 9.0];
        assert_eq!(contrast(&sq, 2, 3).unwrap(), 0.0);
        assert_eq!(contrast(&sq, 2, 4).unwrap(), -4.0);
        assert_eq!(contrast(&sq, 2, 5).unwrap(), -4.0);
        assert_eq!(contrast(&sq, 2, 6).unwrap(), 0.0);
    }

    #[test]
    fn out_of_range_index_errors() {
        let sq = [1.0; 10];
        assert!(matches!(
            contrast(&sq, 3, 2),
            Err(Error::IndexOutOfRange { .. })
        ));
        assert!(matches!(
            contrast(&sq, 3, 9),
            Err(Error::IndexOutOfRange { .. })
        ));
        assert!(contrast(&sq, 3, 3).is_ok());
        assert!(contrast(&sq, 3, 8).is_ok());
    }

    #[test]
    fn prefix_scan_matches_naive_double_loop() {
        let n = 200;
        let mut rng = stream_rng(31, 0);
        let sq: Vec<f64> = (0..n).map(|_| standard_normal(&mut rng).powi(2)).collect();
        let window = 17;
        let scan = ContrastScan::new(&sq, window);
        let (lo, hi) = scan.valid_range();
        for i in lo..=hi {
            let left: f64 = (i - window + 1..=i).map(|j| sq[j - 1]).sum();
            let right: f64 = (i..=i + window - 1).map(|j| sq[j - 1]).sum();
            let naive = (left - right) / window as f64;
            assert!((scan.at(i).unwrap() - naive).abs() < 1e-12);
        }
    }

    #[test]
    fn step_series_ties_resolve_to_smallest_index() {
        let sq = [1.0, 1.0, 1.0, 1.0, 9.0, 9.0, 9.0, 9.0];
        let config = VarBreakConfig {
            window: 2,
            trim: 0.25,
        };
        let found = estimate_variance_break(&sq, &config).unwrap();
        assert_eq!(found.index, 4);
        assert_eq!(found.time, 0.5);
        assert_eq!(found.max_contrast, 4.0);
        assert!(!found.low_confidence);
    }

    #[test]
    fn constant_series_is_flagged_low_confidence() {
        let sq = vec![3.0; 40];
        let config = VarBreakConfig {
            window: 4,
            trim: 0.2,
        };
        let found = estimate_variance_break(&sq, &config).unwrap();
        assert!(found.low_confidence);
        assert_eq!(found.max_contrast, 0.0);
    }

    #[test]
    fn clear_break_is_not_flagged() {
        let n = 300;
        let mut rng = stream_rng(77, 0);
        let sq: Vec<f64> = (0..n)
            .map(|i| {
                let base = if i < n / 2 { 1.0 } else { 16.0 };
                base * (1.0 + 0.1 * standard_normal(&mut rng)).abs()
            })
            .collect();
        let found = estimate_variance_break(&sq, &VarBreakConfig::for_length(n)).unwrap();
        assert!(!found.low_confidence);
        assert!((found.time - 0.5).abs() < 0.05, "time {}", found.time);
    }

    #[test]
    fn default_window_follows_cube_root_rule() {
        assert_eq!(VarBreakConfig::for_length(500).window, 23);
        assert_eq!(VarBreakConfig::for_length(1154).window, 31);
    }

    proptest! {
        // Positive rescaling of e^2 scales M but never moves the argmax.
        #[test]
        fn argmax_invariant_under_positive_scaling(c in 0.01f64..100.0) {
            let mut rng = stream_rng(13, 1);
            let sq: Vec<f64> = (0..80).map(|_| standard_normal(&mut rng).powi(2)).collect();
            let scaled: Vec<f64> = sq.iter().map(|v| c * v).collect();
            let config = VarBreakConfig { window: 6, trim: 0.1 };
            let a = estimate_variance_break(&sq, &config).unwrap();
            let b = estimate_variance_break(&scaled, &config).unwrap();
            prop_assert_eq!(a.index, b.index);
            prop_assert!((b.max_contrast - c * a.max_contrast).abs() < 1e-9 * (1.0 + c * a.max_contrast));
        }

        // Reversing the series mirrors the contrast profile: M_rev(i) = -M(n-i+1).
        #[test]
        fn reversal_mirrors_contrast(seed in 0u64..50) {
            let mut rng = stream_rng(seed, 2);
            let sq: Vec<f64> = (0..60).map(|_| standard_normal(&mut rng).powi(2)).collect();
            let mut rev = sq.clone();
            rev.reverse();
            let n = sq.len();
            let window = 5;
            let fwd = ContrastScan::new(&sq, window);
            let bwd = ContrastScan::new(&rev, window);
            let (lo, hi) = fwd.valid_range();
            for i in lo..=hi {
                let mirrored = n - i + 1;
                prop_assert!((bwd.at(i).unwrap() + fwd.at(mirrored).unwrap()).abs() < 1e-12);
            }
        }
    }
}
