//! Observation container and the numeric conventions shared by every
//! statistic in the crate: residuals are zero-padded past the end of the
//! sample (`e_s = 0` for `s > n`), `0/0` evaluates to `1`, and vector norms
//! are Euclidean.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A univariate series observed on the regular grid `t_i = i/n`, `i = 1..n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    values: Vec<f64>,
}

impl Series {
    /// Wrap raw observations. Requires `n >= 2` and finite values.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::SeriesTooShort {
                n: values.len(),
                reason: "a series needs at least two observations".into(),
            });
        }
        if let Some(idx) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index: idx });
        }
        Ok(Series { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Rescaled time of the 1-based observation index.
    pub fn time(&self, i: usize) -> f64 {
        i as f64 / self.values.len() as f64
    }

    /// The grid `t_1, ..., t_n`.
    pub fn times(&self) -> Vec<f64> {
        let n = self.values.len();
        (1..=n).map(|i| i as f64 / n as f64).collect()
    }
}

/// `num/den` under the convention `0/0 = 1`.
pub fn ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 && den == 0.0 {
        1.0
    } else {
        num / den
    }
}

/// Euclidean norm of a stack-local slice.
pub fn euclidean(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// How lag products are standardized by the variance curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Standardization {
    /// `e_s e_{s+k} / sigma^2(t_s)` — the form every test statistic uses.
    #[default]
    Single,
    /// `e_s e_{s+k} / (sigma(t_s) sigma(t_{s+k}))`.
    Product,
}

/// Standardized lag products `w_s = e_s e_{s+lag} / sigma^2(t_s)`.
///
/// Entry `s` (1-based) is the summand of the partial sums behind the CUSUM
/// statistics; entries with `s + lag > n` are zero by the padding rule.
pub fn lag_products(residuals: &[f64], variance: &[f64], lag: usize) -> Result<Vec<f64>> {
    lag_products_with(residuals, variance, lag, Standardization::Single)
}

/// As [`lag_products`] with an explicit standardization choice.
pub fn lag_products_with(
    residuals: &[f64],
    variance: &[f64],
    lag: usize,
    standardization: Standardization,
) -> Result<Vec<f64>> {
    let n = residuals.len();
    if variance.len() != n {
        return Err(Error::InvalidConfig(format!(
            "residuals ({n}) and variance ({}) lengths differ",
            variance.len()
        )));
    }
    if lag == 0 || lag >= n {
        return Err(Error::IndexOutOfRange {
            index: lag,
            lo: 1,
            hi: n.saturating_sub(1),
        });
    }
    if let Some((idx, &v)) = variance
        .iter()
        .enumerate()
        .find(|(_, v)| **v <= 0.0 || !v.is_finite())
    {
        return Err(Error::NonPositiveVariance { index: idx, value: v });
    }
    let mut out = vec![0.0; n];
    for s in 0..n - lag {
        out[s] = match standardization {
            Standardization::Single => residuals[s] * residuals[s + lag] / variance[s],
            Standardization::Product => {
                residuals[s] * residuals[s + lag] / (variance[s].sqrt() * variance[s + lag].sqrt())
            }
        };
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn series_rejects_degenerate_input() {
        assert!(Series::new(vec![1.0]).is_err());
        assert!(Series::new(vec![1.0, f64::NAN]).is_err());
        assert!(Series::new(vec![1.0, f64::INFINITY]).is_err());
        assert!(Series::new(vec![1.0, 2.0]).is_ok());
    }

    #[test]
    fn grid_is_strictly_increasing_in_unit_interval() {
        let s = Series::new(vec![0.0; 7]).unwrap();
        let t = s.times();
        assert!(t.windows(2).all(|w| w[0] < w[1]));
        assert!(t[0] > 0.0 && *t.last().unwrap() == 1.0);
    }

    #[test]
    fn zero_over_zero_is_one() {
        assert_eq!(ratio(0.0, 0.0), 1.0);
        assert_eq!(ratio(0.0, 2.0), 0.0);
        assert_eq!(ratio(3.0, 2.0), 1.5);
    }

    #[test]
    fn zero_residuals_give_zero_products() {
        let w = lag_products(&[0.0; 6], &[2.0; 6], 2).unwrap();
        assert_eq!(w, vec![0.0; 6]);
    }

    #[test]
    fn padding_zeroes_the_tail() {
        let w = lag_products(&[1.0, 1.0, 1.0, 1.0], &[1.0; 4], 1).unwrap();
        assert_eq!(w, vec![1.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn hand_example_lag_two() {
        let w = lag_products(&[1.0, 2.0, -1.0, 3.0], &[2.0; 4], 2).unwrap();
        assert_eq!(w, vec![-0.5, 3.0, 0.0, 0.0]);
    }

    #[test]
    fn non_positive_variance_is_rejected() {
        let err = lag_products(&[1.0, 1.0, 1.0], &[1.0, 0.0, 1.0], 1).unwrap_err();
        assert!(matches!(err, Error::NonPositiveVariance { index: 1, .. }));
    }

    #[test]
    fn product_standardization_uses_both_sigmas() {
        let resid = [1.0, 2.0, -1.0, 3.0];
        let var = [1.0, 4.0, 9.0, 16.0];
        let w = lag_products_with(&resid, &var, 1, Standardization::Product).unwrap();
        assert!((w[0] - 2.0 / (1.0 * 2.0)).abs() < 1e-15);
        assert!((w[1] - (-2.0) / (2.0 * 3.0)).abs() < 1e-15);
        assert!((w[2] - (-3.0) / (3.0 * 4.0)).abs() < 1e-15);
        assert_eq!(w[3], 0.0);
    }

    proptest! {
        // w is invariant under residuals -> c*residuals, variance -> c^2*variance.
        #[test]
        fn rescaling_invariance(c in 0.1f64..10.0, sign in prop::bool::ANY) {
            let c = if sign { c } else { -c };
            let resid = vec![0.3, -1.2, 0.8, 2.0, -0.5];
            let var = vec![0.5, 1.0, 2.0, 0.8, 1.5];
            let base = lag_products(&resid, &var, 1).unwrap();
            let scaled_resid: Vec<f64> = resid.iter().map(|x| c * x).collect();
            let scaled_var: Vec<f64> = var.iter().map(|x| c * c * x).collect();
            let scaled = lag_products(&scaled_resid, &scaled_var, 1).unwrap();
            for (a, b) in base.iter().zip(&scaled) {
                prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
            }
        }
    }
}
