//! Simulation of piecewise locally stationary AR processes around a
//! quadratic trend, with a time-varying scale and (for the break models) a
//! coefficient or innovation switch at t = 0.5.
//!
//! Each path runs an AR recursion driven by i.i.d. innovations, carries the
//! filter state across the regime switch, and multiplies by a deterministic
//! scale. A 1000-step burn-in under the first in-sample regime removes the
//! initialization transient (coefficient magnitudes are at most 0.6, so the
//! residual effect is far below double precision).

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{standard_normal, stream_rng, streams};
use crate::series::Series;

/// Burn-in steps before the first in-sample observation.
pub const BURN_IN: usize = 1000;

/// Innovation distributions, all normalized to mean 0 and variance 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InnovationDist {
    StandardNormal,
    /// t(5) divided by sqrt(5/3).
    ScaledStudentT5,
    /// (chi^2(5) - 5) / sqrt(10).
    CenteredChiSquare5,
}

impl InnovationDist {
    /// One draw. Consumes a fixed number of uniforms per call, so streams
    /// stay aligned across platforms.
    pub fn draw(self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            InnovationDist::StandardNormal => standard_normal(rng),
            InnovationDist::ScaledStudentT5 => {
                let z = standard_normal(rng);
                let mut chi = 0.0;
                for _ in 0..5 {
                    let w = standard_normal(rng);
                    chi += w * w;
                }
                (z / (chi / 5.0).sqrt()) / (5.0f64 / 3.0).sqrt()
            }
            InnovationDist::CenteredChiSquare5 => {
                let mut chi = 0.0;
                for _ in 0..5 {
                    let w = standard_normal(rng);
                    chi += w * w;
                }
                (chi - 5.0) / 10.0f64.sqrt()
            }
        }
    }
}

/// Deterministic batch of innovation draws.
pub fn draw_innovations(dist: InnovationDist, count: usize, seed: u64) -> Vec<f64> {
    let mut rng = stream_rng(seed, streams::SIMULATION);
    (0..count).map(|_| dist.draw(&mut rng)).collect()
}

/// The simulation models. Break models switch regimes at t = 0.5.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PlsModel {
    /// tvAR(1), coefficient 0.2, smooth scale; constant correlation.
    I,
    /// As I with a scale switch at 0.5; constant correlation, variance break.
    II,
    /// Model II with scaled t(5) innovations.
    IIt,
    /// AR(1) coefficient 0.1 -> 0.4 at 0.5; correlation break of 0.3.
    III,
    /// Model III with scaled t(5) innovations.
    IIIt,
    /// AR(2) coefficients (0.5, 0.1) -> (0.3, 0.2) at 0.5.
    IV,
    /// AR(1) coefficient 0.2 -> 0.2 - lambda at 0.5; smooth scale.
    Iprime { lambda: f64 },
    /// AR(1) coefficient 0.1 - lambda -> 0.4 at 0.5; smooth scale.
    IIprime { lambda: f64 },
    /// Model II driven by scaled t(5) before the break and N(0,1) after.
    II0,
    /// Model III driven by scaled t(5) before the break and N(0,1) after.
    III0,
}

/// The quadratic trend shared by every model: `8(-(t-0.5)^2 + 0.25)`.
pub fn quadratic_mean(t: f64) -> f64 {
    8.0 * (-(t - 0.5) * (t - 0.5) + 0.25)
}

fn scale_smooth(t: f64) -> f64 {
    (1.0 - (t - 0.5) * (t - 0.5)).sqrt() / 2.0
}

fn scale_c(t: f64) -> f64 {
    ((1.0 - (t - 0.5) * (t - 0.5)) as f64).sqrt() / 2.0
}

fn scale_d(t: f64) -> f64 {
    (1.0 - 0.5 * t.sin()).sqrt() / 2.0
}

impl PlsModel {
    /// AR coefficients in force at rescaled time `t`.
    pub fn ar_coefficients(self, t: f64) -> (f64, f64) {
        let left = t <= 0.5;
        match self {
            PlsModel::I | PlsModel::II | PlsModel::IIt | PlsModel::II0 => (0.2, 0.0),
            PlsModel::III | PlsModel::IIIt | PlsModel::III0 => {
                if left {
                    (0.1, 0.0)
                } else {
                    (0.4, 0.0)
                }
            }
            PlsModel::IV => {
                if left {
                    (0.5, 0.1)
                } else {
                    (0.3, 0.2)
                }
            }
            PlsModel::Iprime { lambda } => {
                if left {
                    (0.2, 0.0)
                } else {
                    (0.2 - lambda, 0.0)
                }
            }
            PlsModel::IIprime { lambda } => {
                if left {
                    (0.1 - lambda, 0.0)
                } else {
                    (0.4, 0.0)
                }
            }
        }
    }

    /// Deterministic scale multiplying the filter output at time `t`.
    pub fn scale(self, t: f64) -> f64 {
        match self {
            PlsModel::II | PlsModel::IIt | PlsModel::II0 => {
                if t <= 0.5 {
                    scale_c(t)
                } else {
                    scale_d(t)
                }
            }
            PlsModel::Iprime { .. } => scale_c(t),
            _ => scale_smooth(t),
        }
    }

    /// Innovation law feeding the filter at time `t`.
    pub fn innovations(self, t: f64) -> InnovationDist {
        match self {
            PlsModel::IIt | PlsModel::IIIt => InnovationDist::ScaledStudentT5,
            PlsModel::II0 | PlsModel::III0 => {
                if t <= 0.5 {
                    InnovationDist::ScaledStudentT5
                } else {
                    InnovationDist::StandardNormal
                }
            }
            _ => InnovationDist::StandardNormal,
        }
    }

    fn validate(self) -> Result<()> {
        for t in [0.25, 0.75] {
            let (a1, a2) = self.ar_coefficients(t);
            if a1.abs() + a2.abs() >= 1.0 {
                return Err(Error::InvalidConfig(format!(
                    "AR coefficients ({a1}, {a2}) are not stationary"
                )));
            }
        }
        Ok(())
    }

    pub fn name(self) -> String {
        match self {
            PlsModel::I => "I".into(),
            PlsModel::II => "II".into(),
            PlsModel::IIt => "IIt".into(),
            PlsModel::III => "III".into(),
            PlsModel::IIIt => "IIIt".into(),
            PlsModel::IV => "IV".into(),
            PlsModel::Iprime { lambda } => format!("Iprime(lambda={lambda})"),
            PlsModel::IIprime { lambda } => format!("IIprime(lambda={lambda})"),
            PlsModel::II0 => "II0".into(),
            PlsModel::III0 => "III0".into(),
        }
    }

    /// Parse a model identifier; `lambda` applies to the primed models.
    pub fn parse(name: &str, lambda: Option<f64>) -> Result<Self> {
        let model = match name {
            "I" => PlsModel::I,
            "II" => PlsModel::II,
            "IIt" => PlsModel::IIt,
            "III" => PlsModel::III,
            "IIIt" => PlsModel::IIIt,
            "IV" => PlsModel::IV,
            "Iprime" | "I'" => PlsModel::Iprime {
                lambda: lambda.unwrap_or(0.0),
            },
            "IIprime" | "II'" => PlsModel::IIprime {
                lambda: lambda.unwrap_or(0.0),
            },
            "II0" => PlsModel::II0,
            "III0" => PlsModel::III0,
            other => return Err(Error::UnknownModel(other.to_string())),
        };
        Ok(model)
    }
}

/// Simulate `n` observations `Y_i = mu(t_i) + e_i` from the model.
pub fn simulate(model: PlsModel, n: usize, seed: u64) -> Result<Series> {
    simulate_inner(model, n, seed, None)
}

/// As [`simulate`], but with every innovation drawn from `dist` instead of
/// the model's default law. Used to rerun the break models under skewed
/// innovations.
pub fn simulate_with_dist(
    model: PlsModel,
    n: usize,
    seed: u64,
    dist: InnovationDist,
) -> Result<Series> {
    simulate_inner(model, n, seed, Some(dist))
}

fn simulate_inner(
    model: PlsModel,
    n: usize,
    seed: u64,
    dist: Option<InnovationDist>,
) -> Result<Series> {
    model.validate()?;
    let mut rng = stream_rng(seed, streams::SIMULATION);
    let t1 = 1.0 / n as f64;
    let dist_at = |t: f64| dist.unwrap_or_else(|| model.innovations(t));
    let mut innovations = Vec::with_capacity(BURN_IN + n);
    for _ in 0..BURN_IN {
        innovations.push(dist_at(t1).draw(&mut rng));
    }
    for i in 1..=n {
        let t = i as f64 / n as f64;
        innovations.push(dist_at(t).draw(&mut rng));
    }
    simulate_with_innovations(model, n, &innovations)
}

/// Run the model's filter over caller-provided innovations (burn-in included:
/// the slice must hold `BURN_IN + n` values). Useful as a noise-free test
/// hook and for oracle constructions.
pub fn simulate_with_innovations(model: PlsModel, n: usize, innovations: &[f64]) -> Result<Series> {
    model.validate()?;
    if n < 2 {
        return Err(Error::SeriesTooShort {
            n,
            reason: "simulation needs n >= 2".into(),
        });
    }
    if innovations.len() != BURN_IN + n {
        return Err(Error::InvalidConfig(format!(
            "expected {} innovations, got {}",
            BURN_IN + n,
            innovations.len()
        )));
    }
    let t1 = 1.0 / n as f64;
    let mut h_prev = 0.0;
    let mut h_prev2 = 0.0;
    for &eps in &innovations[..BURN_IN] {
        let (a1, a2) = model.ar_coefficients(t1);
        let h = a1 * h_prev + a2 * h_prev2 + eps;
        h_prev2 = h_prev;
        h_prev = h;
    }
    let mut values = Vec::with_capacity(n);
    for i in 1..=n {
        let t = i as f64 / n as f64;
        let (a1, a2) = model.ar_coefficients(t);
        let h = a1 * h_prev + a2 * h_prev2 + innovations[BURN_IN + i - 1];
        h_prev2 = h_prev;
        h_prev = h;
        values.push(quadratic_mean(t) + h * model.scale(t));
    }
    Series::new(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_seed;

    fn errors(model: PlsModel, n: usize, seed: u64) -> Vec<f64> {
        let series = simulate(model, n, seed).unwrap();
        (1..=n)
            .map(|i| series.values()[i - 1] - quadratic_mean(i as f64 / n as f64))
            .collect()
    }

    /// Filter values recovered by dividing out the known scale.
    fn filter_path(model: PlsModel, n: usize, seed: u64) -> Vec<f64> {
        errors(model, n, seed)
            .iter()
            .enumerate()
            .map(|(idx, e)| e / model.scale((idx + 1) as f64 / n as f64))
            .collect()
    }

    fn lag1_corr(x: &[f64]) -> f64 {
        let n = x.len();
        let mean = x.iter().sum::<f64>() / n as f64;
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..n {
            den += (x[i] - mean) * (x[i] - mean);
            if i + 1 < n {
                num += (x[i] - mean) * (x[i + 1] - mean);
            }
        }
        num / den
    }

    #[test]
    fn zero_innovations_reproduce_the_trend() {
        let n = 64;
        let innovations = vec![0.0; BURN_IN + n];
        let series = simulate_with_innovations(PlsModel::I, n, &innovations).unwrap();
        for (i, y) in series.values().iter().enumerate() {
            assert_eq!(*y, quadratic_mean((i + 1) as f64 / n as f64));
        }
    }

    #[test]
    fn simulation_is_bit_reproducible() {
        for model in [PlsModel::I, PlsModel::IIt, PlsModel::IV, PlsModel::III0] {
            let a = simulate(model, 200, 99).unwrap();
            let b = simulate(model, 200, 99).unwrap();
            assert_eq!(a.values(), b.values());
        }
    }

    #[test]
    fn innovation_moments_are_standardized() {
        let n = 100_000;
        for dist in [
            InnovationDist::StandardNormal,
            InnovationDist::ScaledStudentT5,
            InnovationDist::CenteredChiSquare5,
        ] {
            let draws = draw_innovations(dist, n, 11);
            let mean = draws.iter().sum::<f64>() / n as f64;
            let var = draws.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
            assert!(mean.abs() < 0.02, "{dist:?} mean {mean}");
            let tol = if dist == InnovationDist::StandardNormal {
                0.05
            } else {
                0.1
            };
            assert!((var - 1.0).abs() < tol, "{dist:?} var {var}");
        }
    }

    #[test]
    fn draws_are_deterministic_per_seed() {
        let a = draw_innovations(InnovationDist::ScaledStudentT5, 64, 5);
        let b = draw_innovations(InnovationDist::ScaledStudentT5, 64, 5);
        let c = draw_innovations(InnovationDist::ScaledStudentT5, 64, 6);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn errors_are_centered() {
        // Sample mean of e_i at a fixed index over replications stays within
        // four Monte Carlo standard errors of zero.
        let reps = 500;
        let n = 120;
        let idx = n / 3;
        for model in [PlsModel::II, PlsModel::IV] {
            let mut draws = Vec::with_capacity(reps);
            for r in 0..reps {
                draws.push(errors(model, n, derive_seed(321, r as u64))[idx]);
            }
            let mean = draws.iter().sum::<f64>() / reps as f64;
            let var =
                draws.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (reps - 1) as f64;
            let se = (var / reps as f64).sqrt();
            assert!(mean.abs() < 4.0 * se, "{model:?}: mean {mean}, se {se}");
        }
    }

    #[test]
    fn model_iii_correlation_regimes() {
        // AR(1) lag-1 autocorrelation equals its coefficient; windowed
        // empirical correlations averaged over replications recover the
        // 0.1 / 0.4 split.
        let reps = 200;
        let n = 500;
        let (mut left, mut right) = (0.0, 0.0);
        for r in 0..reps {
            let h = filter_path(PlsModel::III, n, derive_seed(555, r as u64));
            left += lag1_corr(&h[..n / 2]);
            right += lag1_corr(&h[n / 2..]);
        }
        left /= reps as f64;
        right /= reps as f64;
        assert!((left - 0.1).abs() < 0.1, "left {left}");
        assert!((right - 0.4).abs() < 0.1, "right {right}");
    }

    #[test]
    fn null_models_have_constant_correlation() {
        let reps = 200;
        let n = 500;
        for model in [PlsModel::I, PlsModel::II, PlsModel::IIt] {
            let (mut left, mut right) = (0.0, 0.0);
            for r in 0..reps {
                let h = filter_path(model, n, derive_seed(556, r as u64));
                left += lag1_corr(&h[..n / 2]);
                right += lag1_corr(&h[n / 2..]);
            }
            left /= reps as f64;
            right /= reps as f64;
            assert!((left - right).abs() < 0.05, "{model:?}: {left} vs {right}");
            assert!((left - 0.2).abs() < 0.05, "{model:?}: {left}");
        }
    }

    #[test]
    fn model_iv_variance_matches_yule_walker_oracle() {
        // Yule-Walker for AR(2): Var = (1-a2) / ((1+a2)((1-a2)^2 - a1^2)).
        let (a1, a2) = (0.5, 0.1);
        let var_h = (1.0 - a2) / ((1.0 + a2) * ((1.0 - a2) * (1.0 - a2) - a1 * a1));
        let target = 0.25 * var_h; // scale^2 at t = 0.5 is 1/4

        let reps = 200;
        let n = 500;
        let lo = (0.46 * n as f64) as usize;
        let hi = n / 2;
        let mut acc = 0.0;
        let mut count = 0usize;
        for r in 0..reps {
            let e = errors(PlsModel::IV, n, derive_seed(557, r as u64));
            for i in lo..hi {
                acc += e[i] * e[i];
                count += 1;
            }
        }
        let observed = acc / count as f64;
        assert!(
            (observed - target).abs() < 0.15 * target,
            "observed {observed}, target {target}"
        );
    }

    #[test]
    fn primed_models_interpolate_the_null() {
        // lambda = 0 reduces Iprime to a constant-coefficient model and
        // IIprime to model III.
        let a = simulate(PlsModel::IIprime { lambda: 0.0 }, 150, 3).unwrap();
        let b = simulate(PlsModel::III, 150, 3).unwrap();
        assert_eq!(a.values(), b.values());
    }

    #[test]
    fn unknown_model_is_rejected() {
        assert!(matches!(
            PlsModel::parse("V", None),
            Err(Error::UnknownModel(_))
        ));
        assert!(matches!(
            simulate(PlsModel::Iprime { lambda: -1.0 }, 50, 1),
            Err(Error::InvalidConfig(_))
        ));
    }
}
