//! CUSUM tests for constant (or zero) lag-k correlations with wild
//! multiplier bootstrap critical values.
//!
//! The statistic is `max_i | S_i - (i/n) S_n | / sqrt(n)` where `S_i` stacks
//! per-lag partial sums of standardized residual lag products. Critical
//! values come from resampling centered block sums with i.i.d. standard
//! normal multipliers:
//!
//! `Phi_{i,m} = (m(n-m+1))^{-1/2} sum_{j<=i} (S_{j,m} - (m/n) S_n) R_j`,
//!
//! with `S_{j,m}` the sum of `m` consecutive products starting at `j`. Each
//! bootstrap replication reduces to `M_r = max_i |Phi_{i,m} - i/(n-m+1)
//! Phi_{n-m+1,m}|` (or `max_i |Phi_{i,m}|` for the zero-correlation mode).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::{prepare, Tuning};
use crate::report::{InputProvenance, ResolvedTuning, RunManifest};
use crate::rng::{fill_standard_normal, stream_rng, streams};
use crate::series::Series;
use crate::tuning::{resolve_window, WindowSelect};

/// Strictly increasing positive lags.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LagSet(Vec<usize>);

impl LagSet {
    pub fn new(lags: Vec<usize>) -> Result<Self> {
        if lags.is_empty() {
            return Err(Error::InvalidConfig("need at least one lag".into()));
        }
        if lags[0] == 0 || !lags.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidConfig(
                "lags must be positive and strictly increasing".into(),
            ));
        }
        Ok(LagSet(lags))
    }

    pub fn lags(&self) -> &[usize] {
        &self.0
    }

    pub fn max_lag(&self) -> usize {
        *self.0.last().unwrap()
    }

    /// Sanity bound for a series of length `n`: the largest lag stays
    /// below `n/4`.
    pub fn validate_for_length(&self, n: usize) -> Result<()> {
        if self.max_lag() * 4 >= n {
            return Err(Error::InvalidConfig(format!(
                "largest lag {} must stay below n/4 = {}",
                self.max_lag(),
                n as f64 / 4.0
            )));
        }
        Ok(())
    }
}

/// Which null hypothesis the test targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestMode {
    /// All lag-k correlations constant over time.
    ConstantCorrelation,
    /// All lag-k correlations zero.
    ZeroCorrelation,
}

/// `max_{1<=i<=n} |S_i - (i/n) S_n|` over stacked per-lag partial sums.
pub fn cusum_statistic(products: &[Vec<f64>]) -> f64 {
    let n = products[0].len();
    let l = products.len();
    let totals: Vec<f64> = products.iter().map(|w| w.iter().sum()).collect();
    let mut partial = vec![0.0; l];
    let mut best = 0.0f64;
    for i in 1..=n {
        let frac = i as f64 / n as f64;
        let mut sq = 0.0;
        for s in 0..l {
            partial[s] += products[s][i - 1];
            let dev = partial[s] - frac * totals[s];
            sq += dev * dev;
        }
        best = best.max(sq.sqrt());
    }
    best
}

/// `max_{1<=i<=n} |S_i|`: the raw partial-sum maximum behind the
/// zero-correlation test.
pub fn zero_statistic(products: &[Vec<f64>]) -> f64 {
    let n = products[0].len();
    let l = products.len();
    let mut partial = vec![0.0; l];
    let mut best = 0.0f64;
    for i in 1..=n {
        let mut sq = 0.0;
        for s in 0..l {
            partial[s] += products[s][i - 1];
            sq += partial[s] * partial[s];
        }
        best = best.max(sq.sqrt());
    }
    best
}

/// Centered block sums shared by every bootstrap replication for one window.
pub struct BlockSums {
    /// Per lag: `S_{j,m} - (m/n) S_n` for `j = 1..n-m+1`.
    centered: Vec<Vec<f64>>,
    n: usize,
    m: usize,
    norm: f64,
}

impl BlockSums {
    pub fn new(products: &[Vec<f64>], m: usize) -> Result<Self> {
        let n = products[0].len();
        if m < 2 || m > n {
            return Err(Error::WindowTooLarge { m, n });
        }
        let q = n - m + 1;
        let mut centered = Vec::with_capacity(products.len());
        for w in products {
            let mut prefix = Vec::with_capacity(n + 1);
            prefix.push(0.0);
            let mut acc = 0.0;
            for &v in w {
                acc += v;
                prefix.push(acc);
            }
            let total = prefix[n];
            let offset = m as f64 / n as f64 * total;
            let blocks: Vec<f64> = (0..q).map(|j| prefix[j + m] - prefix[j] - offset).collect();
            centered.push(blocks);
        }
        Ok(BlockSums {
            centered,
            n,
            m,
            norm: 1.0 / ((m * q) as f64).sqrt(),
        })
    }

    /// Number of path points `n - m + 1`.
    pub fn path_len(&self) -> usize {
        self.n - self.m + 1
    }

    pub fn window(&self) -> usize {
        self.m
    }

    /// The multiplier path `Phi_{i,m}`, `i = 1..n-m+1`, one vector per lag.
    pub fn paths(&self, multipliers: &[f64]) -> Vec<Vec<f64>> {
        let q = self.path_len();
        assert_eq!(multipliers.len(), q, "need one multiplier per block");
        self.centered
            .iter()
            .map(|blocks| {
                let mut acc = 0.0;
                blocks
                    .iter()
                    .zip(multipliers)
                    .map(|(c, r)| {
                        acc += c * r;
                        acc * self.norm
                    })
                    .collect()
            })
            .collect()
    }

    fn max_range(&self) -> Result<std::ops::RangeInclusive<usize>> {
        let q = self.path_len();
        if self.m + 1 > q {
            return Err(Error::WindowTooLarge {
                m: self.m,
                n: self.n,
            });
        }
        Ok(self.m + 1..=q)
    }

    /// One bootstrap replication of the constant-correlation statistic:
    /// `max_{m+1<=i<=n-m+1} |Phi_i - i/(n-m+1) Phi_{n-m+1}|`.
    pub fn replicate_constant(&self, multipliers: &[f64]) -> Result<f64> {
        let range = self.max_range()?;
        let q = self.path_len();
        let l = self.centered.len();
        // Endpoint of each lag's path, needed for the centering term.
        let ends: Vec<f64> = self
            .centered
            .iter()
            .map(|blocks| {
                blocks
                    .iter()
                    .zip(multipliers)
                    .map(|(c, r)| c * r)
                    .sum::<f64>()
                    * self.norm
            })
            .collect();
        let mut acc = vec![0.0; l];
        let mut best = 0.0f64;
        for i in 1..=q {
            let frac = i as f64 / q as f64;
            let mut sq = 0.0;
            for s in 0..l {
                acc[s] += self.centered[s][i - 1] * multipliers[i - 1];
                let dev = acc[s] * self.norm - frac * ends[s];
                sq += dev * dev;
            }
            if range.contains(&i) {
                best = best.max(sq.sqrt());
            }
        }
        Ok(best)
    }

    /// One bootstrap replication of the zero-correlation statistic:
    /// `max_{m+1<=i<=n-m+1} |Phi_i|`.
    pub fn replicate_zero(&self, multipliers: &[f64]) -> Result<f64> {
        let range = self.max_range()?;
        let q = self.path_len();
        let l = self.centered.len();
        let mut acc = vec![0.0; l];
        let mut best = 0.0f64;
        for i in 1..=q {
            let mut sq = 0.0;
            for s in 0..l {
                acc[s] += self.centered[s][i - 1] * multipliers[i - 1];
                let phi = acc[s] * self.norm;
                sq += phi * phi;
            }
            if range.contains(&i) {
                best = best.max(sq.sqrt());
            }
        }
        Ok(best)
    }
}

/// Multiplier paths for an explicit window (one vector per lag); thin
/// wrapper over [`BlockSums::paths`].
pub fn bootstrap_paths(
    products: &[Vec<f64>],
    m: usize,
    multipliers: &[f64],
) -> Result<Vec<Vec<f64>>> {
    let blocks = BlockSums::new(products, m)?;
    if multipliers.len() != blocks.path_len() {
        return Err(Error::InvalidConfig(format!(
            "expected {} multipliers, got {}",
            blocks.path_len(),
            multipliers.len()
        )));
    }
    Ok(blocks.paths(multipliers))
}

/// Bootstrap scale and decision parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    /// Number of bootstrap replications B.
    pub replications: usize,
    /// Block window: fixed or selected by minimal volatility.
    pub window: WindowSelect,
    pub seed: u64,
    /// Test level.
    pub alpha: f64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            replications: 2000,
            window: WindowSelect::Auto,
            seed: 0,
            alpha: 0.05,
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.replications < 100 {
            return Err(Error::InvalidConfig(format!(
                "need at least 100 bootstrap replications, got {}",
                self.replications
            )));
        }
        if !(self.alpha > 0.0 && self.alpha <= 0.5) {
            return Err(Error::InvalidConfig(format!(
                "alpha must lie in (0, 0.5], got {}",
                self.alpha
            )));
        }
        if let WindowSelect::Fixed(m) = self.window {
            if m < 2 || 2 * m > n {
                return Err(Error::InvalidConfig(format!(
                    "window m = {m} must satisfy 2 <= m <= n/2 = {}",
                    n / 2
                )));
            }
        }
        Ok(())
    }
}

/// Order statistics, critical value and p-value of a bootstrap sample.
pub(crate) struct BootstrapDecision {
    pub critical_value: f64,
    pub p_value: f64,
    pub reject: bool,
}

/// Decision rule shared by all tests: reject when the statistic strictly
/// exceeds the `floor(B(1-alpha))`-th order statistic; the p-value is
/// `1 - B*/B` with `B* = #{r : M_(r) <= statistic}`.
pub(crate) fn bootstrap_decision(sample: &[f64], statistic: f64, alpha: f64) -> BootstrapDecision {
    let b = sample.len();
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((b as f64) * (1.0 - alpha)).floor() as usize;
    let critical_value = sorted[rank.clamp(1, b) - 1];
    let b_star = sorted.partition_point(|x| *x <= statistic);
    BootstrapDecision {
        critical_value,
        p_value: 1.0 - b_star as f64 / b as f64,
        reject: statistic > critical_value,
    }
}

/// Full report of a classical (or zero-correlation) test run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassicalTestReport {
    pub mode: TestMode,
    pub n: usize,
    /// `T_n / sqrt(n)`.
    pub statistic: f64,
    pub critical_value: f64,
    pub p_value: f64,
    pub reject: bool,
    pub alpha: f64,
    /// Bootstrap sample in replication order.
    pub bootstrap_sample: Vec<f64>,
    pub tuning: ResolvedTuning,
    pub warnings: Vec<String>,
    pub manifest: RunManifest,
}

/// Minimum length accepted by the test runners.
pub const HARD_MIN_LENGTH: usize = 100;
/// Length below which a warning is attached to the report.
pub const RECOMMENDED_MIN_LENGTH: usize = 300;

pub(crate) fn length_warnings(n: usize) -> Result<Vec<String>> {
    if n < HARD_MIN_LENGTH {
        return Err(Error::InsufficientLength {
            n,
            min: HARD_MIN_LENGTH,
        });
    }
    let mut warnings = Vec::new();
    if n < RECOMMENDED_MIN_LENGTH {
        warnings.push(format!(
            "series length {n} is below the recommended {RECOMMENDED_MIN_LENGTH}; \
             bootstrap approximations may be unstable"
        ));
    }
    Ok(warnings)
}

/// Run the classical change point test (or its zero-correlation variant).
///
/// Pipeline: fit the mean, estimate/fit the variance, form standardized lag
/// products, compute the CUSUM statistic, and calibrate it against `B`
/// multiplier bootstrap replications.
pub fn run_classical_test(
    series: &Series,
    lags: &LagSet,
    tuning: &Tuning,
    boot: &BootstrapConfig,
    mode: TestMode,
    input: InputProvenance,
) -> Result<ClassicalTestReport> {
    let n = series.len();
    let warnings = length_warnings(n)?;
    boot.validate(n)?;

    let prep = prepare(series, lags, tuning)?;
    let m = resolve_window(&prep.products, &tuning.mv, &boot.window, boot.seed)?;
    let blocks = BlockSums::new(&prep.products, m)?;

    let raw = match mode {
        TestMode::ConstantCorrelation => cusum_statistic(&prep.products),
        TestMode::ZeroCorrelation => zero_statistic(&prep.products),
    };
    let statistic = raw / (n as f64).sqrt();

    let q = blocks.path_len();
    let sample: Vec<f64> = (0..boot.replications)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(boot.seed, streams::BOOTSTRAP + r as u64);
            let mut multipliers = vec![0.0; q];
            fill_standard_normal(&mut rng, &mut multipliers);
            match mode {
                TestMode::ConstantCorrelation => blocks.replicate_constant(&multipliers),
                TestMode::ZeroCorrelation => blocks.replicate_zero(&multipliers),
            }
        })
        .collect::<Result<Vec<f64>>>()?;

    let decision = bootstrap_decision(&sample, statistic, boot.alpha);
    let manifest = RunManifest::new(
        match mode {
            TestMode::ConstantCorrelation => "detect",
            TestMode::ZeroCorrelation => "detect --zero-test",
        },
        input,
        n,
        lags.lags().to_vec(),
        tuning.clone(),
        boot.clone(),
    );
    Ok(ClassicalTestReport {
        mode,
        n,
        statistic,
        critical_value: decision.critical_value,
        p_value: decision.p_value,
        reject: decision.reject,
        alpha: boot.alpha,
        bootstrap_sample: sample,
        tuning: prep.resolved_tuning(m, boot),
        warnings,
        manifest,
    })
}
