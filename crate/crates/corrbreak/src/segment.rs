//! Multiple change points: binary segmentation over the classical test,
//! then relevant tests on every pair of consecutive intervals.

use serde::{Deserialize, Serialize};

use crate::classical::{run_classical_test, BootstrapConfig, LagSet, TestMode};
use crate::error::{Error, Result};
use crate::pipeline::{prepare, Tuning};
use crate::relevant::{run_relevant_test, RelevantConfig, RelevantTestReport};
use crate::report::{InputProvenance, RunManifest};
use crate::rng::derive_seed;
use crate::series::Series;

/// A break found by binary segmentation, in global coordinates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SegmentBreak {
    /// Global rescaled time of the split.
    pub time: f64,
    /// Global 1-based index of the split (last point of the left part).
    pub index: usize,
    /// p-value of the classical test on the segment that got split.
    pub p_value: f64,
}

/// Output of [`binary_segment`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SegmentationReport {
    pub breaks: Vec<SegmentBreak>,
    /// Number of classical tests run over all segments.
    pub tests_run: usize,
    /// p-values are per segment and unadjusted for the recursive search.
    pub caveat: String,
    pub manifest: RunManifest,
}

/// Recursively split the series at detected correlation breaks.
///
/// Each segment is refit from scratch and tested at level `alpha`; on
/// rejection the segment splits at the argmax of the first lag's CUSUM
/// process and both halves recurse. Segments shorter than `min_len` (or
/// twice it, for a split to make sense) are left alone.
pub fn binary_segment(
    series: &Series,
    lags: &LagSet,
    tuning: &Tuning,
    boot: &BootstrapConfig,
    min_len: usize,
    input: InputProvenance,
) -> Result<SegmentationReport> {
    if min_len < 100 {
        return Err(Error::InvalidConfig(format!(
            "minimum segment length must be at least 100, got {min_len}"
        )));
    }
    let n = series.len();
    let mut breaks: Vec<SegmentBreak> = Vec::new();
    let mut tests_run = 0usize;
    split(
        series, lags, tuning, boot, min_len, 0, n, &mut breaks, &mut tests_run,
    )?;
    breaks.sort_by(|a, b| a.index.cmp(&b.index));
    let manifest = RunManifest::new(
        "segment",
        input,
        n,
        lags.lags().to_vec(),
        tuning.clone(),
        boot.clone(),
    )
    .with_min_segment(min_len);
    Ok(SegmentationReport {
        breaks,
        tests_run,
        caveat: "segment p-values are unadjusted for the recursive search".into(),
        manifest,
    })
}

/// Test the half-open index range `(lo, hi]`; push any split found.
#[allow(clippy::too_many_arguments)]
fn split(
    series: &Series,
    lags: &LagSet,
    tuning: &Tuning,
    boot: &BootstrapConfig,
    min_len: usize,
    lo: usize,
    hi: usize,
    breaks: &mut Vec<SegmentBreak>,
    tests_run: &mut usize,
) -> Result<()> {
    let len = hi - lo;
    if len < 2 * min_len {
        return Ok(());
    }
    let sub = Series::new(series.values()[lo..hi].to_vec())?;
    // Independent seed per segment so sibling tests do not share draws.
    let seg_seed = derive_seed(boot.seed, ((lo as u64) << 32) | hi as u64);
    let seg_boot = BootstrapConfig {
        seed: seg_seed,
        ..boot.clone()
    };
    let report = run_classical_test(
        &sub,
        lags,
        tuning,
        &seg_boot,
        TestMode::ConstantCorrelation,
        InputProvenance::inline(&sub),
    )?;
    *tests_run += 1;
    if !report.reject {
        return Ok(());
    }

    // Split at the first lag's CUSUM argmax, computed on the segment.
    let prep = prepare(&sub, lags, tuning)?;
    let (_, local_idx) = crate::relevant::estimate_correlation_break(&prep.products[0]);
    let global_idx = lo + local_idx;
    // A split flush against either edge cannot produce two viable halves.
    if local_idx < min_len || len - local_idx < min_len {
        return Ok(());
    }
    breaks.push(SegmentBreak {
        time: global_idx as f64 / series.len() as f64,
        index: global_idx,
        p_value: report.p_value,
    });
    split(
        series, lags, tuning, boot, min_len, lo, global_idx, breaks, tests_run,
    )?;
    split(
        series, lags, tuning, boot, min_len, global_idx, hi, breaks, tests_run,
    )?;
    Ok(())
}

/// Outcome of one pairwise relevant test, or the reason it was skipped.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairwiseOutcome {
    /// Half-open global index range `(lo, hi]` of the pair of intervals.
    pub lo: usize,
    pub hi: usize,
    pub report: Option<RelevantTestReport>,
    pub skipped: Option<String>,
}

/// Run the relevant test on every pair of consecutive intervals implied by
/// the breaks: with breaks `t_1 < ... < t_s` (plus the endpoints), pair `l`
/// covers `(t_l, t_{l+2}]`.
pub fn pairwise_relevant(
    series: &Series,
    breaks: &[SegmentBreak],
    lags: &LagSet,
    config: &RelevantConfig,
    tuning: &Tuning,
    boot: &BootstrapConfig,
) -> Result<Vec<PairwiseOutcome>> {
    let n = series.len();
    let mut edges = Vec::with_capacity(breaks.len() + 2);
    edges.push(0usize);
    edges.extend(breaks.iter().map(|b| b.index));
    edges.push(n);

    let mut outcomes = Vec::new();
    for window in edges.windows(3) {
        let (lo, hi) = (window[0], window[2]);
        if hi - lo < 100 {
            outcomes.push(PairwiseOutcome {
                lo,
                hi,
                report: None,
                skipped: Some(format!("pair of {} points is below the 100-point floor", hi - lo)),
            });
            continue;
        }
        let sub = Series::new(series.values()[lo..hi].to_vec())?;
        let pair_boot = BootstrapConfig {
            seed: derive_seed(boot.seed, 0x7061_0000 ^ (((lo as u64) << 32) | hi as u64)),
            ..boot.clone()
        };
        let report = run_relevant_test(
            &sub,
            lags,
            config,
            tuning,
            &pair_boot,
            InputProvenance::inline(&sub),
        )?;
        outcomes.push(PairwiseOutcome {
            lo,
            hi,
            report: Some(report),
            skipped: None,
        });
    }
    Ok(outcomes)
}
