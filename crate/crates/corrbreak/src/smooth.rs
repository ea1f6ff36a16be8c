//! Local linear estimation of the mean and variance curves.
//!
//! Every fit solves, at each evaluation time `t`, the weighted least-squares
//! problem `argmin_{b0,b1} sum_i (y_i - b0 - b1 (t_i - t))^2 K((t_i - t)/h)`
//! in closed form from the 2x2 normal equations. The variance curve is fit
//! on squared residuals, either globally or spliced at a break index with a
//! separate fit on each side.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::series::Series;

/// Default candidate grid for generalized cross validation.
pub const DEFAULT_BANDWIDTH_GRID: [f64; 10] =
    [0.075, 0.1, 0.125, 0.15, 0.175, 0.2, 0.225, 0.25, 0.275, 0.3];

/// Bandwidth choice for a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Bandwidth {
    /// Select by GCV over [`DEFAULT_BANDWIDTH_GRID`].
    Auto,
    /// Select by GCV over an explicit candidate grid.
    AutoGrid(Vec<f64>),
    Fixed(f64),
}

/// Local linear fit of the mean curve plus the residuals it leaves behind.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeanFit {
    /// Fitted level at each grid point.
    pub level: Vec<f64>,
    /// Fitted slope at each grid point.
    pub slope: Vec<f64>,
    /// `y_i - level_i`.
    pub residuals: Vec<f64>,
    /// Bandwidth actually used.
    pub bandwidth: f64,
}

/// Piecewise (or global) local linear fit of the variance curve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VarianceFit {
    /// Fitted variance at each grid point, clamped at `floor`.
    pub curve: Vec<f64>,
    /// 1-based split index: the left fit covers `i <= k`, the right `i > k`.
    pub break_index: Option<usize>,
    /// Bandwidth actually used.
    pub bandwidth: f64,
    /// Positivity floor applied to the curve.
    pub floor: f64,
}

struct PointFit {
    level: f64,
    slope: f64,
    hat_diag: f64,
}

/// Weighted linear fit at a single evaluation time over `times[lo..hi)`.
///
/// `self_idx` is the design index equal to the evaluation point (for the hat
/// diagonal); the window is assumed to contain it.
fn fit_at(
    times: &[f64],
    values: &[f64],
    lo: usize,
    hi: usize,
    t: f64,
    bandwidth: f64,
    kernel: KernelSpec,
) -> Result<PointFit> {
    let mut s0 = 0.0;
    let mut s1 = 0.0;
    let mut s2 = 0.0;
    let mut v0 = 0.0;
    let mut v1 = 0.0;
    let mut in_window = 0usize;
    for j in lo..hi {
        let dx = times[j] - t;
        let w = kernel.evaluate(dx / bandwidth);
        if w > 0.0 {
            in_window += 1;
        }
        s0 += w;
        s1 += w * dx;
        let wdx = w * dx;
        s2 += wdx * dx;
        v0 += w * values[j];
        v1 += wdx * values[j];
    }
    if in_window < 2 {
        return Err(Error::BandwidthTooSmall {
            bandwidth,
            reason: format!("fewer than 2 design points receive weight at t = {t}"),
        });
    }
    let det = s0 * s2 - s1 * s1;
    if !(det.is_finite() && det > 0.0) {
        return Err(Error::BandwidthTooSmall {
            bandwidth,
            reason: format!("singular weighted normal matrix at t = {t}"),
        });
    }
    Ok(PointFit {
        level: (s2 * v0 - s1 * v1) / det,
        slope: (s0 * v1 - s1 * v0) / det,
        hat_diag: kernel.evaluate(0.0) * s2 / det,
    })
}

/// Local linear fit over a design segment, evaluated at every design point.
///
/// Returns (level, slope, hat diagonal) vectors of the segment's length.
fn fit_segment(
    times: &[f64],
    values: &[f64],
    bandwidth: f64,
    kernel: KernelSpec,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let n = times.len();
    let mut level = Vec::with_capacity(n);
    let mut slope = Vec::with_capacity(n);
    let mut hat = Vec::with_capacity(n);
    let mut lo = 0usize;
    let mut hi = 0usize;
    for i in 0..n {
        let t = times[i];
        while lo < n && times[lo] <= t - bandwidth {
            lo += 1;
        }
        if hi < lo {
            hi = lo;
        }
        while hi < n && times[hi] < t + bandwidth {
            hi += 1;
        }
        let fit = fit_at(times, values, lo, hi, t, bandwidth, kernel)?;
        level.push(fit.level);
        slope.push(fit.slope);
        hat.push(fit.hat_diag);
    }
    Ok((level, slope, hat))
}

/// Local linear fit of `values` on the grid `t_i = i/n`, evaluated at every
/// grid point. Returns the level and slope curves.
pub fn local_linear(
    values: &[f64],
    bandwidth: f64,
    kernel: KernelSpec,
) -> Result<(Vec<f64>, Vec<f64>)> {
    validate_bandwidth(bandwidth)?;
    let times = unit_grid(values.len());
    let (level, slope, _) = fit_segment(&times, values, bandwidth, kernel)?;
    Ok((level, slope))
}

fn unit_grid(n: usize) -> Vec<f64> {
    (1..=n).map(|i| i as f64 / n as f64).collect()
}

fn validate_bandwidth(bandwidth: f64) -> Result<()> {
    if !(bandwidth.is_finite() && bandwidth > 0.0 && bandwidth <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "bandwidth must lie in (0, 1], got {bandwidth}"
        )));
    }
    Ok(())
}

/// GCV objective for one bandwidth: `(RSS/n) / (1 - tr(H)/n)^2`.
///
/// Returns `None` when the candidate is infeasible (singular window or a
/// hat trace that exhausts the degrees of freedom).
pub fn gcv_score(values: &[f64], bandwidth: f64, kernel: KernelSpec) -> Option<f64> {
    let times = unit_grid(values.len());
    gcv_score_segment(&times, values, bandwidth, kernel)
}

fn gcv_score_segment(
    times: &[f64],
    values: &[f64],
    bandwidth: f64,
    kernel: KernelSpec,
) -> Option<f64> {
    let n = values.len() as f64;
    let (level, _, hat) = fit_segment(times, values, bandwidth, kernel).ok()?;
    let rss: f64 = values
        .iter()
        .zip(&level)
        .map(|(y, f)| (y - f) * (y - f))
        .sum();
    let trace: f64 = hat.iter().sum();
    let denom = 1.0 - trace / n;
    if denom <= 1e-10 {
        return None;
    }
    Some((rss / n) / (denom * denom))
}

/// Pick the GCV-minimizing bandwidth from `grid`; ties go to the smaller one.
pub fn gcv_bandwidth(series: &Series, kernel: KernelSpec, grid: &[f64]) -> Result<f64> {
    select_gcv(grid, |b| gcv_score(series.values(), b, kernel))
}

fn select_gcv(grid: &[f64], mut score: impl FnMut(f64) -> Option<f64>) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let mut candidates: Vec<f64> = grid.to_vec();
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    for &b in &candidates {
        if !(b > 0.0 && b <= 0.5) {
            return Err(Error::InvalidConfig(format!(
                "GCV candidate bandwidth must lie in (0, 0.5], got {b}"
            )));
        }
    }
    let mut best: Option<(f64, f64)> = None;
    for &b in &candidates {
        if let Some(s) = score(b) {
            match best {
                Some((_, s_best)) if s >= s_best => {}
                _ => best = Some((b, s)),
            }
        }
    }
    best.map(|(b, _)| b)
        .ok_or_else(|| Error::AllInfeasible("every candidate bandwidth failed".into()))
}

/// Fit the mean curve and return it with its residuals.
pub fn fit_mean(series: &Series, bandwidth: &Bandwidth, kernel: KernelSpec) -> Result<MeanFit> {
    let b = match bandwidth {
        Bandwidth::Fixed(b) => *b,
        Bandwidth::Auto => gcv_bandwidth(series, kernel, &DEFAULT_BANDWIDTH_GRID)?,
        Bandwidth::AutoGrid(grid) => gcv_bandwidth(series, kernel, grid)?,
    };
    let (level, slope) = local_linear(series.values(), b, kernel)?;
    let residuals = series
        .values()
        .iter()
        .zip(&level)
        .map(|(y, f)| y - f)
        .collect();
    Ok(MeanFit {
        level,
        slope,
        residuals,
        bandwidth: b,
    })
}

/// Points each side of a split must contain to support bandwidth `c`.
fn side_floor(c: f64, n: usize) -> usize {
    (2.0 * c * n as f64).ceil() as usize
}

fn check_sides(n: usize, k: usize, c: f64) -> Result<()> {
    let needed = side_floor(c, n);
    let (left, right) = (k, n - k);
    for len in [left, right] {
        if len < needed {
            return Err(Error::SideTooShort {
                len,
                bandwidth: c,
                needed,
            });
        }
    }
    Ok(())
}

/// GCV objective of the spliced variance smoother for one bandwidth.
fn gcv_score_variance(
    times: &[f64],
    sq: &[f64],
    bandwidth: f64,
    break_index: Option<usize>,
    kernel: KernelSpec,
) -> Option<f64> {
    let n = sq.len() as f64;
    let (rss, trace) = match break_index {
        None => {
            let (level, _, hat) = fit_segment(times, sq, bandwidth, kernel).ok()?;
            let rss = sq
                .iter()
                .zip(&level)
                .map(|(y, f)| (y - f) * (y - f))
                .sum::<f64>();
            (rss, hat.iter().sum::<f64>())
        }
        Some(k) => {
            let (ll, _, hl) = fit_segment(&times[..k], &sq[..k], bandwidth, kernel).ok()?;
            let (lr, _, hr) = fit_segment(&times[k..], &sq[k..], bandwidth, kernel).ok()?;
            let rss = sq[..k]
                .iter()
                .zip(&ll)
                .chain(sq[k..].iter().zip(&lr))
                .map(|(y, f)| (y - f) * (y - f))
                .sum::<f64>();
            (rss, hl.iter().sum::<f64>() + hr.iter().sum::<f64>())
        }
    };
    let denom = 1.0 - trace / n;
    if denom <= 1e-10 {
        return None;
    }
    Some((rss / n) / (denom * denom))
}

/// Fit the variance curve from residuals.
///
/// Squares the residuals and fits them by local linear regression: one
/// global fit when `break_index` is `None`, otherwise separate fits over
/// `i <= k` and `i > k` spliced at `t = k/n`. The curve is clamped below at
/// `1e-8 * var(residuals)` so it can safely standardize lag products.
pub fn fit_variance(
    residuals: &[f64],
    bandwidth: &Bandwidth,
    break_index: Option<usize>,
    kernel: KernelSpec,
) -> Result<VarianceFit> {
    let n = residuals.len();
    if n < 2 {
        return Err(Error::SeriesTooShort {
            n,
            reason: "variance fit needs at least two residuals".into(),
        });
    }
    if let Some(k) = break_index {
        if k < 1 || k > n - 1 {
            return Err(Error::IndexOutOfRange {
                index: k,
                lo: 1,
                hi: n - 1,
            });
        }
    }
    let times = unit_grid(n);
    let sq: Vec<f64> = residuals.iter().map(|e| e * e).collect();

    let c = match bandwidth {
        Bandwidth::Fixed(c) => {
            validate_bandwidth(*c)?;
            if let Some(k) = break_index {
                check_sides(n, k, *c)?;
            }
            *c
        }
        auto => {
            let grid: Vec<f64> = match auto {
                Bandwidth::AutoGrid(g) => g.clone(),
                _ => DEFAULT_BANDWIDTH_GRID.to_vec(),
            };
            // Keep only candidates every side can support.
            let feasible: Vec<f64> = grid
                .iter()
                .copied()
                .filter(|&c| match break_index {
                    Some(k) => k >= side_floor(c, n) && n - k >= side_floor(c, n),
                    None => n >= side_floor(c, n),
                })
                .collect();
            if feasible.is_empty() {
                return Err(Error::AllInfeasible(
                    "no variance bandwidth candidate fits both sides of the split".into(),
                ));
            }
            select_gcv(&feasible, |c| {
                gcv_score_variance(&times, &sq, c, break_index, kernel)
            })?
        }
    };

    let level = match break_index {
        None => fit_segment(&times, &sq, c, kernel)?.0,
        Some(k) => {
            let (mut left, _, _) = fit_segment(&times[..k], &sq[..k], c, kernel)?;
            let (right, _, _) = fit_segment(&times[k..], &sq[k..], c, kernel)?;
            left.extend(right);
            left
        }
    };

    let mean = residuals.iter().sum::<f64>() / n as f64;
    let var = residuals.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / n as f64;
    let floor = (1e-8 * var).max(f64::MIN_POSITIVE);
    let curve = level.iter().map(|v| v.max(floor)).collect();
    Ok(VarianceFit {
        curve,
        break_index,
        bandwidth: c,
        floor,
    })
}
