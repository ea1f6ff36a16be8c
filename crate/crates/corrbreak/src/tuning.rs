//! Data-driven selection of the bootstrap block window by minimal
//! volatility: probe each candidate window with a short bootstrap, record a
//! high quantile of the replicated statistic, and pick the window whose
//! quantile is most stable across its neighbors.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classical::BlockSums;
use crate::error::{Error, Result};
use crate::rng::{fill_standard_normal, stream_rng, streams};

/// Fixed window or minimal-volatility selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum WindowSelect {
    #[default]
    Auto,
    Fixed(usize),
}

/// Tuning of the minimal volatility probe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MvConfig {
    /// Candidate windows; `None` uses integers nearest `n^(1/3) j/2`,
    /// `j = 1..8`, deduplicated and clipped to `[2, n/2]`.
    pub grid: Option<Vec<usize>>,
    /// Neighborhood half-width for the volatility criterion.
    pub half_width: usize,
    /// Quantile of the probe bootstrap that gets tracked.
    pub probe_level: f64,
    /// Bootstrap replications per candidate.
    pub probe_replications: usize,
}

impl Default for MvConfig {
    fn default() -> Self {
        MvConfig {
            grid: None,
            half_width: 1,
            probe_level: 0.95,
            probe_replications: 200,
        }
    }
}

/// Default candidate grid for a series of length `n`.
pub fn default_window_grid(n: usize) -> Vec<usize> {
    let root = (n as f64).powf(1.0 / 3.0);
    let mut grid: Vec<usize> = (1..=8)
        .map(|j| (root * j as f64 / 2.0).round() as usize)
        .map(|m| m.clamp(2, (n / 2).max(2)))
        .collect();
    grid.sort_unstable();
    grid.dedup();
    grid
}

/// Hard cap keeping the selected window small relative to `sqrt(n)`.
pub fn window_cap(n: usize) -> usize {
    (((n as f64).sqrt() / 2.0).floor() as usize).max(2)
}

/// Select the bootstrap window by minimal volatility.
///
/// For each candidate `m_j` the probe quantile `v(m_j)` is the
/// `probe_level` order statistic of `probe_replications` constant-mode
/// bootstrap replications. The winner minimizes the sample standard
/// deviation of `{v(m_{j-h}), ..., v(m_{j+h})}` over interior candidates,
/// ties to the smaller window; the result is clipped at [`window_cap`].
pub fn select_window_mv(products: &[Vec<f64>], config: &MvConfig, seed: u64) -> Result<usize> {
    let n = products[0].len();
    let mut grid = match &config.grid {
        Some(g) => g.clone(),
        None => default_window_grid(n),
    };
    grid.sort_unstable();
    grid.dedup();
    grid.retain(|&m| m >= 2 && 2 * m <= n);
    let h = config.half_width.max(1);
    if grid.len() < 2 * h + 1 {
        return Err(Error::GridTooSmall(format!(
            "{} candidates cannot support half-width {h}",
            grid.len()
        )));
    }
    if !(config.probe_level > 0.5 && config.probe_level < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "probe level must lie in (0.5, 1), got {}",
            config.probe_level
        )));
    }

    let quantiles: Vec<f64> = grid
        .iter()
        .enumerate()
        .map(|(c, &m)| probe_quantile(products, m, config, seed, c as u64))
        .collect::<Result<Vec<f64>>>()?;

    let mut best: Option<(usize, f64)> = None;
    for j in h..grid.len() - h {
        let window = &quantiles[j - h..=j + h];
        let vol = sample_sd(window);
        match best {
            Some((_, v)) if vol >= v => {}
            _ => best = Some((grid[j], vol)),
        }
    }
    let (selected, _) = best.expect("interior candidates exist");
    Ok(selected.min(window_cap(n)))
}

fn probe_quantile(
    products: &[Vec<f64>],
    m: usize,
    config: &MvConfig,
    seed: u64,
    candidate: u64,
) -> Result<f64> {
    let blocks = BlockSums::new(products, m)?;
    let q = blocks.path_len();
    let reps = config.probe_replications;
    let mut sample: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(seed, streams::MV_PROBE + (candidate << 20) + r as u64);
            let mut multipliers = vec![0.0; q];
            fill_standard_normal(&mut rng, &mut multipliers);
            blocks.replicate_constant(&multipliers)
        })
        .collect::<Result<Vec<f64>>>()?;
    sample.sort_by(f64::total_cmp);
    let rank = ((reps as f64) * config.probe_level).floor() as usize;
    Ok(sample[rank.clamp(1, reps) - 1])
}

fn sample_sd(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    var.sqrt()
}

/// Resolve a [`WindowSelect`] into a concrete window for these products.
pub fn resolve_window(
    products: &[Vec<f64>],
    config: &MvConfig,
    select: &WindowSelect,
    seed: u64,
) -> Result<usize> {
    match select {
        WindowSelect::Fixed(m) => Ok(*m),
        WindowSelect::Auto => select_window_mv(products, config, crate::rng::derive_seed(seed, 0x4d56)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{derive_seed, standard_normal, stream_rng};
    use crate::series::lag_products;
    use crate::simulate::{quadratic_mean, simulate, PlsModel};

    #[test]
    fn default_grid_shape() {
        // n = 500: nearest integers of 7.937 * j/2 are 4, 8, 12, 16, 20, 24, 28, 32.
        assert_eq!(default_window_grid(500), vec![4, 8, 12, 16, 20, 24, 28, 32]);
        assert_eq!(window_cap(500), 11);
    }

    #[test]
    fn grid_of_three_returns_middle_candidate() {
        let products = vec![vec![0.5, -0.3, 0.8, 0.1, -0.6, 0.4, 0.2, -0.1, 0.9, -0.4].repeat(40)];
        let config = MvConfig {
            grid: Some(vec![3, 7, 12]),
            probe_replications: 50,
            ..MvConfig::default()
        };
        let m = select_window_mv(&products, &config, 1).unwrap();
        assert_eq!(m, 7);
    }

    #[test]
    fn zero_products_tie_to_smallest_interior_candidate() {
        let products = vec![vec![0.0; 400]];
        let config = MvConfig {
            grid: Some(vec![3, 5, 9, 13, 17]),
            probe_replications: 50,
            ..MvConfig::default()
        };
        let m = select_window_mv(&products, &config, 9).unwrap();
        assert_eq!(m, 5);
    }

    #[test]
    fn too_small_grid_is_rejected() {
        let products = vec![vec![1.0; 40]];
        let config = MvConfig {
            grid: Some(vec![4, 8]),
            ..MvConfig::default()
        };
        assert!(matches!(
            select_window_mv(&products, &config, 0),
            Err(Error::GridTooSmall(_))
        ));
    }

    #[test]
    fn selection_is_deterministic() {
        let mut rng = stream_rng(3, 0);
        let products = vec![(0..300).map(|_| standard_normal(&mut rng)).collect::<Vec<f64>>()];
        let config = MvConfig::default();
        let a = select_window_mv(&products, &config, 42).unwrap();
        let b = select_window_mv(&products, &config, 42).unwrap();
        assert_eq!(a, b);
    }

    // Selected windows should sit in the plausible band [n^(1/3)/2, 3 n^(1/3)]
    // on the constant-correlation model.
    #[test]
    fn selected_window_stays_in_plausible_band() {
        let n = 500;
        let reps = 100;
        let lo = (n as f64).powf(1.0 / 3.0) / 2.0;
        let hi = 3.0 * (n as f64).powf(1.0 / 3.0);
        let mut in_band = 0;
        for r in 0..reps {
            let series = simulate(PlsModel::I, n, derive_seed(7272, r)).unwrap();
            let resid: Vec<f64> = series
                .values()
                .iter()
                .enumerate()
                .map(|(i, y)| y - quadratic_mean((i + 1) as f64 / n as f64))
                .collect();
            let var = vec![0.25; n];
            let products = vec![lag_products(&resid, &var, 1).unwrap()];
            let config = MvConfig {
                probe_replications: 100,
                ..MvConfig::default()
            };
            let m = select_window_mv(&products, &config, derive_seed(99, r)).unwrap() as f64;
            if m >= lo && m <= hi {
                in_band += 1;
            }
        }
        assert!(in_band >= 90, "in band {in_band}/{reps}");
    }
}
