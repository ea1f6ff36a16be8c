//! Monte Carlo harness reproducing the reference simulation studies at desk
//! scale (defaults: 500 replications, 500 bootstrap draws, n = 500).
//!
//! Experiment ids:
//! - `table1`: classical-test level for models I, II, IIt and the two-lag
//!   variant of II, over a bandwidth sweep plus GCV.
//! - `table2`: relevant-test level at the boundary of the null for models
//!   III, IIIt, the two-lag variant of III, and IV.
//! - `table3`: models II (classical) and III (relevant) rerun with centered
//!   chi-square innovations.
//! - `fig2`: relevant-test rejection on model III as a function of the
//!   threshold.
//! - `fig3`: classical-test power on model I' as a function of the
//!   coefficient jump.
//! - `robustness`: models II0 and III0, which drift outside the modeled
//!   class.

use rayon::prelude::*;
use serde::Serialize;

use crate::classical::{run_classical_test, BootstrapConfig, LagSet, TestMode};
use crate::error::{Error, Result};
use crate::pipeline::{prepare, Tuning};
use crate::relevant::{build_scaffold, run_relevant_test, BiasCorrect, RelevantConfig};
use crate::report::InputProvenance;
use crate::rng::derive_seed;
use crate::simulate::{simulate, simulate_with_dist, InnovationDist, PlsModel};
use crate::smooth::Bandwidth;
use crate::tuning::resolve_window;

/// Replication counts for a harness run.
#[derive(Debug, Clone, Copy)]
pub struct DeskScale {
    pub replications: usize,
    pub bootstrap: usize,
    pub n: usize,
    pub seed: u64,
}

impl Default for DeskScale {
    fn default() -> Self {
        DeskScale {
            replications: 500,
            bootstrap: 500,
            n: 500,
            seed: 20_240_501,
        }
    }
}

/// One cell of an experiment table.
#[derive(Debug, Clone, Serialize)]
pub struct CellRow {
    pub experiment: String,
    pub model: String,
    pub test: String,
    pub lags: String,
    /// `gcv` or the fixed bandwidth.
    pub bandwidth: String,
    /// Sweep parameter name (empty when not applicable).
    pub parameter: String,
    pub value: String,
    pub alpha: f64,
    pub rejection: f64,
    pub mc_se: f64,
    pub replications: usize,
    pub bootstrap: usize,
    pub seed: u64,
}

/// Serialize rows as CSV (deterministic for a fixed seed).
pub fn to_csv(rows: &[CellRow]) -> String {
    let mut out = String::from(
        "experiment,model,test,lags,bandwidth,parameter,value,alpha,rejection,mc_se,replications,bootstrap,seed\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.experiment,
            r.model,
            r.test,
            r.lags,
            r.bandwidth,
            r.parameter,
            r.value,
            r.alpha,
            r.rejection,
            r.mc_se,
            r.replications,
            r.bootstrap,
            r.seed
        ));
    }
    out
}

fn lag_label(lags: &[usize]) -> String {
    lags.iter()
        .map(|l| l.to_string())
        .collect::<Vec<_>>()
        .join("+")
}

fn tuning_for(bandwidth: Option<f64>) -> Tuning {
    Tuning {
        mean_bandwidth: match bandwidth {
            Some(b) => Bandwidth::Fixed(b),
            None => Bandwidth::Auto,
        },
        ..Tuning::default()
    }
}

fn simulate_model(
    model: PlsModel,
    dist: Option<InnovationDist>,
    n: usize,
    seed: u64,
) -> Result<crate::series::Series> {
    match dist {
        Some(d) => simulate_with_dist(model, n, seed, d),
        None => simulate(model, n, seed),
    }
}

/// p-values of the classical test over independent replications.
pub fn classical_pvalues(
    model: PlsModel,
    dist: Option<InnovationDist>,
    lags: &[usize],
    bandwidth: Option<f64>,
    scale: &DeskScale,
) -> Result<Vec<f64>> {
    let lag_set = LagSet::new(lags.to_vec())?;
    let tuning = tuning_for(bandwidth);
    (0..scale.replications)
        .into_par_iter()
        .map(|r| {
            let rep_seed = derive_seed(scale.seed, r as u64);
            let series = simulate_model(model, dist, scale.n, derive_seed(rep_seed, 0))?;
            let boot = BootstrapConfig {
                replications: scale.bootstrap,
                seed: derive_seed(rep_seed, 1),
                ..BootstrapConfig::default()
            };
            let report = run_classical_test(
                &series,
                &lag_set,
                &tuning,
                &boot,
                TestMode::ConstantCorrelation,
                InputProvenance::Simulated {
                    model: model.name(),
                    n: scale.n,
                    seed: derive_seed(rep_seed, 0),
                },
            )?;
            Ok(report.p_value)
        })
        .collect()
}

/// p-values of the relevant test over independent replications.
pub fn relevant_pvalues(
    model: PlsModel,
    dist: Option<InnovationDist>,
    lags: &[usize],
    thresholds: &[f64],
    bandwidth: Option<f64>,
    scale: &DeskScale,
) -> Result<Vec<f64>> {
    let lag_set = LagSet::new(lags.to_vec())?;
    let tuning = tuning_for(bandwidth);
    let config = RelevantConfig::new(thresholds.to_vec());
    (0..scale.replications)
        .into_par_iter()
        .map(|r| {
            let rep_seed = derive_seed(scale.seed, r as u64);
            let series = simulate_model(model, dist, scale.n, derive_seed(rep_seed, 0))?;
            let boot = BootstrapConfig {
                replications: scale.bootstrap,
                seed: derive_seed(rep_seed, 1),
                ..BootstrapConfig::default()
            };
            let report = run_relevant_test(
                &series,
                &lag_set,
                &config,
                &tuning,
                &boot,
                InputProvenance::Simulated {
                    model: model.name(),
                    n: scale.n,
                    seed: derive_seed(rep_seed, 0),
                },
            )?;
            Ok(report.p_value)
        })
        .collect()
}

/// Share of p-values that reject at level `alpha` with `b` bootstrap draws.
///
/// The decision `statistic > M_(floor(B(1-alpha)))` is equivalent to
/// `p <= 1 - floor(B(1-alpha))/B`.
pub fn rejection_rate(pvalues: &[f64], alpha: f64, b: usize) -> f64 {
    let threshold = 1.0 - ((b as f64) * (1.0 - alpha)).floor() / b as f64;
    pvalues.iter().filter(|p| **p <= threshold + 1e-12).count() as f64 / pvalues.len() as f64
}

fn mc_se(rate: f64, reps: usize) -> f64 {
    (rate * (1.0 - rate) / reps as f64).sqrt()
}

/// Relevant-test rejection rates on one model across a threshold sweep,
/// reusing the per-replication pipeline and bootstrap functionals for every
/// threshold. Bias correction resolves per threshold (on below 0.1).
pub fn relevant_delta_sweep(
    model: PlsModel,
    lag: usize,
    deltas: &[f64],
    alpha: f64,
    scale: &DeskScale,
) -> Result<Vec<(f64, f64)>> {
    let lag_set = LagSet::new(vec![lag])?;
    let tuning = Tuning::default();
    let rejects: Vec<Vec<bool>> = (0..scale.replications)
        .into_par_iter()
        .map(|r| {
            let rep_seed = derive_seed(scale.seed, r as u64);
            let series = simulate(model, scale.n, derive_seed(rep_seed, 0))?;
            let boot = BootstrapConfig {
                replications: scale.bootstrap,
                seed: derive_seed(rep_seed, 1),
                ..BootstrapConfig::default()
            };
            let prep = prepare(&series, &lag_set, &tuning)?;
            let m = resolve_window(&prep.products, &tuning.mv, &boot.window, boot.seed)?;
            let scaffold = build_scaffold(&prep.products, m, &boot, false)?;
            Ok(deltas
                .iter()
                .map(|&d| {
                    let bias = BiasCorrect::Auto.resolve(&[d]);
                    scaffold.decide(&[d], alpha, bias).reject
                })
                .collect())
        })
        .collect::<Result<Vec<Vec<bool>>>>()?;
    Ok(deltas
        .iter()
        .enumerate()
        .map(|(j, &d)| {
            let hits = rejects.iter().filter(|row| row[j]).count();
            (d, hits as f64 / scale.replications as f64)
        })
        .collect())
}

const TABLE_BANDWIDTHS: [f64; 7] = [0.075, 0.1, 0.125, 0.15, 0.175, 0.2, 0.225];
const TABLE_ALPHAS: [f64; 2] = [0.05, 0.1];

fn bandwidth_label(b: Option<f64>) -> String {
    match b {
        Some(b) => b.to_string(),
        None => "gcv".into(),
    }
}

fn classical_rows(
    experiment: &str,
    model: PlsModel,
    dist: Option<InnovationDist>,
    lags: &[usize],
    bandwidths: &[Option<f64>],
    scale: &DeskScale,
    cell_tag: &mut u64,
    rows: &mut Vec<CellRow>,
) -> Result<()> {
    for &bw in bandwidths {
        *cell_tag += 1;
        let cell = DeskScale {
            seed: derive_seed(scale.seed, *cell_tag),
            ..*scale
        };
        let pvalues = classical_pvalues(model, dist, lags, bw, &cell)?;
        for alpha in TABLE_ALPHAS {
            let rate = rejection_rate(&pvalues, alpha, cell.bootstrap);
            rows.push(CellRow {
                experiment: experiment.into(),
                model: model.name(),
                test: "classical".into(),
                lags: lag_label(lags),
                bandwidth: bandwidth_label(bw),
                parameter: String::new(),
                value: String::new(),
                alpha,
                rejection: rate,
                mc_se: mc_se(rate, cell.replications),
                replications: cell.replications,
                bootstrap: cell.bootstrap,
                seed: cell.seed,
            });
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn relevant_rows(
    experiment: &str,
    model: PlsModel,
    dist: Option<InnovationDist>,
    lags: &[usize],
    thresholds: &[f64],
    bandwidths: &[Option<f64>],
    scale: &DeskScale,
    cell_tag: &mut u64,
    rows: &mut Vec<CellRow>,
) -> Result<()> {
    for &bw in bandwidths {
        *cell_tag += 1;
        let cell = DeskScale {
            seed: derive_seed(scale.seed, *cell_tag),
            ..*scale
        };
        let pvalues = relevant_pvalues(model, dist, lags, thresholds, bw, &cell)?;
        for alpha in TABLE_ALPHAS {
            let rate = rejection_rate(&pvalues, alpha, cell.bootstrap);
            rows.push(CellRow {
                experiment: experiment.into(),
                model: model.name(),
                test: "relevant".into(),
                lags: lag_label(lags),
                bandwidth: bandwidth_label(bw),
                parameter: "delta".into(),
                value: thresholds
                    .iter()
                    .map(|d| d.to_string())
                    .collect::<Vec<_>>()
                    .join("+"),
                alpha,
                rejection: rate,
                mc_se: mc_se(rate, cell.replications),
                replications: cell.replications,
                bootstrap: cell.bootstrap,
                seed: cell.seed,
            });
        }
    }
    Ok(())
}

/// Run one experiment by id.
pub fn run_experiment(id: &str, scale: &DeskScale) -> Result<Vec<CellRow>> {
    let mut rows = Vec::new();
    let mut tag = 0u64;
    let sweep: Vec<Option<f64>> = TABLE_BANDWIDTHS
        .iter()
        .map(|b| Some(*b))
        .chain(std::iter::once(None))
        .collect();
    match id {
        "table1" => {
            for model in [PlsModel::I, PlsModel::II, PlsModel::IIt] {
                classical_rows("table1", model, None, &[1], &sweep, scale, &mut tag, &mut rows)?;
            }
            classical_rows("table1", PlsModel::II, None, &[1, 2], &sweep, scale, &mut tag, &mut rows)?;
        }
        "table2" => {
            for model in [PlsModel::III, PlsModel::IIIt] {
                relevant_rows(
                    "table2", model, None, &[1], &[0.3], &sweep, scale, &mut tag, &mut rows,
                )?;
            }
            relevant_rows(
                "table2",
                PlsModel::III,
                None,
                &[1, 2],
                &[0.3, 0.15],
                &sweep,
                scale,
                &mut tag,
                &mut rows,
            )?;
            relevant_rows(
                "table2",
                PlsModel::IV,
                None,
                &[1, 2],
                &[0.18, 0.065],
                &sweep,
                scale,
                &mut tag,
                &mut rows,
            )?;
        }
        "table3" => {
            let chi = Some(InnovationDist::CenteredChiSquare5);
            classical_rows("table3", PlsModel::II, chi, &[1], &sweep, scale, &mut tag, &mut rows)?;
            relevant_rows(
                "table3",
                PlsModel::III,
                chi,
                &[1],
                &[0.3],
                &sweep,
                scale,
                &mut tag,
                &mut rows,
            )?;
        }
        "fig2" => {
            let deltas: Vec<f64> = (0..=10).map(|k| 0.06 * k as f64).collect();
            let alpha = 0.1;
            let rates = relevant_delta_sweep(PlsModel::III, 1, &deltas, alpha, scale)?;
            for (d, rate) in rates {
                rows.push(CellRow {
                    experiment: "fig2".into(),
                    model: PlsModel::III.name(),
                    test: "relevant".into(),
                    lags: "1".into(),
                    bandwidth: "gcv".into(),
                    parameter: "delta".into(),
                    value: d.to_string(),
                    alpha,
                    rejection: rate,
                    mc_se: mc_se(rate, scale.replications),
                    replications: scale.replications,
                    bootstrap: scale.bootstrap,
                    seed: scale.seed,
                });
            }
        }
        "fig3" => {
            for k in 0..=6 {
                let lambda = 0.1 * k as f64;
                tag += 1;
                let cell = DeskScale {
                    seed: derive_seed(scale.seed, tag),
                    ..*scale
                };
                let pvalues =
                    classical_pvalues(PlsModel::Iprime { lambda }, None, &[1], None, &cell)?;
                let alpha = 0.05;
                let rate = rejection_rate(&pvalues, alpha, cell.bootstrap);
                rows.push(CellRow {
                    experiment: "fig3".into(),
                    model: "Iprime".into(),
                    test: "classical".into(),
                    lags: "1".into(),
                    bandwidth: "gcv".into(),
                    parameter: "lambda".into(),
                    value: lambda.to_string(),
                    alpha,
                    rejection: rate,
                    mc_se: mc_se(rate, cell.replications),
                    replications: cell.replications,
                    bootstrap: cell.bootstrap,
                    seed: cell.seed,
                });
            }
        }
        "robustness" => {
            classical_rows(
                "robustness",
                PlsModel::II0,
                None,
                &[1],
                &[None],
                scale,
                &mut tag,
                &mut rows,
            )?;
            relevant_rows(
                "robustness",
                PlsModel::III0,
                None,
                &[1],
                &[0.3],
                &[None],
                scale,
                &mut tag,
                &mut rows,
            )?;
        }
        other => return Err(Error::UnknownExperiment(other.to_string())),
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_experiment_errors() {
        assert!(matches!(
            run_experiment("table9", &DeskScale::default()),
            Err(Error::UnknownExperiment(_))
        ));
    }

    #[test]
    fn rejection_rate_matches_decision_rule() {
        // B = 100, alpha = 0.05: reject iff p <= 1 - 95/100 = 0.05.
        let pvalues = vec![0.0, 0.05, 0.050001, 0.2, 1.0];
        assert!((rejection_rate(&pvalues, 0.05, 100) - 0.4).abs() < 1e-12);
    }

    #[test]
    fn csv_is_deterministic_at_tiny_scale() {
        let scale = DeskScale {
            replications: 4,
            bootstrap: 100,
            n: 120,
            seed: 77,
        };
        let a = to_csv(&run_experiment("robustness", &scale).unwrap());
        let b = to_csv(&run_experiment("robustness", &scale).unwrap());
        assert_eq!(a, b);
        assert!(a.starts_with("experiment,model,test,lags,"));
        assert_eq!(a.lines().count(), 1 + 4);
    }
}
