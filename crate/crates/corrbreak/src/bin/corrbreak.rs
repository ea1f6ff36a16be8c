//! Command-line interface: change point tests for the correlation structure
//! of non-stationary time series.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use corrbreak::classical::{run_classical_test, BootstrapConfig, LagSet, TestMode};
use corrbreak::error::{Error, Result};
use corrbreak::experiment::{run_experiment, to_csv, DeskScale};
use corrbreak::ingest::{ingest, Transform};
use corrbreak::kernel::KernelSpec;
use corrbreak::pipeline::{Tuning, VarianceMode};
use corrbreak::relevant::{run_relevant_test, BiasCorrect, RelevantConfig};
use corrbreak::report::InputProvenance;
use corrbreak::segment::{binary_segment, pairwise_relevant};
use corrbreak::series::{Series, Standardization};
use corrbreak::simulate::{simulate, PlsModel};
use corrbreak::smooth::Bandwidth;
use corrbreak::tuning::WindowSelect;
use corrbreak::varbreak::{estimate_variance_break, VarBreakConfig};

#[derive(Parser)]
#[command(
    name = "corrbreak",
    version,
    about = "Change point tests for lag-k correlations of non-stationary time series"
)]
struct Cli {
    /// Worker threads (0 = one per core). Results never depend on this.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// Write the result to this file instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one of the built-in models; emits CSV with header `t,y`.
    Simulate {
        /// Model id: I, II, IIt, III, IIIt, IV, Iprime, IIprime, II0, III0.
        #[arg(long)]
        model: String,
        /// Coefficient jump for the primed models.
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long, default_value_t = 500)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },

    /// Test for a change point in the lag-k correlations (classical test).
    Detect {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        test: TestArgs,
        /// Test the null of zero correlations instead of constant ones.
        #[arg(long)]
        zero_test: bool,
    },

    /// Test whether a correlation break exceeds practitioner thresholds.
    Relevant {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        test: TestArgs,
        /// Thresholds, one per lag (comma separated).
        #[arg(long, value_delimiter = ',', required = true)]
        delta: Vec<f64>,
        /// Bias correction: auto (on when min delta < 0.1), on, off.
        #[arg(long, default_value = "auto")]
        bias_correct: String,
        /// Drop the sign factor from the bootstrap replicates.
        #[arg(long)]
        unsigned_bootstrap: bool,
    },

    /// Locate an abrupt variance change from squared residuals.
    VarianceBreak {
        #[command(flatten)]
        data: DataArgs,
        /// Mean bandwidth: `auto` or a number.
        #[arg(long, default_value = "auto")]
        bandwidth_mean: String,
        /// Contrast window L (default floor(3 n^(1/3))).
        #[arg(long)]
        contrast_window: Option<usize>,
        /// Trimming fraction of the search range.
        #[arg(long, default_value_t = 0.2)]
        zeta: f64,
        #[arg(long, value_enum, default_value_t = KernelArg::Epanechnikov)]
        kernel: KernelArg,
        #[arg(long, value_enum, default_value_t = OutFormat::Json)]
        out: OutFormat,
    },

    /// Multiple change points: binary segmentation, then relevant tests on
    /// consecutive interval pairs.
    Segment {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        test: TestArgs,
        /// Minimum segment length (hard floor 100).
        #[arg(long, default_value_t = 150)]
        min_len: usize,
        /// Thresholds for the pairwise relevant tests; omit to skip them.
        #[arg(long, value_delimiter = ',')]
        delta: Vec<f64>,
        #[arg(long, default_value = "auto")]
        bias_correct: String,
    },

    /// Rerun one of the reference Monte Carlo experiments at desk scale.
    Reproduce {
        /// table1, table2, table3, fig2, fig3 or robustness.
        #[arg(long)]
        experiment: String,
        #[arg(long, default_value_t = 500)]
        reps: usize,
        #[arg(long, default_value_t = 500)]
        boot: usize,
        #[arg(long, default_value_t = 500)]
        n: usize,
        #[arg(long, default_value_t = 20_240_501)]
        seed: u64,
    },

    /// Where to obtain the exchange-rate example series, and how to verify a
    /// local copy.
    FetchExample {
        /// Verify this file: row count and content digest.
        #[arg(long)]
        input: Option<PathBuf>,
    },
}

#[derive(Args)]
struct DataArgs {
    /// CSV input: one value per row, or `t,value` rows (first column ignored).
    #[arg(long)]
    input: PathBuf,
    /// Preprocessing: none, pct-change, squared-pct-change.
    #[arg(long, default_value = "none")]
    transform: String,
}

#[derive(Args)]
struct TestArgs {
    /// Lags under test, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    lags: Vec<usize>,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Bootstrap replications B.
    #[arg(long, default_value_t = 2000)]
    boot: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Mean bandwidth: `auto` (GCV) or a number.
    #[arg(long, default_value = "auto")]
    bandwidth_mean: String,
    /// Variance bandwidth: `auto` (GCV, capped at 0.9 b_n) or a number.
    #[arg(long, default_value = "auto")]
    bandwidth_var: String,
    /// Bootstrap block window: `auto` (minimal volatility) or an integer.
    #[arg(long, default_value = "auto")]
    window: String,
    /// Variance curve: piecewise (split at the estimated break) or smooth.
    #[arg(long, value_enum, default_value_t = VarianceArg::Piecewise)]
    variance: VarianceArg,
    /// Lag-product standardization.
    #[arg(long, value_enum, default_value_t = StdArg::Single)]
    standardization: StdArg,
    #[arg(long, value_enum, default_value_t = KernelArg::Epanechnikov)]
    kernel: KernelArg,
    /// Contrast window L of the variance-break search.
    #[arg(long)]
    contrast_window: Option<usize>,
    /// Trimming fraction of the variance-break search.
    #[arg(long)]
    zeta: Option<f64>,
    #[arg(long, value_enum, default_value_t = OutFormat::Json)]
    out: OutFormat,
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum OutFormat {
    Json,
    Csv,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum VarianceArg {
    Piecewise,
    Smooth,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum StdArg {
    Single,
    Product,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum KernelArg {
    Epanechnikov,
    Biweight,
}

impl From<KernelArg> for KernelSpec {
    fn from(k: KernelArg) -> Self {
        match k {
            KernelArg::Epanechnikov => KernelSpec::Epanechnikov,
            KernelArg::Biweight => KernelSpec::Biweight,
        }
    }
}

fn parse_bandwidth(s: &str) -> Result<Bandwidth> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(Bandwidth::Auto);
    }
    s.parse::<f64>()
        .map(Bandwidth::Fixed)
        .map_err(|_| Error::InvalidConfig(format!("bandwidth must be `auto` or a number, got `{s}`")))
}

fn parse_window(s: &str) -> Result<WindowSelect> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(WindowSelect::Auto);
    }
    s.parse::<usize>()
        .map(WindowSelect::Fixed)
        .map_err(|_| Error::InvalidConfig(format!("window must be `auto` or an integer, got `{s}`")))
}

fn parse_bias(s: &str) -> Result<BiasCorrect> {
    match s.to_ascii_lowercase().as_str() {
        "auto" => Ok(BiasCorrect::Auto),
        "on" => Ok(BiasCorrect::On),
        "off" => Ok(BiasCorrect::Off),
        other => Err(Error::InvalidConfig(format!(
            "bias-correct must be auto, on or off, got `{other}`"
        ))),
    }
}

impl TestArgs {
    fn tuning(&self) -> Result<Tuning> {
        let mut var_break = None;
        if self.contrast_window.is_some() || self.zeta.is_some() {
            var_break = Some(VarBreakConfig {
                window: self.contrast_window.unwrap_or(0),
                trim: self.zeta.unwrap_or(0.2),
            });
        }
        Ok(Tuning {
            mean_bandwidth: parse_bandwidth(&self.bandwidth_mean)?,
            var_bandwidth: parse_bandwidth(&self.bandwidth_var)?,
            kernel: self.kernel.into(),
            variance_mode: match self.variance {
                VarianceArg::Piecewise => VarianceMode::Piecewise,
                VarianceArg::Smooth => VarianceMode::Smooth,
            },
            var_break,
            standardization: match self.standardization {
                StdArg::Single => Standardization::Single,
                StdArg::Product => Standardization::Product,
            },
            ..Tuning::default()
        })
    }

    fn fixup_var_break(&self, tuning: &mut Tuning, n: usize) {
        if let Some(vb) = &mut tuning.var_break {
            if vb.window == 0 {
                vb.window = VarBreakConfig::for_length(n).window;
            }
        }
    }

    fn bootstrap(&self) -> Result<BootstrapConfig> {
        Ok(BootstrapConfig {
            replications: self.boot,
            window: parse_window(&self.window)?,
            seed: self.seed,
            alpha: self.alpha,
        })
    }

    fn lag_set(&self) -> Result<LagSet> {
        LagSet::new(self.lags.clone())
    }
}

impl DataArgs {
    fn load(&self) -> Result<(Series, InputProvenance)> {
        let transform: Transform = self.transform.parse()?;
        let (series, digest) = ingest(&self.input, transform)?;
        let provenance = InputProvenance::File {
            path: self.input.display().to_string(),
            sha256: digest,
            transform: match transform {
                Transform::None => None,
                t => Some(t.name().to_string()),
            },
        };
        Ok((series, provenance))
    }
}

fn emit(output: &Option<PathBuf>, content: &str) -> Result<()> {
    match output {
        Some(path) => std::fs::write(path, content)?,
        None => {
            std::io::stdout().write_all(content.as_bytes())?;
        }
    }
    Ok(())
}

fn json_line<T: serde::Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)
        .map_err(|e| Error::InvalidConfig(format!("serialization failed: {e}")))?
        + "\n")
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            model,
            lambda,
            n,
            seed,
        } => {
            let model = PlsModel::parse(&model, lambda)?;
            let series = simulate(model, n, seed)?;
            let mut csv = String::from("t,y\n");
            for (i, y) in series.values().iter().enumerate() {
                csv.push_str(&format!("{},{}\n", (i + 1) as f64 / n as f64, y));
            }
            emit(&cli.output, &csv)
        }

        Command::Detect {
            data,
            test,
            zero_test,
        } => {
            let (series, provenance) = data.load()?;
            let mut tuning = test.tuning()?;
            test.fixup_var_break(&mut tuning, series.len());
            let report = run_classical_test(
                &series,
                &test.lag_set()?,
                &tuning,
                &test.bootstrap()?,
                if zero_test {
                    TestMode::ZeroCorrelation
                } else {
                    TestMode::ConstantCorrelation
                },
                provenance,
            )?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            let content = match test.out {
                OutFormat::Json => json_line(&report)?,
                OutFormat::Csv => format!(
                    "statistic,critical_value,p_value,reject,alpha,n,bn,cn,m\n{},{},{},{},{},{},{},{},{}\n",
                    report.statistic,
                    report.critical_value,
                    report.p_value,
                    report.reject,
                    report.alpha,
                    report.n,
                    report.tuning.mean_bandwidth,
                    report.tuning.var_bandwidth,
                    report.tuning.window
                ),
            };
            emit(&cli.output, &content)
        }

        Command::Relevant {
            data,
            test,
            delta,
            bias_correct,
            unsigned_bootstrap,
        } => {
            let (series, provenance) = data.load()?;
            let mut tuning = test.tuning()?;
            test.fixup_var_break(&mut tuning, series.len());
            let config = RelevantConfig {
                thresholds: delta,
                bias_correct: parse_bias(&bias_correct)?,
                unsigned_bootstrap,
            };
            let report = run_relevant_test(
                &series,
                &test.lag_set()?,
                &config,
                &tuning,
                &test.bootstrap()?,
                provenance,
            )?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            let content = match test.out {
                OutFormat::Json => json_line(&report)?,
                OutFormat::Csv => format!(
                    "statistic,critical_value,p_value,reject,alpha,bias_corrected,n,bn,cn,m\n{},{},{},{},{},{},{},{},{},{}\n",
                    report.statistic,
                    report.critical_value,
                    report.p_value,
                    report.reject,
                    report.alpha,
                    report.bias_corrected,
                    report.n,
                    report.tuning.mean_bandwidth,
                    report.tuning.var_bandwidth,
                    report.tuning.window
                ),
            };
            emit(&cli.output, &content)
        }

        Command::VarianceBreak {
            data,
            bandwidth_mean,
            contrast_window,
            zeta,
            kernel,
            out,
        } => {
            let (series, provenance) = data.load()?;
            let n = series.len();
            let fit = corrbreak::smooth::fit_mean(
                &series,
                &parse_bandwidth(&bandwidth_mean)?,
                kernel.into(),
            )?;
            let sq: Vec<f64> = fit.residuals.iter().map(|e| e * e).collect();
            let config = VarBreakConfig {
                window: contrast_window.unwrap_or_else(|| VarBreakConfig::for_length(n).window),
                trim: zeta,
            };
            let found = estimate_variance_break(&sq, &config)?;

            #[derive(serde::Serialize)]
            struct VarBreakOutput {
                n: usize,
                mean_bandwidth: f64,
                contrast_window: usize,
                trim: f64,
                time: f64,
                index: usize,
                max_contrast: f64,
                low_confidence: bool,
                threshold: f64,
                input: InputProvenance,
            }
            let output = VarBreakOutput {
                n,
                mean_bandwidth: fit.bandwidth,
                contrast_window: config.window,
                trim: config.trim,
                time: found.time,
                index: found.index,
                max_contrast: found.max_contrast,
                low_confidence: found.low_confidence,
                threshold: found.threshold,
                input: provenance,
            };
            if output.low_confidence {
                eprintln!(
                    "note: contrast peak below threshold; no clear variance break \
                     (consider --variance smooth for the tests)"
                );
            }
            let content = match out {
                OutFormat::Json => json_line(&output)?,
                OutFormat::Csv => format!(
                    "time,index,max_contrast,low_confidence,threshold,bn,L,zeta\n{},{},{},{},{},{},{},{}\n",
                    output.time,
                    output.index,
                    output.max_contrast,
                    output.low_confidence,
                    output.threshold,
                    output.mean_bandwidth,
                    output.contrast_window,
                    output.trim
                ),
            };
            emit(&cli.output, &content)
        }

        Command::Segment {
            data,
            test,
            min_len,
            delta,
            bias_correct,
        } => {
            let (series, provenance) = data.load()?;
            let mut tuning = test.tuning()?;
            test.fixup_var_break(&mut tuning, series.len());
            let lags = test.lag_set()?;
            let boot = test.bootstrap()?;
            let segmentation =
                binary_segment(&series, &lags, &tuning, &boot, min_len, provenance)?;
            let pairwise = if delta.is_empty() {
                Vec::new()
            } else {
                let config = RelevantConfig {
                    thresholds: delta,
                    bias_correct: parse_bias(&bias_correct)?,
                    unsigned_bootstrap: false,
                };
                pairwise_relevant(&series, &segmentation.breaks, &lags, &config, &tuning, &boot)?
            };
            #[derive(serde::Serialize)]
            struct SegmentOutput {
                segmentation: corrbreak::segment::SegmentationReport,
                pairwise: Vec<corrbreak::segment::PairwiseOutcome>,
            }
            emit(
                &cli.output,
                &json_line(&SegmentOutput {
                    segmentation,
                    pairwise,
                })?,
            )
        }

        Command::Reproduce {
            experiment,
            reps,
            boot,
            n,
            seed,
        } => {
            let scale = DeskScale {
                replications: reps,
                bootstrap: boot,
                n,
                seed,
            };
            let rows = run_experiment(&experiment, &scale)?;
            emit(&cli.output, &to_csv(&rows))
        }

        Command::FetchExample { input } => {
            let mut text = String::new();
            text.push_str(
                "The exchange-rate example series is the daily USD/CAD noon rate from\n\
                 2011-11-18 to 2016-06-24 (1154 observations), published by the Federal\n\
                 Reserve at https://www.federalreserve.gov/releases/h10/hist/\n\
                 Download the USD/CAD history, extract the rate column for that date\n\
                 range into a one-column CSV, then analyze the squared percentage\n\
                 change, e.g.:\n\
                 \n\
                 corrbreak detect --input usdcad.csv --transform squared-pct-change \\\n\
                 --lags 1,2,3 --zero-test\n\n",
            );
            if let Some(path) = input {
                let (series, digest) = ingest(&path, Transform::None)?;
                text.push_str(&format!(
                    "verify: {} rows (expected 1154: {}), sha256 {}\n",
                    series.len(),
                    if series.len() == 1154 { "ok" } else { "MISMATCH" },
                    digest
                ));
            }
            emit(&cli.output, &text)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
        {
            eprintln!("error: could not size the thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
