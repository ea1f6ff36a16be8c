//! Report plumbing: run manifests, resolved-tuning echoes and digests.
//!
//! Every report embeds a [`RunManifest`] holding the requested configuration
//! and input provenance, which is enough to re-run the analysis and obtain a
//! byte-identical report on any worker count.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classical::BootstrapConfig;
use crate::kernel::KernelSpec;
use crate::pipeline::{Tuning, VarianceMode};
use crate::relevant::RelevantConfig;
use crate::series::{Series, Standardization};
use crate::varbreak::VarianceBreak;

/// Where the analyzed series came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InputProvenance {
    File {
        path: String,
        sha256: String,
        transform: Option<String>,
    },
    Simulated {
        model: String,
        n: usize,
        seed: u64,
    },
    Inline {
        sha256: String,
    },
}

impl InputProvenance {
    pub fn inline(series: &Series) -> Self {
        InputProvenance::Inline {
            sha256: series_digest(series),
        }
    }
}

/// SHA-256 of the raw little-endian bytes of the observations.
pub fn series_digest(series: &Series) -> String {
    let mut hasher = Sha256::new();
    for v in series.values() {
        hasher.update(v.to_le_bytes());
    }
    hex(&hasher.finalize())
}

/// SHA-256 of a byte buffer, hex encoded.
pub fn bytes_digest(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Everything a run actually used after auto-selection.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResolvedTuning {
    /// Mean bandwidth `b_n`.
    pub mean_bandwidth: f64,
    /// Variance bandwidth `c_n`.
    pub var_bandwidth: f64,
    /// Bootstrap block window `m`.
    pub window: usize,
    /// Variance-contrast window `L`.
    pub contrast_window: usize,
    /// Trimming fraction `zeta` of the variance-break search.
    pub trim: f64,
    pub lags: Vec<usize>,
    pub seed: u64,
    pub alpha: f64,
    pub replications: usize,
    pub kernel: KernelSpec,
    pub standardization: Standardization,
    pub variance_mode: VarianceMode,
    /// The variance-break search result, when the piecewise mode ran.
    pub variance_break: Option<VarianceBreak>,
}

/// The requested configuration of a run, sufficient for byte-identical
/// reproduction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub input: InputProvenance,
    pub n: usize,
    pub lags: Vec<usize>,
    pub tuning: Tuning,
    pub bootstrap: BootstrapConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub relevant: Option<RelevantConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_segment: Option<usize>,
}

impl RunManifest {
    pub fn new(
        subcommand: &str,
        input: InputProvenance,
        n: usize,
        lags: Vec<usize>,
        tuning: Tuning,
        bootstrap: BootstrapConfig,
    ) -> Self {
        RunManifest {
            tool: "corrbreak".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            subcommand: subcommand.into(),
            input,
            n,
            lags,
            tuning,
            bootstrap,
            relevant: None,
            min_segment: None,
        }
    }

    pub fn with_relevant(mut self, config: RelevantConfig) -> Self {
        self.relevant = Some(config);
        self
    }

    pub fn with_min_segment(mut self, min_segment: usize) -> Self {
        self.min_segment = Some(min_segment);
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_is_stable_and_content_sensitive() {
        let a = Series::new(vec![1.0, 2.0, 3.0]).unwrap();
        let b = Series::new(vec![1.0, 2.0, 3.0]).unwrap();
        let c = Series::new(vec![1.0, 2.0, 3.5]).unwrap();
        assert_eq!(series_digest(&a), series_digest(&b));
        assert_ne!(series_digest(&a), series_digest(&c));
        assert_eq!(series_digest(&a).len(), 64);
    }

    #[test]
    fn manifest_round_trips_through_json() {
        let manifest = RunManifest::new(
            "detect",
            InputProvenance::Simulated {
                model: "I".into(),
                n: 500,
                seed: 7,
            },
            500,
            vec![1, 2],
            Tuning::default(),
            BootstrapConfig::default(),
        );
        let json = serde_json::to_string_pretty(&manifest).unwrap();
        let back: RunManifest = serde_json::from_str(&json).unwrap();
        assert_eq!(serde_json::to_string_pretty(&back).unwrap(), json);
    }
}
