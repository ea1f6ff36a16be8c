//! Symmetric kernels on [-1, 1] for the local linear fits.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum KernelSpec {
    /// `K(x) = 3/4 (1 - x^2)` on [-1, 1].
    #[default]
    Epanechnikov,
    /// `K(x) = 15/16 (1 - x^2)^2` on [-1, 1]; twice differentiable at the edges.
    Biweight,
}

impl KernelSpec {
    pub fn evaluate(self, x: f64) -> f64 {
        if x.abs() >= 1.0 {
            return 0.0;
        }
        let u = 1.0 - x * x;
        match self {
            KernelSpec::Epanechnikov => 0.75 * u,
            KernelSpec::Biweight => 0.9375 * u * u,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            KernelSpec::Epanechnikov => "epanechnikov",
            KernelSpec::Biweight => "biweight",
        }
    }
}

impl std::str::FromStr for KernelSpec {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "epanechnikov" | "epa" => Ok(KernelSpec::Epanechnikov),
            "biweight" | "quartic" => Ok(KernelSpec::Biweight),
            other => Err(crate::error::Error::InvalidConfig(format!(
                "unknown kernel `{other}` (expected epanechnikov or biweight)"
            ))),
        }
    }
}
