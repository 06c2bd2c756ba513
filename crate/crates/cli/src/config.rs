use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

/// Settings shared by every command. Values come from defaults, then an
/// optional TOML file, then command-line flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub manifest: Option<PathBuf>,
    /// Largest g3 error an approximate dependency may have.
    pub theta: f64,
    /// Cap on the summed join weight; unbounded when absent.
    pub alpha: Option<f64>,
    pub beta: f64,
    pub budget: Option<f64>,
    pub budget_ratio: Option<f64>,
    pub ell: usize,
    pub rate: f64,
    /// Intermediate join size that triggers re-sampling; never when absent.
    pub eta: Option<usize>,
    pub resample_rate: f64,
    /// Landmark count; `ceil(log2 n)` when absent.
    pub landmarks: Option<usize>,
    pub seed: u64,
    pub price_a: f64,
    pub price_b: f64,
    pub max_lhs: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            manifest: None,
            theta: 0.1,
            alpha: None,
            beta: 0.0,
            budget: None,
            budget_ratio: None,
            ell: 1000,
            rate: 0.3,
            eta: None,
            resample_rate: 0.5,
            landmarks: None,
            seed: 0,
            price_a: 1.0,
            price_b: 0.0,
            max_lhs: 3,
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.budget.is_some() && self.budget_ratio.is_some() {
            return bad("budget and budget_ratio are mutually exclusive".into());
        }
        if let Some(r) = self.budget_ratio {
            if !(r > 0.0 && r <= 1.0) {
                return bad(format!("budget_ratio {r} outside (0,1]"));
            }
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return bad(format!("theta {} outside (0,1)", self.theta));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return bad(format!("beta {} outside [0,1]", self.beta));
        }
        if !(self.rate > 0.0 && self.rate <= 1.0) || !(self.resample_rate > 0.0 && self.resample_rate <= 1.0) {
            return bad("sampling rates must lie in (0,1]".into());
        }
        if self.ell == 0 || self.max_lhs == 0 || self.eta == Some(0) || self.landmarks == Some(0) {
            return bad("ell, max_lhs, eta and landmarks must be positive".into());
        }
        if self.budget.is_some_and(|b| !(b >= 0.0)) || self.alpha.is_some_and(|a| !(a >= 0.0)) {
            return bad("budget and alpha must be nonnegative".into());
        }
        Ok(())
    }

    pub fn manifest(&self) -> Result<&Path, CliError> {
        self.manifest.as_deref().ok_or_else(|| CliError::Config("a catalog manifest is required (--manifest)".into()))
    }
}

/// Hex SHA-256 of the JSON encoding of `value`.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("configuration serializes");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}
