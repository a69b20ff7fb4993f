use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Run configuration. JSON config files use the same flat keys; values given
/// on the command line take precedence.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub lambda: Option<Vec<f64>>,
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    pub c0: Option<f64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub threads: Option<usize>,
    /// Record wall time in reports (disable for byte-identical output).
    pub timing: Option<bool>,
    pub experiment: Option<String>,
    pub grid_factor: Option<f64>,
    pub c_star: Option<f64>,
    pub shell_c: Option<f64>,
    pub ensemble: Option<usize>,
    pub basket_c: Option<f64>,
    pub c1: Option<f64>,
    pub big_c: Option<f64>,
    pub pairs_per_bucket: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Text,
}

pub const DEFAULT_SEED: u64 = 20_240_601;

macro_rules! overlay {
    ($base:ident, $top:ident; $($f:ident),*) => {
        Config { $($f: $top.$f.or($base.$f)),* }
    };
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
    }

    /// Fields set in `top` win over `self`.
    pub fn overlay(self, top: Config) -> Config {
        let base = self;
        overlay!(base, top; lambda, seed, samples, c0, out, format, threads, timing, experiment,
            grid_factor, c_star, shell_c, ensemble, basket_c, c1, big_c, pairs_per_bucket)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn c0(&self) -> f64 {
        self.c0.unwrap_or(crate::scale::DEFAULT_C0)
    }

    pub fn samples_or(&self, default: usize) -> usize {
        self.samples.unwrap_or(default)
    }

    pub fn timing(&self) -> bool {
        self.timing.unwrap_or(true)
    }

    pub fn c_star(&self) -> f64 {
        self.c_star.unwrap_or(0.5)
    }
}
