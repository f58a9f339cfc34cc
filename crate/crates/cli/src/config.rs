use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use vrm_core::{FunctionClass, MonteCarloBudget, SyntheticDistribution, VicinitySpec};

use crate::error::CliError;

/// Environment variable naming the default output root.
pub const OUT_DIR_ENV: &str = "VRM_OUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentId {
    Gen,
    Match,
    Dkw,
    Train,
    Gap,
    Covering,
    Uen,
    Omega,
    Eta,
    Bound,
    Coverage,
    All,
}

impl ExperimentId {
    /// Every runnable experiment, in the order `all` executes them.
    pub const SEQUENCE: [ExperimentId; 11] = [
        Self::Gen,
        Self::Match,
        Self::Dkw,
        Self::Train,
        Self::Gap,
        Self::Covering,
        Self::Uen,
        Self::Omega,
        Self::Eta,
        Self::Bound,
        Self::Coverage,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Gen => "gen",
            Self::Match => "match",
            Self::Dkw => "dkw",
            Self::Train => "train",
            Self::Gap => "gap",
            Self::Covering => "covering",
            Self::Uen => "uen",
            Self::Omega => "omega",
            Self::Eta => "eta",
            Self::Bound => "bound",
            Self::Coverage => "coverage",
            Self::All => "all",
        }
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn default_c() -> f64 {
    2.0
}

fn default_n_grid() -> Vec<usize> {
    vec![25, 50, 100, 200, 400]
}

fn default_dkw_xi() -> f64 {
    0.3
}

fn default_uen_budget() -> usize {
    20
}

/// Stamp written into saved configs; ignored when a config is loaded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stamp {
    pub version: String,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: ExperimentId,
    pub seed: u64,
    /// Data-generating distribution.
    pub distribution: SyntheticDistribution,
    pub vicinity: VicinitySpec,
    /// Finite hypothesis list used by the gap, cover and bound experiments.
    pub class: FunctionClass,
    /// Class trained by `train` and `eta`; defaults to `class`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_class: Option<FunctionClass>,
    /// Training-set size `N`.
    pub n: usize,
    pub trials: usize,
    pub xi: f64,
    /// Ball radius of the within-cover UEN term.
    pub r: f64,
    /// Confidence parameter of the bounds.
    pub t: f64,
    #[serde(default = "default_c")]
    pub c: f64,
    #[serde(default)]
    pub budget: MonteCarloBudget,
    #[serde(default = "default_n_grid")]
    pub n_grid: Vec<usize>,
    #[serde(default = "default_dkw_xi")]
    pub dkw_xi: f64,
    #[serde(default = "default_uen_budget")]
    pub uen_budget: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stamp: Option<Stamp>,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub experiment: Option<ExperimentId>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub trials: Option<usize>,
    pub workers: Option<usize>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(e) = o.experiment {
            self.experiment = e;
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(p) = &o.out {
            self.out = Some(p.clone());
        }
        if let Some(t) = o.trials {
            self.trials = t;
        }
        if let Some(w) = o.workers {
            self.workers = Some(w);
        }
        self.stamp = None;
    }

    /// Checks that do not need any sampling. Sample-size conditions are left
    /// to the experiments, which report them as precondition failures.
    pub fn validate(&self) -> Result<(), CliError> {
        let split = self.distribution.validate()?;
        self.class.require_finite()?;
        self.class.validate(split)?;
        if let Some(tc) = &self.train_class {
            tc.validate(split)?;
        }
        let probe = self.distribution.sample(2, 0)?;
        self.vicinity.resolve(split, Some(&probe))?;
        let positive = [("xi", self.xi), ("r", self.r), ("c", self.c), ("dkw_xi", self.dkw_xi)];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CliError::Config(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !(self.t > 0.0 && self.t < 1.0) {
            return Err(CliError::Config(format!("t must lie in (0, 1), got {}", self.t)));
        }
        if self.n == 0 || self.trials == 0 {
            return Err(CliError::Config("n and trials must be at least 1".into()));
        }
        if self.n_grid.is_empty() || self.n_grid.contains(&0) {
            return Err(CliError::Config("n_grid must be non-empty with positive sizes".into()));
        }
        if self.workers == Some(0) {
            return Err(CliError::Config("workers must be at least 1".into()));
        }
        Ok(())
    }

    pub fn train_class(&self) -> &FunctionClass {
        self.train_class.as_ref().unwrap_or(&self.class)
    }

    /// SHA-256 of the canonical JSON form, ignoring where results go and how
    /// many threads compute them.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out = None;
        c.workers = None;
        c.stamp = None;
        let text = serde_json::to_string(&c).expect("config serializes");
        Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Output directory: the configured one, else `$VRM_OUT_DIR/<experiment>`,
    /// else `runs/<experiment>`.
    pub fn out_dir(&self) -> PathBuf {
        if let Some(p) = &self.out {
            return p.clone();
        }
        let root = std::env::var_os(OUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("runs"));
        root.join(self.experiment.name())
    }
}
