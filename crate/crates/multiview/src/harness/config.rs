//! Experiment configuration: TOML key-value file plus CLI overrides.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which experiment to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Exp1,
    Exp2,
    Exp3,
    OracleCheck,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Exp1 => "exp1",
            ExperimentKind::Exp2 => "exp2",
            ExperimentKind::Exp3 => "exp3",
            ExperimentKind::OracleCheck => "oracle_check",
        }
    }

    /// Trials per experiment (per group where grouped) when the config
    /// leaves `trials` at 0.
    pub fn default_trials(self) -> usize {
        match self {
            ExperimentKind::Exp1 | ExperimentKind::Exp2 => 100,
            ExperimentKind::Exp3 => 25,
            ExperimentKind::OracleCheck => 20,
        }
    }
}

/// How losses are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    /// Exact losses from the trial model's population moments.
    Population,
    /// Monte-Carlo losses on a fresh holdout of `m` rows.
    Holdout { m: usize },
}

impl EvalMode {
    pub fn label(self) -> String {
        match self {
            EvalMode::Population => "population".to_string(),
            EvalMode::Holdout { m } => format!("holdout({m})"),
        }
    }
}

/// Runtime configuration for one experiment run.
///
/// Every field has a simulation-scale default, so an empty file (or no
/// file) reproduces the standard setup: `k = 10`, view noise
/// `(2, 0.5, 0.2)`, target noise `0.5`, 50000 unlabeled rows, 5000 labeled
/// rows, sample-size groups 500..20000 and labeled-size groups 40..400.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub k: usize,
    pub noise_sds: [f64; 3],
    pub y_noise_sd: f64,
    /// 0 means "use the experiment's default count".
    pub trials: usize,
    pub master_seed: u64,
    pub unlabeled_n: usize,
    pub labeled_n: usize,
    pub sample_size_groups: Vec<usize>,
    pub labeled_size_groups: Vec<usize>,
    /// "population" or "holdout".
    pub eval_mode: String,
    /// Holdout rows when `eval_mode = "holdout"`.
    pub holdout_m: usize,
    pub output_dir: PathBuf,
    /// Debug switch: fit and evaluate on exact population moments instead
    /// of samples; losses become exact optimal losses per feature set.
    pub exact_moments: bool,
    /// Reduce trial counts for quick runs.
    pub smoke: bool,
    pub quiet: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: ExperimentKind::Exp1,
            k: 10,
            noise_sds: [2.0, 0.5, 0.2],
            y_noise_sd: 0.5,
            trials: 0,
            master_seed: 1,
            unlabeled_n: 50_000,
            labeled_n: 5_000,
            sample_size_groups: vec![500, 1000, 2000, 4000, 8000, 10_000, 20_000],
            labeled_size_groups: vec![40, 80, 150, 400],
            eval_mode: "population".to_string(),
            holdout_m: 100_000,
            output_dir: PathBuf::from("runs"),
            exact_moments: false,
            smoke: false,
            quiet: false,
        }
    }
}

impl ExperimentConfig {
    /// Parse a TOML key-value file.
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    /// Trial count after applying the experiment default and smoke mode.
    pub fn resolved_trials(&self) -> usize {
        let base = if self.trials == 0 {
            self.experiment.default_trials()
        } else {
            self.trials
        };
        if self.smoke {
            base.min(10)
        } else {
            base
        }
    }

    pub fn eval(&self) -> Result<EvalMode> {
        match self.eval_mode.as_str() {
            "population" => Ok(EvalMode::Population),
            "holdout" => Ok(EvalMode::Holdout { m: self.holdout_m }),
            other => Err(Error::InvalidConfig(format!(
                "eval_mode must be \"population\" or \"holdout\", got \"{other}\""
            ))),
        }
    }

    /// Directory the run writes into: `<output_dir>/<experiment>`.
    pub fn run_dir(&self) -> PathBuf {
        self.output_dir.join(self.experiment.name())
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidConfig("k must be >= 1".into()));
        }
        let bad_sd = |s: f64| s.is_nan() || s <= 0.0;
        if self.noise_sds.iter().any(|&s| bad_sd(s)) || bad_sd(self.y_noise_sd) {
            return Err(Error::InvalidConfig(
                "noise standard deviations must be positive".into(),
            ));
        }
        if self.resolved_trials() == 0 {
            return Err(Error::InvalidConfig("trials must be >= 1".into()));
        }
        if self.unlabeled_n < 2 || self.labeled_n < 2 {
            return Err(Error::InvalidConfig(
                "unlabeled_n and labeled_n must be >= 2".into(),
            ));
        }
        for &g in &self.sample_size_groups {
            if g < 2 {
                return Err(Error::InvalidConfig(
                    "sample size groups must be >= 2".into(),
                ));
            }
        }
        for &g in &self.labeled_size_groups {
            if g < 2 {
                return Err(Error::InvalidConfig(
                    "labeled size groups must be >= 2".into(),
                ));
            }
        }
        if self.sample_size_groups.is_empty() || self.labeled_size_groups.is_empty() {
            return Err(Error::InvalidConfig("group lists must be non-empty".into()));
        }
        self.eval()?;
        Ok(())
    }
}
