//! Configuration-driven experiment harness.
//!
//! Reproduces the three simulation experiments and the oracle self-check:
//! feature-set comparison at large labeled scale (`exp1`), fused-feature
//! quality against unlabeled sample size (`exp2`), labeled-data scarcity
//! (`exp3`), and exact-moment correctness witnesses (`oracle_check`).
//! Runs are deterministic given the configuration and master seed; trial
//! records land in `records.csv` with per-group statistics in
//! `summary.json`.

pub mod config;
pub mod output;
pub mod record;
pub mod run;

pub use config::{EvalMode, ExperimentConfig, ExperimentKind};
pub use output::{records_csv, write_outputs, RECORDS_FILE, SUMMARY_FILE};
pub use record::{GroupSummary, Quartiles, RunSummary, TrialRecord};
pub use run::{
    run, run_exp1, run_exp2, run_exp3, run_oracle_check, OracleCheckSummary, RunOutcome,
    ORACLE_CHECK_KS, ORACLE_CHECK_THRESHOLD,
};
