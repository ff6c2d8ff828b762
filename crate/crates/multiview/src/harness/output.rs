//! Result files: a long-format CSV of per-trial rows and a structured
//! JSON summary, both written atomically (temp file + rename).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::Result;

use super::record::TrialRecord;
use super::run::RunOutcome;

pub const RECORDS_FILE: &str = "records.csv";
pub const SUMMARY_FILE: &str = "summary.json";

const CSV_HEADER: &str = "experiment,group_label,trial_index,model_seed,feature_set,\
feature_dim,labeled_n,unlabeled_n,loss,ratio_to_s1,principal_angle_max,failed";

/// Write `records.csv` and `summary.json` into `dir`, creating it first.
pub fn write_outputs(dir: &Path, experiment: &str, outcome: &RunOutcome) -> Result<()> {
    fs::create_dir_all(dir)?;
    atomic_write(
        &dir.join(RECORDS_FILE),
        records_csv(experiment, outcome.records()).as_bytes(),
    )?;
    let mut json = serde_json::to_string_pretty(&outcome.summary_json()).expect("summary encodes");
    json.push('\n');
    atomic_write(&dir.join(SUMMARY_FILE), json.as_bytes())?;
    Ok(())
}

/// Render records in long format: one row per (trial, feature set) with a
/// loss, or a single `s2` row carrying the witness/failure state when the
/// trial produced no losses.
pub fn records_csv(experiment: &str, records: &[TrialRecord]) -> String {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        let sets: [(&str, usize, Option<f64>, Option<f64>); 3] = [
            ("s1", 3 * r.k, r.loss_s1, r.loss_s1.map(|_| 1.0)),
            ("s2", r.k, r.loss_s2, r.ratio_s2_s1),
            ("s3", r.k, r.loss_s3, r.ratio_s3_s1),
        ];
        let mut wrote_any = false;
        for (name, dim, loss, ratio) in sets {
            if loss.is_some() {
                write_row(&mut out, experiment, r, name, dim, loss, ratio);
                wrote_any = true;
            }
        }
        if !wrote_any {
            // oracle-check witnesses and failed trials still get one row
            write_row(&mut out, experiment, r, "s2", r.k, None, None);
        }
    }
    out
}

fn write_row(
    out: &mut String,
    experiment: &str,
    r: &TrialRecord,
    feature_set: &str,
    feature_dim: usize,
    loss: Option<f64>,
    ratio: Option<f64>,
) {
    let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    writeln!(
        out,
        "{},{},{},{},{},{},{},{},{},{},{},{}",
        experiment,
        r.group_label.as_deref().unwrap_or(""),
        r.trial_index,
        r.model_seed,
        feature_set,
        feature_dim,
        r.labeled_n,
        r.unlabeled_n,
        fmt(loss),
        fmt(ratio),
        fmt(r.principal_angle_max),
        r.failed
    )
    .expect("writing to string cannot fail");
}

fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}
