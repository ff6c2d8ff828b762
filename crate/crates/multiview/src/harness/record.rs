//! Per-trial records and summary statistics.

use serde::Serialize;

/// Outcome of one trial: losses for the feature sets that the experiment
/// compares, loss ratios against the full feature set, and the maximum
/// principal angle between the fitted fused subspace and the population
/// optimum. Absent values mean the experiment does not produce them (or
/// the trial failed).
#[derive(Debug, Clone, Serialize)]
pub struct TrialRecord {
    pub group_label: Option<String>,
    pub trial_index: usize,
    pub model_seed: u64,
    pub loss_s1: Option<f64>,
    pub loss_s2: Option<f64>,
    pub loss_s3: Option<f64>,
    pub ratio_s2_s1: Option<f64>,
    pub ratio_s3_s1: Option<f64>,
    pub principal_angle_max: Option<f64>,
    pub labeled_n: usize,
    pub unlabeled_n: usize,
    pub k: usize,
    pub failed: bool,
}

impl TrialRecord {
    /// Recompute ratios from the stored losses (kept consistent by
    /// construction; call after setting losses).
    pub fn with_ratios(mut self) -> Self {
        self.ratio_s2_s1 = match (self.loss_s1, self.loss_s2) {
            (Some(s1), Some(s2)) if s1 > 0.0 => Some(s2 / s1),
            _ => None,
        };
        self.ratio_s3_s1 = match (self.loss_s1, self.loss_s3) {
            (Some(s1), Some(s3)) if s1 > 0.0 => Some(s3 / s1),
            _ => None,
        };
        self
    }

    pub fn failed(
        group_label: Option<String>,
        trial_index: usize,
        model_seed: u64,
        k: usize,
    ) -> Self {
        TrialRecord {
            group_label,
            trial_index,
            model_seed,
            loss_s1: None,
            loss_s2: None,
            loss_s3: None,
            ratio_s2_s1: None,
            ratio_s3_s1: None,
            principal_angle_max: None,
            labeled_n: 0,
            unlabeled_n: 0,
            k,
            failed: true,
        }
    }
}

/// Median and quartiles (linear interpolation) plus mean of a sample.
#[derive(Debug, Clone, Serialize)]
pub struct Quartiles {
    pub count: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
}

impl Quartiles {
    /// `None` when the sample is empty.
    pub fn from_values(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite loss values"));
        let quantile = |q: f64| -> f64 {
            // linear interpolation between closest ranks
            let pos = q * (sorted.len() - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            let frac = pos - lo as f64;
            sorted[lo] * (1.0 - frac) + sorted[hi] * frac
        };
        Some(Quartiles {
            count: sorted.len(),
            min: sorted[0],
            q1: quantile(0.25),
            median: quantile(0.5),
            q3: quantile(0.75),
            max: sorted[sorted.len() - 1],
            mean: sorted.iter().sum::<f64>() / sorted.len() as f64,
        })
    }
}

/// Summary of one feature set within one group.
#[derive(Debug, Clone, Serialize)]
pub struct FeatureSetSummary {
    pub feature_set: String,
    pub loss: Quartiles,
}

/// Summary of one group of trials.
#[derive(Debug, Clone, Serialize)]
pub struct GroupSummary {
    pub group_label: Option<String>,
    pub trials: usize,
    pub excluded_failures: usize,
    pub feature_sets: Vec<FeatureSetSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio_s2_s1: Option<Quartiles>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio_s3_s1: Option<Quartiles>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub principal_angle_max: Option<Quartiles>,
}

/// The structured summary written next to the record file.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub experiment: String,
    pub k: usize,
    pub trials_per_group: usize,
    pub master_seed: u64,
    pub unlabeled_n: usize,
    pub labeled_n: usize,
    pub eval_mode: String,
    pub failed_trials: usize,
    pub groups: Vec<GroupSummary>,
}

type LossGetter = fn(&TrialRecord) -> Option<f64>;

/// Group records by label (in first-seen order) and summarize each group.
pub fn summarize_groups(records: &[TrialRecord]) -> Vec<GroupSummary> {
    let mut order: Vec<Option<String>> = Vec::new();
    for r in records {
        if !order.contains(&r.group_label) {
            order.push(r.group_label.clone());
        }
    }
    order
        .into_iter()
        .map(|label| {
            let group: Vec<&TrialRecord> =
                records.iter().filter(|r| r.group_label == label).collect();
            let ok: Vec<&&TrialRecord> = group.iter().filter(|r| !r.failed).collect();
            let collect = |f: LossGetter| -> Vec<f64> { ok.iter().filter_map(|r| f(r)).collect() };
            let mut feature_sets = Vec::new();
            let getters: [(&str, LossGetter); 3] = [
                ("s1", |r| r.loss_s1),
                ("s2", |r| r.loss_s2),
                ("s3", |r| r.loss_s3),
            ];
            for (name, getter) in getters {
                if let Some(q) = Quartiles::from_values(&collect(getter)) {
                    feature_sets.push(FeatureSetSummary {
                        feature_set: name.to_string(),
                        loss: q,
                    });
                }
            }
            GroupSummary {
                group_label: label,
                trials: group.len(),
                excluded_failures: group.len() - ok.len(),
                feature_sets,
                ratio_s2_s1: Quartiles::from_values(&collect(|r| r.ratio_s2_s1)),
                ratio_s3_s1: Quartiles::from_values(&collect(|r| r.ratio_s3_s1)),
                principal_angle_max: Quartiles::from_values(&collect(|r| r.principal_angle_max)),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quartiles_interpolate_linearly() {
        let q = Quartiles::from_values(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(q.min, 1.0);
        assert_eq!(q.max, 4.0);
        assert!((q.median - 2.5).abs() < 1e-12);
        assert!((q.q1 - 1.75).abs() < 1e-12);
        assert!((q.q3 - 3.25).abs() < 1e-12);
        assert!((q.mean - 2.5).abs() < 1e-12);
    }

    #[test]
    fn quartiles_of_singleton() {
        let q = Quartiles::from_values(&[7.0]).unwrap();
        assert_eq!(q.median, 7.0);
        assert_eq!(q.q1, 7.0);
        assert_eq!(q.q3, 7.0);
    }

    #[test]
    fn ratios_follow_losses() {
        let r = TrialRecord {
            group_label: None,
            trial_index: 0,
            model_seed: 1,
            loss_s1: Some(0.25),
            loss_s2: Some(0.26),
            loss_s3: Some(0.5),
            ratio_s2_s1: None,
            ratio_s3_s1: None,
            principal_angle_max: None,
            labeled_n: 10,
            unlabeled_n: 10,
            k: 2,
            failed: false,
        }
        .with_ratios();
        assert!((r.ratio_s2_s1.unwrap() - 1.04).abs() < 1e-12);
        assert!((r.ratio_s3_s1.unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn failed_trials_are_excluded_from_summaries() {
        let ok = TrialRecord {
            group_label: Some("g".into()),
            trial_index: 0,
            model_seed: 1,
            loss_s1: Some(1.0),
            loss_s2: Some(2.0),
            loss_s3: None,
            ratio_s2_s1: None,
            ratio_s3_s1: None,
            principal_angle_max: None,
            labeled_n: 10,
            unlabeled_n: 10,
            k: 2,
            failed: false,
        }
        .with_ratios();
        let bad = TrialRecord::failed(Some("g".into()), 1, 2, 2);
        let groups = summarize_groups(&[ok, bad]);
        assert_eq!(groups.len(), 1);
        assert_eq!(groups[0].trials, 2);
        assert_eq!(groups[0].excluded_failures, 1);
        assert_eq!(groups[0].feature_sets.len(), 2);
        assert_eq!(groups[0].feature_sets[0].loss.count, 1);
    }
}
