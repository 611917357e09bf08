//! Experiment-grouped k-fold planning, binary metrics and the
//! cross-validated ensemble run.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Label, SampleRecord};
use crate::error::{Error, Result};
use crate::fusion::{run_ensemble, EnsembleConfig, FusedPrediction, MemberScores};

/// Experiment to fold assignment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub assignment: BTreeMap<String, usize>,
}

impl FoldPlan {
    pub fn fold_of(&self, experiment: &str) -> Option<usize> {
        self.assignment.get(experiment).copied()
    }

    pub fn test_experiments(&self, fold: usize) -> BTreeSet<&str> {
        self.assignment
            .iter()
            .filter(|&(_, &f)| f == fold)
            .map(|(e, _)| e.as_str())
            .collect()
    }

    pub fn train_experiments(&self, fold: usize) -> BTreeSet<&str> {
        self.assignment
            .iter()
            .filter(|&(_, &f)| f != fold)
            .map(|(e, _)| e.as_str())
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::ProtocolViolation("fold plan has k = 0".into()));
        }
        let mut used = vec![false; self.k];
        for (e, &f) in &self.assignment {
            if f >= self.k {
                return Err(Error::ProtocolViolation(format!(
                    "experiment `{e}` assigned to fold {f}, outside [0,{})",
                    self.k
                )));
            }
            used[f] = true;
        }
        if let Some(f) = used.iter().position(|u| !u) {
            return Err(Error::ProtocolViolation(format!("fold {f} has no experiments")));
        }
        Ok(())
    }

    /// Machine check of the grouping invariant over concrete samples: every
    /// experiment is planned, and no fold shares an experiment between its
    /// training and test samples.
    pub fn check_grouping(&self, samples: &[SampleRecord]) -> Result<()> {
        self.validate()?;
        for s in samples {
            if self.fold_of(&s.experiment_id).is_none() {
                return Err(Error::ProtocolViolation(format!(
                    "experiment `{}` of sample `{}` is not in the fold plan",
                    s.experiment_id, s.sample_id
                )));
            }
        }
        for fold in 0..self.k {
            let mut train = BTreeSet::new();
            let mut test = BTreeSet::new();
            for s in samples {
                if self.fold_of(&s.experiment_id) == Some(fold) {
                    test.insert(s.experiment_id.as_str());
                } else {
                    train.insert(s.experiment_id.as_str());
                }
            }
            if let Some(e) = train.intersection(&test).next() {
                return Err(Error::ProtocolViolation(format!(
                    "experiment `{e}` is in both train and test of fold {fold}"
                )));
            }
        }
        Ok(())
    }
}

/// Experiments sorted by descending sample count (ties in seeded random
/// order), each placed in the fold currently holding the fewest samples.
pub fn grouped_kfold(samples: &[SampleRecord], k: usize, seed: u64) -> Result<FoldPlan> {
    if k == 0 {
        return Err(Error::invalid("fold count must be at least 1"));
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for s in samples {
        *counts.entry(&s.experiment_id).or_default() += 1;
    }
    if counts.len() < k {
        return Err(Error::invalid(format!(
            "{} distinct experiments cannot fill {k} folds",
            counts.len()
        )));
    }
    let mut order: Vec<(&str, usize)> = counts.into_iter().collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    order.sort_by_key(|&(_, n)| std::cmp::Reverse(n));

    let mut load = vec![0usize; k];
    let mut assignment = BTreeMap::new();
    for (exp, n) in order {
        let fold = (0..k).min_by_key(|&f| (load[f], f)).expect("k >= 1");
        load[fold] += n;
        assignment.insert(exp.to_string(), fold);
    }
    Ok(FoldPlan { k, assignment })
}

pub fn write_plan(path: &Path, plan: &FoldPlan) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    w.write_record(["experiment_id", "fold"])
        .map_err(|e| Error::csv(path, e))?;
    for (e, f) in &plan.assignment {
        w.write_record([e.as_str(), &f.to_string()])
            .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads `experiment_id,fold`; `k` is one past the largest fold index. An
/// experiment listed twice is a protocol violation.
pub fn read_plan(path: &Path) -> Result<FoldPlan> {
    #[derive(Deserialize)]
    struct Row {
        experiment_id: String,
        fold: usize,
    }
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let mut assignment = BTreeMap::new();
    for row in reader.deserialize::<Row>() {
        let row = row.map_err(|e| Error::csv(path, e))?;
        if let Some(prev) = assignment.insert(row.experiment_id.clone(), row.fold) {
            return Err(Error::ProtocolViolation(format!(
                "{}: experiment `{}` listed in folds {prev} and {}",
                path.display(),
                row.experiment_id,
                row.fold
            )));
        }
    }
    let k = assignment.values().max().map_or(0, |m| m + 1);
    let plan = FoldPlan { k, assignment };
    plan.validate()?;
    Ok(plan)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    pub fn from_labels(labels: &[Label], predictions: &[Label]) -> Self {
        let mut c = Confusion::default();
        for (&l, &p) in labels.iter().zip(predictions) {
            match (l, p) {
                (Label::Release, Label::Release) => c.tp += 1,
                (Label::Release, Label::NoRelease) => c.fn_ += 1,
                (Label::NoRelease, Label::NoRelease) => c.tn += 1,
                (Label::NoRelease, Label::Release) => c.fp += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn merge(&self, o: &Confusion) -> Confusion {
        Confusion {
            tp: self.tp + o.tp,
            tn: self.tn + o.tn,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub auc: f64,
    pub f1: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    #[serde(flatten)]
    pub confusion: Confusion,
}

/// Area under the ROC curve, sweeping every distinct score as a threshold.
/// Tied scores move the curve diagonally, so constant scores give 0.5.
pub fn roc_auc(labels: &[Label], release_scores: &[f64]) -> Result<f64> {
    if labels.len() != release_scores.len() {
        return Err(Error::invalid("labels and scores differ in length"));
    }
    let pos = labels.iter().filter(|l| l.is_release()).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedMetric {
            metric: "auc",
            reason: "both classes must be present".into(),
        });
    }
    if release_scores.iter().any(|s| s.is_nan()) {
        return Err(Error::invalid("release scores contain NaN"));
    }
    let mut idx: Vec<usize> = (0..labels.len()).collect();
    idx.sort_by(|&a, &b| release_scores[b].total_cmp(&release_scores[a]));
    let (mut tp, mut fp) = (0usize, 0usize);
    let (mut prev_tpr, mut prev_fpr) = (0.0, 0.0);
    let mut area = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let s = release_scores[idx[i]];
        while i < idx.len() && release_scores[idx[i]] == s {
            if labels[idx[i]].is_release() {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let tpr = tp as f64 / pos as f64;
        let fpr = fp as f64 / neg as f64;
        area += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0;
        prev_tpr = tpr;
        prev_fpr = fpr;
    }
    Ok(area)
}

pub fn compute_metrics(labels: &[Label], predictions: &[Label], release_scores: &[f64]) -> Result<MetricsReport> {
    if labels.len() != predictions.len() || labels.len() != release_scores.len() {
        return Err(Error::invalid("labels, predictions and scores must have equal length"));
    }
    let c = Confusion::from_labels(labels, predictions);
    if c.tp + c.fn_ == 0 {
        return Err(Error::UndefinedMetric {
            metric: "sensitivity",
            reason: "no release samples".into(),
        });
    }
    if c.tn + c.fp == 0 {
        return Err(Error::UndefinedMetric {
            metric: "specificity",
            reason: "no no-release samples".into(),
        });
    }
    let sensitivity = c.tp as f64 / (c.tp + c.fn_) as f64;
    let specificity = c.tn as f64 / (c.tn + c.fp) as f64;
    let precision = if c.tp + c.fp > 0 {
        c.tp as f64 / (c.tp + c.fp) as f64
    } else {
        0.0
    };
    let f1 = if precision + sensitivity > 0.0 {
        2.0 * precision * sensitivity / (precision + sensitivity)
    } else {
        0.0
    };
    Ok(MetricsReport {
        accuracy: (c.tp + c.tn) as f64 / c.total() as f64,
        auc: roc_auc(labels, release_scores)?,
        f1,
        sensitivity,
        specificity,
        confusion: c,
    })
}

pub fn metrics_of(fused: &[FusedPrediction]) -> Result<MetricsReport> {
    let labels: Vec<Label> = fused.iter().map(|f| f.label).collect();
    let preds: Vec<Label> = fused.iter().map(|f| f.prediction).collect();
    let scores: Vec<f64> = fused.iter().map(|f| f.scores.release).collect();
    compute_metrics(&labels, &preds, &scores)
}

/// Which experiments trained the model that scored each fold's test experiments.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreProvenance {
    pub member: String,
    pub folds: Vec<FoldProvenance>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldProvenance {
    pub fold: usize,
    pub train_experiments: BTreeSet<String>,
    pub test_experiments: BTreeSet<String>,
}

impl ScoreProvenance {
    /// Sidecar path `<scores>.provenance.json`.
    pub fn sidecar(score_path: &Path) -> PathBuf {
        let mut s = score_path.as_os_str().to_owned();
        s.push(".provenance.json");
        PathBuf::from(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("provenance serializes");
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Every evaluated experiment must have been scored by a model that saw
    /// no experiment of its plan fold.
    pub fn check(&self, plan: &FoldPlan, experiments: &BTreeSet<&str>) -> Result<()> {
        for &e in experiments {
            let fold = plan
                .fold_of(e)
                .ok_or_else(|| Error::ProtocolViolation(format!("experiment `{e}` is not in the fold plan")))?;
            let entry = self
                .folds
                .iter()
                .find(|f| f.test_experiments.contains(e))
                .ok_or_else(|| {
                    Error::ProtocolViolation(format!(
                        "member `{}` never scored experiment `{e}` as test",
                        self.member
                    ))
                })?;
            let held_out = plan.test_experiments(fold);
            if let Some(leak) = entry.train_experiments.iter().find(|t| held_out.contains(t.as_str())) {
                return Err(Error::ProtocolViolation(format!(
                    "member `{}` scored experiment `{e}` (fold {fold}) with a model trained on `{leak}` from the same fold",
                    self.member
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub confusion: Confusion,
    /// Absent when the fold lacks one of the classes.
    pub metrics: Option<MetricsReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub ensemble: String,
    pub members: usize,
    pub pooled: MetricsReport,
    pub folds: Vec<FoldReport>,
}

/// One evaluated sample: its label and experiment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalSample {
    pub label: Label,
    pub experiment_id: String,
}

/// Fuses every sample, checks fold provenance of every member and reports
/// pooled and per-fold metrics.
pub fn cross_validated_run(
    config: &EnsembleConfig,
    member_scores: &[MemberScores],
    provenance: &[ScoreProvenance],
    plan: &FoldPlan,
    samples: &BTreeMap<String, EvalSample>,
) -> Result<(CvReport, Vec<FusedPrediction>)> {
    plan.validate()?;
    if provenance.len() != config.members.len() {
        return Err(Error::ProtocolViolation(format!(
            "{} members but {} provenance records",
            config.members.len(),
            provenance.len()
        )));
    }
    let experiments: BTreeSet<&str> = samples.values().map(|s| s.experiment_id.as_str()).collect();
    for p in provenance {
        p.check(plan, &experiments)?;
    }
    let labels: BTreeMap<String, Label> = samples.iter().map(|(k, v)| (k.clone(), v.label)).collect();
    let fused = run_ensemble(config, member_scores, &labels)?;
    let pooled = metrics_of(&fused)?;

    let mut by_fold: Vec<Vec<FusedPrediction>> = vec![Vec::new(); plan.k];
    for f in &fused {
        let fold = plan
            .fold_of(&samples[&f.sample_id].experiment_id)
            .expect("checked above");
        by_fold[fold].push(f.clone());
    }
    let folds = by_fold
        .iter()
        .enumerate()
        .map(|(fold, preds)| {
            let labels: Vec<Label> = preds.iter().map(|p| p.label).collect();
            let predictions: Vec<Label> = preds.iter().map(|p| p.prediction).collect();
            FoldReport {
                fold,
                confusion: Confusion::from_labels(&labels, &predictions),
                metrics: metrics_of(preds).ok(),
            }
        })
        .collect();
    Ok((
        CvReport {
            ensemble: config.name.clone(),
            members: config.members.len(),
            pooled,
            folds,
        },
        fused,
    ))
}

/// One line of the results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub background: String,
    pub method: String,
    pub scores_fused: usize,
    pub metrics: MetricsReport,
}

/// Fixed-width table with metrics in percent. Specificity is the true
/// negative rate.
pub fn render_table(rows: &[TableRow]) -> String {
    let mut out = format!(
        "{:<10} {:<22} {:>12} {:>9} {:>7} {:>7} {:>11} {:>11}\n",
        "Background", "Method", "Scores Fused", "Accuracy", "AUC", "F1", "Sensitivity", "Specificity"
    );
    for r in rows {
        let m = &r.metrics;
        out.push_str(&format!(
            "{:<10} {:<22} {:>12} {:>9.2} {:>7.2} {:>7.2} {:>11.2} {:>11.2}\n",
            r.background,
            r.method,
            r.scores_fused,
            100.0 * m.accuracy,
            100.0 * m.auc,
            100.0 * m.f1,
            100.0 * m.sensitivity,
            100.0 * m.specificity
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Background;

    fn rec(id: usize, exp: usize) -> SampleRecord {
        SampleRecord {
            sample_id: format!("s{id}"),
            experiment_id: format!("e{exp:02}"),
            background: Background::A,
            label: Label::NoRelease,
            image_path: PathBuf::new(),
            peak_position: None,
            release_interval: None,
        }
    }

    use Label::{NoRelease as N, Release as R};

    #[test]
    fn hand_computed_confusion() {
        let m = compute_metrics(&[R, R, N, N], &[R, N, N, N], &[0.9, 0.4, 0.2, 0.1]).unwrap();
        assert_eq!(
            m.confusion,
            Confusion {
                tp: 1,
                fn_: 1,
                tn: 2,
                fp: 0
            }
        );
        assert_eq!(m.sensitivity, 0.5);
        assert_eq!(m.specificity, 1.0);
        assert_eq!(m.accuracy, 0.75);
        assert_eq!(m.f1, 2.0 / 3.0);
    }

    #[test]
    fn auc_extremes() {
        assert_eq!(roc_auc(&[R, R, N, N], &[0.9, 0.8, 0.2, 0.1]).unwrap(), 1.0);
        assert_eq!(roc_auc(&[R, N, R, N], &[0.3; 4]).unwrap(), 0.5);
        assert_eq!(roc_auc(&[R, R, N, N], &[0.1, 0.2, 0.8, 0.9]).unwrap(), 0.0);
        assert!(matches!(
            roc_auc(&[R, R], &[0.1, 0.2]),
            Err(Error::UndefinedMetric { .. })
        ));
    }

    #[test]
    fn absent_class_is_undefined() {
        assert!(matches!(
            compute_metrics(&[N, N], &[N, N], &[0.0, 0.0]),
            Err(Error::UndefinedMetric { .. })
        ));
    }

    #[test]
    fn thirty_equal_experiments() {
        let samples: Vec<SampleRecord> = (0..300).map(|i| rec(i, i / 10)).collect();
        let plan = grouped_kfold(&samples, 10, 3).unwrap();
        for f in 0..10 {
            assert_eq!(plan.test_experiments(f).len(), 3);
        }
        plan.check_grouping(&samples).unwrap();
        assert_eq!(plan, grouped_kfold(&samples, 10, 3).unwrap());
    }

    #[test]
    fn degenerate_and_invalid_k() {
        let samples: Vec<SampleRecord> = (0..30).map(|i| rec(i, i / 3)).collect();
        let one = grouped_kfold(&samples, 1, 0).unwrap();
        assert!(one.assignment.values().all(|&f| f == 0));
        assert!(grouped_kfold(&samples, 11, 0).is_err());
        assert!(grouped_kfold(&samples, 0, 0).is_err());
    }

    #[test]
    fn plan_csv_round_trip_and_duplicates() {
        let dir = tempfile::tempdir().unwrap();
        let samples: Vec<SampleRecord> = (0..40).map(|i| rec(i, i % 8)).collect();
        let plan = grouped_kfold(&samples, 4, 9).unwrap();
        let p = dir.path().join("plan.csv");
        write_plan(&p, &plan).unwrap();
        assert_eq!(read_plan(&p).unwrap(), plan);
        fs::write(&p, "experiment_id,fold\ne00,0\ne01,1\ne00,1\n").unwrap();
        assert!(matches!(read_plan(&p), Err(Error::ProtocolViolation(_))));
    }

    #[test]
    fn provenance_detects_leakage() {
        let plan = FoldPlan {
            k: 2,
            assignment: [("a".into(), 0), ("b".into(), 0), ("c".into(), 1)].into(),
        };
        let exps: BTreeSet<&str> = ["a", "b", "c"].into();
        let good = ScoreProvenance {
            member: "m".into(),
            folds: vec![
                FoldProvenance {
                    fold: 0,
                    train_experiments: ["c".into()].into(),
                    test_experiments: ["a".into(), "b".into()].into(),
                },
                FoldProvenance {
                    fold: 1,
                    train_experiments: ["a".into(), "b".into()].into(),
                    test_experiments: ["c".into()].into(),
                },
            ],
        };
        good.check(&plan, &exps).unwrap();
        let mut bad = good.clone();
        bad.folds[0].train_experiments.insert("b".into());
        assert!(matches!(bad.check(&plan, &exps), Err(Error::ProtocolViolation(_))));
    }
}
