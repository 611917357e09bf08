//! Fold-wise baseline scoring of every derived variant plus the template
//! detector, producing one score file (and provenance sidecar) per member.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use dasal_core::baseline::{image_features, DetectorExample, LinearScorer, ScorerParams, TemplateDetector};
use dasal_core::dataset::load_manifest;
use dasal_core::evaluation::{grouped_kfold, read_plan, write_plan, FoldPlan, FoldProvenance, ScoreProvenance};
use dasal_core::fusion::{member_file_name, patch_sample_id, write_detections, write_scores};
use dasal_core::imaging::io::read_png;
use dasal_core::imaging::ImageMatrix;
use dasal_core::{Background, DetectionBox, Label, MethodId, SampleRecord, ScoreVector};
use rayon::prelude::*;

use crate::derive::{read_variant_manifest, variant_dir, Role, VariantRow};
use crate::util::thread_pool;

#[derive(Debug, Clone)]
pub struct ScoreOptions {
    pub manifest: PathBuf,
    /// Pipeline output directory holding `derived/`; scores go to `scores/`.
    pub out: PathBuf,
    pub methods: Vec<MethodId>,
    pub detector: bool,
    pub backgrounds: Vec<Background>,
    /// Existing plan; otherwise one is built from `k` and `seed`.
    pub plan: Option<PathBuf>,
    pub k: usize,
    pub seed: u64,
    pub scorer: ScorerParams,
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScoreSummary {
    pub members: usize,
    pub rows: usize,
    pub plan: PathBuf,
}

pub const PLAN_FILE: &str = "plan.csv";

pub fn scores_dir(out: &Path) -> PathBuf {
    out.join("scores")
}

/// The plan given by file, or a fresh one saved under `out`.
pub fn resolve_plan(
    records: &[SampleRecord],
    plan: Option<&Path>,
    k: usize,
    seed: u64,
    out: &Path,
) -> Result<(FoldPlan, PathBuf)> {
    match plan {
        Some(p) => {
            let plan = read_plan(p)?;
            plan.check_grouping(records)?;
            Ok((plan, p.to_path_buf()))
        }
        None => {
            let plan = grouped_kfold(records, k, seed)?;
            let path = out.join(PLAN_FILE);
            write_plan(&path, &plan)?;
            Ok((plan, path))
        }
    }
}

enum Unit {
    Variant(Background, MethodId),
    Detector(Background),
}

pub fn run(opts: &ScoreOptions) -> Result<ScoreSummary> {
    let records = load_manifest(&opts.manifest)?;
    if records.is_empty() {
        bail!("manifest {} lists no samples", opts.manifest.display());
    }
    fs::create_dir_all(&opts.out)?;
    let (plan, plan_path) = resolve_plan(&records, opts.plan.as_deref(), opts.k, opts.seed, &opts.out)?;
    let dir = scores_dir(&opts.out);
    fs::create_dir_all(&dir)?;

    let mut units = Vec::new();
    for &bg in &opts.backgrounds {
        units.extend(opts.methods.iter().map(|&m| Unit::Variant(bg, m)));
        if opts.detector {
            units.push(Unit::Detector(bg));
        }
    }
    let rows: Vec<usize> = thread_pool(opts.workers)?.install(|| {
        units
            .par_iter()
            .map(|u| match *u {
                Unit::Variant(bg, m) => score_variant(opts, &plan, &dir, bg, m),
                Unit::Detector(bg) => score_detector(&records, &plan, &dir, bg),
            })
            .collect::<Result<_>>()
    })?;
    let summary = ScoreSummary {
        members: units.len(),
        rows: rows.iter().sum(),
        plan: plan_path,
    };
    log::info!(
        "scored {} members ({} score rows) into {}",
        summary.members,
        summary.rows,
        dir.display()
    );
    Ok(summary)
}

fn fold_provenance(plan: &FoldPlan, fold: usize, train: BTreeSet<String>) -> FoldProvenance {
    FoldProvenance {
        fold,
        train_experiments: train,
        test_experiments: plan.test_experiments(fold).into_iter().map(String::from).collect(),
    }
}

fn score_variant(opts: &ScoreOptions, plan: &FoldPlan, dir: &Path, bg: Background, method: MethodId) -> Result<usize> {
    let vdir = variant_dir(&opts.out.join("derived"), bg, method);
    let rows = read_variant_manifest(&vdir).with_context(|| format!("variant {method}.{bg}; run `derive` first"))?;
    let features: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| {
            let path = vdir.join(&r.image_path);
            Ok(image_features(&read_png(&path)?))
        })
        .collect::<Result<_>>()?;
    let fold_of = |r: &VariantRow| {
        plan.fold_of(&r.experiment_id)
            .with_context(|| format!("experiment `{}` is not in the fold plan", r.experiment_id))
    };

    let member = format!("{method}.{bg}");
    let mut scores: BTreeMap<String, ScoreVector> = BTreeMap::new();
    let mut provenance = ScoreProvenance {
        member: member.clone(),
        folds: Vec::new(),
    };
    for fold in 0..plan.k {
        let mut train = Vec::new();
        let mut train_exps = BTreeSet::new();
        let mut test = Vec::new();
        for (r, x) in rows.iter().zip(&features) {
            let held_out = fold_of(r)? == fold;
            match (held_out, r.role) {
                (false, Role::All | Role::Train) => {
                    train.push((x.clone(), r.label));
                    train_exps.insert(r.experiment_id.clone());
                }
                (true, Role::All | Role::Test) => test.push((r, x)),
                _ => {}
            }
        }
        if test.is_empty() {
            continue;
        }
        let model = LinearScorer::fit(&train, &opts.scorer).with_context(|| format!("{member}, fold {fold}"))?;
        for (r, x) in test {
            let id = match r.role {
                Role::Test => patch_sample_id(&r.sample_id, r.x_offset.context("patch row without offset")?),
                _ => r.sample_id.clone(),
            };
            scores.insert(id, model.score(x));
        }
        provenance.folds.push(fold_provenance(plan, fold, train_exps));
    }
    let path = dir.join(member_file_name(method, bg));
    write_scores(&path, scores.iter().map(|(k, v)| (k.as_str(), *v)))?;
    provenance.save(&ScoreProvenance::sidecar(&path))?;
    log::debug!("{member}: {} rows", scores.len());
    Ok(scores.len())
}

fn score_detector(records: &[SampleRecord], plan: &FoldPlan, dir: &Path, bg: Background) -> Result<usize> {
    let member = format!("{}.{bg}", MethodId::Detector);
    let recs: Vec<&SampleRecord> = records.iter().filter(|r| r.background == bg).collect();
    let images: Vec<ImageMatrix> = recs
        .iter()
        .map(|r| read_png(&r.image_path))
        .collect::<dasal_core::Result<_>>()?;
    let mut detections: BTreeMap<String, Vec<DetectionBox>> = BTreeMap::new();
    let mut provenance = ScoreProvenance {
        member: member.clone(),
        folds: Vec::new(),
    };
    for fold in 0..plan.k {
        let mut examples = Vec::new();
        let mut train_exps = BTreeSet::new();
        let mut test = Vec::new();
        for (r, img) in recs.iter().zip(&images) {
            if plan.fold_of(&r.experiment_id) == Some(fold) {
                test.push((r, img));
                continue;
            }
            train_exps.insert(r.experiment_id.clone());
            if let (Label::Release, Some(peak), Some(interval)) = (r.label, r.peak_position, r.release_interval) {
                examples.push(DetectorExample {
                    image: img,
                    peak,
                    interval,
                });
            }
        }
        if test.is_empty() {
            continue;
        }
        let det = TemplateDetector::fit(&examples).with_context(|| format!("{member}, fold {fold}"))?;
        for (r, img) in test {
            detections.insert(r.sample_id.clone(), det.detect(img));
        }
        provenance.folds.push(fold_provenance(plan, fold, train_exps));
    }
    let path = dir.join(member_file_name(MethodId::Detector, bg));
    write_detections(&path, detections.iter().map(|(k, v)| (k.as_str(), v.as_slice())))?;
    provenance.save(&ScoreProvenance::sidecar(&path))?;
    Ok(detections.len())
}
