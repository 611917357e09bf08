//! Fusion, cross-validated evaluation and the results report.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use dasal_core::dataset::load_manifest;
use dasal_core::evaluation::{
    cross_validated_run, grouped_kfold, metrics_of, read_plan, render_table, CvReport, EvalSample, FoldPlan,
    MetricsReport, ScoreProvenance, TableRow,
};
use dasal_core::fusion::{
    member_file_name, run_ensemble, write_fused, FusedPrediction, FusionRule, Member, MemberScores, NamedEnsemble,
};
use dasal_core::{Background, EnsembleConfig, Label, MethodId, SampleRecord};
use serde::Serialize;

use crate::util::write_json;

/// A named ensemble or the path of an ensemble TOML document.
#[derive(Debug, Clone, PartialEq)]
pub enum EnsembleSpec {
    Named(NamedEnsemble),
    File(PathBuf),
}

impl FromStr for EnsembleSpec {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let path = Path::new(s);
        if path.is_file() || s.ends_with(".toml") {
            return Ok(EnsembleSpec::File(path.to_path_buf()));
        }
        s.parse::<NamedEnsemble>()
            .map(EnsembleSpec::Named)
            .with_context(|| format!("`{s}` is neither an ensemble name nor a config file"))
    }
}

impl EnsembleSpec {
    pub fn config(&self, scores: &Path) -> Result<EnsembleConfig> {
        Ok(match self {
            EnsembleSpec::Named(e) => e.config(scores),
            EnsembleSpec::File(p) => EnsembleConfig::load(p)?,
        })
    }

    fn background_label(&self, config: &EnsembleConfig) -> String {
        match self {
            EnsembleSpec::Named(e) => e.background_label().to_string(),
            EnsembleSpec::File(_) => {
                let mut bgs: Vec<Background> = config.members.iter().map(|m| m.background).collect();
                bgs.sort();
                bgs.dedup();
                bgs.iter().map(|b| b.as_str()).collect::<Vec<_>>().join("+")
            }
        }
    }
}

/// One entry per recording; backgrounds of the same recording must agree.
pub fn eval_samples(records: &[SampleRecord]) -> Result<BTreeMap<String, EvalSample>> {
    let mut out: BTreeMap<String, EvalSample> = BTreeMap::new();
    for r in records {
        let s = EvalSample {
            label: r.label,
            experiment_id: r.experiment_id.clone(),
        };
        if let Some(prev) = out.insert(r.sample_id.clone(), s.clone()) {
            if prev != s {
                bail!(
                    "sample `{}` has conflicting label or experiment across backgrounds",
                    r.sample_id
                );
            }
        }
    }
    Ok(out)
}

fn load_members(config: &EnsembleConfig) -> Result<Vec<MemberScores>> {
    config
        .members
        .iter()
        .map(|m| MemberScores::load(m).with_context(|| format!("loading member {}", m.key())))
        .collect()
}

fn load_provenance(config: &EnsembleConfig) -> Result<Vec<ScoreProvenance>> {
    config
        .members
        .iter()
        .map(|m| {
            let p = ScoreProvenance::sidecar(&m.scores);
            ScoreProvenance::load(&p).with_context(|| format!("member {} has no fold provenance", m.key()))
        })
        .collect()
}

fn write_outputs(out: &Path, fused: &[FusedPrediction], row: &TableRow) -> Result<()> {
    fs::create_dir_all(out)?;
    write_fused(&out.join("fused.csv"), fused)?;
    write_json(&out.join("metrics.json"), row)?;
    fs::write(out.join("table.txt"), render_table(std::slice::from_ref(row)))?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct FuseOptions {
    pub manifest: PathBuf,
    pub scores: PathBuf,
    pub ensemble: EnsembleSpec,
    pub out: PathBuf,
}

/// Sum-rule fusion over every recording of the manifest.
pub fn fuse(opts: &FuseOptions) -> Result<TableRow> {
    let samples = eval_samples(&load_manifest(&opts.manifest)?)?;
    let config = opts.ensemble.config(&opts.scores)?;
    let labels: BTreeMap<String, Label> = samples.iter().map(|(k, v)| (k.clone(), v.label)).collect();
    let fused = run_ensemble(&config, &load_members(&config)?, &labels)?;
    let row = TableRow {
        background: opts.ensemble.background_label(&config),
        method: config.name.clone(),
        scores_fused: config.members.len(),
        metrics: metrics_of(&fused)?,
    };
    write_outputs(&opts.out, &fused, &row)?;
    Ok(row)
}

#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub manifest: PathBuf,
    pub scores: PathBuf,
    pub ensemble: EnsembleSpec,
    pub plan: Option<PathBuf>,
    pub k: usize,
    pub seed: u64,
    pub out: PathBuf,
}

fn plan_for(records: &[SampleRecord], plan: Option<&Path>, k: usize, seed: u64) -> Result<FoldPlan> {
    let plan = match plan {
        Some(p) => read_plan(p)?,
        None => grouped_kfold(records, k, seed)?,
    };
    plan.check_grouping(records)?;
    Ok(plan)
}

/// Cross-validated evaluation; every member's provenance must agree with the plan.
pub fn eval(opts: &EvalOptions) -> Result<CvReport> {
    let records = load_manifest(&opts.manifest)?;
    let plan = plan_for(&records, opts.plan.as_deref(), opts.k, opts.seed)?;
    let samples = eval_samples(&records)?;
    let config = opts.ensemble.config(&opts.scores)?;
    let (report, fused) = cross_validated_run(
        &config,
        &load_members(&config)?,
        &load_provenance(&config)?,
        &plan,
        &samples,
    )?;
    let row = TableRow {
        background: opts.ensemble.background_label(&config),
        method: config.name.clone(),
        scores_fused: config.members.len(),
        metrics: report.pooled,
    };
    write_outputs(&opts.out, &fused, &row)?;
    write_json(&opts.out.join("cv.json"), &report)?;
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct ReportOptions {
    pub manifest: PathBuf,
    pub scores: PathBuf,
    pub plan: Option<PathBuf>,
    pub k: usize,
    pub seed: u64,
    pub out: PathBuf,
}

#[derive(Debug, Clone, Serialize)]
pub struct MemberResult {
    pub member: String,
    pub metrics: MetricsReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub ensembles: Vec<TableRow>,
    pub members: Vec<MemberResult>,
    pub median_member_accuracy: f64,
}

impl Report {
    pub fn ensemble(&self, e: NamedEnsemble) -> Option<&TableRow> {
        self.ensembles.iter().find(|r| r.method == e.to_string())
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Every named ensemble plus each single member, under one fold plan.
pub fn report(opts: &ReportOptions) -> Result<Report> {
    let records = load_manifest(&opts.manifest)?;
    let plan = plan_for(&records, opts.plan.as_deref(), opts.k, opts.seed)?;
    let samples = eval_samples(&records)?;
    let run = |config: &EnsembleConfig| -> Result<CvReport> {
        Ok(cross_validated_run(
            config,
            &load_members(config)?,
            &load_provenance(config)?,
            &plan,
            &samples,
        )?
        .0)
    };

    let mut ensembles = Vec::new();
    for e in NamedEnsemble::ALL {
        let config = e.config(&opts.scores);
        let r = run(&config).with_context(|| format!("ensemble {e}"))?;
        ensembles.push(TableRow {
            background: e.background_label().to_string(),
            method: e.to_string(),
            scores_fused: config.members.len(),
            metrics: r.pooled,
        });
    }

    let mut members = Vec::new();
    for bg in Background::ALL {
        for m in MethodId::derived().into_iter().chain([MethodId::Detector]) {
            let member = Member {
                method: m,
                background: bg,
                scores: opts.scores.join(member_file_name(m, bg)),
            };
            let config = EnsembleConfig {
                name: member.key(),
                fusion: FusionRule::Sum,
                detector_mapping: Default::default(),
                members: vec![member],
            };
            let r = run(&config).with_context(|| format!("member {}", config.name))?;
            members.push(MemberResult {
                member: config.name,
                metrics: r.pooled,
            });
        }
    }
    let report = Report {
        median_member_accuracy: median(members.iter().map(|m| m.metrics.accuracy).collect()),
        ensembles,
        members,
    };

    fs::create_dir_all(&opts.out)?;
    fs::write(opts.out.join("table.txt"), render_table(&report.ensembles))?;
    write_json(&opts.out.join("report.json"), &report)?;
    let mut w = csv::Writer::from_path(opts.out.join("members.csv"))?;
    w.write_record(["member", "accuracy", "auc", "f1", "sensitivity", "specificity"])?;
    for m in &report.members {
        let x = &m.metrics;
        w.write_record([
            m.member.clone(),
            x.accuracy.to_string(),
            x.auc.to_string(),
            x.f1.to_string(),
            x.sensitivity.to_string(),
            x.specificity.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(report)
}
