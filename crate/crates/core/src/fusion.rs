//! Score-level fusion: sum rule across members, max rule across patches and
//! the detector decision logic.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::ops::Add;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{Background, Label, MemberKind, MethodId};
use crate::error::{Error, Result};

/// Two-class score `[no-release, release]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ScoreVector {
    pub no_release: f64,
    pub release: f64,
}

impl ScoreVector {
    pub fn new(no_release: f64, release: f64) -> Result<Self> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !ok(no_release) || !ok(release) {
            return Err(Error::invalid(format!(
                "scores must be finite and non-negative, got ({no_release}, {release})"
            )));
        }
        Ok(Self { no_release, release })
    }

    pub fn total(&self) -> f64 {
        self.no_release + self.release
    }

    /// Highest score wins; a tie predicts no-release.
    pub fn prediction(&self) -> Label {
        Label::from_release(self.release > self.no_release)
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            no_release: self.no_release * k,
            release: self.release * k,
        }
    }
}

impl Add for ScoreVector {
    type Output = ScoreVector;

    fn add(self, rhs: ScoreVector) -> ScoreVector {
        ScoreVector {
            no_release: self.no_release + rhs.no_release,
            release: self.release + rhs.release,
        }
    }
}

/// Componentwise sum of all member scores. Each component is summed in
/// sorted order, so the result is bit-identical under any member order.
pub fn sum_fuse(scores: &[ScoreVector]) -> Result<ScoreVector> {
    if scores.is_empty() {
        return Err(Error::invalid("sum rule needs at least one score vector"));
    }
    let sorted_sum = |f: fn(&ScoreVector) -> f64| {
        let mut v: Vec<f64> = scores.iter().map(f).collect();
        v.sort_by(f64::total_cmp);
        v.iter().sum::<f64>()
    };
    Ok(ScoreVector {
        no_release: sorted_sum(|s| s.no_release),
        release: sorted_sum(|s| s.release),
    })
}

/// Index of the patch whose release score is highest; ties go to the
/// earliest (lowest-offset) patch.
pub fn max_rule_index(patch_scores: &[ScoreVector]) -> Result<usize> {
    if patch_scores.is_empty() {
        return Err(Error::invalid("max rule needs at least one patch score"));
    }
    let mut best = 0;
    for (i, s) in patch_scores.iter().enumerate().skip(1) {
        if s.release > patch_scores[best].release {
            best = i;
        }
    }
    Ok(best)
}

/// Patch scores must be ordered by window offset.
pub fn max_rule_patches(patch_scores: &[ScoreVector]) -> Result<ScoreVector> {
    max_rule_index(patch_scores).map(|i| patch_scores[i])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
    pub confidence: f64,
}

impl DetectionBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64, confidence: f64) -> Result<Self> {
        if !(w > 0.0 && h > 0.0) || !x.is_finite() || !y.is_finite() || !w.is_finite() || !h.is_finite() {
            return Err(Error::invalid(format!("box needs positive finite size, got {w}x{h}")));
        }
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::invalid(format!("confidence {confidence} outside [0,1]")));
        }
        Ok(Self { x, y, w, h, confidence })
    }
}

fn max_confidence(boxes: &[DetectionBox]) -> Option<f64> {
    boxes
        .iter()
        .map(|b| b.confidence)
        .fold(None, |m, c| Some(m.map_or(c, |m: f64| m.max(c))))
}

/// Release iff the most confident box is strictly above `threshold`.
pub fn detector_decision(boxes: &[DetectionBox], threshold: f64) -> Label {
    Label::from_release(max_confidence(boxes).is_some_and(|c| c > threshold))
}

/// How detector boxes become a score vector for the sum rule.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum DetectorMapping {
    /// `release = max confidence` (0 without boxes), `no_release = 1 - release`.
    #[default]
    MaxConfidence,
    /// One-hot vector of [`detector_decision`].
    Decision { threshold: f64 },
}

impl DetectorMapping {
    pub fn scores(self, boxes: &[DetectionBox]) -> ScoreVector {
        let release = match self {
            DetectorMapping::MaxConfidence => max_confidence(boxes).unwrap_or(0.0),
            DetectorMapping::Decision { threshold } => {
                if detector_decision(boxes, threshold).is_release() {
                    1.0
                } else {
                    0.0
                }
            }
        };
        ScoreVector {
            no_release: 1.0 - release,
            release,
        }
    }
}

pub fn detector_to_scores(boxes: &[DetectionBox]) -> ScoreVector {
    DetectorMapping::MaxConfidence.scores(boxes)
}

/// Sample id of one patch row in a patch member's score file.
pub fn patch_sample_id(sample_id: &str, x_offset: usize) -> String {
    format!("{sample_id}.p{x_offset}")
}

/// Inverse of [`patch_sample_id`].
pub fn split_patch_sample_id(id: &str) -> Option<(&str, usize)> {
    let (sample, offset) = id.rsplit_once(".p")?;
    Some((sample, offset.parse().ok()?))
}

#[derive(Debug, Serialize, Deserialize)]
struct ScoreRow {
    sample_id: String,
    score_no_release: f64,
    score_release: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct DetectionRow {
    sample_id: String,
    x: f64,
    y: f64,
    w: f64,
    h: f64,
    confidence: f64,
}

fn line_of(rec: &csv::StringRecord) -> usize {
    rec.position().map_or(0, |p| p.line() as usize)
}

fn read_rows<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<(usize, T)>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let headers = reader.headers().map_err(|e| Error::csv(path, e))?.clone();
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let line = line_of(&rec);
        let row = rec.deserialize(Some(&headers)).map_err(|e| Error::Ingestion {
            path: path.to_path_buf(),
            line,
            message: e.to_string(),
        })?;
        out.push((line, row));
    }
    Ok(out)
}

/// `sample_id,score_no_release,score_release`; duplicate ids are rejected.
pub fn read_scores(path: &Path) -> Result<BTreeMap<String, ScoreVector>> {
    let mut out = BTreeMap::new();
    for (line, row) in read_rows::<ScoreRow>(path)? {
        let ingest = |message: String| Error::Ingestion {
            path: path.to_path_buf(),
            line,
            message,
        };
        let s = ScoreVector::new(row.score_no_release, row.score_release).map_err(|e| ingest(e.to_string()))?;
        if out.insert(row.sample_id.clone(), s).is_some() {
            return Err(ingest(format!("duplicate sample_id `{}`", row.sample_id)));
        }
    }
    Ok(out)
}

pub fn write_scores<'a>(path: &Path, scores: impl IntoIterator<Item = (&'a str, ScoreVector)>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    for (id, s) in scores {
        w.serialize(ScoreRow {
            sample_id: id.to_string(),
            score_no_release: s.no_release,
            score_release: s.release,
        })
        .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// `sample_id,x,y,w,h,confidence`, one row per box.
pub fn read_detections(path: &Path) -> Result<BTreeMap<String, Vec<DetectionBox>>> {
    let mut out: BTreeMap<String, Vec<DetectionBox>> = BTreeMap::new();
    for (line, r) in read_rows::<DetectionRow>(path)? {
        let b = DetectionBox::new(r.x, r.y, r.w, r.h, r.confidence).map_err(|e| Error::Ingestion {
            path: path.to_path_buf(),
            line,
            message: e.to_string(),
        })?;
        out.entry(r.sample_id).or_default().push(b);
    }
    Ok(out)
}

pub fn write_detections<'a>(
    path: &Path,
    detections: impl IntoIterator<Item = (&'a str, &'a [DetectionBox])>,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    // header even when nothing was detected
    w.write_record(["sample_id", "x", "y", "w", "h", "confidence"])
        .map_err(|e| Error::csv(path, e))?;
    for (id, boxes) in detections {
        for b in boxes {
            w.write_record([
                id.to_string(),
                b.x.to_string(),
                b.y.to_string(),
                b.w.to_string(),
                b.h.to_string(),
                b.confidence.to_string(),
            ])
            .map_err(|e| Error::csv(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FusionRule {
    #[default]
    Sum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Member {
    pub method: MethodId,
    pub background: Background,
    /// Score file (classifier and patch members) or detection file.
    pub scores: PathBuf,
}

impl Member {
    pub fn key(&self) -> String {
        format!("{}.{}", self.method, self.background)
    }

    pub fn kind(&self) -> MemberKind {
        self.method.kind()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub name: String,
    #[serde(default)]
    pub fusion: FusionRule,
    #[serde(default)]
    pub detector_mapping: DetectorMapping,
    pub members: Vec<Member>,
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.members.is_empty() {
            return Err(Error::invalid(format!("ensemble `{}` has no members", self.name)));
        }
        let mut keys = BTreeSet::new();
        for m in &self.members {
            if !keys.insert(m.key()) {
                return Err(Error::invalid(format!(
                    "ensemble `{}` lists member `{}` twice",
                    self.name,
                    m.key()
                )));
            }
        }
        if let DetectorMapping::Decision { threshold } = self.detector_mapping {
            if !(0.0..=1.0).contains(&threshold) {
                return Err(Error::invalid(format!("detector threshold {threshold} outside [0,1]")));
            }
        }
        Ok(())
    }

    /// Reads a TOML document; relative score paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: EnsembleConfig =
            toml::from_str(&text).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for m in &mut cfg.members {
            if m.scores.is_relative() {
                m.scores = base.join(&m.scores);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("ensemble config serializes")
    }
}

/// The ensembles of the results table, with their member counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NamedEnsemble {
    Original,
    Zone1,
    Zone2,
    GlobalA,
    Global,
    Patch,
    Detector,
    GlobalPatch,
    GlobalPatchSaliency,
    AllMethods,
}

impl NamedEnsemble {
    pub const ALL: [NamedEnsemble; 10] = [
        NamedEnsemble::Original,
        NamedEnsemble::Zone1,
        NamedEnsemble::Zone2,
        NamedEnsemble::GlobalA,
        NamedEnsemble::Global,
        NamedEnsemble::Patch,
        NamedEnsemble::Detector,
        NamedEnsemble::GlobalPatch,
        NamedEnsemble::GlobalPatchSaliency,
        NamedEnsemble::AllMethods,
    ];

    pub fn label(self) -> &'static str {
        match self {
            NamedEnsemble::Original => "O",
            NamedEnsemble::Zone1 => "1",
            NamedEnsemble::Zone2 => "2",
            NamedEnsemble::GlobalA | NamedEnsemble::Global => "Global",
            NamedEnsemble::Patch => "Patch",
            NamedEnsemble::Detector => "YOLOv2",
            NamedEnsemble::GlobalPatch => "Global+Patch",
            NamedEnsemble::GlobalPatchSaliency => "Global+Patch+Saliency",
            NamedEnsemble::AllMethods => "AllMethods",
        }
    }

    pub fn backgrounds(self) -> &'static [Background] {
        match self {
            NamedEnsemble::Original | NamedEnsemble::Zone1 | NamedEnsemble::Zone2 | NamedEnsemble::GlobalA => {
                &[Background::A]
            }
            _ => &Background::ALL,
        }
    }

    pub fn background_label(self) -> &'static str {
        if self.backgrounds().len() == 1 {
            "A"
        } else {
            "A+B+C"
        }
    }

    pub fn methods(self) -> Vec<MethodId> {
        let mut v = Vec::new();
        match self {
            NamedEnsemble::Original => v.push(MethodId::GLOBAL[0]),
            NamedEnsemble::Zone1 => v.push(MethodId::GLOBAL[1]),
            NamedEnsemble::Zone2 => v.push(MethodId::GLOBAL[2]),
            NamedEnsemble::GlobalA | NamedEnsemble::Global => v.extend(MethodId::GLOBAL),
            NamedEnsemble::Patch => v.extend(MethodId::PATCH),
            NamedEnsemble::Detector => v.push(MethodId::Detector),
            NamedEnsemble::GlobalPatch => {
                v.extend(MethodId::GLOBAL);
                v.extend(MethodId::PATCH);
            }
            NamedEnsemble::GlobalPatchSaliency => v = MethodId::derived(),
            NamedEnsemble::AllMethods => {
                v = MethodId::derived();
                v.push(MethodId::Detector);
            }
        }
        v
    }

    pub fn member_count(self) -> usize {
        self.methods().len() * self.backgrounds().len()
    }

    /// Config whose member files follow `<dir>/<method>.<background>.csv`.
    pub fn config(self, score_dir: &Path) -> EnsembleConfig {
        let members = self
            .backgrounds()
            .iter()
            .flat_map(|&bg| {
                self.methods().into_iter().map(move |m| Member {
                    method: m,
                    background: bg,
                    scores: score_dir.join(member_file_name(m, bg)),
                })
            })
            .collect();
        EnsembleConfig {
            name: self.to_string(),
            fusion: FusionRule::Sum,
            detector_mapping: DetectorMapping::default(),
            members,
        }
    }
}

pub fn member_file_name(method: MethodId, background: Background) -> String {
    format!("{method}.{background}.csv")
}

impl fmt::Display for NamedEnsemble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NamedEnsemble::GlobalA => f.write_str("Global(A)"),
            other => f.write_str(other.label()),
        }
    }
}

impl FromStr for NamedEnsemble {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = |x: &str| -> String {
            x.chars()
                .filter(|c| c.is_ascii_alphanumeric())
                .collect::<String>()
                .to_ascii_lowercase()
        };
        let wanted = key(s);
        NamedEnsemble::ALL
            .into_iter()
            .find(|e| key(&e.to_string()) == wanted)
            .ok_or_else(|| Error::invalid(format!("unknown ensemble `{s}`")))
    }
}

/// Scores of one member, keyed by sample id.
#[derive(Debug, Clone)]
pub enum MemberScores {
    Classifier(BTreeMap<String, ScoreVector>),
    /// Per sample, `(x_offset, score)` for every window.
    Patches(BTreeMap<String, Vec<(usize, ScoreVector)>>),
    /// Samples without an entry had no detection.
    Detector(BTreeMap<String, Vec<DetectionBox>>),
}

impl MemberScores {
    pub fn load(member: &Member) -> Result<Self> {
        let path = &member.scores;
        Ok(match member.kind() {
            MemberKind::Classifier => MemberScores::Classifier(read_scores(path)?),
            MemberKind::Detector => MemberScores::Detector(read_detections(path)?),
            MemberKind::Patch => {
                let mut by_sample: BTreeMap<String, Vec<(usize, ScoreVector)>> = BTreeMap::new();
                for (id, s) in read_scores(path)? {
                    let (sample, offset) = split_patch_sample_id(&id).ok_or_else(|| {
                        Error::invalid(format!(
                            "{}: patch score id `{id}` is not of the form <sample>.p<offset>",
                            path.display()
                        ))
                    })?;
                    by_sample.entry(sample.to_string()).or_default().push((offset, s));
                }
                for v in by_sample.values_mut() {
                    v.sort_by_key(|&(o, _)| o);
                }
                MemberScores::Patches(by_sample)
            }
        })
    }

    /// The member's single score vector for a sample, if it has one.
    pub fn sample_score(&self, sample_id: &str, mapping: DetectorMapping) -> Option<ScoreVector> {
        match self {
            MemberScores::Classifier(m) => m.get(sample_id).copied(),
            MemberScores::Patches(m) => {
                let v: Vec<ScoreVector> = m.get(sample_id)?.iter().map(|&(_, s)| s).collect();
                max_rule_patches(&v).ok()
            }
            MemberScores::Detector(m) => Some(mapping.scores(m.get(sample_id).map_or(&[][..], |b| b))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusedPrediction {
    pub sample_id: String,
    pub label: Label,
    pub scores: ScoreVector,
    pub prediction: Label,
}

/// Sum-rule fusion of every member for every sample, sorted by sample id.
/// All missing `(sample, member)` pairs are reported together.
pub fn run_ensemble(
    config: &EnsembleConfig,
    member_scores: &[MemberScores],
    samples: &BTreeMap<String, Label>,
) -> Result<Vec<FusedPrediction>> {
    config.validate()?;
    if member_scores.len() != config.members.len() {
        return Err(Error::invalid(format!(
            "{} members configured but {} score sets supplied",
            config.members.len(),
            member_scores.len()
        )));
    }
    let mut missing = Vec::new();
    let mut out = Vec::with_capacity(samples.len());
    let mut buf = Vec::with_capacity(member_scores.len());
    for (sample, &label) in samples {
        buf.clear();
        for (member, scores) in config.members.iter().zip(member_scores) {
            match scores.sample_score(sample, config.detector_mapping) {
                Some(s) => buf.push(s),
                None => missing.push((sample.clone(), member.key())),
            }
        }
        if buf.len() == member_scores.len() {
            let fused = sum_fuse(&buf)?;
            out.push(FusedPrediction {
                sample_id: sample.clone(),
                label,
                scores: fused,
                prediction: fused.prediction(),
            });
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingScores(missing));
    }
    Ok(out)
}

pub fn write_fused(path: &Path, fused: &[FusedPrediction]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    w.write_record(["sample_id", "label", "score_no_release", "score_release", "prediction"])
        .map_err(|e| Error::csv(path, e))?;
    for f in fused {
        w.write_record([
            f.sample_id.clone(),
            f.label.to_string(),
            f.scores.no_release.to_string(),
            f.scores.release.to_string(),
            f.prediction.to_string(),
        ])
        .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sv(a: f64, b: f64) -> ScoreVector {
        ScoreVector::new(a, b).unwrap()
    }

    #[test]
    fn sum_rule_example() {
        let f = sum_fuse(&[sv(0.9, 0.1), sv(0.2, 0.8)]).unwrap();
        assert!((f.no_release - 1.1).abs() < 1e-12 && (f.release - 0.9).abs() < 1e-12);
        assert_eq!(f.prediction(), Label::NoRelease);
        assert!(sum_fuse(&[]).is_err());
        let n = sum_fuse(&[sv(0.3, 0.7); 5]).unwrap();
        assert_eq!(n.prediction(), Label::Release);
    }

    #[test]
    fn tie_predicts_no_release() {
        assert_eq!(sv(1.0, 1.0).prediction(), Label::NoRelease);
    }

    #[test]
    fn max_rule_examples() {
        assert_eq!(
            max_rule_patches(&[sv(0.6, 0.4), sv(0.1, 0.9), sv(0.7, 0.3)]).unwrap(),
            sv(0.1, 0.9)
        );
        assert_eq!(max_rule_index(&[sv(0.5, 0.5), sv(0.2, 0.5), sv(0.1, 0.5)]).unwrap(), 0);
        assert!(max_rule_patches(&[]).is_err());
    }

    #[test]
    fn detector_truth_table() {
        let b = |c| DetectionBox::new(0.0, 0.0, 1.0, 1.0, c).unwrap();
        assert_eq!(detector_decision(&[], 0.5), Label::NoRelease);
        assert_eq!(detector_decision(&[b(0.3), b(0.7)], 0.5), Label::Release);
        assert_eq!(detector_decision(&[b(0.5)], 0.5), Label::NoRelease);
        assert_eq!(detector_to_scores(&[]), sv(1.0, 0.0));
        let s = detector_to_scores(&[b(0.8)]);
        assert!((s.no_release - 0.2).abs() < 1e-12 && s.release == 0.8);
        let s = detector_to_scores(&[b(0.6), b(0.9)]);
        assert!((s.no_release - 0.1).abs() < 1e-12 && s.release == 0.9);
        assert_eq!(
            DetectorMapping::Decision { threshold: 0.5 }.scores(&[b(0.6)]),
            sv(0.0, 1.0)
        );
        assert!(DetectionBox::new(0.0, 0.0, 0.0, 1.0, 0.5).is_err());
        assert!(DetectionBox::new(0.0, 0.0, 1.0, 1.0, 1.5).is_err());
    }

    #[test]
    fn named_member_counts() {
        let counts: Vec<usize> = NamedEnsemble::ALL.iter().map(|e| e.member_count()).collect();
        assert_eq!(counts, vec![1, 1, 1, 3, 9, 6, 3, 15, 60, 63]);
        for e in NamedEnsemble::ALL {
            assert_eq!(e.to_string().parse::<NamedEnsemble>().unwrap(), e);
            e.config(Path::new("s")).validate().unwrap();
        }
        assert_eq!(
            "all-methods".parse::<NamedEnsemble>().unwrap(),
            NamedEnsemble::AllMethods
        );
    }

    #[test]
    fn patch_ids() {
        assert_eq!(patch_sample_id("e1.s2", 135), "e1.s2.p135");
        assert_eq!(split_patch_sample_id("e1.s2.p135"), Some(("e1.s2", 135)));
        assert_eq!(split_patch_sample_id("e1"), None);
    }

    #[test]
    fn missing_pairs_all_reported() {
        let cfg = NamedEnsemble::Global.config(Path::new("s"));
        let scores: Vec<MemberScores> = (0..9)
            .map(|i| {
                let mut m = BTreeMap::new();
                if i != 4 {
                    m.insert("x".to_string(), sv(0.5, 0.5));
                }
                m.insert("y".to_string(), sv(0.5, 0.5));
                MemberScores::Classifier(m)
            })
            .collect();
        let samples: BTreeMap<String, Label> = [
            ("x".to_string(), Label::Release),
            ("y".to_string(), Label::NoRelease),
            ("z".to_string(), Label::Release),
        ]
        .into();
        match run_ensemble(&cfg, &scores, &samples) {
            Err(Error::MissingScores(pairs)) => {
                assert_eq!(pairs.len(), 1 + 9);
                assert!(pairs.contains(&("x".to_string(), cfg.members[4].key())));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn config_toml_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = NamedEnsemble::Patch.config(Path::new("scores"));
        let p = dir.path().join("e.toml");
        fs::write(&p, cfg.to_toml()).unwrap();
        let back = EnsembleConfig::load(&p).unwrap();
        assert_eq!(back.members.len(), 6);
        assert_eq!(back.members[0].scores, dir.path().join("scores/patch-200.A.csv"));
    }

    #[test]
    fn score_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        write_scores(&p, [("a", sv(0.25, 0.75)), ("b", sv(1.0, 0.0))]).unwrap();
        let back = read_scores(&p).unwrap();
        assert_eq!(back["a"], sv(0.25, 0.75));
        let d = dir.path().join("d.csv");
        let boxes = [DetectionBox::new(1.0, 2.0, 3.0, 4.0, 0.6).unwrap()];
        write_detections(&d, [("a", &boxes[..])]).unwrap();
        let back = read_detections(&d).unwrap();
        assert_eq!(back["a"], boxes.to_vec());
        let empty = dir.path().join("e.csv");
        write_detections(&empty, std::iter::empty()).unwrap();
        assert!(read_detections(&empty).unwrap().is_empty());
    }
}
