//! Sample records, the dataset manifest and the closed set of derived-dataset
//! method ids.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::saliency::SaliencyMethod;

/// Background-subtraction variant: the column at 0.5 s, 10 s or 19.5 s is
/// subtracted from every column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Background {
    A,
    B,
    C,
}

impl Background {
    pub const ALL: [Background; 3] = [Background::A, Background::B, Background::C];

    pub fn anchor_seconds(self) -> f64 {
        match self {
            Background::A => 0.5,
            Background::B => 10.0,
            Background::C => 19.5,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Background::A => "A",
            Background::B => "B",
            Background::C => "C",
        }
    }
}

impl fmt::Display for Background {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Background {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "A" | "a" => Ok(Background::A),
            "B" | "b" => Ok(Background::B),
            "C" | "c" => Ok(Background::C),
            other => Err(Error::invalid(format!("background must be A, B or C, got `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Label {
    NoRelease,
    Release,
}

impl Label {
    pub fn is_release(self) -> bool {
        self == Label::Release
    }

    pub fn from_release(release: bool) -> Self {
        if release {
            Label::Release
        } else {
            Label::NoRelease
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::NoRelease => "no-release",
            Label::Release => "release",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "release" | "1" => Ok(Label::Release),
            "no-release" | "no_release" | "norelease" | "0" => Ok(Label::NoRelease),
            other => Err(Error::invalid(format!(
                "label must be release or no-release, got `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    pub sample_id: String,
    pub experiment_id: String,
    pub background: Background,
    pub label: Label,
    pub image_path: PathBuf,
    /// `(x, y)` of the release peak in pixels.
    pub peak_position: Option<(usize, usize)>,
    /// `[x_start, x_end]` columns of the release.
    pub release_interval: Option<(usize, usize)>,
}

impl SampleRecord {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.sample_id.is_empty() || self.experiment_id.is_empty() {
            return Err("sample_id and experiment_id must be non-empty".into());
        }
        match (self.label, self.peak_position, self.release_interval) {
            (Label::Release, Some((px, _)), Some((x0, x1))) => {
                if x0 > x1 {
                    Err(format!("release interval [{x0},{x1}] is reversed"))
                } else if px < x0 || px > x1 {
                    Err(format!("peak x {px} lies outside release interval [{x0},{x1}]"))
                } else {
                    Ok(())
                }
            }
            (Label::Release, None, _) => Err("release sample lacks a peak position".into()),
            (Label::Release, _, None) => Err("release sample lacks a release interval".into()),
            (Label::NoRelease, None, None) => Ok(()),
            (Label::NoRelease, _, _) => {
                Err("no-release sample must not carry a peak position or release interval".into())
            }
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestRow {
    sample_id: String,
    experiment_id: String,
    background: String,
    label: String,
    image_path: String,
    peak_x: Option<usize>,
    peak_y: Option<usize>,
    interval_x0: Option<usize>,
    interval_x1: Option<usize>,
}

fn pair(a: Option<usize>, b: Option<usize>, what: &str) -> std::result::Result<Option<(usize, usize)>, String> {
    match (a, b) {
        (Some(a), Some(b)) => Ok(Some((a, b))),
        (None, None) => Ok(None),
        _ => Err(format!("{what} needs both coordinates or neither")),
    }
}

/// Reads and validates a manifest CSV. Relative image paths resolve against
/// the manifest's directory; every image must exist.
pub fn load_manifest(path: &Path) -> Result<Vec<SampleRecord>> {
    let base = path.parent().unwrap_or(Path::new("."));
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let ingest = |line: usize, message: String| Error::Ingestion {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    let headers = reader.headers().map_err(|e| Error::csv(path, e))?.clone();
    for raw in reader.records() {
        let raw = raw.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            ingest(line, format!("schema violation: {e}"))
        })?;
        let line = raw.position().map_or(0, |p| p.line() as usize);
        let row: ManifestRow = raw
            .deserialize(Some(&headers))
            .map_err(|e| ingest(line, format!("schema violation: {e}")))?;
        let background = row.background.parse().map_err(|e: Error| ingest(line, e.to_string()))?;
        let label = row.label.parse().map_err(|e: Error| ingest(line, e.to_string()))?;
        let image_path = base.join(&row.image_path);
        if !image_path.is_file() {
            return Err(ingest(line, format!("image file not found: {}", image_path.display())));
        }
        let record = SampleRecord {
            sample_id: row.sample_id,
            experiment_id: row.experiment_id,
            background,
            label,
            image_path,
            peak_position: pair(row.peak_x, row.peak_y, "peak position").map_err(|m| ingest(line, m))?,
            release_interval: pair(row.interval_x0, row.interval_x1, "release interval")
                .map_err(|m| ingest(line, m))?,
        };
        record.validate().map_err(|m| ingest(line, m))?;
        if !seen.insert((record.sample_id.clone(), record.background)) {
            return Err(ingest(
                line,
                format!(
                    "duplicate sample_id `{}` for background {}",
                    record.sample_id, record.background
                ),
            ));
        }
        records.push(record);
    }
    if records.is_empty() {
        log::warn!("manifest {} lists no samples", path.display());
    } else {
        let s = ManifestSummary::of(&records);
        log::info!(
            "manifest {}: {} release, {} no-release, {} experiments",
            path.display(),
            s.release,
            s.no_release,
            s.per_experiment.len()
        );
    }
    Ok(records)
}

/// Writes a manifest; image paths under the manifest's directory are stored relative to it.
pub fn write_manifest(path: &Path, records: &[SampleRecord]) -> Result<()> {
    let base = path.parent().unwrap_or(Path::new("."));
    let mut writer = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    for r in records {
        let rel = r.image_path.strip_prefix(base).unwrap_or(&r.image_path);
        writer
            .serialize(ManifestRow {
                sample_id: r.sample_id.clone(),
                experiment_id: r.experiment_id.clone(),
                background: r.background.to_string(),
                label: r.label.to_string(),
                image_path: rel.to_string_lossy().into_owned(),
                peak_x: r.peak_position.map(|p| p.0),
                peak_y: r.peak_position.map(|p| p.1),
                interval_x0: r.release_interval.map(|i| i.0),
                interval_x1: r.release_interval.map(|i| i.1),
            })
            .map_err(|e| Error::csv(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ManifestSummary {
    pub release: usize,
    pub no_release: usize,
    pub per_experiment: BTreeMap<String, usize>,
    pub per_background: BTreeMap<Background, usize>,
}

impl ManifestSummary {
    pub fn of(records: &[SampleRecord]) -> Self {
        let mut s = ManifestSummary::default();
        for r in records {
            match r.label {
                Label::Release => s.release += 1,
                Label::NoRelease => s.no_release += 1,
            }
            *s.per_experiment.entry(r.experiment_id.clone()).or_default() += 1;
            *s.per_background.entry(r.background).or_default() += 1;
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GlobalZone {
    Original,
    Common,
    Concat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PatchZone {
    /// Windows over the common region, square by construction.
    Common,
    /// Windows over the concatenated zone, padded to square.
    Concat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SaliencyOutput {
    Fg,
    FgRoi,
    Roi,
}

impl SaliencyOutput {
    pub const ALL: [SaliencyOutput; 3] = [SaliencyOutput::Fg, SaliencyOutput::FgRoi, SaliencyOutput::Roi];

    pub fn as_str(self) -> &'static str {
        match self {
            SaliencyOutput::Fg => "fg",
            SaliencyOutput::FgRoi => "fgroi",
            SaliencyOutput::Roi => "roi",
        }
    }
}

/// How a member's scores are produced and combined per image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MemberKind {
    /// One score vector per image.
    Classifier,
    /// One score vector per window, reduced by the max rule.
    Patch,
    /// Bounding boxes, mapped to a score vector.
    Detector,
}

/// One derived dataset (or the detector) per background.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MethodId {
    Global(GlobalZone),
    Patch(PatchZone),
    Saliency(SaliencyMethod, SaliencyOutput),
    Detector,
}

impl MethodId {
    pub const GLOBAL: [MethodId; 3] = [
        MethodId::Global(GlobalZone::Original),
        MethodId::Global(GlobalZone::Common),
        MethodId::Global(GlobalZone::Concat),
    ];

    pub const PATCH: [MethodId; 2] = [MethodId::Patch(PatchZone::Common), MethodId::Patch(PatchZone::Concat)];

    pub fn saliency() -> Vec<MethodId> {
        SaliencyMethod::ALL
            .iter()
            .flat_map(|&m| SaliencyOutput::ALL.iter().map(move |&o| MethodId::Saliency(m, o)))
            .collect()
    }

    /// The 20 derived datasets produced for each background.
    pub fn derived() -> Vec<MethodId> {
        let mut v: Vec<MethodId> = Self::GLOBAL.to_vec();
        v.extend(Self::PATCH);
        v.extend(Self::saliency());
        v
    }

    pub fn kind(self) -> MemberKind {
        match self {
            MethodId::Patch(_) => MemberKind::Patch,
            MethodId::Detector => MemberKind::Detector,
            _ => MemberKind::Classifier,
        }
    }

    pub fn id(self) -> String {
        match self {
            MethodId::Global(GlobalZone::Original) => "global-o".into(),
            MethodId::Global(GlobalZone::Common) => "global-1".into(),
            MethodId::Global(GlobalZone::Concat) => "global-2".into(),
            MethodId::Patch(PatchZone::Common) => "patch-200".into(),
            MethodId::Patch(PatchZone::Concat) => "patch-290".into(),
            MethodId::Saliency(m, o) => format!("{m}-{}", o.as_str()),
            MethodId::Detector => "detector".into(),
        }
    }
}

impl fmt::Display for MethodId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

impl FromStr for MethodId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let mut all = Self::derived();
        all.push(MethodId::Detector);
        all.into_iter()
            .find(|m| m.id() == s)
            .ok_or_else(|| Error::invalid(format!("unknown method id `{s}`")))
    }
}

impl Serialize for MethodId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.id())
    }
}

impl<'de> Deserialize<'de> for MethodId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn write_csv(dir: &Path, body: &str) -> PathBuf {
        let p = dir.join("manifest.csv");
        fs::write(
            &p,
            format!(
                "sample_id,experiment_id,background,label,image_path,peak_x,peak_y,interval_x0,interval_x1\n{body}"
            ),
        )
        .unwrap();
        p
    }

    fn touch(dir: &Path, name: &str) {
        fs::write(dir.join(name), b"x").unwrap();
    }

    #[test]
    fn twenty_derived_methods() {
        let d = MethodId::derived();
        assert_eq!(d.len(), 20);
        let ids: HashSet<String> = d.iter().map(|m| m.id()).collect();
        assert_eq!(ids.len(), 20);
        for m in d {
            assert_eq!(m.id().parse::<MethodId>().unwrap(), m);
        }
        assert_eq!("detector".parse::<MethodId>().unwrap().kind(), MemberKind::Detector);
        assert!("global-3".parse::<MethodId>().is_err());
    }

    #[test]
    fn manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        touch(dir.path(), "a.png");
        touch(dir.path(), "b.png");
        let p = write_csv(
            dir.path(),
            "s1,e1,A,release,a.png,40,100,30,50\ns2,e1,B,no-release,b.png,,,,\n",
        );
        let recs = load_manifest(&p).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].peak_position, Some((40, 100)));
        assert_eq!(recs[1].label, Label::NoRelease);
        assert_eq!(recs[1].image_path, dir.path().join("b.png"));
        let out = dir.path().join("copy.csv");
        write_manifest(&out, &recs).unwrap();
        assert_eq!(load_manifest(&out).unwrap(), recs);
    }

    #[test]
    fn empty_manifest_is_empty_list() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_csv(dir.path(), "");
        assert!(load_manifest(&p).unwrap().is_empty());
    }

    #[test]
    fn ingestion_errors_carry_row_numbers() {
        let dir = tempfile::tempdir().unwrap();
        touch(dir.path(), "a.png");
        let cases = [
            ("s1,e1,A,release,a.png,,,,\n", 2, "peak"),
            (
                "s1,e1,A,no-release,a.png,,,,\ns1,e2,A,no-release,a.png,,,,\n",
                3,
                "duplicate",
            ),
            ("s1,e1,A,no-release,missing.png,,,,\n", 2, "not found"),
            ("s1,e1,D,no-release,a.png,,,,\n", 2, "background"),
            ("s1,e1,A,release,a.png,60,10,30,50\n", 2, "outside"),
        ];
        for (body, line, needle) in cases {
            let p = write_csv(dir.path(), body);
            match load_manifest(&p) {
                Err(Error::Ingestion { line: l, message, .. }) => {
                    assert_eq!(l, line, "{message}");
                    assert!(message.contains(needle), "{message}");
                }
                other => panic!("expected ingestion error, got {other:?}"),
            }
        }
    }

    #[test]
    fn same_sample_in_other_background_is_fine() {
        let dir = tempfile::tempdir().unwrap();
        touch(dir.path(), "a.png");
        let p = write_csv(
            dir.path(),
            "s1,e1,A,no-release,a.png,,,,\ns1,e1,B,no-release,a.png,,,,\n",
        );
        assert_eq!(load_manifest(&p).unwrap().len(), 2);
    }
}
