//! Pipeline configuration document and the dataset description written by
//! `synth`. Command-line flags override file values, which override defaults.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use dasal_core::baseline::ScorerParams;
use dasal_core::region::Geometry;
use dasal_core::saliency::SaliencyParams;
use dasal_core::{Background, MethodId};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub manifest: Option<PathBuf>,
    pub output: Option<PathBuf>,
    /// Method ids or the groups `global`, `patch`, `saliency`, `detector`, `all`.
    pub methods: Vec<String>,
    pub backgrounds: Vec<Background>,
    pub seed: u64,
    pub k: usize,
    pub workers: Option<usize>,
    /// Zone geometry; defaults to the dataset description or the image width.
    pub geometry: Option<Geometry>,
    /// Images per co-saliency group within one experiment and background.
    pub cosal_group_size: usize,
    pub saliency: SaliencyParams,
    pub scorer: ScorerParams,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            manifest: None,
            output: None,
            methods: vec!["all".into()],
            backgrounds: Background::ALL.to_vec(),
            seed: 1,
            k: 10,
            workers: None,
            geometry: None,
            cosal_group_size: 4,
            saliency: SaliencyParams::default(),
            scorer: ScorerParams::default(),
        }
    }
}

impl PipelineConfig {
    /// Defaults, or the given TOML file; relative paths resolve against it.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: PipelineConfig =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.manifest, &mut cfg.output].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.saliency.validate()?;
        if let Some(g) = &self.geometry {
            g.validate()?;
        }
        if self.cosal_group_size == 0 {
            bail!("cosal_group_size must be at least 1");
        }
        if self.backgrounds.is_empty() {
            bail!("at least one background must be enabled");
        }
        resolve_methods(&self.methods)?;
        Ok(())
    }

    pub fn manifest(&self) -> Result<&Path> {
        self.manifest
            .as_deref()
            .context("no dataset manifest given (flag --manifest or `manifest` in the config)")
    }

    pub fn output(&self) -> Result<&Path> {
        self.output
            .as_deref()
            .context("no output directory given (flag --out or `output` in the config)")
    }
}

/// Expands method ids and group names into derived methods plus whether the
/// detector is enabled. Order follows the canonical method list.
pub fn resolve_methods(items: &[String]) -> Result<(Vec<MethodId>, bool)> {
    let mut derived = Vec::new();
    let mut detector = false;
    for item in items {
        let item = item.trim().to_ascii_lowercase();
        match item.as_str() {
            "all" => {
                derived.extend(MethodId::derived());
                detector = true;
            }
            "global" => derived.extend(MethodId::GLOBAL),
            "patch" => derived.extend(MethodId::PATCH),
            "saliency" => derived.extend(MethodId::saliency()),
            "detector" => detector = true,
            other => match other.parse::<MethodId>()? {
                MethodId::Detector => detector = true,
                m => derived.push(m),
            },
        }
    }
    let canonical = MethodId::derived();
    derived.sort_by_key(|m| canonical.iter().position(|c| c == m));
    derived.dedup();
    Ok((derived, detector))
}

/// Written next to a synthetic manifest so later stages reuse its geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetInfo {
    pub width: usize,
    pub height: usize,
    pub experiments: usize,
    pub per_experiment: usize,
    pub seed: u64,
    pub geometry: Geometry,
}

impl DatasetInfo {
    pub const FILE: &'static str = "dataset.toml";

    pub fn load_beside(manifest: &Path) -> Result<Option<Self>> {
        let path = manifest.parent().unwrap_or(Path::new(".")).join(Self::FILE);
        if !path.is_file() {
            return Ok(None);
        }
        let text = fs::read_to_string(&path)?;
        Ok(Some(
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?,
        ))
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let path = dir.join(Self::FILE);
        fs::write(&path, toml::to_string_pretty(self)?).with_context(|| format!("writing {}", path.display()))
    }
}

/// Geometry from the config, else the dataset description, else scaled to
/// the image width.
pub fn resolve_geometry(cfg: &PipelineConfig, manifest: &Path, width: usize) -> Result<Geometry> {
    if let Some(g) = cfg.geometry {
        return Ok(g);
    }
    if let Some(info) = DatasetInfo::load_beside(manifest)? {
        return Ok(info.geometry);
    }
    Ok(Geometry::for_width(width)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_groups_expand() {
        let (m, d) = resolve_methods(&["all".into()]).unwrap();
        assert_eq!((m.len(), d), (20, true));
        let (m, d) = resolve_methods(&["global".into()]).unwrap();
        assert_eq!((m.len(), d), (3, false));
        let (m, _) = resolve_methods(&["gbvs-roi".into(), "global-o".into(), "global-o".into()]).unwrap();
        assert_eq!(m.iter().map(|m| m.id()).collect::<Vec<_>>(), ["global-o", "gbvs-roi"]);
        assert!(resolve_methods(&["nope".into()]).is_err());
    }

    #[test]
    fn config_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("pipeline.toml");
        fs::write(
            &p,
            "manifest = \"data/manifest.csv\"\nk = 5\nbackgrounds = [\"A\"]\n[saliency.gbvs]\nlattice_cap = 24\n",
        )
        .unwrap();
        let cfg = PipelineConfig::load(Some(&p)).unwrap();
        assert_eq!(cfg.k, 5);
        assert_eq!(cfg.manifest.unwrap(), dir.path().join("data/manifest.csv"));
        assert_eq!(cfg.saliency.gbvs.lattice_cap, 24);
        fs::write(&p, "bogus = 1\n").unwrap();
        assert!(PipelineConfig::load(Some(&p)).is_err());
    }
}
