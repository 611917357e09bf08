//! Builds the derived datasets (global zones, patches, saliency outputs)
//! for every enabled method and background, with per-variant manifests.
//!
//! Each output set is keyed by a digest of its inputs and parameters; a
//! re-run skips work whose digest is unchanged and whose files exist.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use anyhow::{Context, Result};
use dasal_core::dataset::{GlobalZone, Label, PatchZone, SaliencyOutput};
use dasal_core::imaging::io::{decode_png, write_png};
use dasal_core::imaging::{ImageMatrix, SaliencyMap};
use dasal_core::region::{
    auto_patches, manual_patch, manual_window_start, pad_to_square, zone_common, zone_concat, Geometry,
};
use dasal_core::saliency::{compute_saliency, cosaliency, SaliencyMethod, SaliencyOutputs, SaliencyParams};
use dasal_core::{Background, MethodId, SampleRecord};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::resolve_geometry;
use crate::util::{sha256_hex, thread_pool, write_json};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    /// Usable for training and testing.
    All,
    /// Training only (manual patches).
    Train,
    /// Testing only (automatic patches).
    Test,
}

/// One image of a derived dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantRow {
    pub sample_id: String,
    pub experiment_id: String,
    pub label: Label,
    pub role: Role,
    pub x_offset: Option<usize>,
    /// Relative to the variant directory.
    pub image_path: String,
}

pub fn variant_dir(derived: &Path, bg: Background, method: MethodId) -> PathBuf {
    derived.join(bg.as_str()).join(method.id())
}

pub fn read_variant_manifest(dir: &Path) -> Result<Vec<VariantRow>> {
    let path = dir.join("manifest.csv");
    let mut r = csv::Reader::from_path(&path).with_context(|| format!("reading {}", path.display()))?;
    let rows: Vec<VariantRow> = r
        .deserialize()
        .collect::<std::result::Result<_, _>>()
        .with_context(|| format!("parsing {}", path.display()))?;
    check_patch_roles(dir, &rows)?;
    Ok(rows)
}

/// Patch variants keep manual crops for training and sliding windows for
/// testing; every other variant serves both.
fn check_patch_roles(dir: &Path, rows: &[VariantRow]) -> Result<()> {
    let is_patch = dir
        .file_name()
        .and_then(|n| n.to_str())
        .and_then(|n| n.parse::<MethodId>().ok())
        .is_some_and(|m| matches!(m, MethodId::Patch(_)));
    for r in rows {
        let ok = match r.role {
            Role::All => !is_patch && r.x_offset.is_none(),
            Role::Train => is_patch && r.image_path.starts_with("train/"),
            Role::Test => is_patch && r.image_path.starts_with("test/"),
        };
        anyhow::ensure!(
            ok,
            "{}: row for `{}` has role {:?}, inconsistent with the variant kind",
            dir.display(),
            r.sample_id,
            r.role
        );
    }
    Ok(())
}

fn write_variant_manifest(dir: &Path, rows: &[VariantRow]) -> Result<()> {
    check_patch_roles(dir, rows)?;
    let path = dir.join("manifest.csv");
    let mut w = csv::Writer::from_path(&path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct DeriveOptions {
    pub manifest: PathBuf,
    pub out: PathBuf,
    pub methods: Vec<MethodId>,
    pub backgrounds: Vec<Background>,
    pub geometry: Option<Geometry>,
    pub saliency: SaliencyParams,
    pub cosal_group_size: usize,
    pub force: bool,
    pub workers: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct DeriveSummary {
    pub variants: usize,
    pub computed: usize,
    pub cached: usize,
    /// Crops replaced by the FG image because every row or column was removed.
    pub roi_substitutions: usize,
    /// Detector failures, treated as an all-zero map.
    pub saliency_failures: usize,
}

#[derive(Default)]
struct Counters {
    computed: AtomicUsize,
    cached: AtomicUsize,
    roi_substitutions: AtomicUsize,
    saliency_failures: AtomicUsize,
}

const CACHE_FILE: &str = "cache.json";

struct Ctx<'a> {
    opts: &'a DeriveOptions,
    geometry: Geometry,
    cache: BTreeMap<String, String>,
    counters: Counters,
}

/// Output files of one derivation unit, relative to `derived/<bg>/`.
fn sample_outputs(method: MethodId, sample_id: &str, geometry: &Geometry) -> Vec<String> {
    let dir = method.id();
    match method {
        MethodId::Global(_) => vec![format!("{dir}/{sample_id}.png")],
        MethodId::Patch(_) => geometry
            .window_offsets()
            .iter()
            .map(|o| format!("{dir}/test/{sample_id}.p{o}.png"))
            .collect(),
        MethodId::Saliency(m, o) => vec![format!("{dir}/{sample_id}.{m}.{}.png", o.as_str())],
        MethodId::Detector => Vec::new(),
    }
}

fn manual_offset(rec: &SampleRecord, geometry: &Geometry, size: usize) -> usize {
    let peak_x = rec.peak_position.map_or(geometry.width / 2, |p| p.0);
    manual_window_start(geometry.width, peak_x.min(geometry.width - 1), size)
}

fn patch_size(zone: PatchZone, g: &Geometry) -> usize {
    match zone {
        PatchZone::Common => g.common_height(),
        PatchZone::Concat => g.concat_height(),
    }
}

pub fn run(opts: &DeriveOptions) -> Result<DeriveSummary> {
    let records = dasal_core::dataset::load_manifest(&opts.manifest)?;
    let derived = opts.out.join("derived");
    fs::create_dir_all(&derived)?;
    let Some(first) = records.first() else {
        log::warn!("manifest is empty; nothing to derive");
        return Ok(DeriveSummary::default());
    };
    let width = decode_png(&fs::read(&first.image_path)?, &first.image_path)?.width();
    let geometry = match opts.geometry {
        Some(g) => g,
        None => resolve_geometry(&Default::default(), &opts.manifest, width)?,
    };
    geometry.validate()?;
    let cache_path = derived.join(CACHE_FILE);
    let cache = if opts.force || !cache_path.is_file() {
        BTreeMap::new()
    } else {
        serde_json::from_str(&fs::read_to_string(&cache_path)?).unwrap_or_default()
    };
    let ctx = Ctx {
        opts,
        geometry,
        cache,
        counters: Counters::default(),
    };

    let mut new_cache = ctx.cache.clone();
    let mut variants = 0;
    let pool = thread_pool(opts.workers)?;
    for &bg in &opts.backgrounds {
        let mut recs: Vec<&SampleRecord> = records.iter().filter(|r| r.background == bg).collect();
        recs.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
        let bg_dir = derived.join(bg.as_str());
        for &m in &opts.methods {
            fs::create_dir_all(bg_dir.join(m.id()))?;
            if let MethodId::Patch(_) = m {
                fs::create_dir_all(bg_dir.join(m.id()).join("train"))?;
                fs::create_dir_all(bg_dir.join(m.id()).join("test"))?;
            }
        }

        let per_sample: Vec<Vec<(String, String)>> = pool.install(|| {
            recs.par_iter()
                .map(|rec| derive_sample(&ctx, bg, &bg_dir, rec))
                .collect::<Result<_>>()
        })?;
        new_cache.extend(per_sample.into_iter().flatten());

        let cosal: Vec<MethodId> = opts
            .methods
            .iter()
            .copied()
            .filter(|m| matches!(m, MethodId::Saliency(SaliencyMethod::Cosal, _)))
            .collect();
        if !cosal.is_empty() {
            let groups = cosal_groups(&recs, opts.cosal_group_size);
            let per_group: Vec<Vec<(String, String)>> = pool.install(|| {
                groups
                    .par_iter()
                    .map(|g| derive_cosal_group(&ctx, bg, &bg_dir, g, &cosal))
                    .collect::<Result<_>>()
            })?;
            new_cache.extend(per_group.into_iter().flatten());
        }

        for &m in &opts.methods {
            write_variant_manifest(&bg_dir.join(m.id()), &variant_rows(m, &recs, &geometry))?;
            variants += 1;
        }
    }
    write_json(&cache_path, &new_cache)?;
    let c = &ctx.counters;
    let summary = DeriveSummary {
        variants,
        computed: c.computed.load(Ordering::Relaxed),
        cached: c.cached.load(Ordering::Relaxed),
        roi_substitutions: c.roi_substitutions.load(Ordering::Relaxed),
        saliency_failures: c.saliency_failures.load(Ordering::Relaxed),
    };
    if summary.roi_substitutions > 0 {
        log::warn!("{} empty crops replaced by their FG image", summary.roi_substitutions);
    }
    if summary.saliency_failures > 0 {
        log::warn!("{} saliency failures treated as empty maps", summary.saliency_failures);
    }
    log::info!(
        "derived {} variants ({} units computed, {} cached)",
        summary.variants,
        summary.computed,
        summary.cached
    );
    Ok(summary)
}

fn variant_rows(method: MethodId, recs: &[&SampleRecord], g: &Geometry) -> Vec<VariantRow> {
    let mut rows = Vec::new();
    for rec in recs {
        let row = |role, x_offset, image_path| VariantRow {
            sample_id: rec.sample_id.clone(),
            experiment_id: rec.experiment_id.clone(),
            label: rec.label,
            role,
            x_offset,
            image_path,
        };
        match method {
            MethodId::Patch(zone) => {
                let x = manual_offset(rec, g, patch_size(zone, g));
                rows.push(row(Role::Train, Some(x), format!("train/{}.p{x}.png", rec.sample_id)));
                for o in g.window_offsets() {
                    rows.push(row(Role::Test, Some(o), format!("test/{}.p{o}.png", rec.sample_id)));
                }
            }
            _ => {
                for out in sample_outputs(method, &rec.sample_id, g) {
                    let name = out.rsplit('/').next().expect("file name").to_string();
                    rows.push(row(Role::All, None, name));
                }
            }
        }
    }
    rows
}

/// Groups of up to `size` images from the same experiment, in sample order.
fn cosal_groups<'a>(recs: &[&'a SampleRecord], size: usize) -> Vec<Vec<&'a SampleRecord>> {
    let mut by_exp: BTreeMap<&str, Vec<&SampleRecord>> = BTreeMap::new();
    for r in recs {
        by_exp.entry(&r.experiment_id).or_default().push(r);
    }
    by_exp
        .into_values()
        .flat_map(|v| v.chunks(size).map(|c| c.to_vec()).collect::<Vec<_>>())
        .collect()
}

fn params_digest<T: Serialize>(parts: &[&[u8]], params: &T) -> String {
    let p = serde_json::to_vec(params).expect("params serialize");
    let mut all: Vec<&[u8]> = parts.to_vec();
    all.push(&p);
    sha256_hex(&all)
}

impl Ctx<'_> {
    /// True when the unit must be (re)computed.
    fn stale(&self, key: &str, digest: &str, bg_dir: &Path, outputs: &[String]) -> bool {
        let fresh =
            self.cache.get(key).is_some_and(|d| d == digest) && outputs.iter().all(|o| bg_dir.join(o).is_file());
        if fresh {
            self.counters.cached.fetch_add(1, Ordering::Relaxed);
        } else {
            self.counters.computed.fetch_add(1, Ordering::Relaxed);
        }
        !fresh
    }

    fn saliency_block(&self, m: SaliencyMethod) -> serde_json::Value {
        let s = &self.opts.saliency;
        let block = match m {
            SaliencyMethod::Simpsal => serde_json::to_value(&s.simpsal),
            SaliencyMethod::Gbvs => serde_json::to_value(&s.gbvs),
            SaliencyMethod::Cosal => serde_json::to_value((&s.cosal, self.opts.cosal_group_size)),
            SaliencyMethod::Spe => serde_json::to_value(&s.spe),
            SaliencyMethod::Wavelet => serde_json::to_value(&s.wavelet),
        }
        .expect("params serialize");
        serde_json::json!({
            "detector": block,
            "threshold": s.threshold_for(m),
            "lines": s.roi_line_threshold,
        })
    }

    /// Writes the three crops, substituting FG for an empty crop.
    fn write_triplet(&self, out: SaliencyOutputs, m: SaliencyMethod, sample_id: &str, bg_dir: &Path) -> Result<()> {
        let fg_roi = out.fg_roi.unwrap_or_else(|e| {
            log::debug!("{sample_id} {m} fg-roi: {e}; using FG");
            self.counters.roi_substitutions.fetch_add(1, Ordering::Relaxed);
            out.fg.clone()
        });
        let roi = out.roi.unwrap_or_else(|e| {
            log::debug!("{sample_id} {m} roi: {e}; using FG");
            self.counters.roi_substitutions.fetch_add(1, Ordering::Relaxed);
            out.fg.clone()
        });
        self.write_outputs(m, sample_id, bg_dir, [&out.fg, &fg_roi, &roi])
    }

    fn write_outputs(&self, m: SaliencyMethod, sample_id: &str, bg_dir: &Path, imgs: [&ImageMatrix; 3]) -> Result<()> {
        for (o, img) in SaliencyOutput::ALL.into_iter().zip(imgs) {
            let method = MethodId::Saliency(m, o);
            if self.opts.methods.contains(&method) {
                for rel in sample_outputs(method, sample_id, &self.geometry) {
                    write_png(img, &bg_dir.join(rel))?;
                }
            }
        }
        Ok(())
    }

    fn saliency_outputs(&self, methods: &[MethodId], m: SaliencyMethod, sample_id: &str) -> Vec<String> {
        methods
            .iter()
            .filter(|x| matches!(x, MethodId::Saliency(mm, _) if *mm == m))
            .flat_map(|&x| sample_outputs(x, sample_id, &self.geometry))
            .collect()
    }
}

fn derive_sample(ctx: &Ctx, bg: Background, bg_dir: &Path, rec: &SampleRecord) -> Result<Vec<(String, String)>> {
    let bytes = fs::read(&rec.image_path).with_context(|| format!("reading {}", rec.image_path.display()))?;
    let mut img: Option<ImageMatrix> = None;
    let mut load = || -> Result<ImageMatrix> {
        if img.is_none() {
            img = Some(decode_png(&bytes, &rec.image_path)?);
        }
        Ok(img.clone().expect("decoded"))
    };
    let g = &ctx.geometry;
    let geo = serde_json::to_vec(g)?;
    let mut entries = Vec::new();
    let sid = &rec.sample_id;

    for &m in &ctx.opts.methods {
        let key = format!("{bg}/{m}/{sid}");
        match m {
            MethodId::Global(zone) => {
                let digest = sha256_hex(&[&bytes, m.id().as_bytes(), &geo]);
                let outs = sample_outputs(m, sid, g);
                if ctx.stale(&key, &digest, bg_dir, &outs) {
                    let o = load()?;
                    let out = match zone {
                        GlobalZone::Original => o,
                        GlobalZone::Common => zone_common(&o, g)?,
                        GlobalZone::Concat => zone_concat(&o, g)?,
                    };
                    write_png(&out, &bg_dir.join(&outs[0]))?;
                }
                entries.push((key, digest));
            }
            MethodId::Patch(zone) => {
                let size = patch_size(zone, g);
                let x = manual_offset(rec, g, size);
                let manual_rel = format!("{m}/train/{sid}.p{x}.png");
                let digest = sha256_hex(&[&bytes, m.id().as_bytes(), &geo, manual_rel.as_bytes()]);
                let mut outs = sample_outputs(m, sid, g);
                outs.push(manual_rel.clone());
                if ctx.stale(&key, &digest, bg_dir, &outs) {
                    let o = load()?;
                    let z = match zone {
                        PatchZone::Common => zone_common(&o, g)?,
                        PatchZone::Concat => zone_concat(&o, g)?,
                    };
                    let peak_x = rec.peak_position.map_or(g.width / 2, |p| p.0).min(z.width() - 1);
                    write_png(&manual_patch(&z, peak_x, size)?, &bg_dir.join(&manual_rel))?;
                    let set = auto_patches(sid, &z, g.window, g.stride)?;
                    for (p, rel) in set.patches.iter().zip(&outs) {
                        write_png(&pad_to_square(&p.image, size)?, &bg_dir.join(rel))?;
                    }
                }
                entries.push((key, digest));
            }
            _ => {}
        }
    }

    for sm in SaliencyMethod::ALL {
        if sm == SaliencyMethod::Cosal {
            continue;
        }
        let outs = ctx.saliency_outputs(&ctx.opts.methods, sm, sid);
        if outs.is_empty() {
            continue;
        }
        let key = format!("{bg}/{sm}/{sid}");
        let digest = params_digest(&[&bytes, sm.id().as_bytes()], &ctx.saliency_block(sm));
        if ctx.stale(&key, &digest, bg_dir, &outs) {
            let o = load()?;
            let map = compute_saliency(&o, sm, &ctx.opts.saliency).unwrap_or_else(|e| {
                log::warn!("{sid} ({bg}) {sm} failed: {e}; treating its map as empty");
                ctx.counters.saliency_failures.fetch_add(1, Ordering::Relaxed);
                SaliencyMap::zeros(o.width(), o.height())
            });
            let out = SaliencyOutputs::from_map(&o, map, sm, &ctx.opts.saliency)?;
            ctx.write_triplet(out, sm, sid, bg_dir)?;
        }
        entries.push((key, digest));
    }
    Ok(entries)
}

fn derive_cosal_group(
    ctx: &Ctx,
    bg: Background,
    bg_dir: &Path,
    group: &[&SampleRecord],
    methods: &[MethodId],
) -> Result<Vec<(String, String)>> {
    let sm = SaliencyMethod::Cosal;
    let bytes: Vec<Vec<u8>> = group
        .iter()
        .map(|r| fs::read(&r.image_path).with_context(|| format!("reading {}", r.image_path.display())))
        .collect::<Result<_>>()?;
    let mut parts: Vec<&[u8]> = bytes.iter().map(|b| b.as_slice()).collect();
    parts.push(sm.id().as_bytes());
    let digest = params_digest(&parts, &ctx.saliency_block(sm));
    let outs: Vec<String> = group
        .iter()
        .flat_map(|r| ctx.saliency_outputs(methods, sm, &r.sample_id))
        .collect();
    let keys: Vec<String> = group.iter().map(|r| format!("{bg}/{sm}/{}", r.sample_id)).collect();
    if ctx.stale(&keys[0], &digest, bg_dir, &outs) {
        let imgs: Vec<ImageMatrix> = group
            .iter()
            .zip(&bytes)
            .map(|(r, b)| Ok(decode_png(b, &r.image_path)?))
            .collect::<Result<_>>()?;
        let maps = match cosaliency(&imgs, &ctx.opts.saliency.cosal) {
            Ok(out) => {
                for w in &out.warnings {
                    log::debug!("co-saliency group at {}: {w}", group[0].sample_id);
                }
                out.maps
            }
            Err(e) => {
                log::warn!(
                    "co-saliency group at {} ({bg}) failed: {e}; treating its maps as empty",
                    group[0].sample_id
                );
                ctx.counters.saliency_failures.fetch_add(group.len(), Ordering::Relaxed);
                imgs.iter().map(|i| SaliencyMap::zeros(i.width(), i.height())).collect()
            }
        };
        for ((rec, img), map) in group.iter().zip(&imgs).zip(maps) {
            let o = SaliencyOutputs::from_map(img, map, sm, &ctx.opts.saliency)?;
            ctx.write_triplet(o, sm, &rec.sample_id, bg_dir)?;
        }
    }
    Ok(keys.into_iter().map(|k| (k, digest.clone())).collect())
}
