//! Single-image inspection commands: saliency outputs, zones and patches.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use dasal_core::dataset::PatchZone;
use dasal_core::imaging::io::{read_png, write_mask, write_png, write_saliency};
use dasal_core::region::{
    auto_patches, manual_patch, manual_window_start, pad_to_square, zone_common, zone_concat, Geometry,
};
use dasal_core::saliency::{saliency_outputs, SaliencyMethod, SaliencyParams};

fn stem(image: &Path) -> Result<String> {
    Ok(image
        .file_stem()
        .context("image path has no file name")?
        .to_string_lossy()
        .into_owned())
}

/// Writes `<stem>.<method>.{map,mask,fg,fgroi,roi}.png` and returns the paths.
/// An empty crop is reported and skipped.
pub fn saliency(image: &Path, methods: &[SaliencyMethod], params: &SaliencyParams, out: &Path) -> Result<Vec<PathBuf>> {
    let img = read_png(image)?;
    let stem = stem(image)?;
    fs::create_dir_all(out)?;
    let mut written = Vec::new();
    for &m in methods {
        let o = saliency_outputs(&img, m, params).with_context(|| format!("{m} on {}", image.display()))?;
        let path = |kind: &str| out.join(format!("{stem}.{m}.{kind}.png"));
        write_saliency(&o.map, &path("map"))?;
        write_mask(&o.mask, &path("mask"))?;
        write_png(&o.fg, &path("fg"))?;
        written.extend([path("map"), path("mask"), path("fg")]);
        for (kind, crop) in [("fgroi", o.fg_roi), ("roi", o.roi)] {
            match crop {
                Ok(c) => {
                    write_png(&c, &path(kind))?;
                    written.push(path(kind));
                }
                Err(e) => log::warn!("{stem} {m} {kind}: {e}"),
            }
        }
    }
    Ok(written)
}

/// Writes `<stem>.common.png` and `<stem>.concat.png`.
pub fn zones(image: &Path, geometry: &Geometry, out: &Path) -> Result<Vec<PathBuf>> {
    let img = read_png(image)?;
    let stem = stem(image)?;
    fs::create_dir_all(out)?;
    let common = out.join(format!("{stem}.common.png"));
    let concat = out.join(format!("{stem}.concat.png"));
    write_png(&zone_common(&img, geometry)?, &common)?;
    write_png(&zone_concat(&img, geometry)?, &concat)?;
    Ok(vec![common, concat])
}

/// Sliding-window patches of one zone, padded to square; with `peak_x`,
/// the single manual patch centered on it instead.
pub fn patches(
    image: &Path,
    zone: PatchZone,
    geometry: &Geometry,
    peak_x: Option<usize>,
    out: &Path,
) -> Result<Vec<PathBuf>> {
    let img = read_png(image)?;
    let stem = stem(image)?;
    fs::create_dir_all(out)?;
    let (z, size, tag) = match zone {
        PatchZone::Common => (zone_common(&img, geometry)?, geometry.common_height(), "common"),
        PatchZone::Concat => (zone_concat(&img, geometry)?, geometry.concat_height(), "concat"),
    };
    if let Some(px) = peak_x {
        let x = manual_window_start(z.width(), px, size);
        let path = out.join(format!("{stem}.{tag}.manual.p{x}.png"));
        write_png(&manual_patch(&z, px, size)?, &path)?;
        return Ok(vec![path]);
    }
    let set = auto_patches(&stem, &z, geometry.window, geometry.stride)?;
    let mut written = Vec::new();
    for p in &set.patches {
        let path = out.join(format!("{stem}.{tag}.p{}.png", p.x_offset));
        write_png(&pad_to_square(&p.image, size)?, &path)?;
        written.push(path);
    }
    Ok(written)
}
