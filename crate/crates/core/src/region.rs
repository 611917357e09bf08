//! Global zoning and patch extraction on the y-axis/time-axis layout of an
//! FSCV color plot. All extraction is a pixel-exact copy.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::ImageMatrix;

/// Pixel geometry of the zones and windows. Defaults describe 875-pixel-wide
/// plots; [`Geometry::scaled`] derives the same layout for smaller images.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Geometry {
    pub width: usize,
    /// Common release region, `[start, end)` rows.
    pub common_rows: (usize, usize),
    /// Rows stacked above the common region in the concatenated zone.
    pub top_rows: (usize, usize),
    pub window: usize,
    pub stride: usize,
}

impl Default for Geometry {
    fn default() -> Self {
        Self {
            width: 875,
            common_rows: (320, 520),
            top_rows: (0, 90),
            window: 200,
            stride: 135,
        }
    }
}

impl Geometry {
    /// Every default length multiplied by `factor` and rounded.
    pub fn scaled(factor: f64) -> Result<Self> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::invalid(format!("geometry scale must be positive, got {factor}")));
        }
        let d = Geometry::default();
        let s = |v: usize| (v as f64 * factor).round() as usize;
        let g = Geometry {
            width: s(d.width),
            common_rows: (s(d.common_rows.0), s(d.common_rows.1)),
            top_rows: (s(d.top_rows.0), s(d.top_rows.1)),
            window: s(d.window),
            stride: s(d.stride),
        };
        g.validate()?;
        Ok(g)
    }

    /// Geometry for images of the given width: the defaults when it is 875,
    /// otherwise the proportionally scaled layout.
    pub fn for_width(width: usize) -> Result<Self> {
        let d = Geometry::default();
        if width == d.width {
            return Ok(d);
        }
        let g = Self::scaled(width as f64 / d.width as f64)?;
        if g.width != width {
            return Err(Error::invalid(format!("cannot scale zone geometry to width {width}")));
        }
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        let (c0, c1) = self.common_rows;
        let (t0, t1) = self.top_rows;
        if c0 >= c1 || t0 >= t1 || t1 > c0 {
            return Err(Error::invalid(format!(
                "zone rows must be non-empty, ascending and non-overlapping: top {t0}..{t1}, common {c0}..{c1}"
            )));
        }
        if self.window == 0 || self.stride == 0 || self.window > self.width {
            return Err(Error::invalid("window and stride must be positive and fit the width"));
        }
        check_stride(self.width, self.window, self.stride)
    }

    pub fn common_height(&self) -> usize {
        self.common_rows.1 - self.common_rows.0
    }

    pub fn concat_height(&self) -> usize {
        self.common_height() + self.top_rows.1 - self.top_rows.0
    }

    pub fn min_image_height(&self) -> usize {
        self.common_rows.1
    }

    pub fn window_offsets(&self) -> Vec<usize> {
        (0..=(self.width - self.window) / self.stride)
            .map(|i| i * self.stride)
            .collect()
    }
}

/// Ordered, non-overlapping row intervals stacked top to bottom.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZoneSpec {
    row_ranges: Vec<(usize, usize)>,
}

impl ZoneSpec {
    pub fn new(row_ranges: Vec<(usize, usize)>) -> Result<Self> {
        if row_ranges.is_empty() {
            return Err(Error::invalid("zone needs at least one row range"));
        }
        let mut prev_end = 0;
        for (i, &(s, e)) in row_ranges.iter().enumerate() {
            if s >= e || (i > 0 && s < prev_end) {
                return Err(Error::invalid(format!(
                    "zone row ranges must be non-empty, ascending and disjoint: {row_ranges:?}"
                )));
            }
            prev_end = e;
        }
        Ok(Self { row_ranges })
    }

    pub fn common(g: &Geometry) -> Self {
        Self::new(vec![g.common_rows]).expect("validated geometry")
    }

    pub fn concatenated(g: &Geometry) -> Self {
        Self::new(vec![g.top_rows, g.common_rows]).expect("validated geometry")
    }

    pub fn row_ranges(&self) -> &[(usize, usize)] {
        &self.row_ranges
    }

    pub fn extract(&self, img: &ImageMatrix) -> Result<ImageMatrix> {
        let end = self.row_ranges.last().expect("non-empty").1;
        if img.height() < end {
            return Err(Error::invalid(format!(
                "image has {} rows, zone needs at least {end}",
                img.height()
            )));
        }
        let rows: Vec<usize> = self.row_ranges.iter().flat_map(|&(s, e)| s..e).collect();
        let cols: Vec<usize> = (0..img.width()).collect();
        img.select(&cols, &rows)
    }
}

/// Common release region only.
pub fn zone_common(img: &ImageMatrix, g: &Geometry) -> Result<ImageMatrix> {
    ZoneSpec::common(g).extract(img)
}

/// Top rows stacked above the common release region.
pub fn zone_concat(img: &ImageMatrix, g: &Geometry) -> Result<ImageMatrix> {
    ZoneSpec::concatenated(g).extract(img)
}

fn crop_columns(img: &ImageMatrix, x0: usize, w: usize) -> Result<ImageMatrix> {
    let cols: Vec<usize> = (x0..x0 + w).collect();
    let rows: Vec<usize> = (0..img.height()).collect();
    img.select(&cols, &rows)
}

/// Left edge of a `size`-wide window centered on `peak_x`, clamped to stay
/// inside `[0, width)`.
pub fn manual_window_start(width: usize, peak_x: usize, size: usize) -> usize {
    peak_x.saturating_sub(size / 2).min(width - size)
}

/// Square crop horizontally centered on the labelled release peak.
pub fn manual_patch(zone: &ImageMatrix, peak_x: usize, size: usize) -> Result<ImageMatrix> {
    if zone.height() != size {
        return Err(Error::invalid(format!(
            "manual patch of size {size} needs a zone of height {size}, got {}",
            zone.height()
        )));
    }
    if zone.width() < size {
        return Err(Error::invalid(format!(
            "zone width {} is narrower than patch size {size}",
            zone.width()
        )));
    }
    if peak_x >= zone.width() {
        return Err(Error::invalid(format!(
            "peak x {peak_x} outside zone width {}",
            zone.width()
        )));
    }
    crop_columns(zone, manual_window_start(zone.width(), peak_x, size), size)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PatchMode {
    Manual,
    Automatic,
}

impl fmt::Display for PatchMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PatchMode::Manual => "manual",
            PatchMode::Automatic => "automatic",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub image: ImageMatrix,
    pub x_offset: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatchSet {
    pub source_id: String,
    pub mode: PatchMode,
    pub patches: Vec<Patch>,
}

fn check_stride(width: usize, window: usize, stride: usize) -> Result<()> {
    if window > width {
        return Err(Error::invalid(format!("window {window} wider than zone {width}")));
    }
    let leftover = (width - window) % stride;
    if leftover != 0 {
        return Err(Error::invalid(format!(
            "stride {stride} does not tile width {width} with window {window}: {leftover} pixels left over"
        )));
    }
    Ok(())
}

/// Sliding windows of full zone height at offsets `0, stride, ..., width - window`.
pub fn auto_patches(source_id: &str, zone: &ImageMatrix, window: usize, stride: usize) -> Result<PatchSet> {
    if window == 0 || stride == 0 {
        return Err(Error::invalid("window and stride must be positive"));
    }
    check_stride(zone.width(), window, stride)?;
    let patches = (0..=(zone.width() - window) / stride)
        .map(|i| {
            let x_offset = i * stride;
            Ok(Patch {
                image: crop_columns(zone, x_offset, window)?,
                x_offset,
            })
        })
        .collect::<Result<_>>()?;
    Ok(PatchSet {
        source_id: source_id.to_string(),
        mode: PatchMode::Automatic,
        patches,
    })
}

/// Appends black columns on the right up to `size x size`.
pub fn pad_to_square(patch: &ImageMatrix, size: usize) -> Result<ImageMatrix> {
    if patch.height() != size {
        return Err(Error::invalid(format!(
            "patch height {} must equal pad size {size}",
            patch.height()
        )));
    }
    if patch.width() > size {
        return Err(Error::invalid(format!(
            "patch width {} exceeds pad size {size}",
            patch.width()
        )));
    }
    if patch.width() == size {
        return Ok(patch.clone());
    }
    let mut data = Vec::with_capacity(size * size * patch.channels());
    for c in 0..patch.channels() {
        let ch = patch.channel_data(c);
        for y in 0..size {
            data.extend_from_slice(&ch[y * patch.width()..(y + 1) * patch.width()]);
            data.extend(std::iter::repeat_n(0.0, size - patch.width()));
        }
    }
    ImageMatrix::new(size, size, patch.channels(), data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(w: usize, h: usize) -> ImageMatrix {
        let data = (0..w * h).map(|i| (i % 251) as f64 / 250.0).collect();
        ImageMatrix::new(w, h, 1, data).unwrap()
    }

    #[test]
    fn default_zone_sizes() {
        let g = Geometry::default();
        let img = ramp(875, 600);
        assert_eq!(zone_common(&img, &g).unwrap().dims(), (875, 200));
        assert_eq!(zone_concat(&img, &g).unwrap().dims(), (875, 290));
    }

    #[test]
    fn zone_rows_map_as_expected() {
        let g = Geometry::default();
        let img = ramp(875, 600);
        let common = zone_common(&img, &g).unwrap();
        let concat = zone_concat(&img, &g).unwrap();
        for x in [0, 400, 874] {
            assert_eq!(common.get(x, 0, 0), img.get(x, 320, 0));
            assert_eq!(concat.get(x, 89, 0), img.get(x, 89, 0));
            assert_eq!(concat.get(x, 90, 0), img.get(x, 320, 0));
            assert_eq!(concat.get(x, 289, 0), img.get(x, 519, 0));
        }
    }

    #[test]
    fn short_image_rejected() {
        let g = Geometry::default();
        assert!(zone_common(&ramp(875, 519), &g).is_err());
        assert!(zone_concat(&ramp(875, 519), &g).is_err());
        assert!(zone_common(&ramp(875, 520), &g).is_ok());
    }

    #[test]
    fn manual_patch_centering_and_clamping() {
        assert_eq!(manual_window_start(875, 437, 200), 337);
        assert_eq!(manual_window_start(875, 10, 200), 0);
        assert_eq!(manual_window_start(875, 870, 200), 675);
        let zone = ramp(875, 200);
        let p = manual_patch(&zone, 437, 200).unwrap();
        assert_eq!(p.dims(), (200, 200));
        assert_eq!(p.get(0, 0, 0), zone.get(337, 0, 0));
        assert!(manual_patch(&zone, 900, 200).is_err());
        assert!(manual_patch(&ramp(150, 200), 50, 200).is_err());
        assert!(manual_patch(&zone, 400, 290).is_err());
    }

    #[test]
    fn six_windows_on_default_geometry() {
        let set = auto_patches("s", &ramp(875, 200), 200, 135).unwrap();
        let offsets: Vec<usize> = set.patches.iter().map(|p| p.x_offset).collect();
        assert_eq!(offsets, vec![0, 135, 270, 405, 540, 675]);
        assert!(set.patches.iter().all(|p| p.image.dims() == (200, 200)));
        let set = auto_patches("s", &ramp(875, 290), 200, 135).unwrap();
        assert!(set.patches.iter().all(|p| p.image.dims() == (200, 290)));
        assert_eq!(set.mode, PatchMode::Automatic);
    }

    #[test]
    fn leftover_is_named() {
        let err = auto_patches("s", &ramp(880, 200), 200, 135).unwrap_err();
        assert!(err.to_string().contains("5 pixels left over"), "{err}");
    }

    #[test]
    fn padding_appends_black_columns() {
        let patch = ImageMatrix::constant(200, 290, 3, 0.8).unwrap();
        let sq = pad_to_square(&patch, 290).unwrap();
        assert_eq!(sq.dims(), (290, 290));
        let mut pad_sum = 0.0;
        for c in 0..3 {
            for y in 0..290 {
                for x in 0..290 {
                    if x < 200 {
                        assert_eq!(sq.get(x, y, c), 0.8);
                    } else {
                        pad_sum += sq.get(x, y, c);
                    }
                }
            }
        }
        assert_eq!(pad_sum, 0.0);
        assert_eq!(pad_to_square(&sq, 290).unwrap(), sq);
        assert!(pad_to_square(&ImageMatrix::constant(300, 290, 1, 0.1).unwrap(), 290).is_err());
    }

    #[test]
    fn scaled_geometry() {
        let g = Geometry::scaled(0.2).unwrap();
        assert_eq!(g.width, 175);
        assert_eq!(g.common_rows, (64, 104));
        assert_eq!(g.top_rows, (0, 18));
        assert_eq!((g.window, g.stride), (40, 27));
        assert_eq!(g.window_offsets().len(), 6);
        assert_eq!(Geometry::for_width(175).unwrap(), g);
        assert_eq!(Geometry::for_width(875).unwrap(), Geometry::default());
        assert!(Geometry::scaled(0.0).is_err());
    }

    #[test]
    fn zone_spec_validation() {
        assert!(ZoneSpec::new(vec![(10, 5)]).is_err());
        assert!(ZoneSpec::new(vec![(0, 10), (5, 20)]).is_err());
        assert!(ZoneSpec::new(vec![]).is_err());
    }
}
