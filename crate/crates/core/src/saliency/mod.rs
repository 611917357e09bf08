//! Bottom-up saliency detectors and the mask-driven image derivations built
//! on top of them.
//!
//! Every detector returns a [`SaliencyMap`] with the dimensions of its input,
//! min-max normalized to `[0,1]`. Inputs without contrast yield the all-zero
//! map rather than amplified numerical noise.

pub mod cosaliency;
pub mod gbvs;
pub mod mask;
pub mod simpsal;
pub mod spectral;
pub mod wavelet;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{ImageMatrix, Plane};

pub use cosaliency::{cosaliency, CoSaliencyOutput, CoSaliencyParams};
pub use gbvs::{gbvs, GbvsParams};
pub use mask::{
    fg_roi, fg_roi_lines, foreground, roi, saliency_outputs, saliency_triplet, threshold_mask, SaliencyOutputs,
    SaliencyTriplet,
};
pub use simpsal::{simpsal, SimpsalParams};
pub use spectral::{spectral_residual, SpectralParams};
pub use wavelet::{wavelet_saliency, WaveletSaliencyParams};

/// The five detectors, in the order they are listed for dataset derivation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SaliencyMethod {
    Simpsal,
    Gbvs,
    Cosal,
    Spe,
    Wavelet,
}

impl SaliencyMethod {
    pub const ALL: [SaliencyMethod; 5] = [
        SaliencyMethod::Simpsal,
        SaliencyMethod::Gbvs,
        SaliencyMethod::Cosal,
        SaliencyMethod::Spe,
        SaliencyMethod::Wavelet,
    ];

    pub fn id(self) -> &'static str {
        match self {
            SaliencyMethod::Simpsal => "simpsal",
            SaliencyMethod::Gbvs => "gbvs",
            SaliencyMethod::Cosal => "cosal",
            SaliencyMethod::Spe => "spe",
            SaliencyMethod::Wavelet => "wavelet",
        }
    }
}

impl fmt::Display for SaliencyMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for SaliencyMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SaliencyMethod::ALL
            .into_iter()
            .find(|m| m.id() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::invalid(format!("unknown saliency method `{s}`")))
    }
}

/// Which cue a feature map encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureChannel {
    Intensity,
    ColorRg,
    ColorBy,
    /// Preferred orientation in degrees.
    Orientation(u16),
    WaveletLevel(usize),
}

/// One rectified (non-negative) feature map at a pyramid scale.
#[derive(Debug, Clone)]
pub struct FeatureMap {
    pub channel: FeatureChannel,
    pub scale: usize,
    pub values: Plane,
}

/// How the minimum row/column mask sum of the ROI crop is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineThreshold {
    /// Same absolute sum for rows and columns.
    Absolute(f64),
    /// Fraction of the line length: rows use `f * width`, columns `f * height`.
    Fraction(f64),
}

impl Default for LineThreshold {
    fn default() -> Self {
        LineThreshold::Fraction(0.01)
    }
}

impl LineThreshold {
    /// `(column threshold, row threshold)` for an image of the given size.
    pub fn resolve(self, width: usize, height: usize) -> (f64, f64) {
        match self {
            LineThreshold::Absolute(t) => (t, t),
            LineThreshold::Fraction(f) => (f * height as f64, f * width as f64),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SaliencyParams {
    pub mask_threshold: f64,
    /// Per-method override of `mask_threshold`.
    pub method_thresholds: BTreeMap<SaliencyMethod, f64>,
    pub roi_line_threshold: LineThreshold,
    pub simpsal: SimpsalParams,
    pub gbvs: GbvsParams,
    pub cosal: CoSaliencyParams,
    pub spe: SpectralParams,
    pub wavelet: WaveletSaliencyParams,
}

impl Default for SaliencyParams {
    fn default() -> Self {
        Self {
            mask_threshold: 0.5,
            method_thresholds: BTreeMap::new(),
            roi_line_threshold: LineThreshold::default(),
            simpsal: SimpsalParams::default(),
            gbvs: GbvsParams::default(),
            cosal: CoSaliencyParams::default(),
            spe: SpectralParams::default(),
            wavelet: WaveletSaliencyParams::default(),
        }
    }
}

impl SaliencyParams {
    pub fn threshold_for(&self, method: SaliencyMethod) -> f64 {
        self.method_thresholds
            .get(&method)
            .copied()
            .unwrap_or(self.mask_threshold)
    }

    pub fn validate(&self) -> Result<()> {
        let check = |t: f64, what: &str| {
            if t > 0.0 && t < 1.0 {
                Ok(())
            } else {
                Err(Error::invalid(format!("{what} must lie in (0,1), got {t}")))
            }
        };
        check(self.mask_threshold, "mask_threshold")?;
        for (m, &t) in &self.method_thresholds {
            check(t, &format!("mask threshold for {m}"))?;
        }
        match self.roi_line_threshold {
            LineThreshold::Absolute(t) | LineThreshold::Fraction(t) if t < 0.0 || !t.is_finite() => {
                Err(Error::invalid("roi line threshold must be a non-negative number"))
            }
            _ => Ok(()),
        }
    }
}

/// Runs one detector on one image. Co-saliency treats the image as a group of one.
pub fn compute_saliency(
    img: &ImageMatrix,
    method: SaliencyMethod,
    params: &SaliencyParams,
) -> Result<crate::imaging::SaliencyMap> {
    match method {
        SaliencyMethod::Simpsal => simpsal(img, &params.simpsal),
        SaliencyMethod::Gbvs => gbvs(img, &params.gbvs),
        SaliencyMethod::Cosal => {
            let mut out = cosaliency(std::slice::from_ref(img), &params.cosal)?;
            Ok(out.maps.remove(0))
        }
        SaliencyMethod::Spe => spectral_residual(img, &params.spe),
        SaliencyMethod::Wavelet => wavelet_saliency(img, &params.wavelet),
    }
}
