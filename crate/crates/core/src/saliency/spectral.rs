//! Spectral-residual saliency on a 64-pixel working image.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::color::intensity;
use crate::imaging::fft::{fft2_real, ifft2, ComplexMatrix};
use crate::imaging::filter::{box_filter, gaussian_blur};
use crate::imaging::resize::{dims_with_short_side, resize_plane, resize_plane_antialiased};
use crate::imaging::{ImageMatrix, Plane, SaliencyMap, DEGENERATE_RANGE};
use rustfft::num_complex::Complex64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectralParams {
    pub working_short_side: usize,
    /// Added to the amplitude before the logarithm.
    pub epsilon: f64,
    pub blur_sigma: f64,
}

impl Default for SpectralParams {
    fn default() -> Self {
        Self {
            working_short_side: 64,
            epsilon: 1e-8,
            blur_sigma: 2.5,
        }
    }
}

pub const MIN_INPUT_SIDE: usize = 8;

/// Raw saliency on an already sized gray plane, before normalization.
pub fn residual_map(gray: &Plane, params: &SpectralParams) -> Plane {
    let spectrum = fft2_real(gray);
    let log_amp = spectrum.map_to_plane(|c| (c.norm() + params.epsilon).ln());
    let residual = log_amp.zip_map(&box_filter(&log_amp, 1), |l, m| l - m);
    let rebuilt = ComplexMatrix {
        width: spectrum.width,
        height: spectrum.height,
        data: spectrum
            .data
            .iter()
            .zip(residual.data())
            .map(|(c, &r)| Complex64::from_polar(r.exp(), c.arg()))
            .collect(),
    };
    let back = ifft2(&rebuilt).map_to_plane(|c| c.norm_sqr());
    gaussian_blur(&back, params.blur_sigma)
}

pub fn spectral_residual(img: &ImageMatrix, params: &SpectralParams) -> Result<SaliencyMap> {
    let (w, h) = img.dims();
    if w.min(h) < MIN_INPUT_SIDE {
        return Err(Error::invalid(format!(
            "spectral residual needs both sides >= {MIN_INPUT_SIDE}, got {w}x{h}"
        )));
    }
    let gray = intensity(img);
    let (ww, wh) = dims_with_short_side(w, h, params.working_short_side);
    let small = resize_plane_antialiased(&gray, ww, wh);
    // a flat input has no spectral structure; emit the defined zero map
    if small.max() - small.min() < DEGENERATE_RANGE {
        return Ok(SaliencyMap::zeros(w, h));
    }
    let raw = residual_map(&small, params);
    if raw.max() < DEGENERATE_RANGE {
        return Ok(SaliencyMap::zeros(w, h));
    }
    let normalized = raw.normalized();
    Ok(SaliencyMap::from_raw(&resize_plane(&normalized, w, h)))
}
