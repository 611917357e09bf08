//! Wavelet-domain saliency: per-level detail reconstructions give feature
//! maps; a local map takes the channel maximum, a global map scores each
//! pixel's feature vector by its rarity under a fitted Gaussian.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{FeatureChannel, FeatureMap};
use crate::error::{Error, Result};
use crate::imaging::color::lab_planes;
use crate::imaging::filter::gaussian_blur;
use crate::imaging::wavelet::{dwt2, idwt2, max_levels, WaveletFamily};
use crate::imaging::{ImageMatrix, Plane, SaliencyMap};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WaveletSaliencyParams {
    pub family: WaveletFamily,
    pub levels: usize,
    /// Reduce `levels` to what the image supports instead of failing.
    pub clamp_levels: bool,
    pub ridge: f64,
    pub blur_sigma: f64,
}

impl Default for WaveletSaliencyParams {
    fn default() -> Self {
        Self {
            family: WaveletFamily::Db4,
            levels: 5,
            clamp_levels: true,
            ridge: 1e-6,
            blur_sigma: 2.0,
        }
    }
}

/// Squared detail reconstructions, one per (channel, level), levels `1..=L`.
pub fn feature_maps(img: &ImageMatrix, params: &WaveletSaliencyParams) -> Result<Vec<Vec<FeatureMap>>> {
    let (w, h) = img.dims();
    let capacity = max_levels(w, h);
    let levels = if params.clamp_levels {
        params.levels.min(capacity)
    } else {
        params.levels
    };
    if levels == 0 || levels > capacity {
        return Err(Error::invalid(format!(
            "{} wavelet levels exceed the capacity ({capacity}) of a {w}x{h} image",
            params.levels
        )));
    }
    let channels = lab_planes(img).map(|p| p.scale(1.0 / 100.0));
    channels
        .iter()
        .map(|ch| {
            let pyr = dwt2(ch, params.family, levels)?;
            Ok((1..=levels)
                .map(|k| FeatureMap {
                    channel: FeatureChannel::WaveletLevel(k),
                    scale: k,
                    values: idwt2(&pyr.details_up_to(k)).map(|v| v * v),
                })
                .collect())
        })
        .collect()
}

/// Half the squared Mahalanobis distance of every pixel's feature vector
/// under a Gaussian fitted to all pixels (`-log p` up to a constant).
pub fn global_rarity(features: &[&Plane], ridge: f64) -> Plane {
    let (w, h) = features[0].dims();
    let n = w * h;
    let d = features.len();
    let mean: Vec<f64> = features.iter().map(|f| f.mean()).collect();
    let mut cov = DMatrix::<f64>::zeros(d, d);
    for i in 0..n {
        for a in 0..d {
            let da = features[a].data()[i] - mean[a];
            for b in a..d {
                cov[(a, b)] += da * (features[b].data()[i] - mean[b]);
            }
        }
    }
    for a in 0..d {
        for b in a..d {
            let v = cov[(a, b)] / n as f64;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
        cov[(a, a)] += ridge;
    }
    let inv = cov
        .cholesky()
        .map(|c| c.inverse())
        .unwrap_or_else(|| DMatrix::identity(d, d) / ridge);
    let mut out = vec![0.0; n];
    let mut x = DVector::<f64>::zeros(d);
    for (i, o) in out.iter_mut().enumerate() {
        for a in 0..d {
            x[a] = features[a].data()[i] - mean[a];
        }
        *o = 0.5 * x.dot(&(&inv * &x));
    }
    Plane::new(w, h, out).expect("dims")
}

pub fn wavelet_saliency(img: &ImageMatrix, params: &WaveletSaliencyParams) -> Result<SaliencyMap> {
    let maps = feature_maps(img, params)?;
    let (w, h) = img.dims();
    let levels = maps[0].len();

    let mut local = Plane::zeros(w, h);
    for k in 0..levels {
        let level_max = maps
            .iter()
            .map(|ch| &ch[k].values)
            .fold(Plane::filled(w, h, f64::NEG_INFINITY), |acc, p| {
                acc.zip_map(p, f64::max)
            });
        local.add_assign(&level_max);
    }
    let all: Vec<&Plane> = maps.iter().flat_map(|ch| ch.iter().map(|f| &f.values)).collect();
    let global = global_rarity(&all, params.ridge);

    let local = local.normalized();
    let global = global.normalized();
    let combined = local.zip_map(&global, |l, g| l * g.exp()).normalized();
    let enhanced = gaussian_blur(&combined, params.blur_sigma);
    Ok(SaliencyMap::from_raw(&enhanced))
}
