//! Static Itti-Koch saliency map: 42 center-surround feature maps over a
//! 9-level Gaussian pyramid, combined into intensity, color and orientation
//! conspicuity maps at scale 4.

use serde::{Deserialize, Serialize};

use super::{FeatureChannel, FeatureMap};
use crate::error::{Error, Result};
use crate::imaging::color::rgb_planes;
use crate::imaging::filter::{filter2d, pyramid_planes};
use crate::imaging::resize::{dims_with_short_side, resize_plane, resize_plane_antialiased};
use crate::imaging::{ImageMatrix, Plane, SaliencyMap, DEGENERATE_RANGE};

pub const CENTER_LEVELS: [usize; 3] = [2, 3, 4];
pub const SURROUND_DELTAS: [usize; 2] = [3, 4];
pub const ORIENTATIONS: [u16; 4] = [0, 45, 90, 135];
const PYRAMID_LEVELS: usize = 9;
const OUTPUT_SCALE: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimpsalParams {
    /// Shorter side of the working image the pyramid is built on.
    pub working_short_side: usize,
    pub gabor_sigma: f64,
    pub gabor_wavelength: f64,
    pub gabor_radius: usize,
}

impl Default for SimpsalParams {
    fn default() -> Self {
        Self {
            working_short_side: 256,
            gabor_sigma: 2.0,
            gabor_wavelength: 5.0,
            gabor_radius: 4,
        }
    }
}

pub const MIN_INPUT_SIDE: usize = 64;

/// Zero-mean even Gabor kernel at `theta` degrees.
pub(crate) fn gabor_kernel(theta_deg: f64, sigma: f64, wavelength: f64, radius: usize) -> Plane {
    let n = 2 * radius + 1;
    let (s, c) = theta_deg.to_radians().sin_cos();
    let r = radius as f64;
    let mut k = Plane::from_fn(n, n, |x, y| {
        let (dx, dy) = (x as f64 - r, y as f64 - r);
        let u = dx * c + dy * s;
        let v = -dx * s + dy * c;
        (-(u * u + v * v) / (2.0 * sigma * sigma)).exp() * (2.0 * std::f64::consts::PI * u / wavelength).cos()
    });
    let mean = k.mean();
    k = k.map(|v| v - mean);
    let norm = k.data().iter().map(|v| v.abs()).sum::<f64>();
    k.scale(1.0 / norm)
}

/// Intensity and the broadly tuned R, G, B, Y color channels.
pub(crate) struct OpponentPlanes {
    pub intensity: Plane,
    pub red: Plane,
    pub green: Plane,
    pub blue: Plane,
    pub yellow: Plane,
}

pub(crate) fn opponent_planes(img: &ImageMatrix) -> OpponentPlanes {
    let [r, g, b] = rgb_planes(img);
    let intensity = Plane::from_fn(img.width(), img.height(), |x, y| {
        (r.get(x, y) + g.get(x, y) + b.get(x, y)) / 3.0
    });
    let floor = intensity.max() / 10.0;
    // hue is undefined where the pixel is too dark; r, g, b are normalized by I
    let norm = |p: &Plane| p.zip_map(&intensity, |v, i| if i > floor && i > 0.0 { v / i } else { 0.0 });
    let (rn, gn, bn) = (norm(&r), norm(&g), norm(&b));
    let (w, h) = img.dims();
    let red = Plane::from_fn(w, h, |x, y| {
        (rn.get(x, y) - (gn.get(x, y) + bn.get(x, y)) / 2.0).max(0.0)
    });
    let green = Plane::from_fn(w, h, |x, y| {
        (gn.get(x, y) - (rn.get(x, y) + bn.get(x, y)) / 2.0).max(0.0)
    });
    let blue = Plane::from_fn(w, h, |x, y| {
        (bn.get(x, y) - (rn.get(x, y) + gn.get(x, y)) / 2.0).max(0.0)
    });
    let yellow = Plane::from_fn(w, h, |x, y| {
        let (rv, gv, bv) = (rn.get(x, y), gn.get(x, y), bn.get(x, y));
        ((rv + gv) / 2.0 - (rv - gv).abs() / 2.0 - bv).max(0.0)
    });
    OpponentPlanes {
        intensity,
        red,
        green,
        blue,
        yellow,
    }
}

fn center_surround(center: &Plane, surround: &Plane) -> Plane {
    let s = resize_plane(surround, center.width(), center.height());
    center.zip_map(&s, |a, b| (a - b).abs())
}

/// Itti max-normalization: scale to `[0,1]`, then weight by `(1 - m)^2`
/// where `m` is the mean of the local maxima other than the global one.
pub fn max_normalize(map: &Plane) -> Plane {
    let max = map.max();
    if max.is_nan() || max <= DEGENERATE_RANGE {
        return Plane::zeros(map.width(), map.height());
    }
    let scaled = map.scale(1.0 / max);
    let (w, h) = scaled.dims();
    let mut global_seen = false;
    let (mut sum, mut count) = (0.0, 0usize);
    for y in 0..h {
        for x in 0..w {
            let v = scaled.get(x, y);
            if v <= 0.0 {
                continue;
            }
            let mut is_peak = true;
            'nb: for dy in -1isize..=1 {
                for dx in -1isize..=1 {
                    let (nx, ny) = (x as isize + dx, y as isize + dy);
                    if (dx, dy) == (0, 0) || nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    if scaled.get(nx as usize, ny as usize) > v {
                        is_peak = false;
                        break 'nb;
                    }
                }
            }
            if !is_peak {
                continue;
            }
            if v == 1.0 && !global_seen {
                global_seen = true;
                continue;
            }
            sum += v;
            count += 1;
        }
    }
    let mean_others = if count == 0 { 0.0 } else { sum / count as f64 };
    let weight = (1.0 - mean_others).powi(2);
    scaled.scale(weight)
}

fn working_image(img: &ImageMatrix, params: &SimpsalParams) -> Result<Vec<Plane>> {
    let (w, h) = img.dims();
    if w.min(h) < MIN_INPUT_SIDE {
        return Err(Error::invalid(format!(
            "simpsal needs both sides >= {MIN_INPUT_SIDE} for a {PYRAMID_LEVELS}-level pyramid, got {w}x{h}"
        )));
    }
    let (ww, wh) = dims_with_short_side(w, h, params.working_short_side.max(1 << (PYRAMID_LEVELS - 1)));
    Ok(rgb_planes(img)
        .iter()
        .map(|p| resize_plane_antialiased(p, ww, wh))
        .collect())
}

struct Pyramids {
    intensity: Vec<Plane>,
    rg: Vec<Plane>,
    by: Vec<Plane>,
    orientation: Vec<(u16, Vec<Plane>)>,
}

fn build_pyramids(img: &ImageMatrix, params: &SimpsalParams) -> Result<Pyramids> {
    let planes = working_image(img, params)?;
    let work = ImageMatrix::from_planes(&planes)?;
    let opp = opponent_planes(&work);
    let rg = opp.red.zip_map(&opp.green, |r, g| r - g);
    let by = opp.blue.zip_map(&opp.yellow, |b, y| b - y);
    let intensity = pyramid_planes(&opp.intensity, PYRAMID_LEVELS)?;
    let orientation = ORIENTATIONS
        .iter()
        .map(|&theta| {
            let k = gabor_kernel(
                theta as f64,
                params.gabor_sigma,
                params.gabor_wavelength,
                params.gabor_radius,
            );
            // levels below the finest center are never read
            let levels = intensity
                .iter()
                .enumerate()
                .map(|(l, p)| {
                    if l < CENTER_LEVELS[0] {
                        Plane::zeros(1, 1)
                    } else {
                        filter2d(p, &k).map(f64::abs)
                    }
                })
                .collect();
            (theta, levels)
        })
        .collect();
    Ok(Pyramids {
        rg: pyramid_planes(&rg, PYRAMID_LEVELS)?,
        by: pyramid_planes(&by, PYRAMID_LEVELS)?,
        intensity,
        orientation,
    })
}

fn scale_pairs() -> impl Iterator<Item = (usize, usize)> {
    CENTER_LEVELS
        .into_iter()
        .flat_map(|c| SURROUND_DELTAS.into_iter().map(move |d| (c, c + d)))
}

/// The 42 center-surround maps: 6 intensity, 12 color, 24 orientation.
pub fn feature_maps(img: &ImageMatrix, params: &SimpsalParams) -> Result<Vec<FeatureMap>> {
    let pyr = build_pyramids(img, params)?;
    let mut out = Vec::with_capacity(42);
    let mut push = |channel, c: usize, values| {
        out.push(FeatureMap {
            channel,
            scale: c,
            values,
        })
    };
    for (c, s) in scale_pairs() {
        push(
            FeatureChannel::Intensity,
            c,
            center_surround(&pyr.intensity[c], &pyr.intensity[s]),
        );
    }
    for (c, s) in scale_pairs() {
        push(FeatureChannel::ColorRg, c, center_surround(&pyr.rg[c], &pyr.rg[s]));
        push(FeatureChannel::ColorBy, c, center_surround(&pyr.by[c], &pyr.by[s]));
    }
    for (theta, levels) in &pyr.orientation {
        for (c, s) in scale_pairs() {
            push(
                FeatureChannel::Orientation(*theta),
                c,
                center_surround(&levels[c], &levels[s]),
            );
        }
    }
    Ok(out)
}

fn across_scale_sum<'a>(maps: impl Iterator<Item = &'a FeatureMap>, dims: (usize, usize)) -> Plane {
    let mut acc = Plane::zeros(dims.0, dims.1);
    for m in maps {
        acc.add_assign(&resize_plane(&max_normalize(&m.values), dims.0, dims.1));
    }
    acc
}

pub fn simpsal(img: &ImageMatrix, params: &SimpsalParams) -> Result<SaliencyMap> {
    let maps = feature_maps(img, params)?;
    let dims = {
        let i4 = maps.iter().find(|m| m.scale == OUTPUT_SCALE).expect("scale 4 present");
        i4.values.dims()
    };
    let intensity = across_scale_sum(maps.iter().filter(|m| m.channel == FeatureChannel::Intensity), dims);
    let color = across_scale_sum(
        maps.iter()
            .filter(|m| matches!(m.channel, FeatureChannel::ColorRg | FeatureChannel::ColorBy)),
        dims,
    );
    let mut orientation = Plane::zeros(dims.0, dims.1);
    for theta in ORIENTATIONS {
        let per_angle = across_scale_sum(
            maps.iter().filter(|m| m.channel == FeatureChannel::Orientation(theta)),
            dims,
        );
        orientation.add_assign(&max_normalize(&per_angle));
    }
    let mut combined = max_normalize(&intensity);
    combined.add_assign(&max_normalize(&color));
    combined.add_assign(&max_normalize(&orientation));
    let combined = combined.scale(1.0 / 3.0);
    let up = resize_plane(&combined, img.width(), img.height());
    Ok(SaliencyMap::from_raw(&up))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disk_image(w: usize, h: usize, cx: f64, cy: f64, r: f64) -> ImageMatrix {
        let p = Plane::from_fn(w, h, |x, y| {
            let d = ((x as f64 - cx).powi(2) + (y as f64 - cy).powi(2)).sqrt();
            if d <= r {
                0.9
            } else {
                0.05
            }
        });
        ImageMatrix::from_planes(&[p]).unwrap()
    }

    #[test]
    fn feature_map_inventory() {
        let img = disk_image(96, 80, 40.0, 30.0, 8.0);
        let maps = feature_maps(&img, &SimpsalParams::default()).unwrap();
        assert_eq!(maps.len(), 42);
        let count = |f: &dyn Fn(FeatureChannel) -> bool| maps.iter().filter(|m| f(m.channel)).count();
        assert_eq!(count(&|c| c == FeatureChannel::Intensity), 6);
        assert_eq!(
            count(&|c| matches!(c, FeatureChannel::ColorRg | FeatureChannel::ColorBy)),
            12
        );
        assert_eq!(count(&|c| matches!(c, FeatureChannel::Orientation(_))), 24);
        for theta in ORIENTATIONS {
            assert_eq!(count(&|c| c == FeatureChannel::Orientation(theta)), 6);
        }
        assert!(maps.iter().all(|m| m.values.min() >= 0.0));
    }

    #[test]
    fn constant_image_gives_zero_map() {
        let img = ImageMatrix::constant(80, 70, 3, 0.37).unwrap();
        let map = simpsal(&img, &SimpsalParams::default()).unwrap();
        assert!(map.is_all_zero());
        assert_eq!(map.dims(), (80, 70));
    }

    #[test]
    fn too_small_rejected() {
        let img = ImageMatrix::constant(63, 100, 1, 0.5).unwrap();
        assert!(simpsal(&img, &SimpsalParams::default()).is_err());
    }

    #[test]
    fn disk_attracts_the_maximum() {
        let (cx, cy, r) = (150.0, 60.0, 10.0);
        let img = disk_image(200, 128, cx, cy, r);
        let map = simpsal(&img, &SimpsalParams::default()).unwrap();
        let (mx, my) = map.argmax();
        assert!(
            (mx as f64 - cx).abs() <= r && (my as f64 - cy).abs() <= r,
            "max at {mx},{my}"
        );
        assert_eq!(map.as_plane().max(), 1.0);
    }

    #[test]
    fn max_normalize_rewards_single_peak() {
        let mut one = Plane::zeros(9, 9);
        one.set(4, 4, 2.0);
        let mut two = one.clone();
        two.set(1, 1, 2.0);
        assert_eq!(max_normalize(&one).max(), 1.0);
        assert_eq!(max_normalize(&two).max(), 0.0);
        assert!(max_normalize(&Plane::filled(3, 3, 0.0))
            .data()
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn gabor_is_zero_mean() {
        for theta in ORIENTATIONS {
            let k = gabor_kernel(theta as f64, 2.0, 5.0, 4);
            assert!(k.data().iter().sum::<f64>().abs() < 1e-12);
        }
    }
}
