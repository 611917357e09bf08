//! Cluster-based co-saliency.
//!
//! Pixels are clustered in L*a*b* space twice: per image, and jointly over
//! the whole group. Every cluster is scored by the product of three
//! min-max-normalized cues (contrast, spatial, correspondence) and each pixel
//! inherits its cluster's score.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::color::lab_planes;
use crate::imaging::resize::{resize_bilinear, resize_plane};
use crate::imaging::{ImageMatrix, Plane, SaliencyMap, DEGENERATE_RANGE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoSaliencyParams {
    pub k_single: usize,
    pub k_multi: usize,
    pub seed: u64,
    pub max_iterations: usize,
    /// Longer side of the working resolution clustering runs at.
    pub working_max_side: usize,
    /// Spatial-cue falloff on coordinates normalized to `[-0.5, 0.5]`.
    pub spatial_sigma: f64,
}

impl Default for CoSaliencyParams {
    fn default() -> Self {
        Self {
            k_single: 6,
            k_multi: 10,
            seed: 0x00c0_5a1e,
            max_iterations: 50,
            working_max_side: 128,
            spatial_sigma: 0.25,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CoSaliencyOutput {
    pub maps: Vec<SaliencyMap>,
    pub warnings: Vec<String>,
}

/// A clustered pixel: Lab feature (scaled by 1/100), centered normalized
/// position, and the index of its image within the group.
#[derive(Debug, Clone, Copy)]
pub struct Point {
    pub feature: [f64; 3],
    pub pos: [f64; 2],
    pub image: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterCues {
    pub size: usize,
    pub contrast: f64,
    pub spatial: f64,
    pub correspondence: f64,
}

fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)
}

fn distinct_features(points: &[Point], cap: usize) -> usize {
    let mut seen = HashSet::new();
    for p in points {
        seen.insert(p.feature.map(f64::to_bits));
        if seen.len() >= cap {
            break;
        }
    }
    seen.len()
}

/// Lloyd's k-means with k-means++ seeding. Returns labels and centroids.
pub fn kmeans(features: &[[f64; 3]], k: usize, seed: u64, max_iterations: usize) -> (Vec<usize>, Vec<[f64; 3]>) {
    assert!(k >= 1 && !features.is_empty());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = vec![features[rng.gen_range(0..features.len())]];
    let mut nearest: Vec<f64> = features.iter().map(|f| dist2(f, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = nearest.iter().sum();
        if total <= 0.0 {
            break;
        }
        let mut target = rng.gen::<f64>() * total;
        let mut pick = features.len() - 1;
        for (i, &d) in nearest.iter().enumerate() {
            if target < d {
                pick = i;
                break;
            }
            target -= d;
        }
        let c = features[pick];
        for (n, f) in nearest.iter_mut().zip(features) {
            *n = n.min(dist2(f, &c));
        }
        centroids.push(c);
    }
    let mut labels = vec![usize::MAX; features.len()];
    for _ in 0..max_iterations {
        let mut changed = false;
        for (l, f) in labels.iter_mut().zip(features) {
            let best = centroids
                .iter()
                .enumerate()
                .map(|(i, c)| (i, dist2(f, c)))
                .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a })
                .0;
            if *l != best {
                *l = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![[0.0; 3]; centroids.len()];
        let mut counts = vec![0usize; centroids.len()];
        for (&l, f) in labels.iter().zip(features) {
            counts[l] += 1;
            for d in 0..3 {
                sums[l][d] += f[d];
            }
        }
        for (c, (s, &n)) in centroids.iter_mut().zip(sums.iter().zip(&counts)) {
            if n > 0 {
                *c = s.map(|v| v / n as f64);
            }
        }
    }
    (labels, centroids)
}

/// Evenness of a cluster over the group: `1 - var(q) / var_max`, where `q`
/// is the cluster's per-image pixel fraction (each image's count divided by
/// that image's size, renormalized to sum 1). A single image scores 1.
pub fn corresponding_cue(per_image_fraction: &[f64]) -> f64 {
    let m = per_image_fraction.len();
    if m <= 1 {
        return 1.0;
    }
    let total: f64 = per_image_fraction.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    let q: Vec<f64> = per_image_fraction.iter().map(|v| v / total).collect();
    let mean = 1.0 / m as f64;
    let var = q.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / m as f64;
    let var_max = (m - 1) as f64 / (m * m) as f64;
    (1.0 - var / var_max).clamp(0.0, 1.0)
}

/// Cues of each cluster given the labelled points.
pub fn cluster_cues(
    points: &[Point],
    labels: &[usize],
    centroids: &[[f64; 3]],
    image_sizes: &[usize],
    spatial_sigma: f64,
) -> Vec<ClusterCues> {
    let k = centroids.len();
    let total = points.len() as f64;
    let mut sizes = vec![0usize; k];
    let mut spatial = vec![0.0; k];
    let mut per_image = vec![vec![0usize; image_sizes.len()]; k];
    for (p, &l) in points.iter().zip(labels) {
        sizes[l] += 1;
        let r2 = p.pos[0] * p.pos[0] + p.pos[1] * p.pos[1];
        spatial[l] += (-r2 / (2.0 * spatial_sigma * spatial_sigma)).exp();
        per_image[l][p.image] += 1;
    }
    (0..k)
        .map(|c| {
            let contrast = (0..k)
                .filter(|&j| j != c)
                .map(|j| sizes[j] as f64 / total * dist2(&centroids[c], &centroids[j]).sqrt())
                .sum();
            let fractions: Vec<f64> = per_image[c]
                .iter()
                .zip(image_sizes)
                .map(|(&n, &s)| n as f64 / s as f64)
                .collect();
            ClusterCues {
                size: sizes[c],
                contrast,
                spatial: if sizes[c] > 0 {
                    spatial[c] / sizes[c] as f64
                } else {
                    0.0
                },
                correspondence: corresponding_cue(&fractions),
            }
        })
        .collect()
}

/// Min-max over clusters; a constant cue maps to 1 if positive, else 0.
fn normalize_cue(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo < DEGENERATE_RANGE {
        let v = if hi > DEGENERATE_RANGE { 1.0 } else { 0.0 };
        return vec![v; values.len()];
    }
    values.iter().map(|v| (v - lo) / (hi - lo)).collect()
}

/// Product of the normalized cues, one score per cluster.
pub fn cluster_scores(cues: &[ClusterCues]) -> Vec<f64> {
    let c = normalize_cue(&cues.iter().map(|q| q.contrast).collect::<Vec<_>>());
    let s = normalize_cue(&cues.iter().map(|q| q.spatial).collect::<Vec<_>>());
    let r = normalize_cue(&cues.iter().map(|q| q.correspondence).collect::<Vec<_>>());
    (0..cues.len()).map(|i| c[i] * s[i] * r[i]).collect()
}

fn working_points(img: &ImageMatrix, image: usize, max_side: usize) -> Result<(Vec<Point>, (usize, usize))> {
    let (w, h) = img.dims();
    let scale = (max_side as f64 / w.max(h) as f64).min(1.0);
    let (ww, wh) = (
        ((w as f64 * scale).round() as usize).max(1),
        ((h as f64 * scale).round() as usize).max(1),
    );
    let small = resize_bilinear(img, ww, wh)?;
    let lab = lab_planes(&small);
    let mut pts = Vec::with_capacity(ww * wh);
    for y in 0..wh {
        for x in 0..ww {
            pts.push(Point {
                feature: [
                    lab[0].get(x, y) / 100.0,
                    lab[1].get(x, y) / 100.0,
                    lab[2].get(x, y) / 100.0,
                ],
                pos: [(x as f64 + 0.5) / ww as f64 - 0.5, (y as f64 + 0.5) / wh as f64 - 0.5],
                image,
            });
        }
    }
    Ok((pts, (ww, wh)))
}

fn layer_scores(
    points: &[Point],
    k: usize,
    image_sizes: &[usize],
    params: &CoSaliencyParams,
    warnings: &mut Vec<String>,
    what: &str,
) -> Vec<f64> {
    let distinct = distinct_features(points, k);
    if distinct < k {
        warnings.push(format!(
            "{what}: only {distinct} distinct colors, clamping k from {k} to {distinct}"
        ));
    }
    let features: Vec<[f64; 3]> = points.iter().map(|p| p.feature).collect();
    let (labels, centroids) = kmeans(&features, distinct, params.seed, params.max_iterations);
    let cues = cluster_cues(points, &labels, &centroids, image_sizes, params.spatial_sigma);
    let scores = cluster_scores(&cues);
    labels.iter().map(|&l| scores[l]).collect()
}

/// Co-saliency maps for a group of RGB images, one per input, each at its
/// input's dimensions.
pub fn cosaliency(group: &[ImageMatrix], params: &CoSaliencyParams) -> Result<CoSaliencyOutput> {
    if group.is_empty() {
        return Err(Error::invalid("co-saliency needs at least one image"));
    }
    if params.k_single == 0 || params.k_multi == 0 {
        return Err(Error::invalid("cluster counts must be positive"));
    }
    if let Some(i) = group.iter().position(|g| g.channels() != 3) {
        return Err(Error::invalid(format!("co-saliency image {i} is not RGB")));
    }
    let mut warnings = Vec::new();
    let mut per_image = Vec::with_capacity(group.len());
    for (i, img) in group.iter().enumerate() {
        per_image.push(working_points(img, i, params.working_max_side)?);
    }

    let mut single: Vec<Vec<f64>> = Vec::with_capacity(group.len());
    for (i, (pts, _)) in per_image.iter().enumerate() {
        let local: Vec<Point> = pts.iter().map(|p| Point { image: 0, ..*p }).collect();
        single.push(layer_scores(
            &local,
            params.k_single,
            &[local.len()],
            params,
            &mut warnings,
            &format!("image {i}"),
        ));
    }

    let combined: Vec<Vec<f64>> = if group.len() == 1 {
        single
    } else {
        let all: Vec<Point> = per_image.iter().flat_map(|(p, _)| p.iter().copied()).collect();
        let sizes: Vec<usize> = per_image.iter().map(|(p, _)| p.len()).collect();
        let multi = layer_scores(&all, params.k_multi, &sizes, params, &mut warnings, "group");
        let mut offset = 0;
        single
            .into_iter()
            .map(|s| {
                let m = &multi[offset..offset + s.len()];
                offset += s.len();
                s.iter().zip(m).map(|(a, b)| 0.5 * (a + b)).collect()
            })
            .collect()
    };

    let maps = combined
        .into_iter()
        .zip(per_image.iter().zip(group))
        .map(|(scores, ((_, (ww, wh)), img))| {
            let small = Plane::new(*ww, *wh, scores)?;
            let up = resize_plane(&small, img.width(), img.height());
            Ok(SaliencyMap::from_raw(&up))
        })
        .collect::<Result<Vec<_>>>()?;
    for w in &warnings {
        log::warn!("co-saliency: {w}");
    }
    Ok(CoSaliencyOutput { maps, warnings })
}
