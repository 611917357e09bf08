//! Graph-based visual saliency.
//!
//! Each feature map is placed on a reduced lattice. A fully connected graph
//! over the lattice nodes carries weights `|log M(i) - log M(j)| * F(i,j)`
//! with a Gaussian distance falloff `F`; the equilibrium distribution of the
//! row-normalized Markov chain is the activation map. A second chain with
//! weights `A(j) * F(i,j)` concentrates the activation mass.

use serde::{Deserialize, Serialize};

use super::simpsal::{gabor_kernel, opponent_planes, ORIENTATIONS};
use crate::error::{Error, Result};
use crate::imaging::filter::filter2d;
use crate::imaging::resize::{resize_plane, resize_plane_antialiased};
use crate::imaging::{ImageMatrix, Plane, SaliencyMap, DEGENERATE_RANGE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbvsParams {
    /// Lattice size relative to the input.
    pub lattice_fraction: f64,
    /// Upper bound on each lattice side.
    pub lattice_cap: usize,
    /// Falloff sigma as a fraction of the lattice width.
    pub sigma_fraction: f64,
    /// Floor applied to feature values before taking logs.
    pub epsilon: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for GbvsParams {
    fn default() -> Self {
        Self {
            lattice_fraction: 0.25,
            lattice_cap: 48,
            sigma_fraction: 1.0 / 8.0,
            epsilon: 1e-4,
            tolerance: 1e-7,
            max_iterations: 10_000,
        }
    }
}

pub const MIN_INPUT_SIDE: usize = 32;

/// Dense row-stochastic transition matrix.
#[derive(Debug, Clone)]
pub struct MarkovChain {
    n: usize,
    transition: Vec<f64>,
    start: Vec<f64>,
}

impl MarkovChain {
    /// Row-normalizes non-negative `weights` (n x n, row-major). Rows without
    /// outgoing weight jump uniformly.
    pub fn from_weights(n: usize, weights: Vec<f64>) -> Result<Self> {
        Self::with_node_weights(n, weights, None)
    }

    /// As [`MarkovChain::from_weights`]. When the weight matrix has the form
    /// `W(i,j) = a(j) S(i,j)` with `S` symmetric, passing `a` seeds the
    /// iteration at the detailed-balance vector `a(i) * rowsum(i)`, which is
    /// then its fixed point.
    pub fn with_node_weights(n: usize, mut weights: Vec<f64>, node: Option<&[f64]>) -> Result<Self> {
        if n == 0 || weights.len() != n * n {
            return Err(Error::invalid(format!(
                "transition matrix must be {n}x{n} and non-empty"
            )));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::invalid("chain weights must be finite and non-negative"));
        }
        let mut start = vec![0.0; n];
        for i in 0..n {
            let row = &mut weights[i * n..(i + 1) * n];
            let sum: f64 = row.iter().sum();
            if sum > 0.0 {
                row.iter_mut().for_each(|w| *w /= sum);
                start[i] = sum * node.map_or(1.0, |a| a[i]);
            } else {
                row.iter_mut().for_each(|w| *w = 1.0 / n as f64);
            }
        }
        let total: f64 = start.iter().sum();
        if total > 0.0 && total.is_finite() && start.iter().all(|&s| s > 0.0) {
            start.iter_mut().for_each(|s| *s /= total);
        } else {
            start = vec![1.0 / n as f64; n];
        }
        Ok(Self {
            n,
            transition: weights,
            start,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn transition(&self, i: usize, j: usize) -> f64 {
        self.transition[i * self.n + j]
    }

    pub fn transition_matrix(&self) -> &[f64] {
        &self.transition
    }

    fn step(&self, pi: &[f64], next: &mut [f64]) {
        next.iter_mut().for_each(|v| *v = 0.0);
        for (i, &p) in pi.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let row = &self.transition[i * self.n..(i + 1) * self.n];
            for (nv, &t) in next.iter_mut().zip(row) {
                *nv += p * t;
            }
        }
        let s: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= s);
    }

    /// Stationary distribution by power iteration until the L1 change drops
    /// below `tol`.
    pub fn equilibrium(&self, tol: f64, max_iterations: usize) -> Result<Vec<f64>> {
        let mut pi = self.start.clone();
        let mut next = vec![0.0; self.n];
        let mut residual = f64::INFINITY;
        for _ in 0..max_iterations {
            self.step(&pi, &mut next);
            residual = pi.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
            std::mem::swap(&mut pi, &mut next);
            if residual < tol {
                return Ok(pi);
            }
        }
        Err(Error::NotConverged {
            iterations: max_iterations,
            residual,
        })
    }
}

/// Dense Gaussian falloff between every pair of lattice nodes.
struct Falloff {
    n: usize,
    dense: Vec<f64>,
}

impl Falloff {
    fn new(w: usize, h: usize, sigma: f64) -> Self {
        let by_offset: Vec<f64> = (0..h)
            .flat_map(|dy| (0..w).map(move |dx| (dx, dy)))
            .map(|(dx, dy)| (-((dx * dx + dy * dy) as f64) / (2.0 * sigma * sigma)).exp())
            .collect();
        let n = w * h;
        let mut dense = Vec::with_capacity(n * n);
        for yi in 0..h {
            for xi in 0..w {
                for yj in 0..h {
                    let off = &by_offset[yi.abs_diff(yj) * w..];
                    dense.extend((0..w).map(|xj| off[xi.abs_diff(xj)]));
                }
            }
        }
        Self { n, dense }
    }

    #[inline]
    fn row(&self, i: usize) -> &[f64] {
        &self.dense[i * self.n..(i + 1) * self.n]
    }
}

fn activation_chain_with(map: &Plane, falloff: &Falloff, epsilon: f64) -> Result<MarkovChain> {
    let n = map.data().len();
    let logs: Vec<f64> = map.data().iter().map(|&v| v.max(epsilon).ln()).collect();
    let mut weights = vec![0.0; n * n];
    for i in 0..n {
        let li = logs[i];
        for ((w, &lj), &f) in weights[i * n..(i + 1) * n].iter_mut().zip(&logs).zip(falloff.row(i)) {
            *w = (li - lj).abs() * f;
        }
    }
    MarkovChain::from_weights(n, weights)
}

fn normalization_chain_with(activation: &Plane, falloff: &Falloff) -> Result<MarkovChain> {
    let n = activation.data().len();
    let a = activation.data();
    let mut weights = vec![0.0; n * n];
    for i in 0..n {
        for ((w, &aj), &f) in weights[i * n..(i + 1) * n].iter_mut().zip(a).zip(falloff.row(i)) {
            *w = aj * f;
        }
    }
    MarkovChain::with_node_weights(n, weights, Some(a))
}

/// Activation chain of one feature map.
pub fn activation_chain(map: &Plane, sigma: f64, epsilon: f64) -> Result<MarkovChain> {
    activation_chain_with(map, &Falloff::new(map.width(), map.height(), sigma), epsilon)
}

/// Normalization chain: mass flows toward high activation.
pub fn normalization_chain(activation: &Plane, sigma: f64) -> Result<MarkovChain> {
    normalization_chain_with(
        activation,
        &Falloff::new(activation.width(), activation.height(), sigma),
    )
}

fn lattice_dims(w: usize, h: usize, params: &GbvsParams) -> (usize, usize) {
    let cap = params.lattice_cap as f64;
    let scale = params.lattice_fraction.min(cap / w as f64).min(cap / h as f64);
    (
        ((w as f64 * scale).round() as usize).max(1),
        ((h as f64 * scale).round() as usize).max(1),
    )
}

/// Rectified feature maps on the lattice: intensity, |R-G|, |B-Y| and four
/// Gabor orientations.
pub fn lattice_features(img: &ImageMatrix, params: &GbvsParams) -> Result<Vec<Plane>> {
    let (w, h) = img.dims();
    if w.min(h) < MIN_INPUT_SIDE {
        return Err(Error::invalid(format!(
            "gbvs needs both sides >= {MIN_INPUT_SIDE}, got {w}x{h}"
        )));
    }
    let (lw, lh) = lattice_dims(w, h, params);
    let planes: Vec<Plane> = img
        .planes()
        .iter()
        .map(|p| resize_plane_antialiased(p, lw, lh))
        .collect();
    let small = ImageMatrix::from_planes(&planes)?;
    let opp = opponent_planes(&small);
    let mut out = vec![
        opp.intensity.clone(),
        opp.red.zip_map(&opp.green, |r, g| (r - g).abs()),
        opp.blue.zip_map(&opp.yellow, |b, y| (b - y).abs()),
    ];
    for theta in ORIENTATIONS {
        let k = gabor_kernel(theta as f64, 1.5, 4.0, 3);
        out.push(filter2d(&opp.intensity, &k).map(f64::abs));
    }
    Ok(out)
}

fn channel_saliency_with(map: &Plane, falloff: &Falloff, params: &GbvsParams) -> Result<Option<Plane>> {
    if map.max() - map.min() < DEGENERATE_RANGE {
        return Ok(None);
    }
    let act =
        activation_chain_with(map, falloff, params.epsilon)?.equilibrium(params.tolerance, params.max_iterations)?;
    let act = Plane::new(map.width(), map.height(), act)?;
    let norm = normalization_chain_with(&act, falloff)?.equilibrium(params.tolerance, params.max_iterations)?;
    Ok(Some(Plane::new(map.width(), map.height(), norm)?))
}

/// Activation followed by normalization for one lattice map. Returns `None`
/// for a map without variation.
pub fn channel_saliency(map: &Plane, params: &GbvsParams) -> Result<Option<Plane>> {
    let falloff = Falloff::new(map.width(), map.height(), params.sigma_fraction * map.width() as f64);
    channel_saliency_with(map, &falloff, params)
}

pub fn gbvs(img: &ImageMatrix, params: &GbvsParams) -> Result<SaliencyMap> {
    let features = lattice_features(img, params)?;
    let (lw, lh) = features[0].dims();
    let falloff = Falloff::new(lw, lh, params.sigma_fraction * lw as f64);
    let mut acc = Plane::zeros(lw, lh);
    for f in &features {
        if let Some(s) = channel_saliency_with(f, &falloff, params)? {
            acc.add_assign(&s);
        }
    }
    let acc = acc.scale(1.0 / features.len() as f64);
    let up = resize_plane(&acc, img.width(), img.height());
    Ok(SaliencyMap::from_raw(&up))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_map_has_uniform_equilibrium() {
        let map = Plane::filled(6, 5, 0.3);
        let chain = activation_chain(&map, 0.75, 1e-4).unwrap();
        let pi = chain.equilibrium(1e-12, 10_000).unwrap();
        for p in &pi {
            assert!((p - 1.0 / 30.0).abs() < 1e-9);
        }
    }

    #[test]
    fn three_node_chain_matches_hand_solution() {
        // P = [[.5,.5,0],[.25,.5,.25],[0,.5,.5]] has pi = (1/4, 1/2, 1/4)
        let w = vec![1.0, 1.0, 0.0, 1.0, 2.0, 1.0, 0.0, 2.0, 2.0];
        let chain = MarkovChain::from_weights(3, w).unwrap();
        let pi = chain.equilibrium(1e-13, 100_000).unwrap();
        let expected = [0.25, 0.5, 0.25];
        for (a, b) in pi.iter().zip(expected) {
            assert!((a - b).abs() < 1e-9, "{pi:?}");
        }
    }

    #[test]
    fn periodic_chain_reports_non_convergence() {
        let w = vec![0.0, 1.0, 1.0, 0.0];
        let mut chain = MarkovChain::from_weights(2, w).unwrap();
        chain.start = vec![1.0, 0.0];
        match chain.equilibrium(1e-9, 50) {
            Err(Error::NotConverged { iterations, residual }) => {
                assert_eq!(iterations, 50);
                assert!(residual > 1.0);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn equilibrium_is_probability_vector() {
        let map = Plane::from_fn(9, 7, |x, y| ((x * 13 + y * 7) % 10) as f64 / 10.0);
        let pi = activation_chain(&map, 9.0 / 8.0, 1e-4)
            .unwrap()
            .equilibrium(1e-7, 10_000)
            .unwrap();
        assert!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(pi.iter().all(|&p| p >= 0.0));
    }

    #[test]
    fn constant_image_gives_zero_map() {
        let img = ImageMatrix::constant(64, 48, 3, 0.6).unwrap();
        assert!(gbvs(&img, &GbvsParams::default()).unwrap().is_all_zero());
    }

    #[test]
    fn lattice_respects_cap() {
        let p = GbvsParams::default();
        assert_eq!(lattice_dims(875, 600, &p), (48, 33));
        assert_eq!(lattice_dims(100, 64, &p), (25, 16));
    }

    #[test]
    fn odd_blob_wins() {
        let img = ImageMatrix::from_planes(&[Plane::from_fn(128, 96, |x, y| {
            let d2 = (x as f64 - 90.0).powi(2) + (y as f64 - 30.0).powi(2);
            if d2 < 64.0 {
                0.95
            } else {
                0.1
            }
        })])
        .unwrap();
        let map = gbvs(&img, &GbvsParams::default()).unwrap();
        let (mx, my) = map.argmax();
        assert!(
            (mx as f64 - 90.0).abs() <= 12.0 && (my as f64 - 30.0).abs() <= 12.0,
            "{mx},{my}"
        );
    }
}
