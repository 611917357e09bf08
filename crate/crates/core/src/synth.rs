//! FSCV color-plot synthesis: raw current matrices, background subtraction
//! and the false-color rendering used for every dataset image.

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::{Background, Label, SampleRecord};
use crate::error::{Error, Result};
use crate::imaging::ImageMatrix;

/// Total recording span covered by the columns, in seconds.
pub const SPAN_SECONDS: f64 = 20.0;

/// Current (arbitrary units) by applied potential (rows) and cycle (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct FscvMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl FscvMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(Error::invalid(format!(
                "{rows}x{cols} matrix cannot hold {} values",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("matrix values must be finite"));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self::new(rows, cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn time_of_col(&self, col: usize) -> f64 {
        if self.cols == 1 {
            0.0
        } else {
            SPAN_SECONDS * col as f64 / (self.cols - 1) as f64
        }
    }

    /// Nearest cycle index of a time in seconds.
    pub fn col_of_time(&self, seconds: f64) -> usize {
        col_of_time(self.cols, seconds)
    }
}

pub fn col_of_time(cols: usize, seconds: f64) -> usize {
    let t = seconds.clamp(0.0, SPAN_SECONDS);
    ((t / SPAN_SECONDS) * (cols - 1) as f64).round() as usize
}

/// Subtracts the anchor column of `background` from every column.
pub fn background_subtract(m: &FscvMatrix, background: Background) -> FscvMatrix {
    let anchor = m.col_of_time(background.anchor_seconds());
    let mut data = m.data.clone();
    for r in 0..m.rows {
        let row = &mut data[r * m.cols..(r + 1) * m.cols];
        let a = row[anchor];
        for v in row.iter_mut() {
            *v -= a;
        }
    }
    FscvMatrix {
        rows: m.rows,
        cols: m.cols,
        data,
    }
}

/// Piecewise-linear RGB lookup keyed on `[0,1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Palette {
    stops: Vec<(f64, [f64; 3])>,
}

impl Default for Palette {
    /// Deep green, blue, black, yellow, dark red.
    fn default() -> Self {
        Self {
            stops: vec![
                (0.0, [0.0, 0.35, 0.0]),
                (0.25, [0.0, 0.0, 1.0]),
                (0.5, [0.0, 0.0, 0.0]),
                (0.75, [1.0, 1.0, 0.0]),
                (1.0, [0.55, 0.0, 0.0]),
            ],
        }
    }
}

impl Palette {
    pub fn new(stops: Vec<(f64, [f64; 3])>) -> Result<Self> {
        if stops.len() < 2 {
            return Err(Error::invalid("palette needs at least two stops"));
        }
        if stops
            .windows(2)
            .any(|w| w[0].0.partial_cmp(&w[1].0) != Some(std::cmp::Ordering::Less))
        {
            return Err(Error::invalid("palette keys must be strictly increasing"));
        }
        if stops.iter().flat_map(|s| s.1).any(|v| !(0.0..=1.0).contains(&v)) {
            return Err(Error::invalid("palette colors must lie in [0,1]"));
        }
        Ok(Self { stops })
    }

    pub fn stops(&self) -> &[(f64, [f64; 3])] {
        &self.stops
    }

    /// Color at `v`; values outside the keyed range take the end stops.
    pub fn lookup(&self, v: f64) -> [f64; 3] {
        let first = self.stops[0];
        let last = self.stops[self.stops.len() - 1];
        if v <= first.0 {
            return first.1;
        }
        if v >= last.0 {
            return last.1;
        }
        let i = self.stops.partition_point(|s| s.0 <= v);
        let (k0, c0) = self.stops[i - 1];
        let (k1, c1) = self.stops[i];
        let t = (v - k0) / (k1 - k0);
        [0, 1, 2].map(|ch| c0[ch] + t * (c1[ch] - c0[ch]))
    }
}

/// Min-max normalizes the matrix and maps it through the palette. A
/// constant matrix renders as the palette midpoint.
pub fn false_color(m: &FscvMatrix, palette: &Palette) -> ImageMatrix {
    let lo = m.data.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = m.data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    if range <= 0.0 {
        log::warn!("constant {}x{} matrix rendered as palette midpoint", m.rows, m.cols);
    }
    let n = m.rows * m.cols;
    let mut data = vec![0.0; 3 * n];
    for (i, &v) in m.data.iter().enumerate() {
        let t = if range > 0.0 { (v - lo) / range } else { 0.5 };
        let rgb = palette.lookup(t);
        for c in 0..3 {
            data[c * n + i] = rgb[c];
        }
    }
    ImageMatrix::new(m.cols, m.rows, 3, data).expect("palette colors lie in [0,1]")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthParams {
    pub width: usize,
    pub height: usize,
    /// Rows `[start, end)` where releases are injected.
    pub release_rows: (usize, usize),
    pub noise: f64,
    /// Amplitude of the smooth background ramp and its slow drift.
    pub ramp: f64,
    pub drift: f64,
    pub release_amplitude: (f64, f64),
    /// Temporal width of the release, seconds.
    pub release_sigma_seconds: (f64, f64),
    /// Vertical width of the release as a fraction of the release rows.
    pub release_sigma_rows: (f64, f64),
    pub peak_seconds: (f64, f64),
    /// Forces the release peak to `(column, row)`.
    pub peak: Option<(usize, usize)>,
    /// Probability that a no-release sample carries a weak structure
    /// outside the release rows.
    pub distractor_probability: f64,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            width: 875,
            height: 600,
            release_rows: (320, 520),
            noise: 0.03,
            ramp: 0.2,
            drift: 0.05,
            release_amplitude: (0.6, 1.0),
            release_sigma_seconds: (0.4, 0.9),
            release_sigma_rows: (0.06, 0.1),
            peak_seconds: (4.0, 7.5),
            peak: None,
            distractor_probability: 0.5,
            seed: 0,
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        let (r0, r1) = self.release_rows;
        if self.width < 2 || self.height < 2 {
            return Err(Error::invalid("synthetic images need at least 2x2 pixels"));
        }
        if r0 >= r1 || r1 > self.height {
            return Err(Error::invalid(format!(
                "release rows {r0}..{r1} must be non-empty and inside height {}",
                self.height
            )));
        }
        let ranges = [
            ("release_amplitude", self.release_amplitude),
            ("release_sigma_seconds", self.release_sigma_seconds),
            ("release_sigma_rows", self.release_sigma_rows),
            ("peak_seconds", self.peak_seconds),
        ];
        for (name, (a, b)) in ranges {
            if !(a > 0.0 && a <= b && b.is_finite()) {
                return Err(Error::invalid(format!(
                    "{name} must be a positive range, got ({a}, {b})"
                )));
            }
        }
        if self.peak_seconds.1 > SPAN_SECONDS {
            return Err(Error::invalid("peak_seconds must lie inside the 20 s span"));
        }
        if let Some((x, y)) = self.peak {
            if x >= self.width || y < r0 || y >= r1 {
                return Err(Error::invalid(format!(
                    "release peak ({x}, {y}) must lie in columns 0..{} and rows {r0}..{r1}",
                    self.width
                )));
            }
        }
        if self.noise < 0.0 || self.ramp < 0.0 || self.drift < 0.0 {
            return Err(Error::invalid("noise, ramp and drift must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.distractor_probability) {
            return Err(Error::invalid("distractor_probability must lie in [0,1]"));
        }
        Ok(())
    }
}

fn gaussian_2d(dx: f64, dy: f64, sx: f64, sy: f64) -> f64 {
    (-0.5 * ((dx / sx).powi(2) + (dy / sy).powi(2))).exp()
}

/// One raw recording. The record carries the exact release ground truth;
/// its background is `A` and its image path empty, for the caller to fill.
pub fn synthesize_sample(
    p: &SynthParams,
    with_release: bool,
    sample_id: &str,
    experiment_id: &str,
) -> Result<(FscvMatrix, SampleRecord)> {
    p.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let (w, h) = (p.width, p.height);
    let cols_per_second = (w - 1) as f64 / SPAN_SECONDS;
    let (r0, r1) = p.release_rows;
    let band = (r1 - r0) as f64;

    let phase = rng.gen_range(0.0..std::f64::consts::TAU);
    let drift_dir = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    let mut data = Vec::with_capacity(w * h);
    for r in 0..h {
        let y = r as f64 / h as f64;
        let profile = (std::f64::consts::PI * 1.5 * y + phase).sin();
        for c in 0..w {
            let t = c as f64 / (w - 1) as f64;
            data.push(p.ramp * (0.5 + 0.5 * profile) * (1.0 - 0.3 * y) + p.drift * drift_dir * t * profile);
        }
    }

    let mut peak_position = None;
    let mut release_interval = None;
    if with_release {
        let sigma_c = rng.gen_range(p.release_sigma_seconds.0..=p.release_sigma_seconds.1) * cols_per_second;
        let sigma_r = rng.gen_range(p.release_sigma_rows.0..=p.release_sigma_rows.1) * band;
        let amp = rng.gen_range(p.release_amplitude.0..=p.release_amplitude.1);
        let (px, py) = match p.peak {
            Some(pk) => pk,
            None => {
                let t = rng.gen_range(p.peak_seconds.0..=p.peak_seconds.1);
                let y = rng.gen_range(r0 as f64 + 0.3 * band..=r1 as f64 - 0.3 * band);
                (col_of_time(w, t), (y.round() as usize).clamp(r0, r1 - 1))
            }
        };
        // oxidation peak in the release rows, weaker reduction lobe near the top
        let top = (r0 as f64 * 0.35).max(1.0);
        for r in 0..h {
            for c in 0..w {
                let dx = c as f64 - px as f64;
                let ox = amp * gaussian_2d(dx, r as f64 - py as f64, sigma_c, sigma_r);
                let red = 0.3 * amp * gaussian_2d(dx, r as f64 - top, 1.5 * sigma_c, sigma_r);
                data[r * w + c] += ox - red;
            }
        }
        let half = (2.0 * sigma_c).round() as usize;
        peak_position = Some((px, py));
        release_interval = Some((px.saturating_sub(half), (px + half).min(w - 1)));
    } else if rng.gen_bool(p.distractor_probability) {
        // weak structure confined outside the release rows
        let above = r0 > 0 && (r1 >= h || rng.gen_bool(0.5));
        let (lo, hi) = if above { (0, r0) } else { (r1, h) };
        if hi > lo {
            let cy = rng.gen_range(lo as f64..hi as f64);
            let cx = rng.gen_range(0.0..w as f64);
            let amp = rng.gen_range(0.2..0.4) * p.release_amplitude.0;
            let sx = rng.gen_range(1.0..4.0) * cols_per_second;
            let sy = 0.1 * band;
            for r in lo..hi {
                for c in 0..w {
                    data[r * w + c] += amp * gaussian_2d(c as f64 - cx, r as f64 - cy, sx, sy);
                }
            }
        }
    }

    if p.noise > 0.0 {
        let normal = Normal::new(0.0, p.noise).expect("noise is non-negative");
        for v in data.iter_mut() {
            *v += normal.sample(&mut rng);
        }
    }

    let record = SampleRecord {
        sample_id: sample_id.to_string(),
        experiment_id: experiment_id.to_string(),
        background: Background::A,
        label: Label::from_release(with_release),
        image_path: PathBuf::new(),
        peak_position,
        release_interval,
    };
    Ok((FscvMatrix::new(h, w, data)?, record))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn anchor_column_becomes_zero() {
        let m = FscvMatrix::from_fn(8, 8, |r, c| ((r * 7 + c * 3) % 5) as f64 - 1.3).unwrap();
        for bg in Background::ALL {
            let s = background_subtract(&m, bg);
            let a = m.col_of_time(bg.anchor_seconds());
            assert!((0..8).all(|r| s.get(r, a) == 0.0));
            assert_eq!(background_subtract(&s, bg), s);
        }
    }

    #[test]
    fn anchors_map_to_nearest_column() {
        assert_eq!(col_of_time(875, 0.5), 22);
        assert_eq!(col_of_time(875, 10.0), 437);
        assert_eq!(col_of_time(875, 19.5), 852);
    }

    #[test]
    fn constant_matrix_subtracts_to_zero() {
        let m = FscvMatrix::from_fn(4, 9, |_, _| 3.5).unwrap();
        assert!(background_subtract(&m, Background::C).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn palette_endpoints_and_midpoint() {
        let m = FscvMatrix::from_fn(1, 3, |_, c| c as f64).unwrap();
        let pal = Palette::new(vec![(0.0, [0.2, 0.4, 1.0]), (1.0, [0.6, 0.0, 0.0])]).unwrap();
        let img = false_color(&m, &pal);
        assert_eq!([0, 1, 2].map(|c| img.get(0, 0, c)), [0.2, 0.4, 1.0]);
        assert_eq!([0, 1, 2].map(|c| img.get(2, 0, c)), [0.6, 0.0, 0.0]);
        let mid = [0, 1, 2].map(|c| img.get(1, 0, c));
        for (got, want) in mid.iter().zip([0.4, 0.2, 0.5]) {
            assert!((got - want).abs() < 1e-12);
        }
        let def = Palette::default();
        let img = false_color(&m, &def);
        assert_eq!([0, 1, 2].map(|c| img.get(0, 0, c)), def.stops()[0].1);
        assert_eq!([0, 1, 2].map(|c| img.get(2, 0, c)), def.stops()[4].1);
    }

    #[test]
    fn constant_matrix_renders_midpoint() {
        let m = FscvMatrix::from_fn(2, 2, |_, _| 1.0).unwrap();
        let img = false_color(&m, &Palette::default());
        assert!(img.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn invalid_palettes() {
        assert!(Palette::new(vec![(0.0, [0.0; 3])]).is_err());
        assert!(Palette::new(vec![(0.5, [0.0; 3]), (0.5, [1.0; 3])]).is_err());
    }

    #[test]
    fn release_ground_truth_is_consistent() {
        for seed in 0..20 {
            let p = SynthParams {
                seed,
                ..Default::default()
            };
            let (m, rec) = synthesize_sample(&p, true, "s", "e").unwrap();
            rec.validate().unwrap();
            let (px, py) = rec.peak_position.unwrap();
            let (x0, x1) = rec.release_interval.unwrap();
            assert!(x0 <= px && px <= x1 && x1 < m.cols());
            assert!((320..520).contains(&py));
            let mut inside = f64::NEG_INFINITY;
            let mut outside = f64::NEG_INFINITY;
            for r in 0..m.rows() {
                for c in 0..m.cols() {
                    let v = m.get(r, c);
                    if (320..520).contains(&r) {
                        inside = inside.max(v);
                    } else {
                        outside = outside.max(v);
                    }
                }
            }
            assert!(inside >= outside, "seed {seed}: {inside} < {outside}");
        }
    }

    #[test]
    fn no_release_has_no_ground_truth() {
        let (_, rec) = synthesize_sample(&SynthParams::default(), false, "s", "e").unwrap();
        assert_eq!(rec.peak_position, None);
        assert_eq!(rec.release_interval, None);
        assert_eq!(rec.label, Label::NoRelease);
    }

    #[test]
    fn deterministic_per_seed() {
        let p = SynthParams {
            seed: 11,
            width: 120,
            height: 90,
            release_rows: (40, 70),
            ..Default::default()
        };
        assert_eq!(
            synthesize_sample(&p, true, "s", "e").unwrap(),
            synthesize_sample(&p, true, "s", "e").unwrap()
        );
    }

    #[test]
    fn peak_outside_release_rows_rejected() {
        let p = SynthParams {
            peak: Some((100, 100)),
            ..Default::default()
        };
        assert!(synthesize_sample(&p, true, "s", "e").is_err());
    }
}
