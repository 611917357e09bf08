//! Orthogonal 2-D discrete wavelet transform with symmetric extension.
//!
//! Coefficients are computed on the whole-sample symmetric extension of the
//! signal and enough of them are kept (`floor((n-1)/2) + taps/2` per axis) for
//! the synthesis filter bank to reproduce every original sample exactly. This
//! matches the coefficient counts of the common "symmetric" mode and needs no
//! divisibility of the input size.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::filter::reflect;
use super::Plane;
use crate::error::{Error, Result};

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Daubechies scaling filter with 4 vanishing moments (8 taps).
const DB4: [f64; 8] = [
    0.230_377_813_308_896_5,
    0.714_846_570_552_915_7,
    0.630_880_767_929_858_9,
    -0.027_983_769_416_859_854,
    -0.187_034_811_719_093_09,
    0.030_841_381_835_560_764,
    0.032_883_011_666_885_2,
    -0.010_597_401_785_069_032,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum WaveletFamily {
    Haar,
    #[default]
    Db4,
}

impl WaveletFamily {
    pub fn scaling_filter(self) -> &'static [f64] {
        match self {
            WaveletFamily::Haar => &[FRAC_1_SQRT_2, FRAC_1_SQRT_2],
            WaveletFamily::Db4 => &DB4,
        }
    }

    /// Quadrature mirror of the scaling filter: `g[j] = (-1)^j h[F-1-j]`.
    pub fn wavelet_filter(self) -> Vec<f64> {
        let h = self.scaling_filter();
        let f = h.len();
        (0..f)
            .map(|j| if j % 2 == 0 { h[f - 1 - j] } else { -h[f - 1 - j] })
            .collect()
    }
}

impl FromStr for WaveletFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "haar" | "db1" => Ok(WaveletFamily::Haar),
            "db4" | "daubechies4" => Ok(WaveletFamily::Db4),
            other => Err(Error::invalid(format!("unsupported wavelet family `{other}`"))),
        }
    }
}

impl fmt::Display for WaveletFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WaveletFamily::Haar => "haar",
            WaveletFamily::Db4 => "db4",
        })
    }
}

fn first_shift(taps: usize) -> isize {
    1 - (taps / 2) as isize
}

/// Number of coefficients per band for a signal of length `n`.
pub fn coeff_len(n: usize, taps: usize) -> usize {
    (n - 1) / 2 + taps / 2
}

/// One analysis step on a 1-D signal: `(approximation, detail)`.
pub fn dwt1(x: &[f64], family: WaveletFamily) -> (Vec<f64>, Vec<f64>) {
    let h = family.scaling_filter();
    let g = family.wavelet_filter();
    let n = x.len();
    let k0 = first_shift(h.len());
    let len = coeff_len(n, h.len());
    let mut lo = Vec::with_capacity(len);
    let mut hi = Vec::with_capacity(len);
    for i in 0..len {
        let base = 2 * (k0 + i as isize);
        let (mut a, mut d) = (0.0, 0.0);
        for j in 0..h.len() {
            let v = x[reflect(base + j as isize, n)];
            a += h[j] * v;
            d += g[j] * v;
        }
        lo.push(a);
        hi.push(d);
    }
    (lo, hi)
}

/// Synthesis step producing the `n` original samples.
pub fn idwt1(lo: &[f64], hi: &[f64], n: usize, family: WaveletFamily) -> Vec<f64> {
    let h = family.scaling_filter();
    let g = family.wavelet_filter();
    let f = h.len() as isize;
    let k0 = first_shift(h.len());
    let mut out = vec![0.0; n];
    for (i, (&a, &d)) in lo.iter().zip(hi).enumerate() {
        let base = 2 * (k0 + i as isize);
        for j in 0..f {
            let t = base + j;
            if (0..n as isize).contains(&t) {
                out[t as usize] += a * h[j as usize] + d * g[j as usize];
            }
        }
    }
    out
}

fn analyze_rows(p: &Plane, family: WaveletFamily) -> (Plane, Plane) {
    let (w, h) = p.dims();
    let cw = coeff_len(w, family.scaling_filter().len());
    let mut lo = Vec::with_capacity(cw * h);
    let mut hi = Vec::with_capacity(cw * h);
    for y in 0..h {
        let (a, d) = dwt1(p.row(y), family);
        lo.extend(a);
        hi.extend(d);
    }
    (
        Plane::new(cw, h, lo).expect("dims"),
        Plane::new(cw, h, hi).expect("dims"),
    )
}

fn column(p: &Plane, x: usize) -> Vec<f64> {
    (0..p.height()).map(|y| p.get(x, y)).collect()
}

fn analyze_cols(p: &Plane, family: WaveletFamily) -> (Plane, Plane) {
    let (w, h) = p.dims();
    let ch = coeff_len(h, family.scaling_filter().len());
    let mut lo = Plane::zeros(w, ch);
    let mut hi = Plane::zeros(w, ch);
    for x in 0..w {
        let (a, d) = dwt1(&column(p, x), family);
        for y in 0..ch {
            lo.set(x, y, a[y]);
            hi.set(x, y, d[y]);
        }
    }
    (lo, hi)
}

fn synth_cols(lo: &Plane, hi: &Plane, height: usize, family: WaveletFamily) -> Plane {
    let w = lo.width();
    let mut out = Plane::zeros(w, height);
    for x in 0..w {
        let col = idwt1(&column(lo, x), &column(hi, x), height, family);
        for (y, v) in col.into_iter().enumerate() {
            out.set(x, y, v);
        }
    }
    out
}

fn synth_rows(lo: &Plane, hi: &Plane, width: usize, family: WaveletFamily) -> Plane {
    let h = lo.height();
    let mut data = Vec::with_capacity(width * h);
    for y in 0..h {
        data.extend(idwt1(lo.row(y), hi.row(y), width, family));
    }
    Plane::new(width, h, data).expect("dims")
}

/// Detail sub-bands of one decomposition level.
#[derive(Debug, Clone, PartialEq)]
pub struct DetailBands {
    /// Row low-pass, column high-pass (horizontal edges).
    pub lh: Plane,
    /// Row high-pass, column low-pass (vertical edges).
    pub hl: Plane,
    pub hh: Plane,
}

impl DetailBands {
    fn zeroed(&self) -> Self {
        let z = |p: &Plane| Plane::zeros(p.width(), p.height());
        Self {
            lh: z(&self.lh),
            hl: z(&self.hl),
            hh: z(&self.hh),
        }
    }

    pub fn max_abs(&self) -> f64 {
        [&self.lh, &self.hl, &self.hh]
            .iter()
            .flat_map(|p| p.data().iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Multi-level decomposition. `details[0]` is the finest level.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletPyramid {
    pub family: WaveletFamily,
    pub approx: Plane,
    pub details: Vec<DetailBands>,
    /// Input dims at each level, finest first; needed to crop on synthesis.
    sizes: Vec<(usize, usize)>,
}

impl WaveletPyramid {
    pub fn levels(&self) -> usize {
        self.details.len()
    }

    /// Copy keeping only the detail bands of levels `1..=upto`; the
    /// approximation and coarser details are zeroed.
    pub fn details_up_to(&self, upto: usize) -> WaveletPyramid {
        let mut out = self.clone();
        out.approx = Plane::zeros(self.approx.width(), self.approx.height());
        for (k, bands) in out.details.iter_mut().enumerate() {
            if k >= upto {
                *bands = bands.zeroed();
            }
        }
        out
    }
}

/// Largest level count the transform accepts for these dims.
pub fn max_levels(width: usize, height: usize) -> usize {
    width.min(height).ilog2() as usize
}

/// Multi-level 2-D forward transform. Requires `2^levels <= min(dims)`.
pub fn dwt2(p: &Plane, family: WaveletFamily, levels: usize) -> Result<WaveletPyramid> {
    if levels == 0 {
        return Err(Error::invalid("wavelet decomposition needs at least one level"));
    }
    if levels > max_levels(p.width(), p.height()) {
        return Err(Error::invalid(format!(
            "{levels} wavelet levels exceed capacity of a {}x{} image",
            p.width(),
            p.height()
        )));
    }
    let mut current = p.clone();
    let mut details = Vec::with_capacity(levels);
    let mut sizes = Vec::with_capacity(levels);
    for _ in 0..levels {
        sizes.push(current.dims());
        let (rlo, rhi) = analyze_rows(&current, family);
        let (ll, lh) = analyze_cols(&rlo, family);
        let (hl, hh) = analyze_cols(&rhi, family);
        details.push(DetailBands { lh, hl, hh });
        current = ll;
    }
    Ok(WaveletPyramid {
        family,
        approx: current,
        details,
        sizes,
    })
}

/// Inverse of [`dwt2`].
pub fn idwt2(pyr: &WaveletPyramid) -> Plane {
    let family = pyr.family;
    let mut current = pyr.approx.clone();
    for (bands, &(w, h)) in pyr.details.iter().zip(&pyr.sizes).rev() {
        let rlo = synth_cols(&current, &bands.lh, h, family);
        let rhi = synth_cols(&bands.hl, &bands.hh, h, family);
        current = synth_rows(&rlo, &rhi, w, family);
    }
    current
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn filters_are_orthonormal() {
        for fam in [WaveletFamily::Haar, WaveletFamily::Db4] {
            let h = fam.scaling_filter();
            let g = fam.wavelet_filter();
            for shift in (0..h.len()).step_by(2) {
                let hh: f64 = (shift..h.len()).map(|j| h[j] * h[j - shift]).sum();
                let gg: f64 = (shift..h.len()).map(|j| g[j] * g[j - shift]).sum();
                let expected = if shift == 0 { 1.0 } else { 0.0 };
                assert!((hh - expected).abs() < 1e-14, "{fam} h shift {shift}: {hh}");
                assert!((gg - expected).abs() < 1e-14, "{fam} g shift {shift}: {gg}");
            }
            for shift in (-(h.len() as isize) + 2..h.len() as isize).step_by(2) {
                let hg: f64 = (0..h.len() as isize)
                    .filter(|j| (0..h.len() as isize).contains(&(j - shift)))
                    .map(|j| h[j as usize] * g[(j - shift) as usize])
                    .sum();
                assert!(hg.abs() < 1e-14, "{fam} cross shift {shift}: {hg}");
            }
        }
    }

    #[test]
    fn haar_step_by_hand() {
        let (a, d) = dwt1(&[1.0, 1.0, 0.0, 0.0], WaveletFamily::Haar);
        assert_eq!(a.len(), 2);
        assert!((a[0] - 2.0f64.sqrt()).abs() < 1e-15);
        assert_eq!(a[1], 0.0);
        assert!(d.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn coefficient_counts_match_symmetric_mode() {
        assert_eq!(coeff_len(16, 8), 11);
        assert_eq!(coeff_len(17, 8), 12);
        assert_eq!(coeff_len(16, 2), 8);
        assert_eq!(coeff_len(17, 2), 9);
    }

    #[test]
    fn one_d_round_trip_odd_and_short() {
        for n in [1usize, 2, 3, 5, 8, 13] {
            let x: Vec<f64> = (0..n).map(|i| ((i * 37 % 11) as f64).sqrt()).collect();
            for fam in [WaveletFamily::Haar, WaveletFamily::Db4] {
                let (a, d) = dwt1(&x, fam);
                let back = idwt1(&a, &d, n, fam);
                for (u, v) in back.iter().zip(&x) {
                    assert!((u - v).abs() < 1e-12, "n={n} {fam}");
                }
            }
        }
    }

    #[test]
    fn constant_has_no_detail() {
        let p = Plane::filled(20, 12, 0.6);
        let pyr = dwt2(&p, WaveletFamily::Db4, 3).unwrap();
        for bands in &pyr.details {
            assert!(bands.max_abs() < 1e-12);
        }
    }

    #[test]
    fn family_parsing() {
        assert_eq!("Haar".parse::<WaveletFamily>().unwrap(), WaveletFamily::Haar);
        assert_eq!("db4".parse::<WaveletFamily>().unwrap(), WaveletFamily::Db4);
        assert!("sym8".parse::<WaveletFamily>().is_err());
    }

    #[test]
    fn capacity_enforced() {
        let p = Plane::filled(16, 40, 0.1);
        assert!(dwt2(&p, WaveletFamily::Haar, 4).is_ok());
        assert!(dwt2(&p, WaveletFamily::Haar, 5).is_err());
        assert!(dwt2(&p, WaveletFamily::Haar, 0).is_err());
    }
}
