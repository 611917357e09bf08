use rustfft::num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};

use super::Plane;

/// Row-major complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    pub width: usize,
    pub height: usize,
    pub data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn from_real(p: &Plane) -> Self {
        Self {
            width: p.width(),
            height: p.height(),
            data: p.data().iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        }
    }

    pub fn get(&self, x: usize, y: usize) -> Complex64 {
        self.data[y * self.width + x]
    }

    pub fn map_to_plane(&self, f: impl Fn(Complex64) -> f64) -> Plane {
        Plane::new(self.width, self.height, self.data.iter().map(|&c| f(c)).collect()).expect("valid dims")
    }
}

fn transform(m: &mut ComplexMatrix, direction: FftDirection) {
    let (w, h) = (m.width, m.height);
    let mut planner = FftPlanner::new();
    let row_fft = planner.plan_fft(w, direction);
    for row in m.data.chunks_exact_mut(w) {
        row_fft.process(row);
    }
    let col_fft = planner.plan_fft(h, direction);
    let mut col = vec![Complex64::default(); h];
    for x in 0..w {
        for (y, c) in col.iter_mut().enumerate() {
            *c = m.data[y * w + x];
        }
        col_fft.process(&mut col);
        for (y, c) in col.iter().enumerate() {
            m.data[y * w + x] = *c;
        }
    }
}

/// Unnormalized forward 2-D DFT.
pub fn fft2(input: &ComplexMatrix) -> ComplexMatrix {
    let mut out = input.clone();
    transform(&mut out, FftDirection::Forward);
    out
}

/// Inverse 2-D DFT scaled by `1/(w h)`, so `ifft2(fft2(x)) == x`.
pub fn ifft2(input: &ComplexMatrix) -> ComplexMatrix {
    let mut out = input.clone();
    transform(&mut out, FftDirection::Inverse);
    let scale = 1.0 / (out.width * out.height) as f64;
    out.data.iter_mut().for_each(|c| *c *= scale);
    out
}

pub fn fft2_real(p: &Plane) -> ComplexMatrix {
    fft2(&ComplexMatrix::from_real(p))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_has_only_dc() {
        let n = 6;
        let spec = fft2_real(&Plane::filled(n, n, 0.3));
        let dc = spec.get(0, 0);
        assert!((dc.re - 0.3 * (n * n) as f64).abs() < 1e-12);
        assert!(dc.im.abs() < 1e-12);
        for (i, c) in spec.data.iter().enumerate().skip(1) {
            assert!(c.norm() < 1e-12, "bin {i} = {c}");
        }
    }

    #[test]
    fn impulse_has_flat_unit_spectrum() {
        let mut p = Plane::zeros(4, 4);
        p.set(0, 0, 1.0);
        let spec = fft2_real(&p);
        assert!(spec.data.iter().all(|c| (c.norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn non_square_round_trip() {
        let p = Plane::from_fn(7, 5, |x, y| (x as f64).sin() + (y * y) as f64);
        let back = ifft2(&fft2_real(&p));
        for (a, b) in back.data.iter().zip(p.data()) {
            assert!((a.re - b).abs() < 1e-12 && a.im.abs() < 1e-12);
        }
    }
}
