//! Convolution kernels with symmetric (mirror) boundary handling, and the
//! Gaussian pyramid built on them.

use super::{ImageMatrix, Plane};
use crate::error::{Error, Result};

/// 5-tap binomial kernel used between pyramid levels.
pub const PYRAMID_KERNEL: [f64; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];

/// Maps any integer index onto `[0, n)` by whole-sample symmetric reflection
/// (`x[-1] = x[0]`, `x[n] = x[n-1]`), repeating for offsets beyond one period.
#[inline]
pub fn reflect(i: isize, n: usize) -> usize {
    let period = 2 * n as isize;
    let m = i.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - 1 - m) as usize
    }
}

fn filter_rows(p: &Plane, kernel: &[f64]) -> Plane {
    let (w, h) = p.dims();
    let r = (kernel.len() / 2) as isize;
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        let row = p.row(y);
        for x in 0..w {
            let mut acc = 0.0;
            for (k, &kv) in kernel.iter().enumerate() {
                acc += kv * row[reflect(x as isize + k as isize - r, w)];
            }
            out.push(acc);
        }
    }
    Plane::new(w, h, out).expect("same dims")
}

fn filter_cols(p: &Plane, kernel: &[f64]) -> Plane {
    let (w, h) = p.dims();
    let r = (kernel.len() / 2) as isize;
    let mut out = vec![0.0; w * h];
    let src = p.data();
    for y in 0..h {
        let dst = &mut out[y * w..(y + 1) * w];
        for (k, &kv) in kernel.iter().enumerate() {
            let sy = reflect(y as isize + k as isize - r, h);
            let srow = &src[sy * w..(sy + 1) * w];
            for (d, s) in dst.iter_mut().zip(srow) {
                *d += kv * s;
            }
        }
    }
    Plane::new(w, h, out).expect("same dims")
}

/// Separable correlation with odd-length, centered kernels.
pub fn filter_separable(p: &Plane, kernel_x: &[f64], kernel_y: &[f64]) -> Plane {
    debug_assert!(kernel_x.len() % 2 == 1 && kernel_y.len() % 2 == 1);
    filter_cols(&filter_rows(p, kernel_x), kernel_y)
}

/// Direct 2-D correlation (MATLAB `imfilter` semantics) with an odd-sized
/// kernel centered on each output pixel.
pub fn filter2d(p: &Plane, kernel: &Plane) -> Plane {
    let (w, h) = p.dims();
    let (kw, kh) = kernel.dims();
    debug_assert!(kw % 2 == 1 && kh % 2 == 1);
    let (rx, ry) = ((kw / 2) as isize, (kh / 2) as isize);
    let xs: Vec<Vec<usize>> = (0..w)
        .map(|x| (0..kw).map(|k| reflect(x as isize + k as isize - rx, w)).collect())
        .collect();
    Plane::from_fn(w, h, |x, y| {
        let mut acc = 0.0;
        for ky in 0..kh {
            let row = p.row(reflect(y as isize + ky as isize - ry, h));
            let krow = kernel.row(ky);
            for (kv, &sx) in krow.iter().zip(&xs[x]) {
                acc += kv * row[sx];
            }
        }
        acc
    })
}

/// Normalized 1-D Gaussian with radius `ceil(3 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    assert!(sigma > 0.0, "sigma must be positive");
    let r = (3.0 * sigma).ceil() as isize;
    let mut k: Vec<f64> = (-r..=r)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

pub fn gaussian_blur(p: &Plane, sigma: f64) -> Plane {
    let k = gaussian_kernel(sigma);
    filter_separable(p, &k, &k)
}

/// Mean over a `(2r+1)^2` window.
pub fn box_filter(p: &Plane, radius: usize) -> Plane {
    let n = 2 * radius + 1;
    let k = vec![1.0 / n as f64; n];
    filter_separable(p, &k, &k)
}

fn downsample2(p: &Plane) -> Plane {
    let (w, h) = p.dims();
    let (nw, nh) = (w.div_ceil(2), h.div_ceil(2));
    Plane::from_fn(nw, nh, |x, y| p.get(2 * x, 2 * y))
}

/// One pyramid reduction: 5-tap blur then keep even rows and columns.
pub fn pyr_down(p: &Plane) -> Plane {
    downsample2(&filter_separable(p, &PYRAMID_KERNEL, &PYRAMID_KERNEL))
}

fn check_levels(width: usize, height: usize, levels: usize) -> Result<()> {
    if levels == 0 {
        return Err(Error::invalid("pyramid needs at least one level"));
    }
    let min_dim = width.min(height);
    // coarsest level index may not exceed log2(min dim)
    if levels - 1 > min_dim.ilog2() as usize {
        return Err(Error::invalid(format!(
            "{levels} pyramid levels exceed capacity of a {width}x{height} image"
        )));
    }
    Ok(())
}

/// Gaussian pyramid of a plane; element `k` has dims `ceil(dims / 2^k)`.
pub fn pyramid_planes(p: &Plane, levels: usize) -> Result<Vec<Plane>> {
    check_levels(p.width(), p.height(), levels)?;
    let mut out = Vec::with_capacity(levels);
    out.push(p.clone());
    for k in 1..levels {
        let next = pyr_down(&out[k - 1]);
        out.push(next);
    }
    Ok(out)
}

/// Gaussian pyramid of a single-channel image. Level 0 is the input.
pub fn gaussian_pyramid(img: &ImageMatrix, levels: usize) -> Result<Vec<ImageMatrix>> {
    if img.channels() != 1 {
        return Err(Error::invalid("gaussian pyramid expects a single-channel image"));
    }
    pyramid_planes(&img.channel(0), levels)?
        .iter()
        .map(|p| ImageMatrix::from_planes(std::slice::from_ref(p)))
        .collect()
}
