use super::filter::gaussian_blur;
use super::{ImageMatrix, Plane};
use crate::error::{Error, Result};

/// Bilinear resampling with pixel-center alignment and clamped borders.
pub fn resize_bilinear(img: &ImageMatrix, width: usize, height: usize) -> Result<ImageMatrix> {
    if width == 0 || height == 0 {
        return Err(Error::invalid(format!(
            "resize target must be positive, got {width}x{height}"
        )));
    }
    if img.dims() == (width, height) {
        return Ok(img.clone());
    }
    let planes: Vec<Plane> = img.planes().iter().map(|p| resize_plane(p, width, height)).collect();
    ImageMatrix::from_planes(&planes)
}

struct Taps {
    lo: usize,
    hi: usize,
    frac: f64,
}

fn taps(src_len: usize, dst_len: usize) -> Vec<Taps> {
    let ratio = src_len as f64 / dst_len as f64;
    (0..dst_len)
        .map(|i| {
            let s = ((i as f64 + 0.5) * ratio - 0.5).clamp(0.0, (src_len - 1) as f64);
            let lo = s.floor() as usize;
            let hi = (lo + 1).min(src_len - 1);
            Taps {
                lo,
                hi,
                frac: s - lo as f64,
            }
        })
        .collect()
}

/// Bilinear resize of an unconstrained plane.
pub fn resize_plane(p: &Plane, width: usize, height: usize) -> Plane {
    assert!(width > 0 && height > 0, "zero resize target");
    if p.dims() == (width, height) {
        return p.clone();
    }
    let xt = taps(p.width(), width);
    let yt = taps(p.height(), height);
    let mut out = Vec::with_capacity(width * height);
    for ty in &yt {
        let (r0, r1) = (p.row(ty.lo), p.row(ty.hi));
        for tx in &xt {
            let top = r0[tx.lo] * (1.0 - tx.frac) + r0[tx.hi] * tx.frac;
            let bot = r1[tx.lo] * (1.0 - tx.frac) + r1[tx.hi] * tx.frac;
            out.push(top * (1.0 - ty.frac) + bot * ty.frac);
        }
    }
    Plane::new(width, height, out).expect("dimensions checked")
}

/// Resize that low-passes first when shrinking, so that strong reductions do
/// not alias.
pub fn resize_plane_antialiased(p: &Plane, width: usize, height: usize) -> Plane {
    let factor = (p.width() as f64 / width as f64).max(p.height() as f64 / height as f64);
    if factor > 1.5 {
        let sigma = 0.5 * factor;
        resize_plane(&gaussian_blur(p, sigma), width, height)
    } else {
        resize_plane(p, width, height)
    }
}

/// Target dims such that the shorter side equals `short`, preserving aspect.
pub fn dims_with_short_side(width: usize, height: usize, short: usize) -> (usize, usize) {
    if width <= height {
        let h = ((height as f64) * short as f64 / width as f64).round() as usize;
        (short, h.max(1))
    } else {
        let w = ((width as f64) * short as f64 / height as f64).round() as usize;
        (w.max(1), short)
    }
}
