//! Raster types and the numerical kernels shared by every saliency detector.
//!
//! Two families of raster live here. [`Plane`] is an unconstrained
//! single-channel `f64` buffer used for intermediate results (feature maps,
//! spectra magnitudes, wavelet bands). [`ImageMatrix`], [`SaliencyMap`] and
//! [`BinaryMask`] are the validated domain types that cross module
//! boundaries: their constructors enforce the value ranges and the accessors
//! never hand out mutable storage.

pub mod color;
pub mod fft;
pub mod filter;
pub mod io;
pub mod resize;
pub mod wavelet;

use crate::error::{Error, Result};

/// Values below this are treated as exact zero when normalizing a map.
pub const DEGENERATE_RANGE: f64 = 1e-12;

/// Single-channel row-major `f64` raster with no value constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Plane {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid(format!(
                "plane dimensions must be positive, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::invalid(format!(
                "plane {width}x{height} needs {} values, got {}",
                width * height,
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    /// Panics on a zero dimension; internal callers guarantee positive sizes.
    pub fn zeros(width: usize, height: usize) -> Self {
        Self::filled(width, height, 0.0)
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        assert!(width > 0 && height > 0, "zero-sized plane");
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(width > 0 && height > 0, "zero-sized plane");
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: f64) {
        self.data[y * self.width + x] = value;
    }

    pub fn row(&self, y: usize) -> &[f64] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Plane {
        Plane {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Elementwise combination of two planes of equal size.
    pub fn zip_map(&self, other: &Plane, f: impl Fn(f64, f64) -> f64) -> Plane {
        assert_eq!(self.dims(), other.dims(), "zip_map on mismatched planes");
        Plane {
            width: self.width,
            height: self.height,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Plane) {
        assert_eq!(self.dims(), other.dims(), "add_assign on mismatched planes");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scale(&self, factor: f64) -> Plane {
        self.map(|v| v * factor)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Min-max rescale to `[0,1]`; a plane whose range is below
    /// [`DEGENERATE_RANGE`] becomes all zeros.
    pub fn normalized(&self) -> Plane {
        let (lo, hi) = (self.min(), self.max());
        let range = hi - lo;
        if !range.is_finite() || range < DEGENERATE_RANGE {
            return Plane::zeros(self.width, self.height);
        }
        self.map(|v| ((v - lo) / range).clamp(0.0, 1.0))
    }
}

/// Dense image with 1 or 3 channels, values in `[0,1]`, stored planar:
/// channel-major, each channel row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageMatrix {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl ImageMatrix {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::invalid(format!(
                "image must have 1 or 3 channels, got {channels}"
            )));
        }
        if data.len() != width * height * channels {
            return Err(Error::invalid(format!(
                "{width}x{height}x{channels} image needs {} values, got {}",
                width * height * channels,
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::invalid(format!("image value {bad} outside [0,1]")));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn constant(width: usize, height: usize, channels: usize, value: f64) -> Result<Self> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    /// Builds an image from per-channel planes, clamping values into `[0,1]`.
    pub fn from_planes(planes: &[Plane]) -> Result<Self> {
        let first = planes.first().ok_or_else(|| Error::invalid("no planes given"))?;
        let (w, h) = first.dims();
        if let Some(p) = planes.iter().find(|p| p.dims() != (w, h)) {
            return Err(Error::DimensionMismatch {
                expected: (w, h),
                actual: p.dims(),
            });
        }
        let data = planes
            .iter()
            .flat_map(|p| p.data().iter().map(|v| v.clamp(0.0, 1.0)))
            .collect();
        Self::new(w, h, planes.len(), data)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[c * self.width * self.height + y * self.width + x]
    }

    pub fn channel_data(&self, c: usize) -> &[f64] {
        let n = self.width * self.height;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn channel(&self, c: usize) -> Plane {
        Plane {
            width: self.width,
            height: self.height,
            data: self.channel_data(c).to_vec(),
        }
    }

    pub fn planes(&self) -> Vec<Plane> {
        (0..self.channels).map(|c| self.channel(c)).collect()
    }

    /// Copies the rows listed in `rows` and the columns listed in `cols`,
    /// in the given order.
    pub fn select(&self, cols: &[usize], rows: &[usize]) -> Result<Self> {
        if cols.is_empty() || rows.is_empty() {
            return Err(Error::invalid("selection would produce an empty image"));
        }
        let mut data = Vec::with_capacity(cols.len() * rows.len() * self.channels);
        for c in 0..self.channels {
            let ch = self.channel_data(c);
            for &y in rows {
                let row = &ch[y * self.width..(y + 1) * self.width];
                data.extend(cols.iter().map(|&x| row[x]));
            }
        }
        Ok(Self {
            width: cols.len(),
            height: rows.len(),
            channels: self.channels,
            data,
        })
    }
}

/// `{0,1}` mask with the dimensions of the image it masks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("mask dimensions must be positive"));
        }
        if data.len() != width * height {
            return Err(Error::invalid(format!(
                "mask {width}x{height} needs {} values, got {}",
                width * height,
                data.len()
            )));
        }
        if data.iter().any(|&v| v > 1) {
            return Err(Error::invalid("mask values must be 0 or 1"));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: bool) -> Self {
        assert!(width > 0 && height > 0, "zero-sized mask");
        Self {
            width,
            height,
            data: vec![value as u8; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        Self {
            width,
            height,
            data: (0..height)
                .flat_map(|y| (0..width).map(move |x| (x, y)))
                .map(|(x, y)| f(x, y) as u8)
                .collect(),
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().map(|&v| v as usize).sum()
    }
}

/// Continuous saliency in `[0,1]`; maximum is exactly 1 unless the map is all zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyMap {
    plane: Plane,
}

impl SaliencyMap {
    /// Min-max normalizes an arbitrary raw map.
    pub fn from_raw(raw: &Plane) -> Self {
        Self {
            plane: raw.normalized(),
        }
    }

    /// Accepts an already-normalized plane. Fails if values leave `[0,1]` or
    /// a non-zero map does not peak at 1.
    pub fn from_normalized(plane: Plane) -> Result<Self> {
        if plane.data().iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::invalid("saliency values must lie in [0,1]"));
        }
        let max = plane.max();
        if max != 0.0 && max != 1.0 {
            return Err(Error::invalid(format!(
                "normalized saliency map must peak at 1, got {max}"
            )));
        }
        Ok(Self { plane })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            plane: Plane::zeros(width, height),
        }
    }

    pub fn width(&self) -> usize {
        self.plane.width()
    }

    pub fn height(&self) -> usize {
        self.plane.height()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.plane.dims()
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.plane.get(x, y)
    }

    pub fn data(&self) -> &[f64] {
        self.plane.data()
    }

    pub fn as_plane(&self) -> &Plane {
        &self.plane
    }

    pub fn is_all_zero(&self) -> bool {
        self.plane.data().iter().all(|&v| v == 0.0)
    }

    /// Location of the first maximum in row-major order.
    pub fn argmax(&self) -> (usize, usize) {
        let (idx, _) =
            self.plane.data().iter().enumerate().fold(
                (0, f64::NEG_INFINITY),
                |best, (i, &v)| {
                    if v > best.1 {
                        (i, v)
                    } else {
                        best
                    }
                },
            );
        (idx % self.width(), idx / self.width())
    }
}
