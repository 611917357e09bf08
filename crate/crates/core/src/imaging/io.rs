//! 8-bit PNG import/export for the raster types.

use std::io::Cursor;
use std::path::Path;

use image::{DynamicImage, GrayImage, ImageFormat, RgbImage};

use super::{BinaryMask, ImageMatrix, SaliencyMap};
use crate::error::{Error, Result};

fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn to_dynamic(img: &ImageMatrix) -> DynamicImage {
    let (w, h) = (img.width() as u32, img.height() as u32);
    if img.channels() == 1 {
        let buf = img.channel_data(0).iter().map(|&v| to_u8(v)).collect();
        DynamicImage::ImageLuma8(GrayImage::from_raw(w, h, buf).expect("sized buffer"))
    } else {
        let n = img.width() * img.height();
        let mut buf = Vec::with_capacity(3 * n);
        for i in 0..n {
            for c in 0..3 {
                buf.push(to_u8(img.channel_data(c)[i]));
            }
        }
        DynamicImage::ImageRgb8(RgbImage::from_raw(w, h, buf).expect("sized buffer"))
    }
}

fn from_dynamic(dynamic: DynamicImage) -> ImageMatrix {
    let (w, h) = (dynamic.width() as usize, dynamic.height() as usize);
    let gray = matches!(
        dynamic,
        DynamicImage::ImageLuma8(_)
            | DynamicImage::ImageLuma16(_)
            | DynamicImage::ImageLumaA8(_)
            | DynamicImage::ImageLumaA16(_)
    );
    if gray {
        let luma = dynamic.into_luma16();
        let data = luma.as_raw().iter().map(|&v| v as f64 / 65535.0).collect();
        ImageMatrix::new(w, h, 1, data).expect("decoded values in range")
    } else {
        let rgb = dynamic.into_rgb16();
        let raw = rgb.as_raw();
        let n = w * h;
        let mut data = vec![0.0; 3 * n];
        for i in 0..n {
            for c in 0..3 {
                data[c * n + i] = raw[3 * i + c] as f64 / 65535.0;
            }
        }
        ImageMatrix::new(w, h, 3, data).expect("decoded values in range")
    }
}

/// Encodes to PNG bytes; values are quantized to 8 bits.
pub fn encode_png(img: &ImageMatrix) -> Vec<u8> {
    let mut out = Cursor::new(Vec::new());
    to_dynamic(img)
        .write_to(&mut out, ImageFormat::Png)
        .expect("in-memory PNG encoding");
    out.into_inner()
}

pub fn decode_png(bytes: &[u8], origin: &Path) -> Result<ImageMatrix> {
    let dynamic = image::load_from_memory_with_format(bytes, ImageFormat::Png).map_err(|source| Error::Image {
        path: origin.to_path_buf(),
        source,
    })?;
    Ok(from_dynamic(dynamic))
}

/// Reads an 8- or 16-bit gray/RGB(A) PNG; alpha is dropped.
pub fn read_png(path: &Path) -> Result<ImageMatrix> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_png(&bytes, path)
}

pub fn write_png(img: &ImageMatrix, path: &Path) -> Result<()> {
    std::fs::write(path, encode_png(img)).map_err(|e| Error::io(path, e))
}

pub fn mask_to_image(mask: &BinaryMask) -> ImageMatrix {
    let data = mask.data().iter().map(|&v| v as f64).collect();
    ImageMatrix::new(mask.width(), mask.height(), 1, data).expect("binary values")
}

pub fn saliency_to_image(map: &SaliencyMap) -> ImageMatrix {
    ImageMatrix::new(map.width(), map.height(), 1, map.data().to_vec()).expect("normalized map")
}

/// Masks are stored as 0/255 gray PNGs.
pub fn write_mask(mask: &BinaryMask, path: &Path) -> Result<()> {
    write_png(&mask_to_image(mask), path)
}

pub fn read_mask(path: &Path) -> Result<BinaryMask> {
    let img = read_png(path)?;
    let gray = super::color::to_grayscale(&img);
    let data = gray.data().iter().map(|&v| (v >= 0.5) as u8).collect();
    BinaryMask::new(img.width(), img.height(), data)
}

pub fn write_saliency(map: &SaliencyMap, path: &Path) -> Result<()> {
    write_png(&saliency_to_image(map), path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rgb_round_trip_is_quantized() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.png");
        let data: Vec<f64> = (0..24).map(|i| i as f64 / 23.0).collect();
        let img = ImageMatrix::new(4, 2, 3, data).unwrap();
        write_png(&img, &path).unwrap();
        let back = read_png(&path).unwrap();
        assert_eq!(back.dims(), (4, 2));
        assert_eq!(back.channels(), 3);
        for (a, b) in back.data().iter().zip(img.data()) {
            assert!((a - b).abs() <= 0.5 / 255.0 + 1e-12);
        }
    }

    #[test]
    fn mask_uses_0_and_255() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.png");
        let mask = BinaryMask::new(3, 1, vec![1, 0, 1]).unwrap();
        write_mask(&mask, &path).unwrap();
        let raw = image::open(&path).unwrap().into_luma8();
        assert_eq!(raw.as_raw(), &vec![255u8, 0, 255]);
        assert_eq!(read_mask(&path).unwrap(), mask);
    }

    #[test]
    fn missing_file_reports_path() {
        let err = read_png(Path::new("/nonexistent/q.png")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/q.png"));
    }
}
