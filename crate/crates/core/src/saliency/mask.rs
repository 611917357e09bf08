//! Binary masks and the FG / FG-ROI / ROI derivations.

use super::{compute_saliency, SaliencyMethod, SaliencyParams};
use crate::error::{Error, Result};
use crate::imaging::{BinaryMask, ImageMatrix, SaliencyMap};

/// `mask(x,y) = 1` iff `map(x,y) > t`.
pub fn threshold_mask(map: &SaliencyMap, t: f64) -> BinaryMask {
    BinaryMask::from_fn(map.width(), map.height(), |x, y| map.get(x, y) > t)
}

fn check_dims(o: &ImageMatrix, b: &BinaryMask) -> Result<()> {
    if o.dims() != b.dims() {
        return Err(Error::DimensionMismatch {
            expected: o.dims(),
            actual: b.dims(),
        });
    }
    Ok(())
}

/// Per-pixel, per-channel product of the image and the mask.
pub fn foreground(o: &ImageMatrix, b: &BinaryMask) -> Result<ImageMatrix> {
    check_dims(o, b)?;
    let n = o.width() * o.height();
    let data = o
        .data()
        .iter()
        .enumerate()
        .map(|(i, &v)| v * b.data()[i % n] as f64)
        .collect();
    ImageMatrix::new(o.width(), o.height(), o.channels(), data)
}

/// Drops every column whose mask sum is below `col_th`, then every row whose
/// mask sum is below `row_th`. Both sums are taken on the full mask.
pub fn fg_roi_lines(o: &ImageMatrix, b: &BinaryMask, col_th: f64, row_th: f64) -> Result<ImageMatrix> {
    check_dims(o, b)?;
    let (w, h) = b.dims();
    let cols: Vec<usize> = (0..w)
        .filter(|&x| {
            let sum: u32 = (0..h).map(|y| b.get(x, y) as u32).sum();
            sum as f64 >= col_th
        })
        .collect();
    if cols.is_empty() {
        return Err(Error::EmptyRoi {
            axis: "columns",
            threshold: col_th,
        });
    }
    let rows: Vec<usize> = (0..h)
        .filter(|&y| {
            let sum: u32 = (0..w).map(|x| b.get(x, y) as u32).sum();
            sum as f64 >= row_th
        })
        .collect();
    if rows.is_empty() {
        return Err(Error::EmptyRoi {
            axis: "rows",
            threshold: row_th,
        });
    }
    o.select(&cols, &rows)
}

/// FG-ROI crop with a single threshold for rows and columns.
pub fn fg_roi(o: &ImageMatrix, b: &BinaryMask, th: f64) -> Result<ImageMatrix> {
    if th.is_nan() || th < 0.0 {
        return Err(Error::invalid(format!("line threshold must be >= 0, got {th}")));
    }
    fg_roi_lines(o, b, th, th)
}

/// `fg_roi(foreground(o, b), b, th)`.
pub fn roi(o: &ImageMatrix, b: &BinaryMask, th: f64) -> Result<ImageMatrix> {
    fg_roi(&foreground(o, b)?, b, th)
}

/// The three images derived from one saliency run.
#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyTriplet {
    pub fg: ImageMatrix,
    pub fg_roi: ImageMatrix,
    pub roi: ImageMatrix,
}

/// Everything a detector run produces. The crops can fail independently of
/// the foreground image (empty ROI on a contrast-free input).
#[derive(Debug)]
pub struct SaliencyOutputs {
    pub map: SaliencyMap,
    pub mask: BinaryMask,
    pub fg: ImageMatrix,
    pub fg_roi: Result<ImageMatrix>,
    pub roi: Result<ImageMatrix>,
}

impl SaliencyOutputs {
    /// Derives FG, FG-ROI and ROI from an already computed map.
    pub fn from_map(
        o: &ImageMatrix,
        map: SaliencyMap,
        method: SaliencyMethod,
        params: &SaliencyParams,
    ) -> Result<Self> {
        let mask = threshold_mask(&map, params.threshold_for(method));
        let fg = foreground(o, &mask)?;
        let (col_th, row_th) = params.roi_line_threshold.resolve(o.width(), o.height());
        let fg_roi = fg_roi_lines(o, &mask, col_th, row_th);
        let roi = fg_roi_lines(&fg, &mask, col_th, row_th);
        Ok(Self {
            map,
            mask,
            fg,
            fg_roi,
            roi,
        })
    }

    pub fn into_triplet(self) -> Result<SaliencyTriplet> {
        Ok(SaliencyTriplet {
            fg: self.fg,
            fg_roi: self.fg_roi?,
            roi: self.roi?,
        })
    }
}

/// Runs `method` on `o`, thresholds the map and derives all outputs.
pub fn saliency_outputs(o: &ImageMatrix, method: SaliencyMethod, params: &SaliencyParams) -> Result<SaliencyOutputs> {
    params.validate()?;
    let map = compute_saliency(o, method, params)?;
    SaliencyOutputs::from_map(o, map, method, params)
}

/// Like [`saliency_outputs`] but fails if either crop is empty.
pub fn saliency_triplet(o: &ImageMatrix, method: SaliencyMethod, params: &SaliencyParams) -> Result<SaliencyTriplet> {
    saliency_outputs(o, method, params)?.into_triplet()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::Plane;

    fn img(w: usize, h: usize, data: Vec<f64>) -> ImageMatrix {
        ImageMatrix::new(w, h, 1, data).unwrap()
    }

    #[test]
    fn threshold_is_strict() {
        let map = SaliencyMap::from_normalized(Plane::new(3, 1, vec![0.5, 0.50001, 1.0]).unwrap()).unwrap();
        assert_eq!(threshold_mask(&map, 0.5).data(), &[0, 1, 1]);
        let zero = SaliencyMap::zeros(4, 4);
        assert_eq!(threshold_mask(&zero, 0.1).count_ones(), 0);
    }

    #[test]
    fn foreground_by_hand() {
        let o = img(2, 2, vec![0.2, 0.4, 0.6, 0.8]);
        let b = BinaryMask::new(2, 2, vec![1, 0, 0, 1]).unwrap();
        assert_eq!(foreground(&o, &b).unwrap().data(), &[0.2, 0.0, 0.0, 0.8]);
        assert_eq!(foreground(&o, &BinaryMask::filled(2, 2, true)).unwrap(), o);
        let black = foreground(&o, &BinaryMask::filled(2, 2, false)).unwrap();
        assert!(black.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn foreground_masks_every_channel() {
        let o = ImageMatrix::constant(2, 1, 3, 0.5).unwrap();
        let b = BinaryMask::new(2, 1, vec![0, 1]).unwrap();
        let fg = foreground(&o, &b).unwrap();
        for c in 0..3 {
            assert_eq!(fg.get(0, 0, c), 0.0);
            assert_eq!(fg.get(1, 0, c), 0.5);
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let o = img(2, 2, vec![0.0; 4]);
        let b = BinaryMask::filled(3, 2, true);
        assert!(matches!(foreground(&o, &b), Err(Error::DimensionMismatch { .. })));
        assert!(fg_roi(&o, &b, 1.0).is_err());
    }

    #[test]
    fn middle_column_removed() {
        let o = img(3, 3, (1..=9).map(|v| v as f64 / 10.0).collect());
        let b = BinaryMask::new(3, 3, vec![1, 0, 1, 1, 0, 1, 1, 0, 1]).unwrap();
        let out = fg_roi(&o, &b, 1.0).unwrap();
        assert_eq!(out.dims(), (2, 3));
        assert_eq!(out.data(), &[0.1, 0.3, 0.4, 0.6, 0.7, 0.9]);
    }

    #[test]
    fn all_ones_keeps_everything() {
        let o = img(3, 2, vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6]);
        let b = BinaryMask::filled(3, 2, true);
        assert_eq!(fg_roi(&o, &b, 1.0).unwrap(), o);
        assert_eq!(roi(&o, &b, 1.0).unwrap(), o);
    }

    #[test]
    fn all_zero_mask_is_empty_roi() {
        let o = img(3, 2, vec![0.5; 6]);
        let b = BinaryMask::filled(3, 2, false);
        assert!(matches!(roi(&o, &b, 1.0), Err(Error::EmptyRoi { .. })));
    }

    #[test]
    fn row_sums_use_original_mask() {
        // Column 0 is removed (sum 1 < 2). Row 0 has sum 2 on the full mask
        // but only 1 on the column-reduced one; it must survive.
        let b = BinaryMask::new(3, 3, vec![1, 1, 0, 0, 1, 1, 0, 1, 1]).unwrap();
        let o = img(3, 3, vec![0.5; 9]);
        let out = fg_roi(&o, &b, 2.0).unwrap();
        assert_eq!(out.dims(), (2, 3));
    }

    #[test]
    fn constant_image_chain_is_degenerate() {
        let o = ImageMatrix::constant(64, 64, 3, 0.4).unwrap();
        let params = SaliencyParams::default();
        let out = saliency_outputs(&o, SaliencyMethod::Spe, &params).unwrap();
        assert!(out.map.is_all_zero());
        assert!(out.fg.data().iter().all(|&v| v == 0.0));
        assert!(matches!(out.fg_roi, Err(Error::EmptyRoi { .. })));
        assert!(matches!(out.roi, Err(Error::EmptyRoi { .. })));
    }
}
