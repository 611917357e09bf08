//! Non-neural stand-ins for the trained networks: a regularized linear
//! two-class scorer and a template-matching release detector trained on
//! release images only.

use serde::{Deserialize, Serialize};

use crate::dataset::Label;
use crate::error::{Error, Result};
use crate::fusion::{DetectionBox, ScoreVector};
use crate::imaging::color::intensity;
use crate::imaging::resize::{resize_bilinear, resize_plane_antialiased};
use crate::imaging::{ImageMatrix, DEGENERATE_RANGE};

/// Side of the square grayscale thumbnail used as the feature vector.
pub const FEATURE_SIDE: usize = 32;

/// Flattened 32x32 grayscale thumbnail.
pub fn image_features(img: &ImageMatrix) -> Vec<f64> {
    resize_plane_antialiased(&intensity(img), FEATURE_SIDE, FEATURE_SIDE).into_data()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScorerParams {
    /// Added to every pooled variance, relative to their mean.
    pub ridge: f64,
}

impl Default for ScorerParams {
    fn default() -> Self {
        Self { ridge: 0.1 }
    }
}

/// Diagonal linear discriminant with logistic outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearScorer {
    weights: Vec<f64>,
    bias: f64,
    /// Spread of the training decision values; outputs are `sigmoid(z / scale)`.
    scale: f64,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl LinearScorer {
    pub fn fit(train: &[(Vec<f64>, Label)], params: &ScorerParams) -> Result<Self> {
        let dim = train
            .first()
            .map(|t| t.0.len())
            .ok_or_else(|| Error::invalid("empty training set"))?;
        if train.iter().any(|t| t.0.len() != dim) {
            return Err(Error::invalid("training features differ in length"));
        }
        let mut n = [0usize; 2];
        let mut mean = [vec![0.0; dim], vec![0.0; dim]];
        for (x, l) in train {
            let k = l.is_release() as usize;
            n[k] += 1;
            for (m, v) in mean[k].iter_mut().zip(x) {
                *m += v;
            }
        }
        if n[0] == 0 || n[1] == 0 {
            return Err(Error::invalid("training set must contain both classes"));
        }
        for k in 0..2 {
            mean[k].iter_mut().for_each(|m| *m /= n[k] as f64);
        }
        let mut var = vec![0.0; dim];
        for (x, l) in train {
            let k = l.is_release() as usize;
            for j in 0..dim {
                var[j] += (x[j] - mean[k][j]).powi(2);
            }
        }
        var.iter_mut().for_each(|v| *v /= train.len() as f64);
        let mean_var = var.iter().sum::<f64>() / dim as f64;
        let ridge = params.ridge * mean_var + 1e-9;

        let weights: Vec<f64> = (0..dim).map(|j| (mean[1][j] - mean[0][j]) / (var[j] + ridge)).collect();
        let bias = -(0..dim)
            .map(|j| weights[j] * 0.5 * (mean[1][j] + mean[0][j]))
            .sum::<f64>();
        let mut model = Self {
            weights,
            bias,
            scale: 1.0,
        };
        let z: Vec<f64> = train.iter().map(|(x, _)| model.decision(x)).collect();
        let mu = z.iter().sum::<f64>() / z.len() as f64;
        let sd = (z.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / z.len() as f64).sqrt();
        if sd > DEGENERATE_RANGE {
            model.scale = sd;
        }
        Ok(model)
    }

    pub fn decision(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias
    }

    pub fn score(&self, x: &[f64]) -> ScoreVector {
        let release = sigmoid(self.decision(x) / self.scale);
        ScoreVector {
            no_release: 1.0 - release,
            release,
        }
    }
}

/// Fits on `train` and scores every `test` vector.
pub fn baseline_score(
    train: &[(Vec<f64>, Label)],
    test: &[Vec<f64>],
    params: &ScorerParams,
) -> Result<Vec<ScoreVector>> {
    let model = LinearScorer::fit(train, params)?;
    Ok(test.iter().map(|x| model.score(x)).collect())
}

/// Longest side of the working image the detector searches.
pub const DETECTOR_WORKING_SIDE: usize = 128;

/// One labelled release image for detector training.
#[derive(Debug, Clone)]
pub struct DetectorExample<'a> {
    pub image: &'a ImageMatrix,
    pub peak: (usize, usize),
    pub interval: (usize, usize),
}

/// Normalized cross-correlation template of the mean release appearance.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateDetector {
    /// Template side in original image pixels.
    side: usize,
    /// Zero-mean, unit-norm RGB template at working resolution.
    template: Vec<f64>,
    tside: usize,
    /// Mean and spread of the correlation on the training releases.
    pos_mean: f64,
    pos_sd: f64,
}

fn working_factor(w: usize, h: usize) -> f64 {
    (DETECTOR_WORKING_SIDE as f64 / w.max(h) as f64).min(1.0)
}

fn working_image(img: &ImageMatrix) -> ImageMatrix {
    let f = working_factor(img.width(), img.height());
    let (w, h) = (
        ((img.width() as f64 * f).round() as usize).max(1),
        ((img.height() as f64 * f).round() as usize).max(1),
    );
    resize_bilinear(img, w, h).expect("positive working size")
}

/// Zero-mean unit-norm RGB window at `(x0, y0)`; `None` when flat.
fn window(img: &ImageMatrix, x0: usize, y0: usize, side: usize) -> Option<Vec<f64>> {
    let mut v = Vec::with_capacity(3 * side * side);
    for c in 0..img.channels() {
        let ch = img.channel_data(c);
        for y in y0..y0 + side {
            v.extend_from_slice(&ch[y * img.width() + x0..y * img.width() + x0 + side]);
        }
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm < DEGENERATE_RANGE {
        return None;
    }
    v.iter_mut().for_each(|x| *x /= norm);
    Some(v)
}

fn centered_origin(center: f64, side: usize, limit: usize) -> usize {
    (center - side as f64 / 2.0).round().clamp(0.0, (limit - side) as f64) as usize
}

impl TemplateDetector {
    pub fn fit(examples: &[DetectorExample<'_>]) -> Result<Self> {
        let first = examples
            .first()
            .ok_or_else(|| Error::invalid("detector needs release examples"))?;
        let (w, h) = first.image.dims();
        if examples
            .iter()
            .any(|e| e.image.dims() != (w, h) || e.image.channels() != first.image.channels())
        {
            return Err(Error::invalid(
                "detector training images must share dimensions and channels",
            ));
        }
        let mean_width = examples
            .iter()
            .map(|e| (e.interval.1 - e.interval.0 + 1) as f64)
            .sum::<f64>()
            / examples.len() as f64;
        let f = working_factor(w, h);
        let side = (mean_width.round() as usize).clamp(1, w.min(h));
        let tside = ((side as f64 * f).round() as usize).clamp(3, ((w.min(h)) as f64 * f) as usize);

        let work: Vec<ImageMatrix> = examples.iter().map(|e| working_image(e.image)).collect();
        let (ww, wh) = work[0].dims();
        let mut sum = vec![0.0; work[0].channels() * tside * tside];
        for (e, img) in examples.iter().zip(&work) {
            let x0 = centered_origin(e.peak.0 as f64 * f, tside, ww);
            let y0 = centered_origin(e.peak.1 as f64 * f, tside, wh);
            if let Some(win) = window(img, x0, y0, tside) {
                sum.iter_mut().zip(&win).for_each(|(s, v)| *s += v);
            }
        }
        let norm = sum.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < DEGENERATE_RANGE {
            return Err(Error::invalid("release examples are flat at their peaks"));
        }
        let template: Vec<f64> = sum.iter().map(|v| v / norm).collect();
        let mut det = Self {
            side,
            template,
            tside,
            pos_mean: 0.0,
            pos_sd: 1.0,
        };
        let peaks: Vec<f64> = work.iter().map(|img| det.best_match(img).2).collect();
        let mu = peaks.iter().sum::<f64>() / peaks.len() as f64;
        let sd = (peaks.iter().map(|p| (p - mu).powi(2)).sum::<f64>() / peaks.len() as f64).sqrt();
        det.pos_mean = mu;
        det.pos_sd = sd.max(0.05);
        Ok(det)
    }

    /// `(x0, y0, correlation)` of the best template position. The template
    /// is zero-mean, so the correlation needs only the raw dot product and
    /// the window's centered norm, taken from summed-area tables.
    fn best_match(&self, img: &ImageMatrix) -> (usize, usize, f64) {
        let (w, h) = img.dims();
        let t = self.tside;
        let mut best = (0, 0, -1.0);
        if w < t || h < t || img.channels() * t * t != self.template.len() {
            return best;
        }
        let stride = w + 1;
        let mut sum = vec![0.0; stride * (h + 1)];
        let mut sq = vec![0.0; stride * (h + 1)];
        for y in 0..h {
            for x in 0..w {
                let (mut s, mut q) = (0.0, 0.0);
                for c in 0..img.channels() {
                    let v = img.get(x, y, c);
                    s += v;
                    q += v * v;
                }
                let i = (y + 1) * stride + x + 1;
                sum[i] = s + sum[i - 1] + sum[i - stride] - sum[i - stride - 1];
                sq[i] = q + sq[i - 1] + sq[i - stride] - sq[i - stride - 1];
            }
        }
        let rect = |a: &[f64], x0: usize, y0: usize| {
            a[(y0 + t) * stride + x0 + t] - a[y0 * stride + x0 + t] - a[(y0 + t) * stride + x0] + a[y0 * stride + x0]
        };
        let n = self.template.len() as f64;
        for y0 in 0..=h - t {
            for x0 in 0..=w - t {
                let s = rect(&sum, x0, y0);
                let q = rect(&sq, x0, y0);
                let var = q - s * s / n;
                // cancellation leaves a residue of order eps * q on flat windows
                if var <= (DEGENERATE_RANGE * DEGENERATE_RANGE).max(1e-12 * q) {
                    continue;
                }
                let mut dot = 0.0;
                let mut k = 0;
                for c in 0..img.channels() {
                    let ch = img.channel_data(c);
                    for y in y0..y0 + t {
                        let row = &ch[y * w + x0..y * w + x0 + t];
                        dot += row
                            .iter()
                            .zip(&self.template[k..k + t])
                            .map(|(a, b)| a * b)
                            .sum::<f64>();
                        k += t;
                    }
                }
                let corr = dot / var.sqrt();
                if corr > best.2 {
                    best = (x0, y0, corr);
                }
            }
        }
        best
    }

    /// At most one box: the best template match, with a confidence that
    /// reaches 0.5 two spreads below the mean training match.
    pub fn detect(&self, img: &ImageMatrix) -> Vec<DetectionBox> {
        let f = working_factor(img.width(), img.height());
        let (x0, y0, c) = self.best_match(&working_image(img));
        if c <= 0.0 {
            return Vec::new();
        }
        let conf = sigmoid(4.0 * (c - (self.pos_mean - 2.0 * self.pos_sd)) / self.pos_sd);
        let side = self.side.min(img.width()).min(img.height()) as f64;
        let bx = (x0 as f64 / f).min(img.width() as f64 - side);
        let by = (y0 as f64 / f).min(img.height() as f64 - side);
        vec![DetectionBox::new(bx, by, side, side, conf).expect("valid box")]
    }
}
