use super::{ImageMatrix, Plane};

/// Mean of the three channels. Single-channel input is returned unchanged.
pub fn to_grayscale(img: &ImageMatrix) -> ImageMatrix {
    if img.channels() == 1 {
        return img.clone();
    }
    let n = img.width() * img.height();
    let (r, g, b) = (img.channel_data(0), img.channel_data(1), img.channel_data(2));
    let data = (0..n).map(|i| (r[i] + g[i] + b[i]) / 3.0).collect();
    ImageMatrix::new(img.width(), img.height(), 1, data).expect("mean of [0,1] values stays in [0,1]")
}

/// Luminance plane of an image of either channel count.
pub fn intensity(img: &ImageMatrix) -> Plane {
    to_grayscale(img).channel(0)
}

/// Returns the three channels; a gray image is replicated.
pub fn rgb_planes(img: &ImageMatrix) -> [Plane; 3] {
    if img.channels() == 1 {
        let g = img.channel(0);
        [g.clone(), g.clone(), g]
    } else {
        [img.channel(0), img.channel(1), img.channel(2)]
    }
}

fn srgb_to_linear(c: f64) -> f64 {
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

fn lab_f(t: f64) -> f64 {
    const DELTA: f64 = 6.0 / 29.0;
    if t > DELTA * DELTA * DELTA {
        t.cbrt()
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

/// sRGB (D65) to CIE L*a*b*.
pub fn rgb_to_lab(r: f64, g: f64, b: f64) -> [f64; 3] {
    let (r, g, b) = (srgb_to_linear(r), srgb_to_linear(g), srgb_to_linear(b));
    let x = 0.412_456_4 * r + 0.357_576_1 * g + 0.180_437_5 * b;
    let y = 0.212_672_9 * r + 0.715_152_2 * g + 0.072_175_0 * b;
    let z = 0.019_333_9 * r + 0.119_192_0 * g + 0.950_304_1 * b;
    let (fx, fy, fz) = (lab_f(x / 0.950_47), lab_f(y), lab_f(z / 1.088_83));
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

/// L*a*b* planes of an image; gray input is treated as r = g = b.
pub fn lab_planes(img: &ImageMatrix) -> [Plane; 3] {
    let [r, g, b] = rgb_planes(img);
    let (w, h) = img.dims();
    let mut out = [Plane::zeros(w, h), Plane::zeros(w, h), Plane::zeros(w, h)];
    for i in 0..w * h {
        let lab = rgb_to_lab(r.data()[i], g.data()[i], b.data()[i]);
        for (c, v) in lab.into_iter().enumerate() {
            out[c].data_mut()[i] = v;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn white_rgb_is_white_gray() {
        let img = ImageMatrix::constant(3, 2, 3, 1.0).unwrap();
        let g = to_grayscale(&img);
        assert_eq!(g.channels(), 1);
        assert!(g.data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn pure_red_is_one_third() {
        let img = ImageMatrix::new(1, 1, 3, vec![1.0, 0.0, 0.0]).unwrap();
        assert_eq!(to_grayscale(&img).data()[0], 1.0 / 3.0);
    }

    #[test]
    fn gray_passes_through() {
        let img = ImageMatrix::new(2, 1, 1, vec![0.25, 0.75]).unwrap();
        assert_eq!(to_grayscale(&img), img);
    }

    #[test]
    fn random_rgb_matches_per_pixel_mean() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let data: Vec<f64> = (0..48).map(|_| rng.gen::<f64>()).collect();
        let img = ImageMatrix::new(4, 4, 3, data.clone()).unwrap();
        let g = to_grayscale(&img);
        for i in 0..16 {
            let oracle = (data[i] + data[16 + i] + data[32 + i]) / 3.0;
            assert_eq!(g.data()[i], oracle);
        }
    }

    #[test]
    fn lab_reference_points() {
        let white = rgb_to_lab(1.0, 1.0, 1.0);
        assert!((white[0] - 100.0).abs() < 1e-3);
        assert!(white[1].abs() < 1e-2 && white[2].abs() < 1e-2);
        let black = rgb_to_lab(0.0, 0.0, 0.0);
        assert!(black.iter().all(|v| v.abs() < 1e-9));
        // sRGB red is roughly (53.24, 80.09, 67.20)
        let red = rgb_to_lab(1.0, 0.0, 0.0);
        assert!((red[0] - 53.24).abs() < 0.05);
        assert!((red[1] - 80.09).abs() < 0.1);
        assert!((red[2] - 67.20).abs() < 0.1);
    }
}
