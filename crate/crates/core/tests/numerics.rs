use dasal_core::imaging::fft::{fft2, ifft2, ComplexMatrix};
use dasal_core::imaging::wavelet::{dwt2, idwt2, max_levels, WaveletFamily};
use dasal_core::imaging::Plane;
use proptest::prelude::*;

fn plane_strategy(max_side: usize) -> impl Strategy<Value = Plane> {
    (2..=max_side, 2..=max_side).prop_flat_map(|(w, h)| {
        prop::collection::vec(-10.0f64..10.0, w * h).prop_map(move |d| Plane::new(w, h, d).unwrap())
    })
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn fft_round_trip(p in plane_strategy(48)) {
        let back = ifft2(&fft2(&ComplexMatrix::from_real(&p)));
        let err = back
            .data
            .iter()
            .zip(p.data())
            .map(|(c, &v)| (c.re - v).abs().max(c.im.abs()))
            .fold(0.0, f64::max);
        prop_assert!(err < 1e-9, "max error {err}");
    }

    #[test]
    fn dwt_round_trip(p in plane_strategy(64), db4 in any::<bool>(), level_pick in 0usize..8) {
        let family = if db4 { WaveletFamily::Db4 } else { WaveletFamily::Haar };
        let cap = max_levels(p.width(), p.height());
        let levels = 1 + level_pick % cap;
        let back = idwt2(&dwt2(&p, family, levels).unwrap());
        prop_assert_eq!(back.dims(), p.dims());
        let err = max_abs_diff(back.data(), p.data());
        prop_assert!(err < 1e-8, "max error {err} at {levels} levels");
    }
}

#[test]
fn fft_of_impulse_is_flat() {
    let mut p = Plane::zeros(8, 6);
    p.set(0, 0, 1.0);
    let f = fft2(&ComplexMatrix::from_real(&p));
    assert!(f.data.iter().all(|c| (c.re - 1.0).abs() < 1e-12 && c.im.abs() < 1e-12));
}

#[test]
fn dwt_rejects_levels_beyond_capacity() {
    let p = Plane::zeros(16, 8);
    assert!(dwt2(&p, WaveletFamily::Db4, 3).is_ok());
    assert!(dwt2(&p, WaveletFamily::Db4, 4).is_err());
}
