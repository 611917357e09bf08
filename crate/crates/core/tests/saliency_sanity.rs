use dasal_core::imaging::{ImageMatrix, Plane, SaliencyMap};
use dasal_core::saliency::gbvs::{activation_chain, normalization_chain, MarkovChain};
use dasal_core::saliency::{compute_saliency, cosaliency, SaliencyMethod, SaliencyParams};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn gray(p: &Plane) -> ImageMatrix {
    ImageMatrix::from_planes(&[p.clone(), p.clone(), p.clone()]).unwrap()
}

fn disk_image(w: usize, h: usize, cx: f64, cy: f64, r: f64) -> ImageMatrix {
    gray(&Plane::from_fn(w, h, |x, y| {
        let d2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
        if d2 <= r * r {
            0.9
        } else {
            0.1
        }
    }))
}

fn in_unit_range(map: &SaliencyMap) -> bool {
    map.as_plane().data().iter().all(|v| (0.0..=1.0).contains(v))
}

#[test]
fn constant_image_gives_all_zero_map_for_every_detector() {
    let params = SaliencyParams::default();
    let img = ImageMatrix::constant(96, 80, 3, 0.37).unwrap();
    for m in SaliencyMethod::ALL {
        let map = compute_saliency(&img, m, &params).unwrap();
        assert_eq!(map.dims(), (96, 80), "{m}");
        assert!(map.is_all_zero(), "{m}: constant input must give an all-zero map");
    }
}

#[test]
fn outputs_lie_in_unit_interval_for_random_images() {
    let params = SaliencyParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..3 {
        let (w, h) = (rng.gen_range(64..120), rng.gen_range(64..100));
        let data: Vec<f64> = (0..w * h * 3).map(|_| rng.gen()).collect();
        let img = ImageMatrix::new(w, h, 3, data).unwrap();
        for m in SaliencyMethod::ALL {
            let map = compute_saliency(&img, m, &params).unwrap();
            assert_eq!(map.dims(), (w, h), "{m}");
            assert!(in_unit_range(&map), "{m}: values outside [0,1]");
        }
    }
}

#[test]
fn bright_disk_holds_the_maximum_for_simpsal_gbvs_and_cosal() {
    let params = SaliencyParams::default();
    let (cx, cy, r) = (90.0, 40.0, 8.0);
    let img = disk_image(128, 96, cx, cy, r);
    for m in [SaliencyMethod::Simpsal, SaliencyMethod::Gbvs, SaliencyMethod::Cosal] {
        let (x, y) = compute_saliency(&img, m, &params).unwrap().argmax();
        let inside_box = (x as f64 - cx).abs() <= r && (y as f64 - cy).abs() <= r;
        assert!(inside_box, "{m}: maximum at ({x},{y}) outside the disk's bounding box");
    }
}

#[test]
fn cosaliency_group_marks_the_shared_disk() {
    let params = SaliencyParams::default();
    let group = [disk_image(96, 64, 30.0, 30.0, 7.0), disk_image(96, 64, 60.0, 34.0, 7.0)];
    let out = cosaliency(&group, &params.cosal).unwrap();
    for (map, (cx, cy)) in out.maps.iter().zip([(30.0, 30.0), (60.0, 34.0)]) {
        let (x, y) = map.argmax();
        assert!((x as f64 - cx).abs() <= 7.0 && (y as f64 - cy).abs() <= 7.0);
        assert!(in_unit_range(map));
    }
}

#[test]
fn single_bright_pixel_is_found_by_spectral_residual() {
    let params = SaliencyParams::default();
    for (px, py) in [(20, 40), (50, 12), (33, 33)] {
        let mut p = Plane::zeros(64, 64);
        p.set(px, py, 1.0);
        let (x, y) = compute_saliency(&gray(&p), SaliencyMethod::Spe, &params)
            .unwrap()
            .argmax();
        assert!(
            x.abs_diff(px) <= 2 && y.abs_diff(py) <= 2,
            "max at ({x},{y}), pixel at ({px},{py})"
        );
    }
}

#[test]
fn textured_quadrant_dominates_wavelet_saliency() {
    let params = SaliencyParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let p = Plane::from_fn(128, 128, |x, y| {
        if x >= 64 && y < 64 {
            rng.gen_range(0.0..1.0)
        } else {
            0.5
        }
    });
    let map = compute_saliency(&gray(&p), SaliencyMethod::Wavelet, &params).unwrap();
    let (mut inside, mut outside) = (0.0, 0.0);
    for y in 0..128 {
        for x in 0..128 {
            if x >= 64 && y < 64 {
                inside += map.get(x, y);
            } else {
                outside += map.get(x, y);
            }
        }
    }
    assert!(inside / 4096.0 > outside / (3.0 * 4096.0));
}

/// Stationary distribution of `P` from the dense linear system
/// `(P^T - I) pi = 0` with the last equation replaced by `sum(pi) = 1`.
fn dense_equilibrium(chain: &MarkovChain) -> Vec<f64> {
    let n = chain.len();
    let mut a = DMatrix::from_fn(n, n, |i, j| chain.transition(j, i) - if i == j { 1.0 } else { 0.0 });
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = nalgebra::DVector::zeros(n);
    b[n - 1] = 1.0;
    a.lu().solve(&b).expect("irreducible chain").iter().copied().collect()
}

#[test]
fn gbvs_equilibrium_matches_dense_solve_on_small_lattices() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for trial in 0..12 {
        let (w, h) = (rng.gen_range(2..=12), rng.gen_range(2..=12));
        let map = Plane::from_fn(w, h, |_, _| rng.gen_range(0.01..1.0));
        let sigma = 0.15 * w as f64 + 0.5;
        let act_chain = activation_chain(&map, sigma, 1e-4).unwrap();
        let act = act_chain.equilibrium(1e-13, 200_000).unwrap();
        let norm_chain = normalization_chain(&Plane::new(w, h, act.clone()).unwrap(), sigma).unwrap();
        let norm = norm_chain.equilibrium(1e-13, 200_000).unwrap();
        for (chain, pi) in [(&act_chain, &act), (&norm_chain, &norm)] {
            assert!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-9, "trial {trial}");
            let oracle = dense_equilibrium(chain);
            let err = pi.iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < 1e-6, "trial {trial} ({w}x{h}): max deviation {err}");
        }
    }
}

#[test]
fn constant_feature_map_has_uniform_equilibrium() {
    let map = Plane::filled(7, 5, 0.4);
    let pi = activation_chain(&map, 2.0, 1e-4)
        .unwrap()
        .equilibrium(1e-12, 10_000)
        .unwrap();
    assert!(pi.iter().all(|p| (p - 1.0 / 35.0).abs() < 1e-9));
}
