use criterion::{criterion_group, criterion_main, Criterion};
use dasal_core::saliency::{compute_saliency, SaliencyMethod, SaliencyParams};
use dasal_core::synth::{background_subtract, false_color, synthesize_sample, Palette, SynthParams};
use dasal_core::Background;

fn full_size_image() -> dasal_core::ImageMatrix {
    let p = SynthParams {
        seed: 3,
        ..Default::default()
    };
    let (m, _) = synthesize_sample(&p, true, "bench", "exp00").unwrap();
    false_color(&background_subtract(&m, Background::A), &Palette::default())
}

fn saliency_875x600(c: &mut Criterion) {
    let img = full_size_image();
    let params = SaliencyParams::default();
    let mut g = c.benchmark_group("saliency_875x600");
    g.sample_size(10);
    for m in SaliencyMethod::ALL {
        g.bench_function(m.id(), |b| b.iter(|| compute_saliency(&img, m, &params).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, saliency_875x600);
criterion_main!(benches);
