use std::collections::BTreeMap;

use criterion::{black_box, criterion_group, criterion_main, Criterion};
use dasal_core::fusion::{run_ensemble, sum_fuse, MemberScores, NamedEnsemble};
use dasal_core::{DetectionBox, Label, MethodId, ScoreVector};

fn sv(i: usize) -> ScoreVector {
    let r = (i as f64 * 0.37).fract();
    ScoreVector::new(1.0 - r, r).unwrap()
}

fn fuse_63_members(c: &mut Criterion) {
    let config = NamedEnsemble::AllMethods.config("scores".as_ref());
    let members: Vec<MemberScores> = config
        .members
        .iter()
        .enumerate()
        .map(|(i, m)| match m.method {
            MethodId::Patch(_) => MemberScores::Patches(BTreeMap::from([(
                "s".to_string(),
                (0..6).map(|p| (p * 135, sv(i + p))).collect(),
            )])),
            MethodId::Detector => MemberScores::Detector(BTreeMap::from([(
                "s".to_string(),
                vec![DetectionBox::new(1.0, 2.0, 10.0, 10.0, 0.7).unwrap()],
            )])),
            _ => MemberScores::Classifier(BTreeMap::from([("s".to_string(), sv(i))])),
        })
        .collect();
    let samples = BTreeMap::from([("s".to_string(), Label::Release)]);
    c.bench_function("fuse_63_members_one_image", |b| {
        b.iter(|| run_ensemble(black_box(&config), &members, &samples).unwrap())
    });
    let scores: Vec<ScoreVector> = (0..63).map(sv).collect();
    c.bench_function("sum_fuse_63", |b| b.iter(|| sum_fuse(black_box(&scores)).unwrap()));
}

criterion_group!(benches, fuse_63_members);
criterion_main!(benches);
