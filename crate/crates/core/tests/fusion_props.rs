use std::collections::BTreeMap;

use dasal_core::fusion::{
    detector_decision, max_rule_patches, run_ensemble, sum_fuse, EnsembleConfig, FusionRule, Member, MemberScores,
    NamedEnsemble,
};
use dasal_core::{Background, DetectionBox, Label, MethodId, ScoreVector};
use proptest::prelude::*;

fn score_vector() -> impl Strategy<Value = ScoreVector> {
    (0.0f64..1.0).prop_map(|r| ScoreVector::new(1.0 - r, r).unwrap())
}

fn score_set() -> impl Strategy<Value = Vec<ScoreVector>> {
    prop::collection::vec(score_vector(), 1..=63)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn fusion_rules_match_oracles_and_invariances(
        scores in score_set(),
        shuffle_seed in any::<u64>(),
        k in 0.01f64..100.0,
    ) {
        // componentwise accumulation
        let fused = sum_fuse(&scores).unwrap();
        let (mut a, mut b) = (0.0, 0.0);
        for s in &scores {
            a += s.no_release;
            b += s.release;
        }
        prop_assert!((fused.no_release - a).abs() < 1e-9 && (fused.release - b).abs() < 1e-9);

        // first maximal release component
        let best = scores
            .iter()
            .enumerate()
            .fold(0, |bi, (i, s)| if s.release > scores[bi].release { i } else { bi });
        prop_assert_eq!(max_rule_patches(&scores).unwrap(), scores[best]);

        // any member order gives the identical fused vector
        let mut shuffled = scores.clone();
        let mut state = shuffle_seed;
        for i in (1..shuffled.len()).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            shuffled.swap(i, (state >> 33) as usize % (i + 1));
        }
        prop_assert_eq!(sum_fuse(&shuffled).unwrap(), fused);

        // a common positive factor keeps every prediction
        let scaled: Vec<ScoreVector> = scores.iter().map(|s| s.scaled(k)).collect();
        prop_assert_eq!(sum_fuse(&scaled).unwrap().prediction(), fused.prediction());
        prop_assert_eq!(max_rule_patches(&scaled).unwrap(), scores[best].scaled(k));

        // any grouping accumulates to the same sum
        let mid = scores.len() / 2;
        if mid > 0 {
            let parts = [sum_fuse(&scores[..mid]).unwrap(), sum_fuse(&scores[mid..]).unwrap()];
            let regrouped = sum_fuse(&parts).unwrap();
            prop_assert!((regrouped.release - fused.release).abs() < 1e-9);
            prop_assert!((regrouped.no_release - fused.no_release).abs() < 1e-9);
        }
    }
}

fn boxes(conf: &[f64]) -> Vec<DetectionBox> {
    conf.iter()
        .map(|&c| DetectionBox::new(0.0, 0.0, 5.0, 5.0, c).unwrap())
        .collect()
}

#[test]
fn detector_truth_table() {
    let cases: [(&[f64], Label); 7] = [
        (&[], Label::NoRelease),
        (&[0.3, 0.7], Label::Release),
        (&[0.5], Label::NoRelease),
        (&[0.500001], Label::Release),
        (&[0.2, 0.4], Label::NoRelease),
        (&[0.9, 0.1, 0.5], Label::Release),
        (&[1.0], Label::Release),
    ];
    for (conf, want) in cases {
        assert_eq!(detector_decision(&boxes(conf), 0.5), want, "{conf:?}");
    }
}

#[test]
fn worked_examples() {
    let sv = |a, b| ScoreVector::new(a, b).unwrap();
    let f = sum_fuse(&[sv(0.9, 0.1), sv(0.2, 0.8)]).unwrap();
    assert!((f.no_release - 1.1).abs() < 1e-12 && (f.release - 0.9).abs() < 1e-12);
    assert_eq!(f.prediction(), Label::NoRelease);
    assert_eq!(
        max_rule_patches(&[sv(0.6, 0.4), sv(0.1, 0.9), sv(0.7, 0.3)]).unwrap(),
        sv(0.1, 0.9)
    );
    assert_eq!(max_rule_patches(&[sv(0.2, 0.8), sv(0.3, 0.8)]).unwrap(), sv(0.2, 0.8));
    assert!(sum_fuse(&[]).is_err() && max_rule_patches(&[]).is_err());
}

#[test]
fn single_member_fusion_is_identity() {
    let scores: BTreeMap<String, ScoreVector> = (0..20)
        .map(|i| {
            (
                format!("s{i}"),
                ScoreVector::new(0.05 * i as f64, 1.0 - 0.05 * i as f64).unwrap(),
            )
        })
        .collect();
    let labels: BTreeMap<String, Label> = scores.keys().map(|k| (k.clone(), Label::Release)).collect();
    let config = EnsembleConfig {
        name: "one".into(),
        fusion: FusionRule::Sum,
        detector_mapping: Default::default(),
        members: vec![Member {
            method: MethodId::GLOBAL[0],
            background: Background::A,
            scores: "unused.csv".into(),
        }],
    };
    let fused = run_ensemble(&config, &[MemberScores::Classifier(scores.clone())], &labels).unwrap();
    for f in fused {
        assert_eq!(f.scores, scores[&f.sample_id]);
    }
}

#[test]
fn scores_fused_bookkeeping() {
    let counts: Vec<(String, usize)> = NamedEnsemble::ALL
        .iter()
        .map(|e| (e.to_string(), e.member_count()))
        .collect();
    let want = [
        ("O", 1),
        ("1", 1),
        ("2", 1),
        ("Global(A)", 3),
        ("Global", 9),
        ("Patch", 6),
        ("YOLOv2", 3),
        ("Global+Patch", 15),
        ("Global+Patch+Saliency", 60),
        ("AllMethods", 63),
    ];
    assert_eq!(counts, want.map(|(n, c)| (n.to_string(), c)));
    assert_eq!(MethodId::derived().len(), 20);
}
