use std::sync::OnceLock;

use proptest::prelude::*;

use semnav::featurizer::{annotate, visible_objects, Annotation};
use semnav::gridscene::{generate_scene, SceneType};
use semnav::semantics::{
    build_corpus, frame_semantics, frame_width, rank_annotations, top_confidence_sum, train_autoencoder,
    AutoencoderConfig, SentenceEncoder, SLOTS,
};

fn encoder() -> &'static SentenceEncoder {
    static ENC: OnceLock<SentenceEncoder> = OnceLock::new();
    ENC.get_or_init(|| {
        let scenes: Vec<_> = SceneType::ALL.iter().map(|&t| generate_scene(2, t, 8, 8).unwrap()).collect();
        let corpus = build_corpus(&scenes).unwrap();
        train_autoencoder(&corpus, &AutoencoderConfig { epochs: 3, ..Default::default() }).unwrap()
    })
}

fn annotation() -> impl Strategy<Value = Annotation> {
    // coarse values so ties in confidence and area actually occur
    (1u32..=8, 0u32..4, 0u32..4, 1u32..4, 1u32..4, prop::sample::select(vec!["red sink", "small sofa", "wooden table"]))
        .prop_map(|(c, x, y, w, h, words)| Annotation {
            bbox: [x as f64 * 0.1, y as f64 * 0.1, (x + w) as f64 * 0.1, (y + h) as f64 * 0.1],
            confidence: c as f64 / 8.0,
            tokens: words.split(' ').map(str::to_owned).collect(),
        })
}

fn brute_force_best(anns: &[Annotation]) -> f64 {
    let k = anns.len().min(SLOTS);
    let mut best = f64::NEG_INFINITY;
    for mask in 0u32..(1 << anns.len()) {
        if mask.count_ones() as usize != k {
            continue;
        }
        let s: f64 = (0..anns.len()).filter(|i| mask >> i & 1 == 1).map(|i| anns[i].confidence).sum();
        best = best.max(s);
    }
    if k == 0 { 0.0 } else { best }
}

#[test]
fn frame_width_is_345_at_default_dim() {
    assert_eq!(frame_width(64), 345);
    let enc = encoder();
    assert_eq!(enc.dim(), 64);
    let scene = generate_scene(2, SceneType::Bedroom, 8, 8).unwrap();
    for p in scene.valid_poses() {
        assert_eq!(frame_semantics(&annotate(&scene, p), enc).0.len(), 345);
    }
}

#[test]
fn annotations_match_visible_objects() {
    for t in SceneType::ALL {
        let scene = generate_scene(9, t, 10, 10).unwrap();
        for p in scene.valid_poses() {
            let anns = annotate(&scene, p);
            assert_eq!(anns.len(), visible_objects(&scene, p).len());
            for a in &anns {
                assert!(a.confidence > 0.0 && a.confidence <= 1.0);
                assert!(a.bbox[0] < a.bbox[2] && a.bbox[1] < a.bbox[3]);
                assert!(a.bbox.iter().all(|v| (0.0..=1.0).contains(v)));
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn top_five_matches_brute_force(anns in prop::collection::vec(annotation(), 0..10)) {
        let ranked = rank_annotations(&anns);
        prop_assert_eq!(ranked.len(), anns.len());
        let kept: f64 = ranked.iter().take(SLOTS).map(|a| a.confidence).sum();
        prop_assert!((kept - brute_force_best(&anns)).abs() < 1e-12);
        prop_assert!((top_confidence_sum(&anns) - kept).abs() < 1e-12);
        for w in ranked.windows(2) {
            prop_assert!(w[0].confidence > w[1].confidence
                || (w[0].confidence == w[1].confidence && w[0].area() >= w[1].area()));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn frame_slots_are_confidence_ordered(anns in prop::collection::vec(annotation(), 0..9)) {
        let enc = encoder();
        let d = enc.dim();
        let f = frame_semantics(&anns, enc);
        prop_assert_eq!(f.0.len(), frame_width(d));
        let occupied = anns.len().min(SLOTS);
        for i in 0..SLOTS {
            let conf = f.slot(i)[d + 4];
            if i >= occupied {
                prop_assert!(f.slot(i).iter().all(|&v| v == 0.0));
            } else if i + 1 < occupied {
                prop_assert!(conf >= f.slot(i + 1)[d + 4]);
            }
        }
    }
}
