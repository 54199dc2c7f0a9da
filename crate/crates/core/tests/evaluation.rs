use attkws::evaluation::{frr_at_fa, roc, score_dataset, score_manifest, ExampleScore};
use attkws::features::{FeatureExtractor, FeatureMatrix, FrontendConfig};
use attkws::models::{AttentionKind, EncoderKind, Model, ModelConfig};
use attkws::numerics::{Rng, Tensor};
use attkws::training::{Dataset, Example, Label, Manifest};

fn example(id: &str, label: Label, x: Tensor<f32>) -> Example {
    let frames = x.rows();
    Example {
        id: id.into(),
        label,
        features: FeatureMatrix::new(x).unwrap(),
        span: None,
        alignment: None,
        duration_s: frames as f64 * 0.01,
    }
}

fn random(frames: usize, seed: u64) -> Tensor<f32> {
    let mut rng = Rng::new(seed);
    Tensor::from_vec(
        &[frames, 40],
        (0..frames * 40).map(|_| rng.uniform(0.0, 1.5) as f32).collect(),
    )
    .unwrap()
}

/// Encodes the whole clip once, then attends over every full window ending at each frame.
fn max_window_score(model: &Model<f32>, x: &Tensor<f32>, w: usize) -> f64 {
    let h = model.encode(x).unwrap();
    let e: Vec<f32> = (0..h.rows()).map(|t| model.frame_score(h.row(t)).unwrap()).collect();
    (w - 1..h.rows())
        .map(|end| {
            let start = end + 1 - w;
            model
                .score_window((start..=end).map(|t| h.row(t)), &e[start..=end])
                .unwrap() as f64
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

#[test]
fn dataset_scores_are_max_over_windows() {
    let cfg = ModelConfig::attention(EncoderKind::Gru, 1, 8, AttentionKind::Soft);
    let model = Model::<f32>::new(&cfg, &mut Rng::new(5)).unwrap();
    let xs: Vec<Tensor<f32>> = (0..6).map(|i| random(60 + 17 * i, 40 + i as u64)).collect();
    let ds = Dataset::new(
        xs.iter()
            .enumerate()
            .map(|(i, x)| {
                example(
                    &format!("e{i}"),
                    if i % 2 == 0 { Label::Positive } else { Label::Negative },
                    x.clone(),
                )
            })
            .collect(),
    );
    let scores = score_dataset(&model, &ds, 30).unwrap();
    for (s, x) in scores.iter().zip(&xs) {
        let want = max_window_score(&model, x, 30);
        assert!((s.score - want).abs() <= 1e-5, "{}: {} vs {want}", s.id, s.score);
        assert!(!s.short);
    }
}

#[test]
fn short_examples_score_zero() {
    let cfg = ModelConfig::attention(EncoderKind::Lstm, 1, 4, AttentionKind::Average);
    let model = Model::<f32>::new(&cfg, &mut Rng::new(1)).unwrap();
    let ds = Dataset::new(vec![example("tiny", Label::Positive, random(20, 1))]);
    let s = &score_dataset(&model, &ds, 30).unwrap()[0];
    assert_eq!((s.score, s.short), (0.0, true));
}

#[test]
fn constant_input_scores_match_single_window() {
    let cfg = ModelConfig::attention(EncoderKind::Gru, 1, 6, AttentionKind::Soft);
    let model = Model::<f32>::new(&cfg, &mut Rng::new(2)).unwrap();
    let x = Tensor::from_vec(&[80, 40], vec![0.0f32; 3200]).unwrap();
    let s = score_dataset(
        &model,
        &Dataset::new(vec![example("z", Label::Negative, x.clone())]),
        25,
    )
    .unwrap();
    assert!((s[0].score - max_window_score(&model, &x, 25)).abs() <= 1e-6);
}

#[test]
fn empty_inputs_are_errors() {
    let cfg = ModelConfig::attention(EncoderKind::Gru, 1, 4, AttentionKind::Soft);
    let model = Model::<f32>::new(&cfg, &mut Rng::new(0)).unwrap();
    assert!(score_dataset(&model, &Dataset::new(vec![]), 10).is_err());
    let fx = FeatureExtractor::new(FrontendConfig::default()).unwrap();
    let empty = Manifest::parse("# nothing\n", None).unwrap();
    assert!(score_manifest(&model, &empty, &fx, 10).is_err());
    assert!(roc(&[], 1.0).is_err());
}

#[test]
fn perfect_separation_gives_zero_frr() {
    let mk = |id: &str, label, score| ExampleScore {
        id: id.into(),
        label,
        score,
        duration_s: 3600.0,
        short: false,
    };
    let scores = vec![
        mk("p1", Label::Positive, 0.9),
        mk("p2", Label::Positive, 0.8),
        mk("n1", Label::Negative, 0.3),
        mk("n2", Label::Negative, 0.1),
    ];
    let curve = roc(&scores, 2.0).unwrap();
    let op = frr_at_fa(&curve, 0.0).unwrap();
    assert_eq!(op.frr(), 0.0);
    assert!(!op.fallback);
    assert!(op.point.threshold > 0.3 && op.point.threshold <= 0.8);
}
