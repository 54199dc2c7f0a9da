//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use attkws::evaluation::{frr_at_fa, roc, score_dataset, ExampleScore, RocPoint};
use attkws::features::{FeatureExtractor, FeatureMatrix, FrontendConfig};
use attkws::layers::probes::{ConvProbe, DenseProbe, GruProbe, LstmProbe, Probe};
use attkws::layers::ConvSpec;
use attkws::models::probes::{ModelLossProbe, SoftAttentionProbe};
use attkws::models::{
    attend_average, attend_soft, build_model, checkpoint, deep_kws_confidence, smooth_posteriors, AttentionKind,
    EncoderKind, Model, ModelConfig, SoftAttention,
};
use attkws::numerics::{grad_check, grad_check_extended, softmax, Rng, Tensor, DEFAULT_EPS, EXTENDED_EPS};
use attkws::streaming::DecoderState;
use attkws::training::{synth, train, Dataset, Label, TrainConfig, TrainOutcome};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn within(limit: Duration, t0: Instant) -> Result<String, String> {
    let el = t0.elapsed();
    ensure!(
        el <= limit,
        "took {:.1}s, limit {:.0}s",
        el.as_secs_f64(),
        limit.as_secs_f64()
    );
    Ok(format!("{:.2}s", el.as_secs_f64()))
}

// 1
fn parameter_counts() -> Outcome {
    use AttentionKind::{Average, Soft};
    use EncoderKind::{Dnn, Gru, Lstm};
    let t0 = Instant::now();
    let rows: Vec<(ModelConfig, f64)> = vec![
        (ModelConfig::attention(Lstm, 2, 64, Soft), 64.3),
        (ModelConfig::attention(Lstm, 2, 64, Average), 60.0),
        (ModelConfig::attention(Gru, 2, 64, Soft), 53.4),
        (ModelConfig::attention(Gru, 2, 64, Average), 49.2),
        (ModelConfig::attention(Lstm, 1, 64, Soft), 31.2),
        (ModelConfig::attention(Lstm, 3, 64, Soft), 97.3),
        (ModelConfig::attention(Lstm, 1, 128, Soft), 103.0),
        (ModelConfig::attention(Gru, 1, 64, Soft), 28.7),
        (ModelConfig::attention(Gru, 3, 64, Soft), 78.2),
        (ModelConfig::attention(Gru, 1, 128, Soft), 77.5),
        (ModelConfig::crnn(8, 1, 64), 52.5),
        (ModelConfig::crnn(8, 2, 64), 77.3),
        (ModelConfig::crnn(16, 1, 64), 84.1),
        (ModelConfig::crnn(16, 2, 64), 109.0),
        (ModelConfig::deep_kws(Dnn), 62.5),
    ];
    for (cfg, k) in &rows {
        let n = cfg.count_params();
        // Three significant figures, as the tables print them.
        let digits = if n >= 100_000 { 1000.0 } else { 100.0 };
        let shown = (n as f64 / digits).round() * digits / 1000.0;
        ensure!(
            (shown - k).abs() < 1e-9,
            "{} has {n} parameters, expected {k}K",
            cfg.label()
        );
    }
    let t = within(Duration::from_secs(1), t0)?;
    Ok(format!("{} table rows reproduced ({t})", rows.len()))
}

// 2
fn gradient_certification() -> Outcome {
    let t0 = Instant::now();
    let mut rng = Rng::new(2);
    let spec = ConvSpec {
        time_kernel: 4,
        freq_kernel: 5,
        freq_stride: 2,
        in_channels: 1,
        out_channels: 3,
    };
    let layer_probes: Vec<Box<dyn Probe>> = vec![
        Box::new(DenseProbe::new(7, 5, &mut rng)),
        Box::new(LstmProbe::new(6, 5, &mut rng)),
        Box::new(GruProbe::new(6, 5, &mut rng)),
        Box::new(ConvProbe::new(spec, 12, 6, &mut rng)),
        Box::new(SoftAttentionProbe::new(6, 7, &mut rng)),
    ];
    let mut worst = 0.0f64;
    for p in &layer_probes {
        for k in 0..5 {
            let inputs = p.sample_inputs(&mut rng);
            let rep = grad_check(p.as_ref(), &inputs, DEFAULT_EPS).map_err(|e| format!("{}: {e}", p.name()))?;
            ensure!(rep.max_rel_error <= 1e-4, "{} probe {k}: {:?}", p.name(), rep);
            worst = worst.max(rep.max_rel_error);
        }
    }
    let cfg = ModelConfig::attention(EncoderKind::Gru, 1, 16, AttentionKind::Soft);
    let mut model_worst = 0.0f64;
    for k in 0..5 {
        let probe = ModelLossProbe::new(&cfg, 12, &mut rng).map_err(|e| e.to_string())?;
        let inputs = probe.sample_inputs(&mut rng);
        let rep = grad_check_extended(&probe, &inputs, EXTENDED_EPS).map_err(|e| e.to_string())?;
        ensure!(rep.max_rel_error <= 1e-4, "gru/1/16/soft probe {k}: {:?}", rep);
        model_worst = model_worst.max(rep.max_rel_error);
    }
    let t = within(Duration::from_secs(120), t0)?;
    Ok(format!(
        "5 layers x 5 probes max rel err {worst:.1e}; gru/1/16/soft x 5 probes max {model_worst:.1e} ({t})"
    ))
}

fn random_frames(frames: usize, width: usize, rng: &mut Rng) -> Tensor<f32> {
    let data = (0..frames * width).map(|_| rng.uniform(0.0, 2.0) as f32).collect();
    Tensor::from_vec(&[frames, width], data).unwrap()
}

// 3
fn streaming_equivalence() -> Outcome {
    let t0 = Instant::now();
    let mut rng = Rng::new(3);
    let window = 100;
    let mut worst = 0.0f64;
    for i in 0..20 {
        let layers = 1 + rng.below(2);
        let nodes = 4 + rng.below(13);
        let att = if rng.below(2) == 0 {
            AttentionKind::Soft
        } else {
            AttentionKind::Average
        };
        let cfg = match i % 3 {
            0 => ModelConfig::attention(EncoderKind::Lstm, layers, nodes, att),
            1 => ModelConfig::attention(EncoderKind::Gru, layers, nodes, att),
            _ => ModelConfig {
                attention: att,
                ..ModelConfig::crnn(2 + rng.below(6), layers, nodes)
            },
        };
        let model = Model::<f32>::new(&cfg, &mut rng).map_err(|e| e.to_string())?;
        let x = random_frames(500, cfg.input_dim, &mut rng);
        let h = model.encode(&x).map_err(|e| e.to_string())?;
        let e: Vec<f32> = (0..h.rows()).map(|t| model.frame_score(h.row(t)).unwrap()).collect();
        let mut dec = DecoderState::new(&model, window).map_err(|e| e.to_string())?;
        for t in 0..x.rows() {
            let got = dec.push_frame(&model, x.row(t)).map_err(|e| e.to_string())?;
            match got {
                None => ensure!(t + 1 < window, "{} frame {t}: no score after warm-up", cfg.label()),
                Some(s) => {
                    ensure!(t + 1 >= window, "{} frame {t}: score during warm-up", cfg.label());
                    let lo = t + 1 - window;
                    let want = model.score_window((lo..=t).map(|k| h.row(k)), &e[lo..=t]).unwrap();
                    let d = (s - want).abs() as f64;
                    ensure!(d <= 1e-5, "{} frame {t}: {s} vs {want}", cfg.label());
                    worst = worst.max(d);
                }
            }
        }
        let want_evals = 500 * cfg.layers as u64;
        ensure!(
            dec.cell_evals() == want_evals,
            "{}: {} cell evaluations for 500 frames, expected {want_evals}",
            cfg.label(),
            dec.cell_evals()
        );
    }
    let t = within(Duration::from_secs(60), t0)?;
    Ok(format!(
        "20 models x 500 frames, max |diff| {worst:.1e}, one cell step per layer per frame ({t})"
    ))
}

// 4
fn attention_properties() -> Outcome {
    let mut rng = Rng::new(4);
    let mut worst_sum = 0.0f64;
    for k in 0..1000 {
        let d = 1 + rng.below(16);
        let t = 1 + rng.below(120);
        let p = SoftAttention::<f64>::new(d, &mut rng).map_err(|e| e.to_string())?;
        let data = (0..t * d).map(|_| rng.uniform(-3.0, 3.0)).collect();
        let h = Tensor::from_vec(&[t, d], data).unwrap();
        let (_, a) = attend_soft(&h, &p).map_err(|e| e.to_string())?;
        let s: f64 = a.iter().sum();
        ensure!((s - 1.0).abs() <= 1e-6, "input {k}: weights sum to {s}");
        worst_sum = worst_sum.max((s - 1.0).abs());

        let row: Vec<f64> = (0..d).map(|_| rng.uniform(-3.0, 3.0)).collect();
        let same = Tensor::from_vec(&[t, d], row.repeat(t)).unwrap();
        let (_, a) = attend_soft(&same, &p).map_err(|e| e.to_string())?;
        ensure!(
            a.iter().all(|&w| (w - 1.0 / t as f64).abs() <= 1e-12),
            "input {k}: identical rows gave non-uniform weights"
        );

        let mut zero_v = p.clone();
        zero_v.v.fill(0.0);
        let (c, _) = attend_soft(&h, &zero_v).map_err(|e| e.to_string())?;
        ensure!(
            c == attend_average(&h).unwrap(),
            "input {k}: v = 0 differs from average attention"
        );
    }
    Ok(format!(
        "1000 inputs, max |sum - 1| {worst_sum:.1e}; uniform on identical rows; v=0 equals average bit for bit"
    ))
}

fn brute_roc(scores: &[ExampleScore], hours: f64) -> Vec<RocPoint> {
    let mut ts: Vec<f64> = scores.iter().map(|s| s.score).chain([0.0, 1.0]).collect();
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    let pos: Vec<f64> = scores
        .iter()
        .filter(|s| s.label == Label::Positive)
        .map(|s| s.score)
        .collect();
    let neg: Vec<f64> = scores
        .iter()
        .filter(|s| s.label == Label::Negative)
        .map(|s| s.score)
        .collect();
    ts.into_iter()
        .map(|t| RocPoint {
            threshold: t,
            frr: pos.iter().filter(|&&s| s < t).count() as f64 / pos.len() as f64,
            fa_per_hour: neg.iter().filter(|&&s| s >= t).count() as f64 / hours,
        })
        .collect()
}

fn brute_frr_at_fa(curve: &[RocPoint], target: f64) -> (RocPoint, bool) {
    let mut best: Option<RocPoint> = None;
    for p in curve {
        if p.fa_per_hour <= target {
            best = match best {
                Some(b) if (b.frr, b.threshold) <= (p.frr, p.threshold) => Some(b),
                _ => Some(*p),
            };
        }
    }
    match best {
        Some(b) => (b, false),
        None => (
            *curve.iter().max_by(|a, b| a.threshold.total_cmp(&b.threshold)).unwrap(),
            true,
        ),
    }
}

fn random_scores(rng: &mut Rng) -> Vec<ExampleScore> {
    let n_pos = 1 + rng.below(40);
    let n_neg = 1 + rng.below(40);
    let coarse = rng.below(2) == 0;
    (0..n_pos + n_neg)
        .map(|i| {
            let mut s = rng.uniform(0.0, 1.0);
            if coarse {
                s = (s * 10.0).round() / 10.0;
            }
            ExampleScore {
                id: format!("x{i}"),
                label: if i < n_pos { Label::Positive } else { Label::Negative },
                score: s,
                duration_s: 1.0 + rng.uniform(0.0, 30.0),
                short: false,
            }
        })
        .collect()
}

// 5
fn roc_oracle() -> Outcome {
    let t0 = Instant::now();
    let mut rng = Rng::new(5);
    let mut points = 0;
    for set in 0..100 {
        let scores = random_scores(&mut rng);
        let hours = attkws::evaluation::negative_hours(&scores);
        let curve = roc(&scores, hours).map_err(|e| e.to_string())?;
        ensure!(
            curve == brute_roc(&scores, hours),
            "set {set}: ROC differs from brute force"
        );
        for w in curve.windows(2) {
            ensure!(w[0].threshold < w[1].threshold, "set {set}: thresholds not increasing");
            ensure!(w[0].frr <= w[1].frr, "set {set}: FRR decreased with the threshold");
            ensure!(
                w[0].fa_per_hour >= w[1].fa_per_hour,
                "set {set}: FA/h increased with the threshold"
            );
        }
        let mut last_frr = f64::INFINITY;
        for k in 0..12 {
            let target = k as f64 * 0.5 * (1.0 + set as f64 / 10.0);
            let op = frr_at_fa(&curve, target).map_err(|e| e.to_string())?;
            let (want, fallback) = brute_frr_at_fa(&curve, target);
            ensure!(
                op.point == want && op.fallback == fallback,
                "set {set} target {target}: operating point differs"
            );
            if !op.fallback {
                ensure!(op.frr() <= last_frr, "set {set}: FRR rose as the FA target loosened");
                last_frr = op.frr();
            }
        }
        points += curve.len();
    }
    let t = within(Duration::from_secs(10), t0)?;
    Ok(format!(
        "100 score sets ({points} ROC points) equal the brute-force oracle; monotone ({t})"
    ))
}

// 6
fn deep_kws_oracle() -> Outcome {
    let mut rng = Rng::new(6);
    let mut worst = 0.0f64;
    for trial in 0..50 {
        let t = 1 + rng.below(400);
        let rows: Vec<Vec<f64>> = (0..t)
            .map(|_| softmax(&(0..5).map(|_| rng.uniform(-3.0, 3.0)).collect::<Vec<_>>()))
            .collect();
        let (ws, wm) = if trial % 2 == 0 {
            (20, 100)
        } else {
            (1 + rng.below(30), 1 + rng.below(150))
        };
        let p = Tensor::from_vec(&[t, 5], rows.concat()).unwrap();
        let s = smooth_posteriors(&p, ws).map_err(|e| e.to_string())?;
        for j in 0..t {
            let lo = (j + 1).saturating_sub(ws);
            for c in 0..5 {
                let mean = rows[lo..=j].iter().map(|r| r[c]).sum::<f64>() / (j + 1 - lo) as f64;
                let d = (s.row(j)[c] - mean).abs();
                ensure!(d <= 1e-6, "trial {trial}: smoothed [{j}][{c}] off by {d}");
                worst = worst.max(d);
            }
        }
        let conf = deep_kws_confidence(&s, wm).map_err(|e| e.to_string())?;
        for j in 0..t {
            let lo = (j + 1).saturating_sub(wm);
            let prod: f64 = (1..5)
                .map(|c| (lo..=j).map(|k| s.row(k)[c]).fold(f64::MIN, f64::max))
                .product();
            let want = prod.powf(0.25);
            let d = (conf[j] - want).abs();
            ensure!(d <= 1e-6, "trial {trial}: confidence [{j}] off by {d}");
            worst = worst.max(d);
        }
    }
    Ok(format!("50 random posterior sequences, max |diff| {worst:.1e}"))
}

struct Corpus {
    train: Dataset,
    val: Dataset,
    test: Dataset,
    hours: f64,
}

fn corpus() -> attkws::Result<Corpus> {
    let fx = FeatureExtractor::new(FrontendConfig::default())?;
    let tcfg = synth::SynthConfig::default();
    let build = |cfg: &synth::SynthConfig| synth::featurize(&synth::synthesize(cfg)?, &fx);
    Ok(Corpus {
        train: build(&tcfg)?,
        val: build(&synth::SynthConfig {
            seed: 99,
            positives: 40,
            negatives: 40,
            ..tcfg
        })?,
        test: build(&synth::SynthConfig {
            seed: 7,
            positives: 100,
            negatives: 100,
            ..tcfg
        })?,
        hours: tcfg.total_hours(),
    })
}

fn train_config() -> TrainConfig {
    TrainConfig {
        batch_size: 32,
        eval_every: 50,
        max_steps: 2000,
        target_train_accuracy: Some(0.99),
        seed: 1,
        ..Default::default()
    }
}

fn test_roc(model: &Model<f32>, test: &Dataset) -> attkws::Result<Vec<RocPoint>> {
    let scores = score_dataset(model, test, 100)?;
    roc(&scores, attkws::evaluation::negative_hours(&scores))
}

const FA_GRID: [f64; 9] = [0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0];

// 7
fn end_to_end(c: &Corpus, soft: &TrainOutcome, t0: Instant) -> Outcome {
    let acc = soft.final_train_accuracy().unwrap_or(0.0);
    ensure!(
        acc >= 0.99,
        "training accuracy {acc:.4} after {} steps (need 0.99 within 2000)",
        soft.steps_run()
    );
    ensure!(soft.steps_run() <= 2000, "ran {} steps", soft.steps_run());

    let curve = test_roc(&soft.best, &c.test).map_err(|e| e.to_string())?;
    let mut rng = Rng::new(77);
    let random: Vec<ExampleScore> = c
        .test
        .examples
        .iter()
        .map(|ex| ExampleScore {
            id: ex.id.clone(),
            label: ex.label,
            score: rng.uniform(0.0, 1.0),
            duration_s: ex.duration_s,
            short: false,
        })
        .collect();
    let base = roc(&random, attkws::evaluation::negative_hours(&random)).map_err(|e| e.to_string())?;
    let mut margin = f64::INFINITY;
    for fa in FA_GRID {
        let m = frr_at_fa(&curve, fa).map_err(|e| e.to_string())?.frr();
        let r = frr_at_fa(&base, fa).map_err(|e| e.to_string())?.frr();
        ensure!(r - m >= 0.30, "at {fa} FA/h model FRR {m:.3} vs random {r:.3}");
        margin = margin.min(r - m);
    }

    // Determinism: a second run of the first 100 steps on three worker threads
    // must retrace the reference run bit for bit.
    let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    let prefix = pool
        .install(|| {
            train(
                &ModelConfig::attention(EncoderKind::Gru, 1, 32, AttentionKind::Soft),
                &c.train,
                &c.val,
                &TrainConfig {
                    max_steps: 100,
                    ..train_config()
                },
            )
        })
        .map_err(|e| e.to_string())?;
    let bits = |m: &[attkws::training::StepMetrics]| {
        m.iter()
            .map(|r| (r.train_loss.to_bits(), r.grad_norm.to_bits(), r.lr.to_bits()))
            .collect::<Vec<_>>()
    };
    ensure!(
        bits(&prefix.metrics) == bits(&soft.metrics[..100]),
        "a repeated run diverged within 100 steps"
    );
    let elapsed = t0.elapsed();
    ensure!(
        elapsed <= Duration::from_secs(900),
        "took {:.0}s, limit 900s",
        elapsed.as_secs_f64()
    );

    let frr1 = frr_at_fa(&curve, 1.0).unwrap().frr();
    Ok(format!(
        "{:.2}h corpus, train acc {acc:.4} at step {}, test FRR@1FA/h {:.1}%, min margin over random {:.1}pp on 0..2 FA/h, deterministic ({:.0}s)",
        c.hours,
        soft.steps_run(),
        frr1 * 100.0,
        margin * 100.0,
        elapsed.as_secs_f64()
    ))
}

// 8
fn soft_vs_average(c: &Corpus, soft: &TrainOutcome) -> Outcome {
    let avg_cfg = ModelConfig::attention(EncoderKind::Gru, 1, 32, AttentionKind::Average);
    let avg = train(&avg_cfg, &c.train, &c.val, &train_config()).map_err(|e| e.to_string())?;
    let s = frr_at_fa(&test_roc(&soft.best, &c.test).map_err(|e| e.to_string())?, 1.0)
        .unwrap()
        .frr();
    let a = frr_at_fa(&test_roc(&avg.best, &c.test).map_err(|e| e.to_string())?, 1.0)
        .unwrap()
        .frr();
    let summary = format!("FRR@1FA/h soft {:.1}% vs average {:.1}%", s * 100.0, a * 100.0);
    if s <= a {
        Ok(summary)
    } else if s - a <= 0.02 {
        Ok(format!("{summary}; reversal within 2pp, logged as a finding"))
    } else {
        Err(format!("{summary}; soft is worse by more than 2pp"))
    }
}

fn reference_wav() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/reference.wav")
}

// 9
fn checkpoints_and_reference_features() -> Outcome {
    let mut rng = Rng::new(9);
    let configs = [
        ModelConfig::attention(EncoderKind::Gru, 2, 64, AttentionKind::Soft),
        ModelConfig::attention(EncoderKind::Lstm, 1, 32, AttentionKind::Average),
        ModelConfig::crnn(8, 2, 16),
        ModelConfig::deep_kws(EncoderKind::Dnn),
        ModelConfig::deep_kws(EncoderKind::Lstm),
    ];
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    for cfg in &configs {
        let m = build_model(cfg, &mut rng).map_err(|e| e.to_string())?;
        let path = dir.path().join("m.kwsc");
        checkpoint::save(&m, &path).map_err(|e| e.to_string())?;
        let back = checkpoint::load(&path, Some(cfg)).map_err(|e| e.to_string())?;
        for ((na, a), (nb, b)) in m.named_params().into_iter().zip(back.named_params()) {
            let same = na == nb && a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits());
            ensure!(same, "{}: tensor {na} changed in the round trip", cfg.label());
        }
        ensure!(
            checkpoint::to_bytes(&back) == std::fs::read(&path).unwrap(),
            "{}: re-serialized bytes differ",
            cfg.label()
        );
    }

    let fx = FeatureExtractor::new(FrontendConfig::default()).map_err(|e| e.to_string())?;
    let fm = fx.extract_file(reference_wav()).map_err(|e| e.to_string())?;
    ensure!(
        (fm.num_frames(), fm.channels()) == (189, 40),
        "reference features are {}x{}",
        fm.num_frames(),
        fm.channels()
    );
    let expected = std::fs::read(reference_wav().with_extension("kwsf")).map_err(|e| e.to_string())?;
    ensure!(
        fm.to_bytes() == expected,
        "reference feature bytes differ from the checked-in file"
    );
    ensure!(
        FeatureMatrix::from_bytes(&expected)
            .map_err(|e| e.to_string())?
            .to_bytes()
            == expected,
        "feature file does not round-trip"
    );
    Ok(format!(
        "{} configs round-trip bit for bit; reference WAV gives 189x40, bytes match",
        configs.len()
    ))
}

fn run(name: &str, f: &dyn Fn() -> Outcome) -> bool {
    let t0 = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    });
    let secs = t0.elapsed().as_secs_f64();
    match outcome {
        Ok(detail) => {
            println!("PASS criterion {name}: {detail} [{secs:.1}s]");
            true
        }
        Err(why) => {
            println!("FAIL criterion {name}: {why} [{secs:.1}s]");
            false
        }
    }
}

/// Criterion 8 is a reported trend check: its line is printed as PASS or
/// FAIL like the others but does not decide the exit status.
const REPORTED: &str = "8";

fn main() -> ExitCode {
    let mut results: Vec<(&str, bool)> = Vec::new();
    let mut check = |id: &'static str, name: &str, f: &dyn Fn() -> Outcome| {
        results.push((id, run(&format!("{id} ({name})"), f)));
    };
    check("1", "parameter counts", &parameter_counts);
    check("2", "gradient certification", &gradient_certification);
    check("3", "streaming equals batch", &streaming_equivalence);
    check("4", "attention properties", &attention_properties);
    check("5", "ROC oracle", &roc_oracle);
    check("6", "Deep KWS oracle", &deep_kws_oracle);

    let t0 = Instant::now();
    let trained = corpus().and_then(|c| {
        let soft = train(
            &ModelConfig::attention(EncoderKind::Gru, 1, 32, AttentionKind::Soft),
            &c.train,
            &c.val,
            &train_config(),
        )?;
        Ok((c, soft))
    });
    match &trained {
        Ok((c, soft)) => {
            check("7", "synthetic end-to-end", &|| end_to_end(c, soft, t0));
            check("8", "soft vs average attention", &|| soft_vs_average(c, soft));
        }
        Err(e) => {
            let why = format!("corpus or training failed: {e}");
            check("7", "synthetic end-to-end", &|| Err(why.clone()));
            check(
                "8",
                "soft vs average attention",
                &|| Err("no trained soft model".into()),
            );
        }
    }
    check(
        "9",
        "checkpoints and reference features",
        &checkpoints_and_reference_features,
    );

    let failed: Vec<&str> = results.iter().filter(|r| !r.1).map(|r| r.0).collect();
    let hard: Vec<&str> = failed.iter().copied().filter(|&id| id != REPORTED).collect();
    println!(
        "acceptance: {}/{} criteria pass; failing: {}",
        results.len() - failed.len(),
        results.len(),
        if failed.is_empty() {
            "none".to_string()
        } else {
            failed.join(", ")
        }
    );
    if hard.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
