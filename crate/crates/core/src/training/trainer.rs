use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::{sample_example, Dataset, Sample, TrainingPool};
use super::manifest::Label;
use crate::error::{KwsError, Result};
use crate::layers::softmax_xent;
use crate::models::{Model, ModelConfig, ModelKind};
use crate::numerics::{adam_step, add_l2, clip_global_norm, AdamConfig, AdamState, Rng, Tensor};

const TAG_INIT: u64 = 1;
const TAG_BATCH: u64 = 2;
const TAG_VAL: u64 = 3;
const TAG_TRAIN_EVAL: u64 = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub window_frames: usize,
    pub batch_size: usize,
    /// Share of each batch drawn from positives; the count per batch is
    /// `round(batch_size * positive_fraction)` every step.
    pub positive_fraction: f64,
    pub lr: f64,
    /// Rate after the single plateau drop.
    pub lr_final: f64,
    /// Evaluations without a validation improvement before the drop.
    pub patience: usize,
    pub clip_norm: f64,
    pub l2: f64,
    pub seed: u64,
    pub max_steps: usize,
    /// Validation cadence in steps.
    pub eval_every: usize,
    /// Stop once accuracy on the fixed training crops reaches this value.
    pub target_train_accuracy: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            window_frames: 189,
            batch_size: 64,
            positive_fraction: 0.5,
            lr: 1e-3,
            lr_final: 1e-4,
            patience: 3,
            clip_norm: 1.0,
            l2: 1e-5,
            seed: 0,
            max_steps: 2000,
            eval_every: 50,
            target_train_accuracy: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(KwsError::Config(m));
        if self.window_frames == 0 || self.batch_size == 0 || self.max_steps == 0 || self.eval_every == 0 {
            return bad("window_frames, batch_size, max_steps and eval_every must be positive".into());
        }
        if !(self.lr > 0.0 && self.lr_final > 0.0 && self.clip_norm > 0.0 && self.l2 >= 0.0) {
            return bad(format!(
                "rates must be positive: lr={} lr_final={} clip_norm={} l2={}",
                self.lr, self.lr_final, self.clip_norm, self.l2
            ));
        }
        if !(0.0..=1.0).contains(&self.positive_fraction) {
            return bad(format!("positive_fraction {} outside [0, 1]", self.positive_fraction));
        }
        if let Some(a) = self.target_train_accuracy {
            if !(0.0..=1.0).contains(&a) {
                return bad(format!("target_train_accuracy {a} outside [0, 1]"));
            }
        }
        Ok(())
    }

    /// `(positives, negatives)` per batch.
    pub fn batch_split(&self) -> (usize, usize) {
        let pos = ((self.batch_size as f64 * self.positive_fraction).round() as usize).min(self.batch_size);
        (pos, self.batch_size - pos)
    }
}

/// One row of the metrics log.
#[derive(Clone, Debug, PartialEq)]
pub struct StepMetrics {
    pub step: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub lr: f64,
    /// Global gradient norm after clipping, i.e. the one applied.
    pub grad_norm: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalRecord {
    pub step: usize,
    pub val_loss: f64,
    pub train_accuracy: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters with the lowest validation loss.
    pub best: Model<f32>,
    pub best_step: usize,
    /// Parameters after the last step.
    pub last: Model<f32>,
    pub metrics: Vec<StepMetrics>,
    pub evals: Vec<EvalRecord>,
    pub lr_dropped_at: Option<usize>,
    pub skipped_long: usize,
    pub padded: usize,
}

impl TrainOutcome {
    pub fn steps_run(&self) -> usize {
        self.metrics.len()
    }

    pub fn final_train_accuracy(&self) -> Option<f64> {
        self.evals.last().map(|e| e.train_accuracy)
    }
}

/// Loss and correctness of one crop; accumulates gradients when `grad` is given.
fn example_loss(model: &Model<f32>, s: &Sample, grad: Option<&mut Model<f32>>) -> Result<(f64, f64)> {
    match model.config().kind {
        ModelKind::AttentionE2e => {
            let label = s.label.class();
            let positive = s.label == Label::Positive;
            let (loss, hit) = match grad {
                Some(g) => {
                    let (loss, p1) = model.loss_and_grad(&s.x, label, g)?;
                    (loss as f64, (p1 > 0.5) == positive)
                }
                None => {
                    let z: Vec<f64> = model.utterance_logits(&s.x)?.iter().map(|&v| v as f64).collect();
                    (softmax_xent(&z, label)?.0, (z[1] > z[0]) == positive)
                }
            };
            Ok((loss, hit as u8 as f64))
        }
        ModelKind::DeepKws => {
            let loss = match grad {
                Some(g) => model.frame_loss_and_grad(&s.x, &s.frame_labels, g)? as f64,
                None => model.frame_loss(&s.x, &s.frame_labels)? as f64,
            };
            let post = model.frame_posteriors(&s.x)?;
            let hits = s
                .frame_labels
                .iter()
                .enumerate()
                .filter(|&(t, &l)| {
                    let row = post.row(t);
                    (0..row.len()).max_by(|&a, &b| row[a].total_cmp(&row[b])) == Some(l)
                })
                .count();
            Ok((loss, hits as f64 / s.frame_labels.len() as f64))
        }
    }
}

/// Mean loss and accuracy over fixed crops, evaluated in parallel and
/// reduced in order.
fn evaluate(model: &Model<f32>, crops: &[Sample]) -> Result<(f64, f64)> {
    let per = crops
        .par_iter()
        .map(|s| example_loss(model, s, None))
        .collect::<Result<Vec<_>>>()?;
    let n = per.len().max(1) as f64;
    let (l, a) = per.iter().fold((0.0, 0.0), |(l, a), &(x, y)| (l + x, a + y));
    Ok((l / n, a / n))
}

/// One deterministic crop per usable example.
fn fixed_crops(ds: &Dataset, idx: &[usize], window: usize, rng: &Rng) -> Result<Vec<Sample>> {
    idx.iter()
        .map(|&i| sample_example(&ds.examples[i], window, &mut rng.derive(i as u64)))
        .collect()
}

/// Trains `cfg` on `train`, validating on `val`. Runs in the current rayon
/// pool; results are identical for any pool size.
pub fn train(cfg: &ModelConfig, train: &Dataset, val: &Dataset, tcfg: &TrainConfig) -> Result<TrainOutcome> {
    tcfg.validate()?;
    cfg.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(KwsError::Config(
            "training and validation sets must be non-empty".into(),
        ));
    }
    let window = tcfg.window_frames;
    let pool = TrainingPool::new(train, window)?;
    let (n_pos, n_neg) = tcfg.batch_split();
    if (n_pos > 0 && pool.positives.is_empty()) || (n_neg > 0 && pool.negatives.is_empty()) {
        return Err(KwsError::Config(format!(
            "batches need {n_pos} positives and {n_neg} negatives but the training set has {} usable positives and {} negatives",
            pool.positives.len(),
            pool.negatives.len()
        )));
    }
    let val_pool = TrainingPool::new(val, window)?;
    let val_idx: Vec<usize> = val_pool.positives.iter().chain(&val_pool.negatives).copied().collect();
    if val_idx.is_empty() {
        return Err(KwsError::Config("no usable validation examples".into()));
    }

    let root = Rng::new(tcfg.seed);
    let val_crops = fixed_crops(val, &val_idx, window, &root.derive(TAG_VAL))?;
    let train_idx: Vec<usize> = pool.positives.iter().chain(&pool.negatives).copied().collect();
    let train_crops = fixed_crops(train, &train_idx, window, &root.derive(TAG_TRAIN_EVAL))?;

    let mut model = Model::<f32>::new(cfg, &mut root.derive(TAG_INIT))?;
    let mut adam = AdamState::new(model.params());
    let mut adam_cfg = AdamConfig {
        lr: tcfg.lr,
        l2: 0.0,
        ..AdamConfig::default()
    };
    let batch_rng = root.derive(TAG_BATCH);

    let mut metrics = Vec::new();
    let mut evals = Vec::new();
    let mut best: Option<(f64, usize, Model<f32>)> = None;
    let mut stale = 0usize;
    let mut lr_dropped_at = None;

    for step in 1..=tcfg.max_steps {
        let step_rng = batch_rng.derive(step as u64);
        let samples = (0..tcfg.batch_size)
            .map(|i| {
                let mut rng = step_rng.derive(i as u64);
                let from = if i < n_pos { &pool.positives } else { &pool.negatives };
                let idx = from[rng.below(from.len())];
                sample_example(&train.examples[idx], window, &mut rng).map(|s| (idx, s))
            })
            .collect::<Result<Vec<_>>>()?;

        let results = samples
            .par_iter()
            .map(|(_, s)| {
                let mut g = model.zeros_like();
                let (loss, _) = example_loss(&model, s, Some(&mut g))?;
                Ok((loss, g))
            })
            .collect::<Result<Vec<_>>>()?;

        let mut grad = model.zeros_like();
        let mut loss_sum = 0.0;
        for (k, (loss, g)) in results.iter().enumerate() {
            if !loss.is_finite() {
                return Err(KwsError::NonFinite(format!(
                    "training loss at step {step} (example {}, lr {}, last mean loss {:?})",
                    train.examples[samples[k].0].id,
                    adam_cfg.lr,
                    metrics.last().map(|m: &StepMetrics| m.train_loss)
                )));
            }
            loss_sum += loss;
            for (acc, t) in grad.params_mut().into_iter().zip(g.params()) {
                acc.axpy(1.0, t)?;
            }
        }
        let inv = 1.0 / tcfg.batch_size as f32;
        grad.params_mut().into_iter().for_each(|t| t.scale(inv));

        let mut grads: Vec<&mut Tensor<f32>> = grad.params_mut();
        add_l2(&mut grads, &model.params(), tcfg.l2)?;
        let norm = clip_global_norm(&mut grads, tcfg.clip_norm)?;
        let grads: Vec<&Tensor<f32>> = grads.into_iter().map(|g| &*g).collect();
        adam_step(&mut model.params_mut(), &grads, &mut adam, &adam_cfg)?;
        if !model.is_finite() {
            return Err(KwsError::NonFinite(format!(
                "parameters after step {step} (grad norm {norm})"
            )));
        }

        let mut row = StepMetrics {
            step,
            train_loss: loss_sum / tcfg.batch_size as f64,
            val_loss: None,
            lr: adam_cfg.lr,
            grad_norm: norm.min(tcfg.clip_norm),
        };

        if step % tcfg.eval_every == 0 || step == tcfg.max_steps {
            let (val_loss, _) = evaluate(&model, &val_crops)?;
            let (_, train_accuracy) = evaluate(&model, &train_crops)?;
            if !val_loss.is_finite() {
                return Err(KwsError::NonFinite(format!("validation loss at step {step}")));
            }
            row.val_loss = Some(val_loss);
            evals.push(EvalRecord {
                step,
                val_loss,
                train_accuracy,
            });
            log::info!(
                "step {step}: train loss {:.4}, val loss {val_loss:.4}, train acc {train_accuracy:.4}",
                row.train_loss
            );
            if best.as_ref().is_none_or(|(b, _, _)| val_loss < *b) {
                best = Some((val_loss, step, model.clone()));
                stale = 0;
            } else {
                stale += 1;
                if stale >= tcfg.patience && lr_dropped_at.is_none() {
                    adam_cfg.lr = tcfg.lr_final;
                    lr_dropped_at = Some(step);
                    log::info!("validation plateau: learning rate set to {}", tcfg.lr_final);
                }
            }
            metrics.push(row);
            if tcfg.target_train_accuracy.is_some_and(|t| train_accuracy >= t) {
                break;
            }
        } else {
            metrics.push(row);
        }
    }

    let (_, best_step, best_model) = best.expect("the last step always evaluates");
    Ok(TrainOutcome {
        best: best_model,
        best_step,
        last: model,
        metrics,
        evals,
        lr_dropped_at,
        skipped_long: pool.skipped_long.len(),
        padded: pool.padded.len(),
    })
}

/// Accuracy of a model on one fixed crop per usable example.
pub fn window_accuracy(model: &Model<f32>, ds: &Dataset, window: usize, seed: u64) -> Result<f64> {
    let pool = TrainingPool::new(ds, window)?;
    let idx: Vec<usize> = pool.positives.iter().chain(&pool.negatives).copied().collect();
    let crops = fixed_crops(ds, &idx, window, &Rng::new(seed).derive(TAG_TRAIN_EVAL))?;
    Ok(evaluate(model, &crops)?.1)
}

pub const METRICS_HEADER: &str = "step,train_loss,val_loss,lr,grad_norm";

pub fn metrics_csv(rows: &[StepMetrics]) -> String {
    let mut s = String::from(METRICS_HEADER);
    s.push('\n');
    for r in rows {
        let val = r.val_loss.map(|v| format!("{v:.6}")).unwrap_or_default();
        let _ = writeln!(s, "{},{:.6},{},{},{:.6}", r.step, r.train_loss, val, r.lr, r.grad_norm);
    }
    s
}

pub fn write_metrics_csv(rows: &[StepMetrics], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, metrics_csv(rows)).map_err(|e| KwsError::io(path, e))
}
