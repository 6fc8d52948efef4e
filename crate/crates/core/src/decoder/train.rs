//! Mini-batch training with Adam and a two-phase learning rate.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::{chamfer_with_grad, loss_chamfer, loss_frobenius, LossKind};
use super::mlp::Adam;
use super::model::{to_points, DecoderModel, EpochLoss};
use crate::encoding::SpectralEncoding;
use crate::error::{invalid, Error, Result};
use crate::geom::Shape;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub late_learning_rate: f64,
    /// First epoch trained with `late_learning_rate`.
    pub schedule_switch: usize,
    pub seed: u64,
    pub loss: LossKind,
    pub dropout: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 2000,
            batch_size: 64,
            learning_rate: 2e-3,
            late_learning_rate: 1.8e-3,
            schedule_switch: 1000,
            seed: 0,
            loss: LossKind::Frobenius,
            dropout: 0.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(invalid("epochs and batch_size must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.late_learning_rate > 0.0) {
            return Err(invalid("learning rates must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(invalid(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }

    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        if epoch < self.schedule_switch {
            self.learning_rate
        } else {
            self.late_learning_rate
        }
    }
}

/// Paired encodings and target shapes.
#[derive(Clone, Copy, Debug)]
pub struct Samples<'a> {
    pub encodings: &'a [SpectralEncoding],
    pub shapes: &'a [Shape],
}

impl<'a> Samples<'a> {
    pub fn new(encodings: &'a [SpectralEncoding], shapes: &'a [Shape]) -> Result<Self> {
        if encodings.len() != shapes.len() {
            return Err(Error::DimensionMismatch {
                expected: encodings.len(),
                got: shapes.len(),
            });
        }
        Ok(Self { encodings, shapes })
    }

    pub fn empty() -> Self {
        Self {
            encodings: &[],
            shapes: &[],
        }
    }

    pub fn len(&self) -> usize {
        self.encodings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.encodings.is_empty()
    }
}

fn check_targets(model: &DecoderModel, samples: &Samples, kind: LossKind) -> Result<()> {
    if samples.encodings.len() != samples.shapes.len() {
        return Err(Error::DimensionMismatch {
            expected: samples.encodings.len(),
            got: samples.shapes.len(),
        });
    }
    for s in samples.shapes {
        let n = s.n_vertices();
        if kind == LossKind::Frobenius && n != model.n_vertices() {
            return Err(Error::DimensionMismatch {
                expected: model.n_vertices(),
                got: n,
            });
        }
    }
    Ok(())
}

/// Mean per-sample loss of eval-mode predictions.
pub fn evaluate_loss(model: &DecoderModel, samples: &Samples, kind: LossKind) -> Result<f64> {
    check_targets(model, samples, kind)?;
    if samples.is_empty() {
        return Err(invalid("no samples to evaluate"));
    }
    let mut total = 0.0;
    for (chunk_e, chunk_s) in samples.encodings.chunks(256).zip(samples.shapes.chunks(256)) {
        for (pred, shape) in model.predict(chunk_e)?.iter().zip(chunk_s) {
            total += match kind {
                LossKind::Frobenius => loss_frobenius(pred, shape.vertices())?,
                LossKind::Chamfer => loss_chamfer(pred, shape.vertices())?,
            };
        }
    }
    Ok(total / samples.len() as f64)
}

/// Per-dimension mean and standard deviation; constant dimensions keep scale 1.
fn standardization(encodings: &[SpectralEncoding]) -> (Vec<f64>, Vec<f64>) {
    let d = encodings[0].len();
    let n = encodings.len() as f64;
    let mut mean = vec![0.0; d];
    for e in encodings {
        for (m, v) in mean.iter_mut().zip(&e.values) {
            *m += v / n;
        }
    }
    let mut var = vec![0.0; d];
    for e in encodings {
        for ((s, v), m) in var.iter_mut().zip(&e.values).zip(&mean) {
            *s += (v - m) * (v - m) / n;
        }
    }
    let scale = var
        .iter()
        .zip(&mean)
        .map(|(v, m)| {
            let s = v.sqrt();
            if s > 1e-12 * (1.0 + m.abs()) {
                s
            } else {
                1.0
            }
        })
        .collect();
    (mean, scale)
}

fn flat_targets(shapes: &[Shape], n: usize) -> Array2<f32> {
    let mut t = Array2::zeros((shapes.len(), 3 * n));
    for (r, s) in shapes.iter().enumerate() {
        for (i, p) in s.vertices().iter().enumerate() {
            for c in 0..3 {
                t[(r, 3 * i + c)] = p[c] as f32;
            }
        }
    }
    t
}

/// Trains `model` in place and returns the per-epoch losses of this call.
///
/// A fresh model (no epochs trained yet) first takes its input
/// standardization from the training encodings and its output bias from the
/// mean target. On a non-finite loss the model is left at its last finite
/// state and `Error::Diverged` is returned.
pub fn train(
    model: &mut DecoderModel,
    train_set: &Samples,
    test_set: &Samples,
    config: &TrainConfig,
) -> Result<Vec<EpochLoss>> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(invalid("training set is empty"));
    }
    check_targets(model, train_set, config.loss)?;
    check_targets(model, test_set, config.loss)?;
    let n = model.n_vertices();

    if model.meta.training.epochs == 0 {
        let (mean, scale) = standardization(train_set.encodings);
        if mean.len() != model.input_len() {
            return Err(Error::LayoutMismatch);
        }
        model.meta.input_mean = mean;
        model.meta.input_scale = scale;
        let bias = &mut model.net.dense.last_mut().expect("output layer").bias;
        bias.fill(0.0);
        match config.loss {
            LossKind::Frobenius => {
                // per-coordinate standardization; coordinates constant over the
                // training set get scale 0 and are reproduced exactly
                let t = flat_targets(train_set.shapes, n).mapv(f64::from);
                let mean = t.mean_axis(Axis(0)).expect("non-empty");
                let scale = t.std_axis(Axis(0), 0.0);
                model.meta.output_mean = mean.to_vec();
                model.meta.output_scale = scale.to_vec();
            }
            LossKind::Chamfer => {
                // clouds of any size: every output point starts at the mean centroid
                let m = train_set.len() as f64;
                for s in train_set.shapes {
                    let p = centroid(s.vertices());
                    for i in 0..n {
                        for c in 0..3 {
                            bias[3 * i + c] += (p[c] / m) as f32;
                        }
                    }
                }
                model.meta.output_mean.clear();
                model.meta.output_scale.clear();
            }
        }
        model.meta.training.seed = config.seed;
        model.meta.training.loss = config.loss;
    }
    model.net.dropout = config.dropout;
    model.meta.dropout = config.dropout;

    let x = model.prepare_inputs(train_set.encodings)?;
    let targets = (config.loss == LossKind::Frobenius).then(|| flat_targets(train_set.shapes, n));
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(model.meta.training.epochs as u64);
    let out_scale = (!model.meta.output_scale.is_empty())
        .then(|| Array1::from_iter(model.meta.output_scale.iter().map(|&v| v as f32)));
    let mut adam = Adam::for_model(&mut model.net);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);

    for _ in 0..config.epochs {
        let epoch = model.meta.training.epochs;
        let lr = config.learning_rate_at(epoch);
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut seen = 0;
        // a short trailing batch gives batch-norm statistics from a handful of samples
        let full = (order.len() / config.batch_size).max(1);
        for batch in order.chunks(config.batch_size).take(full) {
            let xb = x.select(Axis(0), batch);
            let saved_norms = model.net.norms.clone();
            let (mut y, cache) = model.net.forward_train(xb.view(), &mut rng)?;
            model.destandardize(&mut y);
            let b = batch.len() as f32;
            let (loss, mut grad) = match &targets {
                Some(t) => {
                    let mut diff = y - &t.select(Axis(0), batch);
                    let loss: f64 = diff.iter().map(|&v| f64::from(v) * f64::from(v)).sum();
                    diff *= 2.0 / b;
                    (loss, diff)
                }
                None => {
                    let mut grad = Array2::zeros(y.raw_dim());
                    let mut loss = 0.0;
                    for (r, &s) in batch.iter().enumerate() {
                        let pred = to_points(y.row(r).iter().copied());
                        let (l, g) = chamfer_with_grad(&pred, train_set.shapes[s].vertices())?;
                        loss += l;
                        for (i, gp) in g.iter().enumerate() {
                            for c in 0..3 {
                                grad[(r, 3 * i + c)] = (gp[c] as f32) / b;
                            }
                        }
                    }
                    (loss, grad)
                }
            };
            if let Some(scale) = &out_scale {
                grad *= scale;
            }
            let grads = model.net.backward(&cache, grad);
            if !loss.is_finite() || grads.iter().flatten().any(|g| !g.is_finite()) {
                model.net.norms = saved_norms;
                return Err(Error::Diverged { epoch });
            }
            adam.step(model.net.parameters_mut(), &grads, lr);
            total += loss;
            seen += batch.len();
        }
        if !model.net.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        let train_loss = total / seen as f64;
        let test_loss = if test_set.is_empty() {
            None
        } else {
            Some(evaluate_loss(model, test_set, config.loss)?)
        };
        let record = EpochLoss {
            epoch,
            train: train_loss,
            test: test_loss,
        };
        log::debug!("epoch {epoch}: train {train_loss:e} test {test_loss:?}");
        model.meta.training.epochs += 1;
        model.meta.training.history.push(record.clone());
        history.push(record);
    }
    Ok(history)
}

fn centroid(pts: &[[f64; 3]]) -> [f64; 3] {
    let n = pts.len() as f64;
    pts.iter().fold([0.0; 3], |a, p| [a[0] + p[0] / n, a[1] + p[1] / n, a[2] + p[2] / n])
}

/// `epoch,train_loss,test_loss` rows; an absent test loss is left empty.
pub fn loss_history_csv(history: &[EpochLoss]) -> String {
    let mut out = String::from("epoch,train_loss,test_loss\n");
    for h in history {
        let test = h.test.map(|t| format!("{t:e}")).unwrap_or_default();
        writeln!(out, "{},{:e},{}", h.epoch, h.train, test).expect("write to string");
    }
    out
}

pub fn write_loss_csv(history: &[EpochLoss], path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, loss_history_csv(history))?;
    Ok(())
}
