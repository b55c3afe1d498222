use std::time::Instant;

use firescope_core::metrics::{self, BCE_EPSILON};
use firescope_core::{BurntMask, Field, FireEvent};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{encode_event, encode_target, Fidn, ModelInput};
use crate::graph::{Graph, Mode};
use crate::optim::{Adam, AdamConfig};
use crate::{NnError, ParamStore, Real, Result, Tensor};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: AdamConfig,
    /// Seeds the per-epoch shuffle.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 20,
            batch_size: 4,
            optimizer: AdamConfig::default(),
            seed: 0,
        }
    }
}

/// One encoded training or validation event.
#[derive(Clone, Debug)]
pub struct Sample<T> {
    pub name: String,
    pub input: ModelInput<T>,
    pub target: Tensor<T>,
    pub truth: BurntMask,
}

impl<T: Real> Sample<T> {
    pub fn from_event(event: &FireEvent, model: &Fidn) -> Result<Self> {
        Ok(Sample {
            name: event.name.clone(),
            input: encode_event(event, model.config())?,
            target: encode_target(&event.final_mask)?,
            truth: event.final_mask.clone(),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Validation,
}

/// Per-sample metric means of the raw probability map against the final mask.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricMeans {
    pub bce: f64,
    pub mse: f64,
    pub rrmse: f64,
    pub ssim: f64,
    pub psnr: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub split: Split,
    pub bce: f64,
    pub mse: f64,
    pub rrmse: f64,
    pub ssim: f64,
    pub psnr: f64,
}

impl EpochRecord {
    fn new(epoch: usize, split: Split, m: MetricMeans) -> Self {
        EpochRecord {
            epoch,
            split,
            bce: m.bce,
            mse: m.mse,
            rrmse: m.rrmse,
            ssim: m.ssim,
            psnr: m.psnr,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub curves: Vec<EpochRecord>,
    /// Epoch whose parameters were kept (1-based).
    pub best_epoch: usize,
    pub best_bce: f64,
    pub steps: usize,
    pub seconds: f64,
}

#[derive(Default)]
struct Accumulator {
    sum: MetricMeans,
    n: usize,
}

impl Accumulator {
    fn add<T: Real>(&mut self, truth: &BurntMask, prob: &Field<T>) -> Result<()> {
        let r = metrics::evaluate(truth, prob)?;
        self.sum.bce += r.bce.to_f64_lossless();
        self.sum.mse += r.mse.to_f64_lossless();
        self.sum.rrmse += r.rrmse.to_f64_lossless();
        self.sum.ssim += r.ssim.to_f64_lossless();
        self.sum.psnr += r.psnr.to_f64_lossless();
        self.n += 1;
        Ok(())
    }

    fn mean(&self) -> MetricMeans {
        let n = self.n.max(1) as f64;
        MetricMeans {
            bce: self.sum.bce / n,
            mse: self.sum.mse / n,
            rrmse: self.sum.rrmse / n,
            ssim: self.sum.ssim / n,
            psnr: self.sum.psnr / n,
        }
    }
}

fn split_fields<T: Real>(t: &Tensor<T>) -> Result<Vec<Field<T>>> {
    let [n, _, h, w] = t.shape();
    (0..n)
        .map(|i| Ok(Field::from_vec(h, w, t.data()[i * h * w..(i + 1) * h * w].to_vec())?))
        .collect()
}

/// One optimiser step on a batch in train mode. Returns the batch loss and
/// the per-sample probability maps seen before the update.
pub fn train_step<T: Real>(
    model: &Fidn,
    params: &mut ParamStore<T>,
    adam: &mut Adam<T>,
    batch: &[&Sample<T>],
) -> Result<(f64, Vec<Field<T>>)> {
    let input = ModelInput::stack(&batch.iter().map(|s| &s.input).collect::<Vec<_>>())?;
    let target = Tensor::stack_batch(&batch.iter().map(|s| &s.target).collect::<Vec<_>>())?;
    let mut g = Graph::new();
    let out = model.forward(&mut g, params, Mode::Train, &input)?;
    let probs = split_fields(g.value(out)?)?;
    let loss = g.bce(out, &target, T::of(BCE_EPSILON))?;
    let value = g.value(loss)?.data()[0].to_f64_lossless();
    if !value.is_finite() {
        return Err(NnError::Diverged { epoch: 0, loss: value });
    }
    let grads = g.backward(loss)?;
    params.set_grads(&grads)?;
    adam.step(params);
    params.apply_running_stats(&g.take_bn_stats(), T::of(model.config().bn_momentum))?;
    Ok((value, probs))
}

/// Eval-mode metric means over `samples`.
pub fn evaluate_samples<T: Real>(
    model: &Fidn,
    params: &ParamStore<T>,
    samples: &[Sample<T>],
    batch_size: usize,
) -> Result<MetricMeans> {
    let mut acc = Accumulator::default();
    for chunk in samples.chunks(batch_size.max(1)) {
        let input = ModelInput::stack(&chunk.iter().map(|s| &s.input).collect::<Vec<_>>())?;
        let mut g = Graph::new();
        let out = model.forward(&mut g, params, Mode::Eval, &input)?;
        for (s, p) in chunk.iter().zip(split_fields(g.value(out)?)?) {
            acc.add(&s.truth, &p)?;
        }
    }
    Ok(acc.mean())
}

/// Minimises BCE with Adam, recording train and validation metrics every
/// epoch. On return `params` holds the epoch with the lowest validation BCE
/// (training BCE when there is no validation set).
pub fn train<T: Real>(
    model: &Fidn,
    params: &mut ParamStore<T>,
    cfg: &TrainConfig,
    train_set: &[Sample<T>],
    val_set: &[Sample<T>],
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainReport> {
    if train_set.is_empty() {
        return Err(NnError::Config("training set is empty".into()));
    }
    if cfg.batch_size == 0 {
        return Err(NnError::Config("batch_size must be >= 1".into()));
    }
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(cfg.optimizer.clone());
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut curves = Vec::new();
    let mut best: Option<(f64, usize, ParamStore<T>)> = None;
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut acc = Accumulator::default();
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&Sample<T>> = chunk.iter().map(|&i| &train_set[i]).collect();
            let (_, probs) = train_step(model, params, &mut adam, &batch).map_err(|e| match e {
                NnError::Diverged { loss, .. } => NnError::Diverged { epoch, loss },
                e => e,
            })?;
            for (s, p) in batch.iter().zip(&probs) {
                acc.add(&s.truth, p)?;
            }
        }
        let tr = EpochRecord::new(epoch, Split::Train, acc.mean());
        on_epoch(&tr);
        curves.push(tr);
        let score = if val_set.is_empty() {
            tr.bce
        } else {
            let v = EpochRecord::new(
                epoch,
                Split::Validation,
                evaluate_samples(model, params, val_set, cfg.batch_size)?,
            );
            on_epoch(&v);
            curves.push(v);
            v.bce
        };
        if best.as_ref().is_none_or(|(b, _, _)| score < *b) {
            best = Some((score, epoch, params.clone()));
        }
    }
    let (best_bce, best_epoch) = match best {
        Some((b, e, p)) => {
            *params = p;
            (b, e)
        }
        None => (f64::NAN, 0),
    };
    Ok(TrainReport {
        curves,
        best_epoch,
        best_bce,
        steps: adam.steps() as usize,
        seconds: start.elapsed().as_secs_f64(),
    })
}
