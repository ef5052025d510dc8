//! Losses, metrics, the learning-rate schedule, Adam and the training loop.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::AdError;
use crate::dag::{compile, CompileError};
use crate::datagen::{augment_translate, draw_seed, sample_points, DatagenError, PdeSample};
use crate::encoder::{EncodeError, GraphInput};
use crate::model::{ModelConfig, ModelError, ModelParams};

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("no training samples")]
    EmptyDataset,
    #[error("reference field has zero norm")]
    ZeroReference,
    #[error("non-finite loss at epoch {epoch} on sample {index} (draw {draw})")]
    NonFiniteLoss { epoch: usize, index: usize, draw: u64 },
    #[error("sample {index} has grid {got:?}, model expects n_x = {expected}")]
    ShapeMismatch { index: usize, got: (usize, usize), expected: usize },
    #[error("checkpoint model config differs from the training config")]
    ModelIncompatible,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Ad(#[from] AdError),
    #[error(transparent)]
    Datagen(#[from] DatagenError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// `||truth - pred|| / ||truth||`, accumulated in f64.
pub fn relative_l2(pred: &[f32], truth: &[f32]) -> Result<f64, TrainError> {
    if pred.len() != truth.len() {
        return Err(TrainError::Config(format!("length {} vs {}", pred.len(), truth.len())));
    }
    let mut num = 0.0f64;
    let mut den = 0.0f64;
    for (&p, &t) in pred.iter().zip(truth) {
        let (p, t) = (p as f64, t as f64);
        num += (t - p) * (t - p);
        den += t * t;
    }
    if den == 0.0 {
        return Err(TrainError::ZeroReference);
    }
    Ok((num / den).sqrt())
}

/// Batch mean of per-sample [`relative_l2`].
pub fn nrmse(preds: &[&[f32]], truths: &[&[f32]]) -> Result<f64, TrainError> {
    if preds.len() != truths.len() || preds.is_empty() {
        return Err(TrainError::Config("batch sizes differ or are empty".into()));
    }
    let mut s = 0.0;
    for (p, t) in preds.iter().zip(truths) {
        s += relative_l2(p, t)?;
    }
    Ok(s / preds.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub base_lr: f64,
    pub epochs: usize,
    pub warmup_epochs: usize,
    /// Fractions of `epochs`, strictly increasing in `(0, 1)`.
    pub lr_milestones: Vec<f64>,
    pub lr_decay: f64,
    pub points_per_sample: usize,
    pub seed: u64,
    pub test_fraction: f64,
    /// Random x-translation of every sample, fresh each epoch.
    pub augment: bool,
    /// Global-norm gradient clip.
    pub grad_clip: Option<f64>,
    /// Checkpoint period in epochs; 0 writes only the final one.
    pub checkpoint_every: usize,
    /// Worker threads for per-sample gradients; 0 uses all cores. Gradients
    /// are reduced in sample order, so results do not depend on it.
    pub threads: usize,
    pub model: ModelConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 80,
            base_lr: 3e-4,
            epochs: 1000,
            warmup_epochs: 10,
            lr_milestones: vec![0.4, 0.6, 0.8],
            lr_decay: 0.5,
            points_per_sample: 8192,
            seed: 0,
            test_fraction: 0.1,
            augment: true,
            grad_clip: None,
            checkpoint_every: 0,
            threads: 0,
            model: ModelConfig::desk(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.to_string()));
        if self.epochs == 0 || self.batch_size == 0 || self.points_per_sample == 0 {
            return bad("epochs, batch_size and points_per_sample must be positive");
        }
        if self.warmup_epochs >= self.epochs {
            return bad("warmup_epochs must be below epochs");
        }
        if !self.lr_milestones.iter().all(|&m| m > 0.0 && m < 1.0)
            || !self.lr_milestones.windows(2).all(|w| w[0] < w[1])
        {
            return bad("lr_milestones must be strictly increasing in (0, 1)");
        }
        if !(0.0..1.0).contains(&self.test_fraction) {
            return bad("test_fraction must be in [0, 1)");
        }
        if !(self.base_lr >= 0.0) || !(self.lr_decay > 0.0) {
            return bad("base_lr must be non-negative and lr_decay positive");
        }
        self.model.validate().map_err(TrainError::Config)
    }

    /// First epoch of each decay stage.
    pub fn milestone_epochs(&self) -> Vec<usize> {
        self.lr_milestones.iter().map(|m| (m * self.epochs as f64).round() as usize).collect()
    }
}

/// Linear warmup `base (e + 1) / W`, then `base decay^k` with `k` the
/// number of milestones reached.
pub fn lr_at(epoch: usize, cfg: &TrainConfig) -> f64 {
    if epoch < cfg.warmup_epochs {
        return cfg.base_lr * (epoch + 1) as f64 / cfg.warmup_epochs as f64;
    }
    let passed = cfg.milestone_epochs().iter().filter(|&&m| epoch >= m).count();
    cfg.base_lr * cfg.lr_decay.powi(passed as i32)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    pub m: Vec<f32>,
    pub v: Vec<f32>,
}

impl Adam {
    pub fn new(n: usize) -> Self {
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8, step: 0, m: vec![0.0; n], v: vec![0.0; n] }
    }

    pub fn update(&mut self, params: &mut [f32], grads: &[f32], lr: f64) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        self.step += 1;
        let (b1, b2) = (self.beta1 as f32, self.beta2 as f32);
        let c1 = 1.0 - self.beta1.powi(self.step as i32);
        let c2 = 1.0 - self.beta2.powi(self.step as i32);
        let step = (lr * c2.sqrt() / c1) as f32;
        let eps = (self.eps * c2.sqrt()) as f32;
        for ((p, &g), (m, v)) in params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p -= step * *m / (v.sqrt() + eps);
        }
    }
}

/// Train/test sample indices; a sample is held out when the hash of its
/// index falls below `test_fraction`.
pub fn split_indices(n: usize, test_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    (0..n).partition(|&i| {
        let h = draw_seed(seed ^ 0x5B17, i as u64);
        ((h >> 11) as f64 / (1u64 << 53) as f64) >= test_fraction
    })
}

/// The model input for a sample: its PDE compiled with its IC.
pub fn sample_input(sample: &PdeSample, cfg: &ModelConfig) -> Result<GraphInput, TrainError> {
    let g = compile(&sample.coefficients.to_ast(), &sample.ic_f64(), &cfg.graph())?;
    Ok(GraphInput::new(&g, cfg)?)
}

fn check_grid(samples: &[PdeSample], cfg: &ModelConfig) -> Result<(), TrainError> {
    for (index, s) in samples.iter().enumerate() {
        if s.n_x != cfg.n_x() || s.solution.len() != s.n_t * s.n_x || s.ic.len() != s.n_x {
            return Err(TrainError::ShapeMismatch { index, got: (s.n_t, s.n_x), expected: cfg.n_x() });
        }
    }
    Ok(())
}

/// Coordinates and values of `count` random grid points.
fn point_batch<R: Rng>(rng: &mut R, s: &PdeSample, count: usize) -> Result<(Vec<[f32; 2]>, Vec<f32>), TrainError> {
    let count = count.min(s.n_t * s.n_x);
    let pts = sample_points(rng, s, count)?;
    Ok(pts.iter().map(|&(t, x, v)| (s.coord(t, x), v)).unzip())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub test_loss: Option<f64>,
}

pub struct TrainRun {
    pub params: ModelParams,
    pub optimizer: Adam,
    pub curve: Vec<EpochLog>,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
}

/// Called after every epoch with the current state.
pub type EpochHook<'a> = dyn FnMut(&EpochLog, &ModelParams, &Adam) -> Result<(), TrainError> + 'a;

/// Minibatch Adam on the per-sample nRMSE, averaged over each batch.
///
/// `init` continues from existing parameters (fine-tuning); otherwise the
/// model is initialized from `cfg.seed`.
pub fn train(
    samples: &[PdeSample],
    cfg: &TrainConfig,
    init: Option<ModelParams>,
    on_epoch: &mut EpochHook,
) -> Result<TrainRun, TrainError> {
    cfg.validate()?;
    let mut params = match init {
        Some(p) if p.config != cfg.model => return Err(TrainError::ModelIncompatible),
        Some(p) => p,
        None => ModelParams::init(cfg.model.clone(), cfg.seed)?,
    };
    check_grid(samples, &cfg.model)?;
    let (train_idx, test_idx) = split_indices(samples.len(), cfg.test_fraction, cfg.seed);
    if train_idx.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| TrainError::Config(e.to_string()))?;

    // Held-out points stay fixed across epochs.
    let test_set = test_idx
        .iter()
        .map(|&i| {
            let mut rng = ChaCha8Rng::seed_from_u64(draw_seed(cfg.seed ^ 0x7E57, i as u64));
            let (coords, target) = point_batch(&mut rng, &samples[i], cfg.points_per_sample)?;
            Ok((sample_input(&samples[i], &cfg.model)?, coords, target))
        })
        .collect::<Result<Vec<_>, TrainError>>()?;

    let mut adam = Adam::new(params.data.len());
    let mut curve = Vec::with_capacity(cfg.epochs);
    let mut order = train_idx.clone();
    for epoch in 0..cfg.epochs {
        let lr = lr_at(epoch, cfg);
        let epoch_seed = draw_seed(cfg.seed, epoch as u64);
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(epoch_seed));
        let mut loss_sum = 0.0f64;
        for batch in order.chunks(cfg.batch_size) {
            let results: Vec<Result<(f32, Vec<f32>), TrainError>> = pool.install(|| {
                batch
                    .par_iter()
                    .map(|&i| {
                        let mut rng = ChaCha8Rng::seed_from_u64(draw_seed(epoch_seed, i as u64));
                        let s = &samples[i];
                        let shifted;
                        let s = if cfg.augment {
                            shifted = augment_translate(s, rng.random_range(0..s.n_x));
                            &shifted
                        } else {
                            s
                        };
                        let input = sample_input(s, &cfg.model)?;
                        let (coords, target) = point_batch(&mut rng, s, cfg.points_per_sample)?;
                        Ok(params.loss_and_grad(&input, &coords, &target)?)
                    })
                    .collect()
            });
            let mut grad = vec![0.0f32; params.data.len()];
            for (&i, r) in batch.iter().zip(results) {
                let (loss, g) = r?;
                if !loss.is_finite() || g.iter().any(|v| !v.is_finite()) {
                    return Err(TrainError::NonFiniteLoss { epoch, index: i, draw: samples[i].draw });
                }
                loss_sum += loss as f64;
                grad.iter_mut().zip(&g).for_each(|(a, &b)| *a += b);
            }
            let inv = 1.0 / batch.len() as f32;
            grad.iter_mut().for_each(|g| *g *= inv);
            if let Some(clip) = cfg.grad_clip {
                let norm = grad.iter().map(|&g| (g as f64) * (g as f64)).sum::<f64>().sqrt();
                if norm > clip {
                    let s = (clip / norm) as f32;
                    grad.iter_mut().for_each(|g| *g *= s);
                }
            }
            adam.update(&mut params.data, &grad, lr);
        }
        let test_loss = if test_set.is_empty() {
            None
        } else {
            let mut s = 0.0;
            for (input, coords, target) in &test_set {
                s += relative_l2(&params.predict(input, coords)?, target)?;
            }
            Some(s / test_set.len() as f64)
        };
        let log = EpochLog { epoch, lr, train_loss: loss_sum / order.len() as f64, test_loss };
        on_epoch(&log, &params, &adam)?;
        curve.push(log);
    }
    Ok(TrainRun { params, optimizer: adam, curve, train_indices: train_idx, test_indices: test_idx })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_sample: Vec<f64>,
    pub mean: f64,
}

/// Points per decode call when predicting a full grid.
const EVAL_CHUNK: usize = 4096;

/// The model's prediction on every grid point of `sample`, row-major `[n_t, n_x]`.
pub fn predict_grid(params: &ModelParams, sample: &PdeSample) -> Result<Vec<f32>, TrainError> {
    let input = sample_input(sample, &params.config)?;
    let coords: Vec<[f32; 2]> =
        (0..sample.n_t).flat_map(|t| (0..sample.n_x).map(move |x| (t, x))).map(|(t, x)| sample.coord(t, x)).collect();
    let mut out = Vec::with_capacity(coords.len());
    for chunk in coords.chunks(EVAL_CHUNK) {
        out.extend(params.predict(&input, chunk)?);
    }
    Ok(out)
}

/// Per-sample relative L2 of `predict` against the stored solutions.
pub fn evaluate_with(
    samples: &[PdeSample],
    mut predict: impl FnMut(&PdeSample) -> Result<Vec<f32>, TrainError>,
) -> Result<EvalReport, TrainError> {
    let mut per_sample = Vec::with_capacity(samples.len());
    for (index, s) in samples.iter().enumerate() {
        let pred = predict(s)?;
        if pred.len() != s.solution.len() {
            return Err(TrainError::ShapeMismatch { index, got: (s.n_t, s.n_x), expected: pred.len() });
        }
        per_sample.push(relative_l2(&pred, &s.solution)?);
    }
    let mean = per_sample.iter().sum::<f64>() / per_sample.len().max(1) as f64;
    Ok(EvalReport { per_sample, mean })
}

/// Full-grid evaluation of a trained model.
pub fn evaluate(params: &ModelParams, samples: &[PdeSample]) -> Result<EvalReport, TrainError> {
    check_grid(samples, &params.config)?;
    evaluate_with(samples, |s| predict_grid(params, s))
}
