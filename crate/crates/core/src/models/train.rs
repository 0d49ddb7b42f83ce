use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Record;
use crate::error::{Error, Result};
use crate::nn::Adam;

use super::{features, SetRegressor, FEATURE_DIM, WRENCH_DIM};

/// Samples per gradient work unit. Fixed so the reduction order, and hence
/// the result, does not depend on the number of threads.
const CHUNK: usize = 32;

/// How the six wrench axes are standardised for training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossWeighting {
    /// Each axis by its own target standard deviation.
    #[default]
    PerAxis,
    /// Force axes by their pooled standard deviation, torque axes likewise.
    /// Small, noise-dominated axes are not inflated to the weight of the
    /// dominant one.
    PerGroup,
}

/// Adam on variance-normalised MSE. Weights are initialised uniformly in
/// `±1/sqrt(fan_in)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Seeds the shuffling sequence.
    pub seed: u64,
    pub loss_weighting: LossWeighting,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 256,
            epochs: 200,
            seed: 0,
            loss_weighting: LossWeighting::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let betas_ok = (0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2);
        if !(self.learning_rate >= 0.0 && self.epsilon > 0.0 && betas_ok && self.batch_size > 0) {
            return Err(Error::invalid(format!("bad training config: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSample {
    /// Canonically ordered per-neighbour features.
    pub feats: Vec<[f64; FEATURE_DIM]>,
    pub target: [f64; WRENCH_DIM],
}

/// Training pairs from dataset records, targeting the noisy measurement.
pub fn samples_from_records<'a>(records: impl IntoIterator<Item = &'a Record>) -> Vec<TrainSample> {
    records
        .into_iter()
        .map(|r| TrainSample {
            feats: features(&r.snapshot),
            target: r.measured.to_array(),
        })
        .collect()
}

/// Per-axis target variance.
pub fn target_variance(samples: &[TrainSample]) -> [f64; WRENCH_DIM] {
    let n = samples.len().max(1) as f64;
    std::array::from_fn(|a| {
        let mean = samples.iter().map(|s| s.target[a]).sum::<f64>() / n;
        samples.iter().map(|s| (s.target[a] - mean).powi(2)).sum::<f64>() / n
    })
}

/// Target spread per axis, individually or pooled over the force and
/// torque groups. Axes without spread get 1.
pub fn axis_scales(samples: &[TrainSample], mode: LossWeighting) -> [f64; WRENCH_DIM] {
    let var = target_variance(samples);
    let var = match mode {
        LossWeighting::PerAxis => var,
        LossWeighting::PerGroup => {
            let force = (var[0] + var[1] + var[2]) / 3.0;
            let torque = (var[3] + var[4] + var[5]) / 3.0;
            [force, force, force, torque, torque, torque]
        }
    };
    var.map(|v| if v > 0.0 { v.sqrt() } else { 1.0 })
}

/// Loss weights matching [`axis_scales`]: the inverse squared scale.
pub fn axis_weights(samples: &[TrainSample], mode: LossWeighting) -> [f64; WRENCH_DIM] {
    axis_scales(samples, mode).map(|s| 1.0 / (s * s))
}

fn sample_loss(pred: &[f64; WRENCH_DIM], target: &[f64; WRENCH_DIM], w: &[f64; WRENCH_DIM]) -> f64 {
    (0..WRENCH_DIM)
        .map(|a| w[a] * (pred[a] - target[a]).powi(2))
        .sum::<f64>()
        / WRENCH_DIM as f64
}

/// Mean weighted squared error over `samples`.
pub fn weighted_loss(model: &dyn SetRegressor, samples: &[TrainSample], w: &[f64; WRENCH_DIM]) -> f64 {
    let total: f64 = samples
        .par_chunks(CHUNK)
        .map(|chunk| {
            chunk
                .iter()
                .map(|s| sample_loss(&model.predict_features(&s.feats), &s.target, w))
                .sum::<f64>()
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum();
    total / samples.len().max(1) as f64
}

/// Root-mean-square error of one wrench axis against the targets.
pub fn rmse(model: &dyn SetRegressor, samples: &[TrainSample], axis: usize) -> f64 {
    let sq: f64 = samples
        .iter()
        .map(|s| (model.predict_features(&s.feats)[axis] - s.target[axis]).powi(2))
        .sum();
    (sq / samples.len().max(1) as f64).sqrt()
}

/// Mean weighted loss over `batch` and its exact gradient.
pub fn batch_loss_and_grad(model: &dyn SetRegressor, batch: &[&TrainSample], w: &[f64; WRENCH_DIM]) -> (f64, Vec<f64>) {
    let n_params = model.n_params();
    let partials: Vec<(f64, Vec<f64>)> = batch
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut grad = vec![0.0; n_params];
            let mut loss = 0.0;
            for s in chunk {
                let target = s.target;
                let g = |pred: &[f64; WRENCH_DIM]| -> [f64; WRENCH_DIM] {
                    std::array::from_fn(|a| 2.0 * w[a] * (pred[a] - target[a]) / WRENCH_DIM as f64)
                };
                let pred = model.backprop(&s.feats, &g, &mut grad);
                loss += sample_loss(&pred, &target, w);
            }
            (loss, grad)
        })
        .collect();

    let mut grad = vec![0.0; n_params];
    let mut loss = 0.0;
    for (l, g) in partials {
        loss += l;
        for (acc, v) in grad.iter_mut().zip(g) {
            *acc += v;
        }
    }
    let scale = 1.0 / batch.len() as f64;
    grad.iter_mut().for_each(|g| *g *= scale);
    (loss * scale, grad)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean minibatch loss per epoch, in epoch order.
    pub loss_history: Vec<f64>,
    pub steps: u64,
    pub axis_weights: [f64; WRENCH_DIM],
}

/// Minibatch Adam. The model's output scale is first set to the target
/// spread per axis, so the weighted loss equals plain MSE in standardised
/// units and optimiser steps act at each axis's own scale.
///
/// Deterministic given `cfg.seed`: the shuffle sequence comes from a seeded
/// ChaCha8 stream and gradient reduction order is fixed.
pub fn train(model: &mut dyn SetRegressor, samples: &[TrainSample], cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(Error::invalid("cannot train on an empty dataset"));
    }
    model.set_output_scale(axis_scales(samples, cfg.loss_weighting))?;
    let w = axis_weights(samples, cfg.loss_weighting);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut opt = Adam::new(model.n_params(), cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon);
    let mut params = model.params();
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for idx in order.chunks(cfg.batch_size) {
            let batch: Vec<&TrainSample> = idx.iter().map(|&i| &samples[i]).collect();
            let (loss, grad) = batch_loss_and_grad(model, &batch, &w);
            if !loss.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    detail: format!("non-finite loss {loss}"),
                });
            }
            opt.step(&mut params, &grad);
            if let Some(i) = params.iter().position(|p| !p.is_finite()) {
                return Err(Error::Diverged {
                    epoch,
                    detail: format!("parameter {i} became {}", params[i]),
                });
            }
            model.set_params(&params)?;
            epoch_loss += loss * idx.len() as f64;
        }
        history.push(epoch_loss / samples.len() as f64);
    }
    Ok(TrainReport {
        loss_history: history,
        steps: opt.steps(),
        axis_weights: w,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{DeepSetModel, LinearAggModel};
    use rand::Rng;

    fn random_samples(n: usize, k: usize, seed: u64) -> Vec<TrainSample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let mut feats: Vec<[f64; 6]> = (0..k)
                    .map(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0)))
                    .collect();
                feats.sort_by(|a, b| a[2].total_cmp(&b[2]));
                TrainSample {
                    feats,
                    target: std::array::from_fn(|_| rng.random_range(-2.0..2.0)),
                }
            })
            .collect()
    }

    #[test]
    fn zero_network_zero_targets() {
        let mut m = LinearAggModel::init(&[6, 4, 6], 0).unwrap();
        m.set_params(&vec![0.0; m.n_params()]).unwrap();
        let mut s = random_samples(4, 2, 1);
        s.iter_mut().for_each(|s| s.target = [0.0; 6]);
        let batch: Vec<&TrainSample> = s.iter().collect();
        let (loss, grad) = batch_loss_and_grad(&m, &batch, &[1.0; 6]);
        assert_eq!(loss, 0.0);
        assert!(grad.iter().all(|g| *g == 0.0));
    }

    #[test]
    fn duplicated_sample_has_single_sample_gradient() {
        let m = DeepSetModel::init(&[6, 8, 4], &[4, 8, 6], 5).unwrap();
        let s = random_samples(1, 3, 2);
        let w = [1.0, 2.0, 0.5, 1.0, 3.0, 1.0];
        let (l1, g1) = batch_loss_and_grad(&m, &[&s[0]], &w);
        let (l3, g3) = batch_loss_and_grad(&m, &[&s[0], &s[0], &s[0]], &w);
        assert!((l1 - l3).abs() <= 1e-14 * l1.abs());
        for (a, b) in g1.iter().zip(&g3) {
            assert!((a - b).abs() <= 1e-13 * a.abs().max(1e-3));
        }
    }

    #[test]
    fn zero_learning_rate_keeps_parameters() {
        let mut m = LinearAggModel::init(&[6, 8, 6], 4).unwrap();
        let before = m.params();
        let cfg = TrainConfig {
            learning_rate: 0.0,
            epochs: 3,
            batch_size: 16,
            ..TrainConfig::default()
        };
        let report = train(&mut m, &random_samples(40, 2, 3), &cfg).unwrap();
        assert_eq!(report.loss_history.len(), 3);
        assert_eq!(report.steps, 9);
        assert_eq!(m.params(), before);
    }

    #[test]
    fn training_is_deterministic_and_learns() {
        let mut samples = random_samples(64, 3, 8);
        for s in &mut samples {
            s.target = std::array::from_fn(|a| s.feats.iter().map(|f| f[a]).sum());
        }
        let cfg = TrainConfig {
            learning_rate: 1e-2,
            epochs: 30,
            batch_size: 16,
            seed: 1,
            ..TrainConfig::default()
        };
        let run = || {
            let mut m = DeepSetModel::init(&[6, 16, 8], &[8, 16, 6], 2).unwrap();
            let r = train(&mut m, &samples, &cfg).unwrap();
            (m.params(), r.loss_history)
        };
        let (p1, h1) = run();
        let (p2, h2) = run();
        assert_eq!(
            p1.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            p2.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
        assert_eq!(h1, h2);
        assert!(h1.last().unwrap() < &(0.5 * h1[0]));
    }

    #[test]
    fn divergence_is_reported() {
        let mut m = LinearAggModel::init(&[6, 4, 6], 0).unwrap();
        let mut s = random_samples(8, 1, 0);
        s[0].target[0] = f64::INFINITY;
        let err = train(
            &mut m,
            &s,
            &TrainConfig {
                epochs: 2,
                ..TrainConfig::default()
            },
        )
        .unwrap_err();
        assert!(matches!(err, Error::Diverged { epoch: 0, .. }), "{err}");
    }

    #[test]
    fn empty_dataset_rejected() {
        let mut m = LinearAggModel::init(&[6, 4, 6], 0).unwrap();
        assert!(train(&mut m, &[], &TrainConfig::default()).is_err());
    }
}
