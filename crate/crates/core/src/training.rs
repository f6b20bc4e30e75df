//! Client-side local training (mini-batch SGD with optional momentum).

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::model::Model;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub momentum: f64,
}

/// Fine-tunes a copy of `global` on `data`.
///
/// Each epoch reshuffles the samples with a generator seeded from `seed`; the
/// last short batch is kept. The momentum buffer starts at zero on every
/// call.
pub fn local_train(global: &Model, data: &LabeledDataset, cfg: &TrainConfig, seed: u64) -> Result<Model> {
    if data.is_empty() {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    if data.dim() != global.input_dim() {
        return Err(Error::Dimension {
            expected: global.input_dim(),
            found: data.dim(),
        });
    }
    if cfg.batch_size == 0 {
        return Err(Error::InvalidValue("batch size must be positive".into()));
    }
    let mut model = global.clone();
    if cfg.epochs == 0 || cfg.lr == 0.0 {
        return Ok(model);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut velocity = vec![0.0; model.num_params()];
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for (batch, idx) in order.chunks(cfg.batch_size).enumerate() {
            let (loss, grad) = model.loss_and_gradient(data, idx);
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch, batch });
            }
            for ((p, v), g) in model.params_mut().iter_mut().zip(&mut velocity).zip(&grad) {
                *v = cfg.momentum * *v + g;
                *p -= cfg.lr * *v;
            }
            if model.params().iter().any(|p| !p.is_finite()) {
                return Err(Error::Divergence { epoch, batch });
            }
        }
    }
    Ok(model)
}
