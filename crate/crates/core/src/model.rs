//! A small fully connected classifier (ReLU hidden layers, softmax output)
//! with hand-written backpropagation of the mean cross-entropy loss.
//!
//! Parameters live in one flat buffer laid out layer by layer as
//! `[W (out x in, row-major), b (out)]`, so flattening is a copy.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::vector::{check_len, UpdateVector};

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl Model {
    /// Uniform `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` weights, zero biases.
    pub fn init(sizes: &[usize], seed: u64) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::InvalidValue(format!(
                "need at least two non-zero layer sizes, got {sizes:?}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::with_capacity(param_count(sizes));
        for w in sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            params.extend((0..fan_in * fan_out).map(|_| rng.random_range(-bound..=bound)));
            params.extend(std::iter::repeat_n(0.0, fan_out));
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            params,
        })
    }

    /// Rebuilds a model of shape `sizes` from a flat parameter vector.
    pub fn unflatten(sizes: &[usize], flat: &[f64]) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::InvalidValue(format!("bad layer sizes {sizes:?}")));
        }
        check_len(param_count(sizes), flat.len())?;
        Ok(Self {
            sizes: sizes.to_vec(),
            params: flat.to_vec(),
        })
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.params.clone()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub(crate) fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn classes(&self) -> usize {
        *self.sizes.last().expect("at least two layers")
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    /// Adds a flat update in place.
    pub fn apply_update(&mut self, update: &[f64]) -> Result<()> {
        check_len(self.params.len(), update.len())?;
        for (p, u) in self.params.iter_mut().zip(update) {
            *p += u;
        }
        Ok(())
    }

    /// Forward pass keeping every layer's post-activation output. The last
    /// entry holds softmax probabilities.
    fn forward(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let layers = self.sizes.len() - 1;
        let mut acts = Vec::with_capacity(layers + 1);
        acts.push(x.to_vec());
        let mut offset = 0;
        for l in 0..layers {
            let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
            let w = &self.params[offset..offset + fan_in * fan_out];
            let b = &self.params[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
            offset += fan_in * fan_out + fan_out;
            let input = &acts[l];
            let mut z: Vec<f64> = (0..fan_out)
                .map(|o| {
                    let row = &w[o * fan_in..(o + 1) * fan_in];
                    b[o] + row.iter().zip(input).map(|(a, b)| a * b).sum::<f64>()
                })
                .collect();
            if l + 1 < layers {
                z.iter_mut().for_each(|v| *v = v.max(0.0));
            } else {
                softmax_in_place(&mut z);
            }
            acts.push(z);
        }
        acts
    }

    pub fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        self.forward(x).pop().expect("output layer")
    }

    /// Arg-max class; ties resolve to the lowest index.
    pub fn predict(&self, x: &[f64]) -> usize {
        argmax(&self.predict_proba(x))
    }

    /// Mean cross-entropy over `indices` and its gradient w.r.t. the flat
    /// parameters.
    pub fn loss_and_gradient(&self, data: &LabeledDataset, indices: &[usize]) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; self.params.len()];
        let mut loss = 0.0;
        let layers = self.sizes.len() - 1;
        let offsets: Vec<usize> = self
            .sizes
            .windows(2)
            .scan(0, |acc, w| {
                let start = *acc;
                *acc += w[0] * w[1] + w[1];
                Some(start)
            })
            .collect();
        for &i in indices {
            let acts = self.forward(data.row(i));
            let y = data.labels()[i];
            let probs = &acts[layers];
            loss -= probs[y].max(f64::MIN_POSITIVE).ln();
            // dL/dz at the output for softmax + cross-entropy
            let mut delta: Vec<f64> = probs.clone();
            delta[y] -= 1.0;
            for l in (0..layers).rev() {
                let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
                let off = offsets[l];
                let input = &acts[l];
                for o in 0..fan_out {
                    let d = delta[o];
                    if d == 0.0 {
                        continue;
                    }
                    let g = &mut grad[off + o * fan_in..off + (o + 1) * fan_in];
                    for (gi, xi) in g.iter_mut().zip(input) {
                        *gi += d * xi;
                    }
                    grad[off + fan_in * fan_out + o] += d;
                }
                if l > 0 {
                    let w = &self.params[off..off + fan_in * fan_out];
                    let mut prev = vec![0.0; fan_in];
                    for (o, d) in delta.iter().enumerate() {
                        if *d == 0.0 {
                            continue;
                        }
                        for (p, wv) in prev.iter_mut().zip(&w[o * fan_in..(o + 1) * fan_in]) {
                            *p += d * wv;
                        }
                    }
                    // ReLU derivative on the hidden activation
                    for (p, a) in prev.iter_mut().zip(input) {
                        if *a <= 0.0 {
                            *p = 0.0;
                        }
                    }
                    delta = prev;
                }
            }
        }
        let n = indices.len().max(1) as f64;
        grad.iter_mut().for_each(|g| *g /= n);
        (loss / n, grad)
    }

    /// Mean cross-entropy over the whole dataset.
    pub fn loss(&self, data: &LabeledDataset) -> f64 {
        let total: f64 = (0..data.len())
            .map(|i| -self.predict_proba(data.row(i))[data.labels()[i]].max(f64::MIN_POSITIVE).ln())
            .sum();
        total / data.len() as f64
    }
}

fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    z.iter_mut().for_each(|v| *v /= sum);
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

pub fn init_model(sizes: &[usize], seed: u64) -> Result<Model> {
    Model::init(sizes, seed)
}

/// `flatten(local) - flatten(global)`.
pub fn compute_update(local: &Model, global: &Model) -> Result<UpdateVector> {
    if local.sizes != global.sizes {
        return Err(Error::Dimension {
            expected: global.num_params(),
            found: local.num_params(),
        });
    }
    UpdateVector::new(
        local
            .params
            .iter()
            .zip(&global.params)
            .map(|(a, b)| a - b)
            .collect(),
    )
}

/// Fraction of samples whose arg-max prediction equals the label.
pub fn evaluate(model: &Model, test: &LabeledDataset) -> f64 {
    if test.is_empty() {
        return 0.0;
    }
    let correct = (0..test.len())
        .filter(|&i| model.predict(test.row(i)) == test.labels()[i])
        .count();
    correct as f64 / test.len() as f64
}
