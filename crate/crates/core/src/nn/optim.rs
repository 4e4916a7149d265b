use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::seeded;
use crate::surfaces::Label;

use super::network::{labels_from_probs, Gradients, Network};
use super::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Gradients,
    v: Gradients,
    t: u64,
}

impl AdamState {
    pub fn new(net: &Network) -> Self {
        AdamState {
            m: Gradients::zeros_like(net),
            v: Gradients::zeros_like(net),
            t: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }
}

fn adam_update(
    p: &mut [f64],
    g: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    cfg: &AdamConfig,
    c1: f64,
    c2: f64,
) {
    for i in 0..p.len() {
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
        let m_hat = m[i] / c1;
        let v_hat = v[i] / c2;
        p[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
}

/// One bias-corrected Adam update.
pub fn adam_step(net: &mut Network, grads: &Gradients, state: &mut AdamState, cfg: &AdamConfig) {
    state.t += 1;
    let c1 = 1.0 - cfg.beta1.powi(state.t as i32);
    let c2 = 1.0 - cfg.beta2.powi(state.t as i32);
    for (k, layer) in net.layers.iter_mut().enumerate() {
        adam_update(
            &mut layer.weights,
            &grads.weights[k],
            &mut state.m.weights[k],
            &mut state.v.weights[k],
            cfg,
            c1,
            c2,
        );
        adam_update(
            &mut layer.bias,
            &grads.bias[k],
            &mut state.m.bias[k],
            &mut state.v.bias[k],
            cfg,
            c1,
            c2,
        );
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Samples per gradient step; `None` means half the design.
    pub batch_size: Option<usize>,
    /// When set, batches are drawn over labelled rows (pixels of image
    /// samples) instead of whole samples, this many rows per step.
    pub row_batch: Option<usize>,
    pub adam: AdamConfig,
    /// Seeds the per-epoch shuffles.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 1500,
            batch_size: None,
            row_batch: None,
            adam: AdamConfig::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn resolved_batch(&self, samples: usize) -> usize {
        self.batch_size.unwrap_or((samples / 2).max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean loss over the epoch's mini-batches, measured before each update.
    pub loss: f64,
    /// Fraction of rows the network labelled correctly during the epoch.
    pub accuracy: f64,
}

/// Mini-batch Adam training on cross-entropy.
///
/// `inputs` holds one sample per leading-axis entry; `labels` holds one label
/// per output row (one per sample for dense nets, one per pixel for UNets).
/// Each epoch draws a fresh seeded permutation and walks it in batches.
pub fn train(
    mut net: Network,
    inputs: &Tensor,
    labels: &[Label],
    cfg: &TrainConfig,
) -> Result<(Network, Vec<EpochRecord>)> {
    let samples = inputs.batch();
    if samples == 0 {
        return Err(Error::Config("cannot train on an empty design".into()));
    }
    if cfg.epochs == 0 {
        return Err(Error::Config("epochs must be >= 1".into()));
    }
    let batch = cfg.resolved_batch(samples);
    if batch == 0 || batch > samples {
        return Err(Error::Config(format!(
            "batch size {batch} outside 1..={samples}"
        )));
    }
    let rows_per_sample = labels.len() / samples;
    if rows_per_sample * samples != labels.len() {
        return Err(Error::Shape(format!(
            "{} labels do not split over {samples} samples",
            labels.len()
        )));
    }
    net.classes()?;

    let mut rng = seeded(cfg.seed);
    let mut state = AdamState::new(&net);
    let mut history = Vec::with_capacity(cfg.epochs);

    if let Some(row_batch) = cfg.row_batch {
        let units = labels.len();
        if row_batch == 0 || row_batch > units {
            return Err(Error::Config(format!(
                "row batch {row_batch} outside 1..={units}"
            )));
        }
        let mut order: Vec<usize> = (0..units).collect();
        for epoch in 1..=cfg.epochs {
            order.shuffle(&mut rng);
            let mut loss_sum = 0.0;
            let mut correct = 0usize;
            for chunk in order.chunks(row_batch) {
                let mut samples: Vec<usize> = chunk.iter().map(|u| u / rows_per_sample).collect();
                samples.sort_unstable();
                samples.dedup();
                let x = inputs.gather(&samples);
                let mut batch_labels = Vec::with_capacity(samples.len() * rows_per_sample);
                for &s in &samples {
                    batch_labels
                        .extend_from_slice(&labels[s * rows_per_sample..(s + 1) * rows_per_sample]);
                }
                let mut mask = vec![false; batch_labels.len()];
                for &u in chunk {
                    let pos = samples
                        .binary_search(&(u / rows_per_sample))
                        .expect("sample gathered");
                    mask[pos * rows_per_sample + u % rows_per_sample] = true;
                }
                let (loss, grads, probs) = net.backward_masked(&x, &batch_labels, Some(&mask))?;
                correct += labels_from_probs(&probs)
                    .iter()
                    .zip(&batch_labels)
                    .zip(&mask)
                    .filter(|((p, t), m)| **m && p == t)
                    .count();
                loss_sum += loss * chunk.len() as f64;
                adam_step(&mut net, &grads, &mut state, &cfg.adam);
            }
            history.push(EpochRecord {
                epoch,
                loss: loss_sum / units as f64,
                accuracy: correct as f64 / units as f64,
            });
        }
        return Ok((net, history));
    }

    let mut order: Vec<usize> = (0..samples).collect();
    let mut batch_labels = Vec::with_capacity(batch * rows_per_sample);

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for chunk in order.chunks(batch) {
            let x = inputs.gather(chunk);
            batch_labels.clear();
            for &s in chunk {
                batch_labels
                    .extend_from_slice(&labels[s * rows_per_sample..(s + 1) * rows_per_sample]);
            }
            let (loss, grads, probs) = net.backward_with_output(&x, &batch_labels)?;
            correct += labels_from_probs(&probs)
                .iter()
                .zip(&batch_labels)
                .filter(|(p, t)| p == t)
                .count();
            loss_sum += loss * chunk.len() as f64;
            adam_step(&mut net, &grads, &mut state, &cfg.adam);
        }
        history.push(EpochRecord {
            epoch,
            loss: loss_sum / samples as f64,
            accuracy: correct as f64 / labels.len() as f64,
        });
    }
    Ok((net, history))
}
