use rand::Rng;

use super::loss::{loss_total, LossBreakdown, LossWeights, TrainBatch};
use super::model::{standard_normal, VgaeModel};
use super::tape::Tensor;
use crate::error::Result;
use crate::graphmold::AugmentedAdjacency;

pub const DEFAULT_LEARNING_RATE: f64 = 1e-2;
pub const WARMUP_EPOCHS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: DEFAULT_LEARNING_RATE,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adaptive-moment optimizer state for every model tensor. Step counts are
/// tracked per tensor because each update touches only one encoder.
#[derive(Debug, Clone)]
pub struct Adam {
    config: AdamConfig,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    steps: Vec<u32>,
}

impl Adam {
    pub fn new(model: &VgaeModel, config: AdamConfig) -> Self {
        let zeros: Vec<Tensor> = model.params().iter().map(|p| Tensor::zeros(p.rows, p.cols)).collect();
        Self {
            config,
            m: zeros.clone(),
            v: zeros,
            steps: vec![0; model.params().len()],
        }
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    /// Forgets the moment estimates of one slot's encoder.
    pub fn reset_slot(&mut self, model: &VgaeModel, slot: usize) {
        for i in model.encoder_range(slot) {
            self.m[i].data.iter_mut().for_each(|x| *x = 0.0);
            self.v[i].data.iter_mut().for_each(|x| *x = 0.0);
            self.steps[i] = 0;
        }
    }

    pub fn step(&mut self, model: &mut VgaeModel, grads: &[(usize, Tensor)]) {
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        for (idx, g) in grads {
            let idx = *idx;
            self.steps[idx] += 1;
            let t = self.steps[idx] as i32;
            let c1 = 1.0 - beta1.powi(t);
            let c2 = 1.0 - beta2.powi(t);
            let p = &mut model.params_mut()[idx];
            let m = &mut self.m[idx];
            let v = &mut self.v[idx];
            for k in 0..g.data.len() {
                let gk = g.data[k];
                m.data[k] = beta1 * m.data[k] + (1.0 - beta1) * gk;
                v.data[k] = beta2 * v.data[k] + (1.0 - beta2) * gk * gk;
                let mhat = m.data[k] / c1;
                let vhat = v.data[k] / c2;
                p.data[k] -= lr * mhat / (vhat.sqrt() + eps);
            }
        }
    }
}

/// Model plus optimizer state.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub model: VgaeModel,
    pub optimizer: Adam,
    pub weights: LossWeights,
}

impl Trainer {
    pub fn new(model: VgaeModel, config: AdamConfig) -> Self {
        let optimizer = Adam::new(&model, config);
        Self {
            model,
            optimizer,
            weights: LossWeights::default(),
        }
    }

    /// One full-batch update of `slot`'s encoder together with the shared
    /// projections and decoder.
    pub fn step<R: Rng + ?Sized>(
        &mut self,
        slot: usize,
        adj: &AugmentedAdjacency,
        batch: &TrainBatch,
        rng: &mut R,
    ) -> Result<LossBreakdown> {
        let eps = standard_normal(batch.len(), self.model.config().latent_dim, rng);
        let (loss, grads) = loss_total(&self.model, slot, adj, batch, Some(&eps), self.weights)?;
        self.optimizer.step(&mut self.model, &grads);
        Ok(loss)
    }

    /// Runs `epochs` passes on one slot; returns the total loss per epoch.
    pub fn train<R: Rng + ?Sized>(
        &mut self,
        slot: usize,
        adj: &AugmentedAdjacency,
        batch: &TrainBatch,
        epochs: usize,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        (0..epochs)
            .map(|_| self.step(slot, adj, batch, rng).map(|l| l.total))
            .collect()
    }

    /// Trains every slot's encoder in turn for `epochs` epochs; returns the
    /// epoch-mean total loss over slots.
    pub fn warm_up<R: Rng + ?Sized>(
        &mut self,
        adjs: &[AugmentedAdjacency],
        batch: &TrainBatch,
        epochs: usize,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        let mut curve = Vec::with_capacity(epochs);
        for _ in 0..epochs {
            let mut total = 0.0;
            for (slot, adj) in adjs.iter().enumerate() {
                total += self.step(slot, adj, batch, rng)?.total;
            }
            curve.push(total / adjs.len().max(1) as f64);
        }
        Ok(curve)
    }

    /// Re-initializes one slot's encoder and its optimizer moments.
    pub fn reset_slot<R: Rng + ?Sized>(&mut self, slot: usize, rng: &mut R) -> Result<()> {
        self.model.reset_encoder(slot, rng)?;
        self.optimizer.reset_slot(&self.model, slot);
        Ok(())
    }
}
