use std::rc::Rc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::tape::{SparseMatrix, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::graphmold::AugmentedAdjacency;
use crate::space::{Configuration, MixedSpace, Value, VariableKind};

pub const CHECKPOINT_FORMAT: &str = "moldbo-vgae/1";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub feature_dim: usize,
    pub hidden_dim: usize,
    pub latent_dim: usize,
    pub decoder_hidden: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            feature_dim: 8,
            hidden_dim: 16,
            latent_dim: 4,
            decoder_hidden: 32,
        }
    }
}

// Parameter layout: shared tensors first, then ENCODER_TENSORS per slot.
const PROJ_W: usize = 0;
const PROJ_B: usize = 1;
const DEC_W1: usize = 2;
const DEC_B1: usize = 3;
const DEC_W2: usize = 4;
const DEC_B2: usize = 5;
const SHARED_TENSORS: usize = 6;

const GC1_W: usize = 0;
const GC1_B: usize = 1;
const GC2_W: usize = 2;
const GC2_B: usize = 3;
const MU_W: usize = 4;
const MU_B: usize = 5;
const LV_W: usize = 6;
const LV_B: usize = 7;
const ENCODER_TENSORS: usize = 8;

const SHARED_NAMES: [&str; SHARED_TENSORS] = [
    "projection.weight",
    "projection.bias",
    "decoder.w1",
    "decoder.b1",
    "decoder.w2",
    "decoder.b2",
];
const ENCODER_NAMES: [&str; ENCODER_TENSORS] = [
    "gc1.weight", "gc1.bias", "gc2.weight", "gc2.bias", "mu.weight", "mu.bias", "logvar.weight",
    "logvar.bias",
];

/// Graph variational autoencoder with shared per-variable projections, one
/// two-layer graph-convolution encoder per bandit slot, and a shared MLP
/// decoder that reconstructs node features.
///
/// Projections are stored stacked: row block `offset_i .. offset_i + w_i` of
/// `projection.weight` maps variable `i`'s raw feature to the shared feature
/// space, and the final row is the global node's input embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct VgaeModel {
    config: ModelConfig,
    space: MixedSpace,
    params: Vec<Tensor>,
    slots: usize,
}

/// Handles into a recorded forward pass.
pub struct ForwardVars {
    pub params: Vec<(usize, Var)>,
    pub mu: Var,
    pub logvar: Var,
    pub z: Var,
    pub output: Var,
}

/// Glorot-uniform initialization.
fn init_weight<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Tensor {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    Tensor::from_fn(rows, cols, |_, _| rng.random_range(-bound..bound))
}

impl VgaeModel {
    pub fn new<R: Rng + ?Sized>(
        space: &MixedSpace,
        slots: usize,
        config: ModelConfig,
        rng: &mut R,
    ) -> Self {
        let (_, width) = space.feature_offsets();
        let f = config.feature_dim;
        let mut params = vec![
            init_weight(width + 1, f, rng),
            Tensor::zeros(space.dim(), f),
            init_weight(config.latent_dim, config.decoder_hidden, rng),
            Tensor::zeros(1, config.decoder_hidden),
            init_weight(config.decoder_hidden, width, rng),
            Tensor::zeros(1, width),
        ];
        for _ in 0..slots {
            params.extend(Self::fresh_encoder(&config, rng));
        }
        Self {
            config,
            space: space.clone(),
            params,
            slots,
        }
    }

    fn fresh_encoder<R: Rng + ?Sized>(config: &ModelConfig, rng: &mut R) -> Vec<Tensor> {
        let (f, h, m) = (config.feature_dim, config.hidden_dim, config.latent_dim);
        vec![
            init_weight(f, h, rng),
            Tensor::zeros(1, h),
            init_weight(h, h, rng),
            Tensor::zeros(1, h),
            init_weight(h, m, rng),
            Tensor::zeros(1, m),
            init_weight(h, m, rng),
            Tensor::zeros(1, m),
        ]
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn space(&self) -> &MixedSpace {
        &self.space
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn param_name(&self, index: usize) -> String {
        if index < SHARED_TENSORS {
            SHARED_NAMES[index].to_string()
        } else {
            let k = index - SHARED_TENSORS;
            format!("encoder{}.{}", k / ENCODER_TENSORS, ENCODER_NAMES[k % ENCODER_TENSORS])
        }
    }

    fn check_slot(&self, slot: usize) -> Result<()> {
        if slot >= self.slots {
            return Err(Error::SlotOutOfRange {
                slot,
                slots: self.slots,
            });
        }
        Ok(())
    }

    pub fn encoder_range(&self, slot: usize) -> std::ops::Range<usize> {
        let start = SHARED_TENSORS + slot * ENCODER_TENSORS;
        start..start + ENCODER_TENSORS
    }

    /// Parameter indices touched when training `slot`: shared projections,
    /// the decoder, and that slot's encoder.
    pub fn trainable_for(&self, slot: usize) -> Vec<usize> {
        (0..SHARED_TENSORS).chain(self.encoder_range(slot)).collect()
    }

    /// Graph-convolution weight matrices of one encoder.
    pub fn conv_weights(&self, slot: usize) -> [usize; 2] {
        let base = SHARED_TENSORS + slot * ENCODER_TENSORS;
        [base + GC1_W, base + GC2_W]
    }

    pub fn reset_encoder<R: Rng + ?Sized>(&mut self, slot: usize, rng: &mut R) -> Result<()> {
        self.check_slot(slot)?;
        let fresh = Self::fresh_encoder(&self.config, rng);
        let range = self.encoder_range(slot);
        for (dst, src) in self.params[range].iter_mut().zip(fresh) {
            *dst = src;
        }
        Ok(())
    }

    /// Zeroes the μ and log-variance heads of one encoder.
    pub fn zero_heads(&mut self, slot: usize) -> Result<()> {
        self.check_slot(slot)?;
        let base = SHARED_TENSORS + slot * ENCODER_TENSORS;
        for k in [MU_W, MU_B, LV_W, LV_B] {
            self.params[base + k].data.iter_mut().for_each(|x| *x = 0.0);
        }
        Ok(())
    }

    /// Column segments `(offset, n_i)` of the discrete heads in the decoder
    /// output.
    pub fn discrete_segments(&self) -> Vec<(usize, usize)> {
        let (offsets, _) = self.space.feature_offsets();
        self.space
            .variables()
            .iter()
            .zip(offsets)
            .filter_map(|(v, off)| match v.kind {
                VariableKind::Discrete { cardinality } => Some((off, cardinality)),
                VariableKind::Continuous { .. } => None,
            })
            .collect()
    }

    /// Concatenated encode_features rows, one row per configuration.
    pub fn targets(&self, cfgs: &[Configuration]) -> Result<Tensor> {
        let (_, width) = self.space.feature_offsets();
        let mut data = Vec::with_capacity(cfgs.len() * width);
        for cfg in cfgs {
            let feats = self.space.encode_features(cfg)?;
            for row in feats.rows {
                data.extend(row);
            }
        }
        Ok(Tensor::from_vec(cfgs.len(), width, data))
    }

    /// Records the full encode-sample-decode pass for `cfgs` on `tape`.
    ///
    /// With `eps = None` the latent is the posterior mean.
    pub fn forward(
        &self,
        tape: &mut Tape,
        slot: usize,
        adj: &AugmentedAdjacency,
        cfgs: &[Configuration],
        eps: Option<&Tensor>,
    ) -> Result<ForwardVars> {
        self.check_slot(slot)?;
        let dim = self.space.dim();
        if adj.node_count() != dim + 1 {
            return Err(Error::InvalidGraph(format!(
                "augmented graph has {} nodes, expected {}",
                adj.node_count(),
                dim + 1
            )));
        }
        if cfgs.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let batch = cfgs.len();
        let nodes = dim + 1;
        let (offsets, width) = self.space.feature_offsets();

        let mut feature_rows = Vec::with_capacity(batch * nodes);
        let mut bias_rows = Vec::with_capacity(batch * nodes);
        for cfg in cfgs {
            self.space.check_configuration(cfg)?;
            for (i, (spec, value)) in self.space.variables().iter().zip(&cfg.values).enumerate() {
                let entry = match (&spec.kind, *value) {
                    (VariableKind::Discrete { .. }, Value::Discrete(k)) => (offsets[i] + k, 1.0),
                    (VariableKind::Continuous { bounds: [lo, hi] }, Value::Continuous(v)) => {
                        (offsets[i], (v - lo) / (hi - lo))
                    }
                    _ => unreachable!("configuration checked"),
                };
                feature_rows.push(vec![entry]);
                bias_rows.push(vec![(i, 1.0)]);
            }
            feature_rows.push(vec![(width, 1.0)]);
            bias_rows.push(Vec::new());
        }
        let features = Rc::new(SparseMatrix::from_rows(width + 1, feature_rows));
        let bias_select = Rc::new(SparseMatrix::from_rows(dim, bias_rows));
        let local = adj.propagation_rows();
        let mut prop_rows = Vec::with_capacity(batch * nodes);
        for b in 0..batch {
            let base = b * nodes;
            for row in &local {
                prop_rows.push(row.iter().map(|&(s, w)| (base + s, w)).collect());
            }
        }
        let propagate = Rc::new(SparseMatrix::from_rows(batch * nodes, prop_rows));

        let mut params = Vec::new();
        let mut param = |tape: &mut Tape, idx: usize| {
            let v = tape.leaf(self.params[idx].clone());
            params.push((idx, v));
            v
        };
        let enc = SHARED_TENSORS + slot * ENCODER_TENSORS;
        let proj_w = param(tape, PROJ_W);
        let proj_b = param(tape, PROJ_B);
        let gc1_w = param(tape, enc + GC1_W);
        let gc1_b = param(tape, enc + GC1_B);
        let gc2_w = param(tape, enc + GC2_W);
        let gc2_b = param(tape, enc + GC2_B);
        let mu_w = param(tape, enc + MU_W);
        let mu_b = param(tape, enc + MU_B);
        let lv_w = param(tape, enc + LV_W);
        let lv_b = param(tape, enc + LV_B);
        let dec_w1 = param(tape, DEC_W1);
        let dec_b1 = param(tape, DEC_B1);
        let dec_w2 = param(tape, DEC_W2);
        let dec_b2 = param(tape, DEC_B2);

        let x = tape.sparse_matmul(features, proj_w);
        let xb = tape.sparse_matmul(bias_select, proj_b);
        let x = tape.add(x, xb);

        let h = tape.sparse_matmul(propagate.clone(), x);
        let h = tape.matmul(h, gc1_w);
        let h = tape.add_bias(h, gc1_b);
        let h = tape.relu(h);
        let h = tape.sparse_matmul(propagate, h);
        let h = tape.matmul(h, gc2_w);
        let h = tape.add_bias(h, gc2_b);
        let h = tape.relu(h);

        let readout = tape.gather_rows(h, (0..batch).map(|b| b * nodes + dim).collect());
        let mu = tape.matmul(readout, mu_w);
        let mu = tape.add_bias(mu, mu_b);
        let logvar = tape.matmul(readout, lv_w);
        let logvar = tape.add_bias(logvar, lv_b);

        let z = match eps {
            Some(eps) => {
                let half = tape.scale(logvar, 0.5);
                let std = tape.exp(half);
                let noise = tape.mul_const(std, eps.clone());
                tape.add(mu, noise)
            }
            None => mu,
        };
        let output = Self::decoder_pass(tape, z, dec_w1, dec_b1, dec_w2, dec_b2);
        Ok(ForwardVars {
            params,
            mu,
            logvar,
            z,
            output,
        })
    }

    fn decoder_pass(tape: &mut Tape, z: Var, w1: Var, b1: Var, w2: Var, b2: Var) -> Var {
        let h = tape.matmul(z, w1);
        let h = tape.add_bias(h, b1);
        let h = tape.relu(h);
        let o = tape.matmul(h, w2);
        tape.add_bias(o, b2)
    }

    /// Posterior means and log-variances, one row per configuration.
    pub fn encode(
        &self,
        cfgs: &[Configuration],
        adj: &AugmentedAdjacency,
        slot: usize,
    ) -> Result<(Tensor, Tensor)> {
        let mut tape = Tape::new();
        let fw = self.forward(&mut tape, slot, adj, cfgs, None)?;
        Ok((tape.value(fw.mu).clone(), tape.value(fw.logvar).clone()))
    }

    /// Raw decoder output for a single latent point.
    pub fn decode_raw(&self, z: &[f64]) -> Vec<f64> {
        let mut tape = Tape::new();
        let zv = tape.leaf(Tensor::from_vec(1, z.len(), z.to_vec()));
        let w1 = tape.leaf(self.params[DEC_W1].clone());
        let b1 = tape.leaf(self.params[DEC_B1].clone());
        let w2 = tape.leaf(self.params[DEC_W2].clone());
        let b2 = tape.leaf(self.params[DEC_B2].clone());
        let out = Self::decoder_pass(&mut tape, zv, w1, b1, w2, b2);
        tape.value(out).data.clone()
    }

    pub fn decode(&self, z: &[f64]) -> (Configuration, Vec<f64>) {
        let raw = self.decode_raw(z);
        (raw_to_configuration(&raw, &self.space), raw)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            config: self.config,
            space: self.space.clone(),
            slots: self.slots,
            tensors: self
                .params
                .iter()
                .enumerate()
                .map(|(i, t)| NamedTensor {
                    name: self.param_name(i),
                    shape: [t.rows, t.cols],
                    data: t.data.clone(),
                })
                .collect(),
        }
    }

    pub fn from_checkpoint(ck: Checkpoint) -> Result<Self> {
        if ck.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("unsupported format `{}`", ck.format)));
        }
        let template = Self::new(
            &ck.space,
            ck.slots,
            ck.config,
            &mut <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0),
        );
        if ck.tensors.len() != template.params.len() {
            return Err(Error::Checkpoint("tensor count mismatch".into()));
        }
        let mut params = Vec::with_capacity(ck.tensors.len());
        for (i, (nt, t)) in ck.tensors.into_iter().zip(&template.params).enumerate() {
            if nt.name != template.param_name(i) || nt.shape != [t.rows, t.cols] {
                return Err(Error::Checkpoint(format!("unexpected tensor `{}`", nt.name)));
            }
            if nt.data.len() != t.rows * t.cols {
                return Err(Error::Checkpoint(format!("bad data length for `{}`", nt.name)));
            }
            params.push(Tensor::from_vec(t.rows, t.cols, nt.data));
        }
        Ok(Self { params, ..template })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub shape: [usize; 2],
    pub data: Vec<f64>,
}

/// Serialized model parameters with shape headers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub config: ModelConfig,
    pub space: MixedSpace,
    pub slots: usize,
    pub tensors: Vec<NamedTensor>,
}

/// Argmax per discrete head (lowest index on ties); continuous heads are
/// clamped to `[0, 1]` and rescaled to the variable bounds.
pub fn raw_to_configuration(raw: &[f64], space: &MixedSpace) -> Configuration {
    let (offsets, _) = space.feature_offsets();
    let values = space
        .variables()
        .iter()
        .zip(offsets)
        .map(|(spec, off)| match spec.kind {
            VariableKind::Discrete { cardinality } => {
                let head = &raw[off..off + cardinality];
                let mut best = 0;
                for (k, &s) in head.iter().enumerate() {
                    if s > head[best] || head[best].is_nan() {
                        best = k;
                    }
                }
                Value::Discrete(best)
            }
            VariableKind::Continuous { bounds: [lo, hi] } => {
                let u = raw[off];
                let u = if u.is_nan() { 0.5 } else { u.clamp(0.0, 1.0) };
                Value::Continuous(lo + u * (hi - lo))
            }
        })
        .collect();
    Configuration::new(values)
}

/// `z = μ + exp(logvar / 2) ⊙ ε` with standard normal `ε`.
pub fn reparameterize<R: Rng + ?Sized>(mu: &[f64], logvar: &[f64], rng: &mut R) -> Vec<f64> {
    mu.iter()
        .zip(logvar)
        .map(|(m, lv)| {
            let e: f64 = StandardNormal.sample(rng);
            m + (0.5 * lv).exp() * e
        })
        .collect()
}

pub fn standard_normal<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Tensor {
    Tensor::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}
