use std::rc::Rc;

use super::model::{ForwardVars, VgaeModel};
use super::tape::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::graphmold::AugmentedAdjacency;
use crate::space::Configuration;

/// Guard added inside every norm and absolute difference of the metric loss.
pub const METRIC_EPS: f64 = 1e-8;
pub const DEFAULT_RANK_CONSTANT: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub kl: f64,
    pub recon: f64,
    pub metric: f64,
    pub reg: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            kl: 1.0,
            recon: 1.0,
            metric: 0.1,
            reg: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    pub kl: f64,
    pub recon: f64,
    pub metric: f64,
    pub reg: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn vae(&self) -> f64 {
        self.kl + self.recon
    }
}

/// Per-sample weights `∝ 1 / (kN + rank)` where rank counts strictly larger
/// values, normalized to mean 1.
pub fn rank_weights(values: &[f64], k: f64) -> Vec<f64> {
    let n = values.len();
    let raw: Vec<f64> = values
        .iter()
        .map(|&f| {
            let rank = values.iter().filter(|&&g| g > f).count();
            1.0 / (k * n as f64 + rank as f64)
        })
        .collect();
    let mean = raw.iter().sum::<f64>() / n.max(1) as f64;
    raw.into_iter().map(|w| w / mean).collect()
}

/// For each anchor, the other point with the smallest and the largest
/// absolute value difference (lowest index on ties).
pub fn metric_pairs(values: &[f64]) -> Vec<(usize, usize, usize)> {
    let n = values.len();
    if n < 2 {
        return Vec::new();
    }
    (0..n)
        .map(|i| {
            let mut pos = None::<(usize, f64)>;
            let mut neg = None::<(usize, f64)>;
            for j in (0..n).filter(|&j| j != i) {
                let d = (values[i] - values[j]).abs();
                if pos.is_none_or(|(_, best)| d < best) {
                    pos = Some((j, d));
                }
                if neg.is_none_or(|(_, best)| d > best) {
                    neg = Some((j, d));
                }
            }
            (i, pos.unwrap().0, neg.unwrap().0)
        })
        .collect()
}

/// Training set for one encoder: configurations with their (maximized)
/// objective values, rank weights and anchor/positive/negative triples.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainBatch {
    pub configurations: Vec<Configuration>,
    pub values: Vec<f64>,
    pub weights: Vec<f64>,
    pub pairs: Vec<(usize, usize, usize)>,
}

impl TrainBatch {
    pub fn new(configurations: Vec<Configuration>, values: Vec<f64>) -> Result<Self> {
        Self::with_rank_constant(configurations, values, DEFAULT_RANK_CONSTANT)
    }

    pub fn with_rank_constant(
        configurations: Vec<Configuration>,
        values: Vec<f64>,
        k: f64,
    ) -> Result<Self> {
        if configurations.is_empty() {
            return Err(Error::EmptyBatch);
        }
        if configurations.len() != values.len() {
            return Err(Error::InvalidConfiguration(format!(
                "{} configurations but {} values",
                configurations.len(),
                values.len()
            )));
        }
        Ok(Self {
            weights: rank_weights(&values, k),
            pairs: metric_pairs(&values),
            configurations,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.configurations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configurations.is_empty()
    }
}

/// Closed-form KL divergence of a diagonal Gaussian from the standard normal.
pub fn kl_divergence(mu: &[f64], logvar: &[f64]) -> f64 {
    0.5 * mu
        .iter()
        .zip(logvar)
        .map(|(m, lv)| m * m + lv.exp() - 1.0 - lv)
        .sum::<f64>()
}

/// Squared difference of the latent-distance log-ratio and the value-difference
/// log-ratio for one triple.
pub fn log_ratio_loss(anchor: &[f64], pos: &[f64], neg: &[f64], f_anchor: f64, f_pos: f64, f_neg: f64) -> f64 {
    let dist = |a: &[f64], b: &[f64]| {
        (a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() + METRIC_EPS).sqrt()
    };
    let latent = (dist(anchor, neg) / dist(anchor, pos)).ln();
    let value = ((f_anchor - f_neg).abs() + METRIC_EPS).ln() - ((f_anchor - f_pos).abs() + METRIC_EPS).ln();
    (latent - value).powi(2)
}

fn gram(w: &Tensor) -> Tensor {
    if w.rows < w.cols {
        w.matmul(&w.transpose())
    } else {
        w.transpose().matmul(w)
    }
}

/// `Σ ‖G − I‖²` over the given matrices, with `G` the smaller Gram matrix so
/// that wide matrices with orthonormal rows also score zero.
pub fn orth_reg_value(weights: &[&Tensor]) -> f64 {
    weights
        .iter()
        .map(|w| {
            let mut g = gram(w);
            for i in 0..g.rows {
                g.data[i * g.cols + i] -= 1.0;
            }
            g.frobenius_sq()
        })
        .sum()
}

pub struct LossVars {
    pub kl: Var,
    pub recon: Var,
    pub metric: Option<Var>,
    pub reg: Var,
    pub total: Var,
}

fn orth_term(tape: &mut Tape, w: Var) -> Var {
    let (rows, cols) = tape.value(w).shape();
    let wt = tape.transpose(w);
    let g = if rows < cols { tape.matmul(w, wt) } else { tape.matmul(wt, w) };
    let n = rows.min(cols);
    let eye = tape.leaf(Tensor::identity(n));
    let d = tape.sub(g, eye);
    let sq = tape.square(d);
    tape.sum(sq)
}

/// Records the full training objective on `tape`. KL and reconstruction are
/// batch means; the metric term is the mean over anchor triples.
pub fn record_loss(
    tape: &mut Tape,
    model: &VgaeModel,
    slot: usize,
    adj: &AugmentedAdjacency,
    batch: &TrainBatch,
    eps: Option<&Tensor>,
    lw: LossWeights,
) -> Result<(LossVars, ForwardVars)> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let n = batch.len();
    let fw = model.forward(tape, slot, adj, &batch.configurations, eps)?;

    // KL: ½ Σ (μ² + e^lv − 1 − lv)
    let mu2 = tape.square(fw.mu);
    let var = tape.exp(fw.logvar);
    let a = tape.add(mu2, var);
    let a = tape.sub(a, fw.logvar);
    let a = tape.add_scalar(a, -1.0);
    let kl = tape.sum(a);
    let kl = tape.scale(kl, 0.5 / n as f64);

    let segments = Rc::new(model.discrete_segments());
    let probs = tape.segment_softmax(fw.output, segments);
    let target = tape.leaf(model.targets(&batch.configurations)?);
    let diff = tape.sub(probs, target);
    let sq = tape.square(diff);
    let per_sample = tape.row_sum(sq);
    let weighted = tape.mul_const(per_sample, Tensor::from_vec(n, 1, batch.weights.clone()));
    let recon = tape.sum(weighted);
    let recon = tape.scale(recon, 1.0 / n as f64);

    let metric = if batch.pairs.is_empty() {
        None
    } else {
        let anchors: Vec<usize> = batch.pairs.iter().map(|p| p.0).collect();
        let pos: Vec<usize> = batch.pairs.iter().map(|p| p.1).collect();
        let neg: Vec<usize> = batch.pairs.iter().map(|p| p.2).collect();
        let targets: Vec<f64> = batch
            .pairs
            .iter()
            .map(|&(i, p, q)| {
                let f = &batch.values;
                ((f[i] - f[q]).abs() + METRIC_EPS).ln() - ((f[i] - f[p]).abs() + METRIC_EPS).ln()
            })
            .collect();
        let m = anchors.len();
        let za = tape.gather_rows(fw.z, anchors);
        let zp = tape.gather_rows(fw.z, pos);
        let zn = tape.gather_rows(fw.z, neg);
        let log_norm = |tape: &mut Tape, other: Var| {
            let d = tape.sub(za, other);
            let d = tape.square(d);
            let d = tape.row_sum(d);
            let d = tape.add_scalar(d, METRIC_EPS);
            let d = tape.sqrt(d);
            tape.ln(d)
        };
        let ln_neg = log_norm(tape, zn);
        let ln_pos = log_norm(tape, zp);
        let ratio = tape.sub(ln_neg, ln_pos);
        let c = tape.leaf(Tensor::from_vec(m, 1, targets));
        let r = tape.sub(ratio, c);
        let r = tape.square(r);
        let s = tape.sum(r);
        Some(tape.scale(s, 1.0 / m as f64))
    };

    let [w1, w2] = model.conv_weights(slot);
    let find = |idx: usize| fw.params.iter().find(|p| p.0 == idx).map(|p| p.1).unwrap();
    let r1 = orth_term(tape, find(w1));
    let r2 = orth_term(tape, find(w2));
    let reg = tape.add(r1, r2);

    let t = tape.scale(kl, lw.kl);
    let r = tape.scale(recon, lw.recon);
    let mut total = tape.add(t, r);
    if let Some(metric) = metric {
        let m = tape.scale(metric, lw.metric);
        total = tape.add(total, m);
    }
    let g = tape.scale(reg, lw.reg);
    let total = tape.add(total, g);
    Ok((
        LossVars {
            kl,
            recon,
            metric,
            reg,
            total,
        },
        fw,
    ))
}

/// Loss components and gradients of the total with respect to every
/// parameter used by `slot`, keyed by parameter index.
pub fn loss_total(
    model: &VgaeModel,
    slot: usize,
    adj: &AugmentedAdjacency,
    batch: &TrainBatch,
    eps: Option<&Tensor>,
    lw: LossWeights,
) -> Result<(LossBreakdown, Vec<(usize, Tensor)>)> {
    let mut tape = Tape::new();
    let (vars, fw) = record_loss(&mut tape, model, slot, adj, batch, eps, lw)?;
    let breakdown = LossBreakdown {
        kl: tape.value(vars.kl).item(),
        recon: tape.value(vars.recon).item(),
        metric: vars.metric.map_or(0.0, |m| tape.value(m).item()),
        reg: tape.value(vars.reg).item(),
        total: tape.value(vars.total).item(),
    };
    if !breakdown.total.is_finite() {
        return Err(Error::NonFiniteLoss(breakdown.total));
    }
    let grads = tape.backward(vars.total);
    let out = fw
        .params
        .iter()
        .map(|&(idx, v)| {
            let g = grads.get(v).cloned();
            (idx, g.unwrap_or_else(|| Tensor::zeros(model.params()[idx].rows, model.params()[idx].cols)))
        })
        .collect();
    Ok((breakdown, out))
}
