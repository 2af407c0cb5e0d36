//! Gaussian-process surrogate over latent points and UCB acquisition.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_KAPPA: f64 = 2.0;
pub const LENGTHSCALE_BOUNDS: [f64; 2] = [1e-3, 1e3];
pub const SIGNAL_BOUNDS: [f64; 2] = [1e-4, 1e4];
pub const NOISE_BOUNDS: [f64; 2] = [1e-8, 1.0];
pub const BOX_MIN_WIDTH: f64 = 1e-3;

const JITTER_LADDER: [f64; 6] = [0.0, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4];
const SQRT5: f64 = 2.236_067_977_499_79;

/// Matérn 5/2 hyperparameters with one lengthscale shared by all dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpParams {
    pub signal_variance: f64,
    pub lengthscale: f64,
    pub noise_variance: f64,
}

impl Default for GpParams {
    fn default() -> Self {
        Self {
            signal_variance: 1.0,
            lengthscale: 1.0,
            noise_variance: 1e-2,
        }
    }
}

impl GpParams {
    fn to_log(self) -> [f64; 3] {
        [self.lengthscale.ln(), self.signal_variance.ln(), self.noise_variance.ln()]
    }

    fn from_log(t: [f64; 3]) -> Self {
        Self {
            lengthscale: t[0].exp(),
            signal_variance: t[1].exp(),
            noise_variance: t[2].exp(),
        }
    }
}

fn log_bounds() -> [[f64; 2]; 3] {
    [LENGTHSCALE_BOUNDS, SIGNAL_BOUNDS, NOISE_BOUNDS].map(|[lo, hi]| [lo.ln(), hi.ln()])
}

fn project_log(t: [f64; 3]) -> [f64; 3] {
    let b = log_bounds();
    [0, 1, 2].map(|i| t[i].clamp(b[i][0], b[i][1]))
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `σ²(1 + √5 r/ℓ + 5r²/(3ℓ²)) exp(−√5 r/ℓ)`.
pub fn matern52(r: f64, p: &GpParams) -> f64 {
    let s = SQRT5 * r / p.lengthscale;
    p.signal_variance * (1.0 + s + s * s / 3.0) * (-s).exp()
}

pub fn matern_kernel(z1: &[f64], z2: &[f64], p: &GpParams) -> f64 {
    matern52(dist(z1, z2), p)
}

fn distances(z: &[Vec<f64>]) -> DMatrix<f64> {
    let n = z.len();
    let mut r = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..i {
            let d = dist(&z[i], &z[j]);
            r[(i, j)] = d;
            r[(j, i)] = d;
        }
    }
    r
}

fn covariance(r: &DMatrix<f64>, p: &GpParams) -> DMatrix<f64> {
    r.map(|d| matern52(d, p))
}

fn factor(mut k: DMatrix<f64>, noise: f64) -> Result<(Cholesky<f64, Dyn>, f64)> {
    let n = k.nrows();
    let mut applied = 0.0;
    for &jitter in &JITTER_LADDER {
        let extra = noise + jitter - applied;
        for i in 0..n {
            k[(i, i)] += extra;
        }
        applied = noise + jitter;
        if let Some(ch) = Cholesky::new(k.clone()) {
            return Ok((ch, jitter));
        }
    }
    Err(Error::CholeskyFailure)
}

/// Log marginal likelihood of zero-mean targets `y` and its gradient with
/// respect to `(ln ℓ, ln σ², ln σₙ²)`.
pub fn log_marginal_likelihood(z: &[Vec<f64>], y: &[f64], p: &GpParams) -> Result<(f64, [f64; 3])> {
    lml_from_distances(&distances(z), y, p)
}

fn lml_from_distances(r: &DMatrix<f64>, y: &[f64], p: &GpParams) -> Result<(f64, [f64; 3])> {
    let n = r.nrows();
    let k = covariance(r, p);
    let (ch, _) = factor(k.clone(), p.noise_variance)?;
    let yv = DVector::from_column_slice(y);
    let alpha = ch.solve(&yv);
    let log_det: f64 = ch.l_dirty().diagonal().iter().take(n).map(|d| d.ln()).sum::<f64>() * 2.0;
    let lml = -0.5 * yv.dot(&alpha) - 0.5 * log_det - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
    let kinv = ch.inverse();
    let mut grad = [0.0; 3];
    for i in 0..n {
        let w = alpha[i] * alpha[i] - kinv[(i, i)];
        grad[1] += w * k[(i, i)];
        grad[2] += w * p.noise_variance;
        for j in 0..i {
            // symmetric off-diagonal pair counted twice
            let w = 2.0 * (alpha[i] * alpha[j] - kinv[(i, j)]);
            let s = SQRT5 * r[(i, j)] / p.lengthscale;
            grad[0] += w * p.signal_variance * s * s * (1.0 + s) * (-s).exp() / 3.0;
            grad[1] += w * k[(i, j)];
        }
    }
    Ok((lml, grad.map(|g| 0.5 * g)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub restarts: usize,
    pub max_evals: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            restarts: 2,
            max_evals: 30,
        }
    }
}

/// Fitted surrogate. Targets are standardized internally; `predict` works in
/// standardized units and `predict_raw` in the caller's units.
#[derive(Debug, Clone)]
pub struct GpState {
    z: Vec<Vec<f64>>,
    y: Vec<f64>,
    y_mean: f64,
    y_std: f64,
    params: GpParams,
    lml: f64,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
}

impl GpState {
    /// Conditions a GP with fixed hyperparameters on zero-mean targets.
    pub fn condition(z: Vec<Vec<f64>>, y: Vec<f64>, params: GpParams) -> Result<Self> {
        if z.is_empty() || z.len() != y.len() {
            return Err(Error::TooFewPoints {
                needed: 1,
                got: z.len().min(y.len()),
            });
        }
        let (chol, _) = factor(covariance(&distances(&z), &params), params.noise_variance)?;
        let alpha = chol.solve(&DVector::from_column_slice(&y));
        Ok(Self {
            z,
            y,
            y_mean: 0.0,
            y_std: 1.0,
            params,
            lml: f64::NAN,
            chol,
            alpha,
        })
    }

    pub fn params(&self) -> GpParams {
        self.params
    }

    pub fn log_marginal_likelihood(&self) -> f64 {
        self.lml
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.z
    }

    pub fn standardized_targets(&self) -> &[f64] {
        &self.y
    }

    pub fn standardize(&self, y: f64) -> f64 {
        (y - self.y_mean) / self.y_std
    }

    /// Posterior mean and latent-function variance (standardized units).
    pub fn predict(&self, z: &[f64]) -> (f64, f64) {
        let kstar = DVector::from_iterator(self.z.len(), self.z.iter().map(|zi| matern_kernel(zi, z, &self.params)));
        let mean = kstar.dot(&self.alpha);
        // the strict upper part of l_dirty is ignored by the triangular solve
        let v = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&kstar)
            .unwrap_or_else(|| DVector::zeros(self.z.len()));
        let var = (self.params.signal_variance - v.norm_squared()).max(0.0);
        (mean, var)
    }

    pub fn predict_raw(&self, z: &[f64]) -> (f64, f64) {
        let (m, v) = self.predict(z);
        (m * self.y_std + self.y_mean, v * self.y_std * self.y_std)
    }

    /// Mean, variance and their gradients with respect to `z`.
    pub fn predict_with_gradient(&self, z: &[f64]) -> (f64, f64, Vec<f64>, Vec<f64>) {
        let n = self.z.len();
        let p = &self.params;
        let d = z.len();
        let mut kstar = DVector::zeros(n);
        let mut dk = vec![vec![0.0; d]; n];
        for (i, zi) in self.z.iter().enumerate() {
            let r = dist(zi, z);
            let s = SQRT5 * r / p.lengthscale;
            let e = (-s).exp();
            kstar[i] = p.signal_variance * (1.0 + s + s * s / 3.0) * e;
            let c = -p.signal_variance * 5.0 / (3.0 * p.lengthscale * p.lengthscale) * (1.0 + s) * e;
            for m in 0..d {
                dk[i][m] = c * (z[m] - zi[m]);
            }
        }
        let mean = kstar.dot(&self.alpha);
        let w = self.chol.solve(&kstar);
        let var = (p.signal_variance - kstar.dot(&w)).max(0.0);
        let mut gm = vec![0.0; d];
        let mut gv = vec![0.0; d];
        for i in 0..n {
            for m in 0..d {
                gm[m] += self.alpha[i] * dk[i][m];
                gv[m] -= 2.0 * w[i] * dk[i][m];
            }
        }
        (mean, var, gm, gv)
    }

    /// Index of the largest training target.
    pub fn incumbent(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.y.iter().enumerate() {
            if v > self.y[best] {
                best = i;
            }
        }
        best
    }
}

fn ascend(r: &DMatrix<f64>, y: &[f64], start: [f64; 3], max_evals: usize) -> Option<([f64; 3], f64)> {
    let eval = |t: [f64; 3]| lml_from_distances(r, y, &GpParams::from_log(t)).ok();
    let mut theta = project_log(start);
    let (mut best, mut grad) = eval(theta)?;
    let mut evals = 1;
    let mut step = 0.5;
    while evals < max_evals {
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if norm < 1e-9 {
            break;
        }
        let cand = project_log([0, 1, 2].map(|i| theta[i] + step * grad[i] / norm));
        let moved = (0..3).map(|i| (cand[i] - theta[i]).abs()).fold(0.0, f64::max);
        if moved < 1e-7 {
            break;
        }
        evals += 1;
        match eval(cand) {
            Some((v, g)) if v > best => {
                theta = cand;
                best = v;
                grad = g;
                step = (step * 2.0).min(2.0);
            }
            _ => {
                step *= 0.25;
                if step < 1e-6 {
                    break;
                }
            }
        }
    }
    Some((theta, best))
}

/// Maximizes the log marginal likelihood from a default start, `previous`
/// (if any) and `restarts` random starts, keeping the best.
pub fn fit<R: Rng + ?Sized>(
    z: &[Vec<f64>],
    y: &[f64],
    previous: Option<GpParams>,
    options: FitOptions,
    rng: &mut R,
) -> Result<GpState> {
    let n = z.len();
    if n < 2 || y.len() != n {
        return Err(Error::TooFewPoints { needed: 2, got: n.min(y.len()) });
    }
    let mean = y.iter().sum::<f64>() / n as f64;
    let std = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
    let z = z.to_vec();
    if !(std > 1e-12) {
        log::debug!("constant targets, using fallback hyperparameters");
        let mut state = GpState::condition(z, vec![0.0; n], GpParams::default())?;
        state.y_mean = mean;
        return Ok(state);
    }
    let ys: Vec<f64> = y.iter().map(|v| (v - mean) / std).collect();

    let r = distances(&z);
    let mut pairs: Vec<f64> = Vec::new();
    for i in 0..n.min(60) {
        for j in 0..i {
            pairs.push(r[(i, j)]);
        }
    }
    pairs.sort_by(f64::total_cmp);
    let median = pairs.get(pairs.len() / 2).copied().filter(|d| *d > 0.0).unwrap_or(1.0);

    let mut starts = vec![[median.ln(), 0.0, (1e-3f64).ln()]];
    if let Some(p) = previous {
        starts.push(p.to_log());
    }
    for _ in 0..options.restarts {
        starts.push([
            (median * rng.random_range(0.1..3.0f64)).ln(),
            rng.random_range(-1.0..1.5f64),
            rng.random_range(-12.0..-2.0f64),
        ]);
    }
    let mut best: Option<([f64; 3], f64)> = None;
    for s in starts {
        if let Some((t, v)) = ascend(&r, &ys, s, options.max_evals) {
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((t, v));
            }
        }
    }
    let (theta, lml) = best.ok_or(Error::CholeskyFailure)?;
    let params = GpParams::from_log(theta);
    let mut state = GpState::condition(z, ys, params)?;
    state.y_mean = mean;
    state.y_std = std;
    state.lml = lml;
    Ok(state)
}

pub fn ucb(mean: f64, variance: f64, kappa: f64) -> f64 {
    mean + kappa * variance.max(0.0).sqrt()
}

/// Axis-aligned search region in latent space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl LatentBox {
    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, z: &[f64]) -> bool {
        z.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (lo, hi))| *lo <= *v && *v <= *hi)
    }

    pub fn project(&self, z: &mut [f64]) {
        for (v, (lo, hi)) in z.iter_mut().zip(self.lo.iter().zip(&self.hi)) {
            *v = v.clamp(*lo, *hi);
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(lo, hi)| rng.random_range(*lo..=*hi)).collect()
    }
}

/// Per-dimension `[min − σ, max + σ]` with σ the population standard
/// deviation; zero-width dimensions are widened symmetrically.
pub fn latent_box(z: &[Vec<f64>]) -> Result<LatentBox> {
    if z.len() < 2 {
        return Err(Error::TooFewPoints { needed: 2, got: z.len() });
    }
    let d = z[0].len();
    let n = z.len() as f64;
    let mut lo = Vec::with_capacity(d);
    let mut hi = Vec::with_capacity(d);
    for m in 0..d {
        let col = z.iter().map(|r| r[m]);
        let mean = col.clone().sum::<f64>() / n;
        let sd = (col.clone().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        let min = col.clone().fold(f64::INFINITY, f64::min);
        let max = col.fold(f64::NEG_INFINITY, f64::max);
        let (mut a, mut b) = (min - sd, max + sd);
        if b - a <= 0.0 {
            a -= BOX_MIN_WIDTH / 2.0;
            b += BOX_MIN_WIDTH / 2.0;
        }
        lo.push(a);
        hi.push(b);
    }
    Ok(LatentBox { lo, hi })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcquisitionOptions {
    pub uniform_starts: usize,
    pub incumbent_starts: usize,
    pub max_steps: usize,
}

impl Default for AcquisitionOptions {
    fn default() -> Self {
        Self {
            uniform_starts: 8,
            incumbent_starts: 2,
            max_steps: 40,
        }
    }
}

fn ucb_with_gradient(state: &GpState, z: &[f64], kappa: f64) -> (f64, Vec<f64>) {
    let (m, v, gm, gv) = state.predict_with_gradient(z);
    let sd = v.sqrt();
    let g = gm
        .iter()
        .zip(&gv)
        .map(|(a, b)| if sd > 1e-12 { a + kappa * b / (2.0 * sd) } else { *a })
        .collect();
    (m + kappa * sd, g)
}

fn climb(state: &GpState, bx: &LatentBox, kappa: f64, start: Vec<f64>, max_steps: usize) -> (Vec<f64>, f64) {
    let mut z = start;
    bx.project(&mut z);
    let (mut best, mut grad) = ucb_with_gradient(state, &z, kappa);
    let width = bx.lo.iter().zip(&bx.hi).map(|(a, b)| b - a).fold(0.0, f64::max);
    let mut step = 0.1 * width;
    let tol = 1e-9 * width.max(1e-12);
    let mut steps = 0;
    while steps < max_steps && step > tol {
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if norm < 1e-12 {
            break;
        }
        let mut cand: Vec<f64> = z.iter().zip(&grad).map(|(v, g)| v + step * g / norm).collect();
        bx.project(&mut cand);
        steps += 1;
        let (v, g) = ucb_with_gradient(state, &cand, kappa);
        if v > best {
            z = cand;
            best = v;
            grad = g;
            step *= 1.5;
        } else {
            step *= 0.3;
        }
    }
    (z, best)
}

/// Multi-start projected gradient ascent on UCB; the best result wins with
/// ties going to the earliest start.
pub fn optimize_acquisition<R: Rng + ?Sized>(
    state: &GpState,
    bx: &LatentBox,
    kappa: f64,
    options: AcquisitionOptions,
    rng: &mut R,
) -> Vec<f64> {
    let mut starts: Vec<Vec<f64>> = (0..options.uniform_starts).map(|_| bx.sample(rng)).collect();
    let inc = state.inputs()[state.incumbent()].clone();
    for _ in 0..options.incumbent_starts {
        let z = inc
            .iter()
            .zip(bx.lo.iter().zip(&bx.hi))
            .map(|(v, (lo, hi))| {
                let noise = Normal::new(0.0, 0.05 * (hi - lo)).expect("positive width");
                v + noise.sample(rng)
            })
            .collect();
        starts.push(z);
    }
    let mut best = {
        let mut z = inc;
        bx.project(&mut z);
        let (m, v) = state.predict(&z);
        (z, ucb(m, v, kappa))
    };
    for s in starts {
        let (z, v) = climb(state, bx, kappa, s, options.max_steps);
        if v > best.1 {
            best = (z, v);
        }
    }
    best.0
}
