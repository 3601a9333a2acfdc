use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::Digest;

use super::{hash_hex, Dataset, Problem};
use crate::error::{Error, Result};

/// Regularizer added to every node's logistic loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Regularizer {
    /// `(c/2)‖x‖²`
    L2 { coef: f64 },
    /// `Σ_k x_k² / (1 + x_k²)`
    Nonconvex,
}

impl Regularizer {
    pub fn value(&self, x: &[f64]) -> f64 {
        match *self {
            Regularizer::L2 { coef } => 0.5 * coef * x.iter().map(|v| v * v).sum::<f64>(),
            Regularizer::Nonconvex => x.iter().map(|v| v * v / (1.0 + v * v)).sum(),
        }
    }

    /// Adds `∇r(x)` to `out`.
    pub fn add_grad(&self, x: &[f64], out: &mut [f64]) {
        match *self {
            Regularizer::L2 { coef } => {
                for (o, v) in out.iter_mut().zip(x) {
                    *o += coef * v;
                }
            }
            Regularizer::Nonconvex => {
                for (o, v) in out.iter_mut().zip(x) {
                    let s = 1.0 + v * v;
                    *o += 2.0 * v / (s * s);
                }
            }
        }
    }

    /// `sup |r''|`: `c` for the quadratic, `2` (attained at 0) otherwise.
    pub fn curvature_bound(&self) -> f64 {
        match *self {
            Regularizer::L2 { coef } => coef,
            Regularizer::Nonconvex => 2.0,
        }
    }

    pub fn strong_convexity(&self) -> f64 {
        match *self {
            Regularizer::L2 { coef } => coef,
            Regularizer::Nonconvex => 0.0,
        }
    }
}

#[derive(Debug, Clone)]
struct Shard {
    /// `m_i × d`, one sample per row.
    features: DMatrix<f64>,
    labels: DVector<f64>,
}

/// `f_i(x) = (1/m_i) Σ_j ln(1 + exp(−B_ij A_ijᵀx)) + r(x)` with additive
/// Gaussian gradient noise.
#[derive(Debug, Clone)]
pub struct LogisticProblem {
    shards: Vec<Shard>,
    d: usize,
    regularizer: Regularizer,
    sigma2: f64,
    data_smoothness: f64,
}

pub fn make_logistic(shards: &[Dataset], regularizer: Regularizer, sigma2: f64) -> Result<LogisticProblem> {
    if shards.is_empty() {
        return Err(Error::invalid("need at least one shard"));
    }
    let d = shards[0].dim();
    let mut dense = Vec::with_capacity(shards.len());
    for (i, s) in shards.iter().enumerate() {
        if s.is_empty() {
            return Err(Error::invalid(format!("shard {i} is empty")));
        }
        if s.dim() != d {
            return Err(Error::invalid(format!("shard {i} has dimension {} != {d}", s.dim())));
        }
        let mut features = DMatrix::zeros(s.len(), d);
        for (r, row) in s.rows().iter().enumerate() {
            for &(k, v) in row {
                features[(r, k)] = v;
            }
        }
        dense.push(Shard { features, labels: DVector::from_column_slice(s.labels()) });
    }
    let mut problem = LogisticProblem { shards: dense, d, regularizer, sigma2, data_smoothness: 0.0 };
    problem.data_smoothness = data_smoothness(&problem)?;
    Ok(problem)
}

impl LogisticProblem {
    pub fn regularizer(&self) -> Regularizer {
        self.regularizer
    }

    /// `max_i λ_max(A_iᵀA_i)/(4 m_i)`, the smoothness of the loss part alone.
    pub fn data_smoothness(&self) -> f64 {
        self.data_smoothness
    }

    pub fn shard_sizes(&self) -> Vec<usize> {
        self.shards.iter().map(|s| s.labels.len()).collect()
    }

    pub fn with_regularizer(&self, regularizer: Regularizer) -> Self {
        LogisticProblem { regularizer, ..self.clone() }
    }

    pub fn with_noise(&self, sigma2: f64) -> Self {
        LogisticProblem { sigma2, ..self.clone() }
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Problem for LogisticProblem {
    fn nodes(&self) -> usize {
        self.shards.len()
    }

    fn dim(&self) -> usize {
        self.d
    }

    fn smoothness(&self) -> f64 {
        self.data_smoothness + self.regularizer.curvature_bound()
    }

    fn strong_convexity(&self) -> f64 {
        self.regularizer.strong_convexity()
    }

    fn noise_variance(&self) -> f64 {
        self.sigma2
    }

    fn value_i(&self, i: usize, x: &[f64]) -> f64 {
        let s = &self.shards[i];
        let x = DVector::from_column_slice(x);
        let margins = &s.features * &x;
        let loss: f64 = margins
            .iter()
            .zip(s.labels.iter())
            .map(|(m, b)| softplus(-m * b))
            .sum();
        loss / s.labels.len() as f64 + self.regularizer.value(x.as_slice())
    }

    fn grad_i_into(&self, i: usize, x: &[f64], out: &mut [f64]) {
        let s = &self.shards[i];
        let xv = DVector::from_column_slice(x);
        let margins = &s.features * &xv;
        let m = s.labels.len() as f64;
        let weights = DVector::from_iterator(
            margins.len(),
            margins.iter().zip(s.labels.iter()).map(|(a, b)| -b * sigmoid(-b * a) / m),
        );
        let g = s.features.tr_mul(&weights);
        out.copy_from_slice(g.as_slice());
        self.regularizer.add_grad(x, out);
    }

    fn fingerprint(&self) -> String {
        hash_hex(|h| {
            h.update(b"logistic");
            h.update(serde_json::to_vec(&self.regularizer).expect("regularizer serializes"));
            h.update(self.sigma2.to_le_bytes());
            for s in &self.shards {
                h.update((s.labels.len() as u64).to_le_bytes());
                for v in s.features.iter().chain(s.labels.iter()) {
                    h.update(v.to_le_bytes());
                }
            }
        })
    }
}

const POWER_TOL: f64 = 1e-8;
const POWER_MAX_ITERS: usize = 10_000;

/// Largest eigenvalue of a symmetric PSD matrix by power iteration, stopping
/// when the Rayleigh quotient changes by less than `1e-8` relatively.
pub(crate) fn power_iteration(m: &DMatrix<f64>) -> Result<f64> {
    let d = m.nrows();
    // fixed, non-symmetric start so no eigenvector is missed by construction
    let mut v = DVector::from_fn(d, |k, _| 1.0 + (k as f64 * 0.618_033_988_7).fract());
    v.normalize_mut();
    let mut lambda = 0.0;
    for _ in 0..POWER_MAX_ITERS {
        let w = m * &v;
        let norm = w.norm();
        if norm == 0.0 {
            return Ok(0.0);
        }
        let next = v.dot(&w);
        v = w / norm;
        if (next - lambda).abs() <= POWER_TOL * next.abs() {
            return Ok(next);
        }
        lambda = next;
    }
    Err(Error::Numeric(format!(
        "power iteration did not converge in {POWER_MAX_ITERS} steps"
    )))
}

fn data_smoothness(p: &LogisticProblem) -> Result<f64> {
    let mut best = 0.0f64;
    for s in &p.shards {
        let gram = s.features.tr_mul(&s.features);
        best = best.max(power_iteration(&gram)? / (4.0 * s.labels.len() as f64));
    }
    Ok(best)
}

/// `L = max_i λ_max(A_iᵀA_i)/(4 m_i) + L_r`.
pub fn smoothness_constant(p: &LogisticProblem) -> f64 {
    p.smoothness()
}
