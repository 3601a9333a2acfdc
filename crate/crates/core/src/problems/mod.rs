//! Objective families `f = (1/n) Σ f_i` exposed as per-node gradient oracles.

mod libsvm;
mod logistic;
mod quadratic;

pub use libsvm::{
    geometric_scales, load_ijcnn1, parse_libsvm, parse_libsvm_str, partition, synthetic_dataset, synthetic_fixture,
    write_libsvm, Dataset, ShardManifest, IJCNN1_DIM,
};
pub use logistic::{make_logistic, smoothness_constant, LogisticProblem, Regularizer};
pub use quadratic::{make_quadratic, QuadraticProblem};

use nalgebra::DVector;
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

/// Per-node oracle for `f_i : R^d → R`.
///
/// Implementations are immutable after construction. Stochastic gradients take
/// the caller's noise source, so concurrent callers never share RNG state.
pub trait Problem: Send + Sync {
    fn nodes(&self) -> usize;

    fn dim(&self) -> usize;

    /// Smoothness constant `L` shared by every `f_i`.
    fn smoothness(&self) -> f64;

    /// Strong-convexity constant `μ` of every `f_i`; `0` when not strongly
    /// convex (or non-convex).
    fn strong_convexity(&self) -> f64;

    /// Per-coordinate variance `σ²` of the additive gradient noise.
    fn noise_variance(&self) -> f64;

    fn value_i(&self, i: usize, x: &[f64]) -> f64;

    fn grad_i_into(&self, i: usize, x: &[f64], out: &mut [f64]);

    /// Content hash identifying the problem instance (data and parameters).
    fn fingerprint(&self) -> String;

    fn grad_i(&self, i: usize, x: &[f64]) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim());
        self.grad_i_into(i, x, out.as_mut_slice());
        out
    }

    /// `∇f_i(x) + ω` with `ω ~ N(0, σ² I_d)`. Draws nothing when `σ² = 0`.
    fn stochastic_grad_into(&self, i: usize, x: &[f64], rng: &mut dyn RngCore, out: &mut [f64]) {
        self.grad_i_into(i, x, out);
        let sigma2 = self.noise_variance();
        if sigma2 > 0.0 {
            let sigma = sigma2.sqrt();
            for o in out.iter_mut() {
                let z: f64 = StandardNormal.sample(rng);
                *o += sigma * z;
            }
        }
    }

    fn stochastic_grad_i(&self, i: usize, x: &[f64], rng: &mut dyn RngCore) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim());
        self.stochastic_grad_into(i, x, rng, out.as_mut_slice());
        out
    }

    /// `f(x) = (1/n) Σ f_i(x)`.
    fn value(&self, x: &[f64]) -> f64 {
        (0..self.nodes()).map(|i| self.value_i(i, x)).sum::<f64>() / self.nodes() as f64
    }

    fn grad(&self, x: &[f64]) -> DVector<f64> {
        let mut total = DVector::zeros(self.dim());
        let mut buf = vec![0.0; self.dim()];
        for i in 0..self.nodes() {
            self.grad_i_into(i, x, &mut buf);
            for (t, b) in total.iter_mut().zip(&buf) {
                *t += b;
            }
        }
        total / self.nodes() as f64
    }

    /// Bound on `(1/n) Σ E‖g_i − ∇f_i‖²` implied by per-coordinate noise,
    /// i.e. `σ² d`.
    fn noise_bound(&self) -> f64 {
        self.noise_variance() * self.dim() as f64
    }

    fn condition_number(&self) -> f64 {
        let mu = self.strong_convexity();
        if mu > 0.0 {
            self.smoothness() / mu
        } else {
            f64::INFINITY
        }
    }
}

/// `(1/n) Σ ‖∇f_i(x) − ∇f(x)‖²`.
pub fn heterogeneity(problem: &dyn Problem, x: &[f64]) -> f64 {
    let mean = problem.grad(x);
    (0..problem.nodes())
        .map(|i| (problem.grad_i(i, x) - &mean).norm_squared())
        .sum::<f64>()
        / problem.nodes() as f64
}

/// Largest central-difference error `|∂_k f_i(x) − grad_i(x)_k|` over all
/// nodes and coordinates, with step `h`.
pub fn finite_difference_error(problem: &dyn Problem, x: &[f64], h: f64) -> f64 {
    let mut worst = 0.0f64;
    let mut xp = x.to_vec();
    for i in 0..problem.nodes() {
        let g = problem.grad_i(i, x);
        for k in 0..problem.dim() {
            xp[k] = x[k] + h;
            let up = problem.value_i(i, &xp);
            xp[k] = x[k] - h;
            let down = problem.value_i(i, &xp);
            xp[k] = x[k];
            worst = worst.max(((up - down) / (2.0 * h) - g[k]).abs());
        }
    }
    worst
}

pub(crate) fn hash_hex(parts: impl FnOnce(&mut sha2::Sha256)) -> String {
    use sha2::Digest;
    let mut hasher = sha2::Sha256::new();
    parts(&mut hasher);
    hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
}
