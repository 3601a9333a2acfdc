//! Decentralized methods: ProxSkip in its primal-dual and `U` forms, and
//! local-DSGD as the client-drift baseline.
//!
//! Every method implements [`Method`], so third-party baselines (gradient
//! tracking variants and the like) plug into the same driver, trace format
//! and harness.

mod local_dsgd;
mod proxskip;

pub use local_dsgd::{local_dsgd_run, LocalDsgd};
pub use proxskip::{
    max_form_deviation, proxskip_run, proxskip_run_dual_form, proxskip_step, InvariantMonitor, ProxSkip,
    ProxSkipDual,
};

pub use crate::trace::count_comms_to_accuracy;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problems::Problem;
use crate::rng::Streams;
use crate::trace::{Evaluator, RunTrace};

/// Constant in the `χ ≥ max{1, 288(1−p)/(1−λ₂)}` condition of the `β = 1`
/// regime.
pub const THEOREM1_CHI_CONSTANT: f64 = 288.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub alpha: f64,
    pub beta: f64,
    /// Communication probability.
    pub p: f64,
    pub chi: f64,
    /// Iteration budget `T`.
    pub iterations: usize,
    /// Master seed of the coin and noise streams.
    pub seed: u64,
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| Err(Error::invalid(format!("{what} = {v} out of range")));
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad("alpha", self.alpha);
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return bad("beta", self.beta);
        }
        if !(self.p > 0.0 && self.p <= 1.0) {
            return bad("p", self.p);
        }
        if !(self.chi >= 1.0 && self.chi.is_finite()) {
            return bad("chi", self.chi);
        }
        Ok(())
    }

    /// `β = p`, `χ = 1`.
    pub fn lemma1(alpha: f64, p: f64, iterations: usize, seed: u64) -> Self {
        HyperParams { alpha, beta: p, p, chi: 1.0, iterations, seed }
    }

    /// `β = 1`, `χ = max{1, 288(1−p)/(1−λ₂)}`.
    pub fn theorem1(alpha: f64, p: f64, lambda2: f64, iterations: usize, seed: u64) -> Self {
        let chi = (THEOREM1_CHI_CONSTANT * (1.0 - p) / (1.0 - lambda2)).max(1.0);
        HyperParams { alpha, beta: 1.0, p, chi, iterations, seed }
    }

    /// Network-independent stepsize `α = 1/(2L)` with `β = p`.
    pub fn theorem2(smoothness: f64, p: f64, chi: f64, iterations: usize, seed: u64) -> Self {
        HyperParams { alpha: 0.5 / smoothness, beta: p, p, chi, iterations, seed }
    }

    /// `ζ = max{1 − αμ, 1 − (1−λ₂)p²/(2χ)}`, the linear rate of the
    /// deterministic iteration.
    pub fn linear_rate(&self, mu: f64, lambda2: f64) -> f64 {
        (1.0 - self.alpha * mu).max(1.0 - (1.0 - lambda2) * self.p * self.p / (2.0 * self.chi))
    }
}

/// Stacked iterates and control variates, one row per node.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmState {
    pub x: DMatrix<f64>,
    pub y: DMatrix<f64>,
    pub t: usize,
    pub comms: usize,
}

impl AlgorithmState {
    /// Every node starts at `x0`; `Y⁰ = 0`.
    pub fn new(n: usize, x0: &[f64]) -> Self {
        let d = x0.len();
        AlgorithmState {
            x: DMatrix::from_fn(n, d, |_, j| x0[j]),
            y: DMatrix::zeros(n, d),
            t: 0,
            comms: 0,
        }
    }
}

/// One shared coin per iteration: `θ_t = 1` with probability `p`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoinSequence {
    bits: Vec<bool>,
}

impl CoinSequence {
    pub fn draw(p: f64, len: usize, rng: &mut dyn RngCore) -> Self {
        CoinSequence { bits: (0..len).map(|_| rng.random_bool(p)).collect() }
    }

    /// Coins from the coin stream of `seed`.
    pub fn from_seed(p: f64, len: usize, seed: u64) -> Self {
        Self::draw(p, len, &mut Streams::new(seed).coins())
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        CoinSequence { bits }
    }

    pub fn constant(bit: bool, len: usize) -> Self {
        CoinSequence { bits: vec![bit; len] }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// `θ_t`; iterations past the drawn horizon never communicate.
    pub fn get(&self, t: usize) -> bool {
        self.bits.get(t).copied().unwrap_or(false)
    }

    pub fn ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub communicated: bool,
    /// Mean of the stochastic gradients drawn in this step.
    pub mean_grad: DVector<f64>,
}

/// A synchronous decentralized method advancing all nodes one iteration at a
/// time.
pub trait Method {
    fn name(&self) -> &str;

    /// Current `n × d` iterate matrix.
    fn iterates(&self) -> &DMatrix<f64>;

    fn iteration(&self) -> usize;

    fn comms(&self) -> usize;

    /// Advances one iteration. `noise[i]` is node `i`'s gradient-noise stream.
    fn step(&mut self, problem: &dyn Problem, noise: &mut [ChaCha8Rng]) -> Result<StepReport>;
}

/// Fills row `i` of `out` with node `i`'s stochastic gradient at row `i` of
/// `x`; returns the row mean.
pub fn stochastic_gradients(
    problem: &dyn Problem,
    x: &DMatrix<f64>,
    noise: &mut [ChaCha8Rng],
    out: &mut DMatrix<f64>,
) -> DVector<f64> {
    let (n, d) = x.shape();
    let mut xi = vec![0.0; d];
    let mut gi = vec![0.0; d];
    for i in 0..n {
        for (j, v) in xi.iter_mut().enumerate() {
            *v = x[(i, j)];
        }
        problem.stochastic_grad_into(i, &xi, &mut noise[i], &mut gi);
        for (j, g) in gi.iter().enumerate() {
            out[(i, j)] = *g;
        }
    }
    out.row_mean().transpose()
}

pub(crate) fn check_finite(x: &DMatrix<f64>, t: usize) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Divergence { t })
    }
}

/// Runs `iterations` steps, recording metrics at `t = 0` and after every
/// step. Stops early, marking the trace truncated, when an interrupt has been
/// requested.
pub fn run_method(
    method: &mut dyn Method,
    problem: &dyn Problem,
    iterations: usize,
    noise: &mut [ChaCha8Rng],
    eval: &Evaluator<'_>,
) -> Result<RunTrace> {
    let mut records = Vec::with_capacity(iterations + 1);
    records.push(eval.record(method.iteration(), method.comms(), method.iterates()));
    let mut truncated = false;
    for _ in 0..iterations {
        if crate::interrupt::requested() {
            truncated = true;
            break;
        }
        method.step(problem, noise)?;
        records.push(eval.record(method.iteration(), method.comms(), method.iterates()));
    }
    Ok(RunTrace { records, absolute_error: eval.absolute_error(), truncated })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets() {
        let h = HyperParams::lemma1(0.1, 0.3, 10, 0);
        assert_eq!((h.beta, h.chi), (0.3, 1.0));
        let h = HyperParams::theorem1(0.1, 0.5, 0.9, 10, 0);
        assert_eq!(h.beta, 1.0);
        assert!((h.chi - 288.0 * 0.5 / 0.1).abs() < 1e-9);
        assert_eq!(HyperParams::theorem1(0.1, 1.0, 0.9, 10, 0).chi, 1.0);
        let h = HyperParams::theorem2(1.0, 0.2, 1.0, 10, 0);
        assert_eq!((h.alpha, h.beta), (0.5, 0.2));
    }

    #[test]
    fn validation() {
        let ok = HyperParams::lemma1(0.1, 0.5, 10, 0);
        assert!(ok.validate().is_ok());
        assert!(HyperParams { alpha: 0.0, ..ok }.validate().is_err());
        assert!(HyperParams { p: 0.0, ..ok }.validate().is_err());
        assert!(HyperParams { p: 1.5, ..ok }.validate().is_err());
        assert!(HyperParams { chi: 0.9, ..ok }.validate().is_err());
        assert!(HyperParams { beta: -1.0, ..ok }.validate().is_err());
    }

    #[test]
    fn coin_frequency() {
        for &p in &[0.1, 0.5, 0.9] {
            let len = 20_000;
            let c = CoinSequence::from_seed(p, len, 17);
            let freq = c.ones() as f64 / len as f64;
            assert!((freq - p).abs() <= 3.0 * (p * (1.0 - p) / len as f64).sqrt(), "p={p}: {freq}");
        }
        assert_eq!(CoinSequence::from_seed(1.0, 50, 1).ones(), 50);
        assert!(!CoinSequence::constant(true, 3).get(3));
    }

    #[test]
    fn linear_rate_formula() {
        let h = HyperParams::lemma1(1.0, 1.0, 0, 0);
        let lambda2 = 0.8;
        assert_eq!(h.linear_rate(0.01, lambda2), 0.99);
        assert!((h.linear_rate(0.5, lambda2) - 0.9).abs() < 1e-15);
    }
}
