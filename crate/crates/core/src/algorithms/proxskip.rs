use nalgebra::DMatrix;
use rand_chacha::ChaCha8Rng;

use super::{check_finite, run_method, stochastic_gradients, AlgorithmState, CoinSequence, HyperParams, Method, StepReport};
use crate::error::{Error, Result};
use crate::problems::Problem;
use crate::rng::Streams;
use crate::topology::{augment, AugmentedMixing, MixingMatrix};
use crate::trace::{Evaluator, RunTrace};

/// One ProxSkip iteration:
///
/// ```text
/// Ẑ  = X − αG(X) − Y
/// θ = 1:  X⁺ = W_a Ẑ,  Y⁺ = Y + β(Ẑ − X⁺)
/// θ = 0:  X⁺ = Ẑ,      Y⁺ = Y
/// ```
pub fn proxskip_step(
    state: &mut AlgorithmState,
    problem: &dyn Problem,
    mixing: &AugmentedMixing,
    hp: &HyperParams,
    theta: bool,
    noise: &mut [ChaCha8Rng],
) -> Result<StepReport> {
    let mut grads = DMatrix::zeros(state.x.nrows(), state.x.ncols());
    let mean_grad = stochastic_gradients(problem, &state.x, noise, &mut grads);
    let zhat = &state.x - grads * hp.alpha - &state.y;
    if theta {
        let x_next = mixing.wa() * &zhat;
        state.y += (zhat - &x_next) * hp.beta;
        state.x = x_next;
        state.comms += 1;
    } else {
        state.x = zhat;
    }
    state.t += 1;
    check_finite(&state.x, state.t)?;
    Ok(StepReport { communicated: theta, mean_grad })
}

/// Worst scale-relative violations of the two structural invariants seen so
/// far: the mean recursion `x̄⁺ = x̄ − αḡ` and the null column sums `1ᵀY = 0`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct InvariantMonitor {
    pub mean_identity: f64,
    pub null_sum: f64,
    pub steps: usize,
}

impl InvariantMonitor {
    pub fn holds(&self, tol: f64) -> bool {
        self.mean_identity <= tol && self.null_sum <= tol
    }
}

fn max_abs<'a>(v: impl IntoIterator<Item = &'a f64>) -> f64 {
    v.into_iter().fold(0.0, |a, x| a.max(x.abs()))
}

/// ProxSkip in its primal-dual form, with invariant tracking on every step.
#[derive(Debug, Clone)]
pub struct ProxSkip {
    state: AlgorithmState,
    mixing: AugmentedMixing,
    hp: HyperParams,
    coins: CoinSequence,
    monitor: InvariantMonitor,
}

impl ProxSkip {
    /// Coins come from the coin stream of `hp.seed`.
    pub fn new(w: &MixingMatrix, hp: HyperParams, x0: &[f64]) -> Result<Self> {
        hp.validate()?;
        Ok(ProxSkip {
            state: AlgorithmState::new(w.n(), x0),
            mixing: augment(w, hp.chi)?,
            coins: CoinSequence::from_seed(hp.p, hp.iterations, hp.seed),
            hp,
            monitor: InvariantMonitor::default(),
        })
    }

    pub fn with_coins(mut self, coins: CoinSequence) -> Self {
        self.coins = coins;
        self
    }

    /// Replaces `Y⁰ = 0`. Only for fault injection: a nonzero start breaks the
    /// invariants and the equivalence with the `U` form.
    pub fn with_initial_control(mut self, y0: DMatrix<f64>) -> Result<Self> {
        if y0.shape() != self.state.y.shape() {
            return Err(Error::invalid(format!(
                "initial control has shape {:?}, expected {:?}",
                y0.shape(),
                self.state.y.shape()
            )));
        }
        self.state.y = y0;
        Ok(self)
    }

    pub fn state(&self) -> &AlgorithmState {
        &self.state
    }

    pub fn invariants(&self) -> InvariantMonitor {
        self.monitor
    }

    pub fn hyper(&self) -> &HyperParams {
        &self.hp
    }
}

impl Method for ProxSkip {
    fn name(&self) -> &str {
        "proxskip"
    }

    fn iterates(&self) -> &DMatrix<f64> {
        &self.state.x
    }

    fn iteration(&self) -> usize {
        self.state.t
    }

    fn comms(&self) -> usize {
        self.state.comms
    }

    fn step(&mut self, problem: &dyn Problem, noise: &mut [ChaCha8Rng]) -> Result<StepReport> {
        let xbar = self.state.x.row_mean();
        let theta = self.coins.get(self.state.t);
        let report = proxskip_step(&mut self.state, problem, &self.mixing, &self.hp, theta, noise)?;

        let predicted = xbar - report.mean_grad.transpose() * self.hp.alpha;
        let scale = 1.0 + max_abs(predicted.iter());
        let dev = max_abs((self.state.x.row_mean() - predicted).iter()) / scale;
        let col_sums = self.state.y.row_sum();
        let ysum = max_abs(col_sums.iter()) / (1.0 + max_abs(self.state.y.iter()));
        let m = &mut self.monitor;
        m.mean_identity = m.mean_identity.max(dev);
        m.null_sum = m.null_sum.max(ysum);
        m.steps += 1;
        Ok(report)
    }
}

/// The `U` form of ProxSkip:
///
/// ```text
/// Ẑ  = X − αG(X) − αW_b U
/// U⁺ = U + (βθ/(2χα)) W_b Ẑ
/// X⁺ = Ẑ − (α/β) W_b (U⁺ − U)
/// ```
///
/// With `U⁰ = 0` it produces the same iterates as [`ProxSkip`] under shared
/// coins and noise.
#[derive(Debug, Clone)]
pub struct ProxSkipDual {
    x: DMatrix<f64>,
    u: DMatrix<f64>,
    mixing: AugmentedMixing,
    hp: HyperParams,
    coins: CoinSequence,
    t: usize,
    comms: usize,
}

impl ProxSkipDual {
    /// Requires `β = p`; other choices are rejected with
    /// [`Error::ContractViolation`].
    pub fn new(w: &MixingMatrix, hp: HyperParams, x0: &[f64]) -> Result<Self> {
        hp.validate()?;
        if hp.beta != hp.p {
            return Err(Error::ContractViolation(format!(
                "dual form requires beta = p, got beta = {} and p = {}",
                hp.beta, hp.p
            )));
        }
        let state = AlgorithmState::new(w.n(), x0);
        Ok(ProxSkipDual {
            x: state.x,
            u: state.y,
            mixing: augment(w, hp.chi)?,
            coins: CoinSequence::from_seed(hp.p, hp.iterations, hp.seed),
            hp,
            t: 0,
            comms: 0,
        })
    }

    pub fn with_coins(mut self, coins: CoinSequence) -> Self {
        self.coins = coins;
        self
    }

    pub fn dual(&self) -> &DMatrix<f64> {
        &self.u
    }
}

impl Method for ProxSkipDual {
    fn name(&self) -> &str {
        "proxskip-dual"
    }

    fn iterates(&self) -> &DMatrix<f64> {
        &self.x
    }

    fn iteration(&self) -> usize {
        self.t
    }

    fn comms(&self) -> usize {
        self.comms
    }

    fn step(&mut self, problem: &dyn Problem, noise: &mut [ChaCha8Rng]) -> Result<StepReport> {
        let HyperParams { alpha, beta, chi, .. } = self.hp;
        let theta = self.coins.get(self.t);
        let wb = self.mixing.wb();
        let mut grads = DMatrix::zeros(self.x.nrows(), self.x.ncols());
        let mean_grad = stochastic_gradients(problem, &self.x, noise, &mut grads);
        let zhat = &self.x - grads * alpha - (wb * &self.u) * alpha;
        if theta {
            let du = (wb * &zhat) * (beta / (2.0 * chi * alpha));
            self.x = &zhat - (wb * &du) * (alpha / beta);
            self.u += du;
            self.comms += 1;
        } else {
            self.x = zhat;
        }
        self.t += 1;
        check_finite(&self.x, self.t)?;
        Ok(StepReport { communicated: theta, mean_grad })
    }
}

/// Runs ProxSkip for `hp.iterations` steps with coins and per-node noise
/// derived from `hp.seed`.
pub fn proxskip_run(
    problem: &dyn Problem,
    w: &MixingMatrix,
    hp: HyperParams,
    x0: &[f64],
    eval: &Evaluator<'_>,
) -> Result<RunTrace> {
    check_dims(problem, w, x0)?;
    let mut method = ProxSkip::new(w, hp, x0)?;
    let mut noise = Streams::new(hp.seed).noise(w.n());
    run_method(&mut method, problem, hp.iterations, &mut noise, eval)
}

/// [`proxskip_run`] through the `U` form.
pub fn proxskip_run_dual_form(
    problem: &dyn Problem,
    w: &MixingMatrix,
    hp: HyperParams,
    x0: &[f64],
    eval: &Evaluator<'_>,
) -> Result<RunTrace> {
    check_dims(problem, w, x0)?;
    let mut method = ProxSkipDual::new(w, hp, x0)?;
    let mut noise = Streams::new(hp.seed).noise(w.n());
    run_method(&mut method, problem, hp.iterations, &mut noise, eval)
}

/// Steps both forms in lockstep on shared coins and noise and returns the
/// largest entrywise gap between their iterates. `y0` seeds the primal
/// control variate only, which is how the negative control is built.
pub fn max_form_deviation(
    problem: &dyn Problem,
    w: &MixingMatrix,
    hp: HyperParams,
    x0: &[f64],
    y0: Option<DMatrix<f64>>,
) -> Result<f64> {
    check_dims(problem, w, x0)?;
    let mut primal = ProxSkip::new(w, hp, x0)?;
    if let Some(y0) = y0 {
        primal = primal.with_initial_control(y0)?;
    }
    let mut dual = ProxSkipDual::new(w, hp, x0)?;
    let mut noise_a = Streams::new(hp.seed).noise(w.n());
    let mut noise_b = Streams::new(hp.seed).noise(w.n());
    let mut worst = 0.0f64;
    for _ in 0..hp.iterations {
        primal.step(problem, &mut noise_a)?;
        dual.step(problem, &mut noise_b)?;
        worst = worst.max(max_abs((primal.iterates() - dual.iterates()).iter()));
    }
    Ok(worst)
}

pub(crate) fn check_dims(problem: &dyn Problem, w: &MixingMatrix, x0: &[f64]) -> Result<()> {
    if problem.nodes() != w.n() {
        return Err(Error::invalid(format!(
            "problem has {} nodes but the mixing matrix is {}x{}",
            problem.nodes(),
            w.n(),
            w.n()
        )));
    }
    if x0.len() != problem.dim() {
        return Err(Error::invalid(format!("x0 has length {}, expected {}", x0.len(), problem.dim())));
    }
    Ok(())
}
