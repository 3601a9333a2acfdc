use nalgebra::DMatrix;
use rand_chacha::ChaCha8Rng;

use super::proxskip::check_dims;
use super::{check_finite, run_method, stochastic_gradients, Method, StepReport};
use crate::error::{Error, Result};
use crate::problems::Problem;
use crate::rng::Streams;
use crate::topology::MixingMatrix;
use crate::trace::{Evaluator, RunTrace};

/// Local decentralized SGD: every node takes `local_steps` gradient steps,
/// then one gossip round `X ← WX`. Each call to [`Method::step`] is a single
/// gradient step, so traces line up with ProxSkip iteration by iteration.
#[derive(Debug, Clone)]
pub struct LocalDsgd {
    x: DMatrix<f64>,
    w: DMatrix<f64>,
    alpha: f64,
    local_steps: usize,
    t: usize,
    comms: usize,
}

impl LocalDsgd {
    pub fn new(w: &MixingMatrix, alpha: f64, local_steps: usize, x0: &[f64]) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::invalid(format!("alpha = {alpha} out of range")));
        }
        if local_steps == 0 {
            return Err(Error::invalid("local_steps must be at least 1"));
        }
        Ok(LocalDsgd {
            x: DMatrix::from_fn(w.n(), x0.len(), |_, j| x0[j]),
            w: w.matrix().clone(),
            alpha,
            local_steps,
            t: 0,
            comms: 0,
        })
    }

    pub fn local_steps(&self) -> usize {
        self.local_steps
    }
}

impl Method for LocalDsgd {
    fn name(&self) -> &str {
        "local-dsgd"
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
        let mut grads = DMatrix::zeros(self.x.nrows(), self.x.ncols());
        let mean_grad = stochastic_gradients(problem, &self.x, noise, &mut grads);
        self.x -= grads * self.alpha;
        self.t += 1;
        let communicated = self.t.is_multiple_of(self.local_steps);
        if communicated {
            self.x = &self.w * &self.x;
            self.comms += 1;
        }
        check_finite(&self.x, self.t)?;
        Ok(StepReport { communicated, mean_grad })
    }
}

/// Runs `iterations` gradient steps of local-DSGD with per-node noise from
/// `seed`.
#[allow(clippy::too_many_arguments)]
pub fn local_dsgd_run(
    problem: &dyn Problem,
    w: &MixingMatrix,
    alpha: f64,
    local_steps: usize,
    iterations: usize,
    seed: u64,
    x0: &[f64],
    eval: &Evaluator<'_>,
) -> Result<RunTrace> {
    check_dims(problem, w, x0)?;
    let mut method = LocalDsgd::new(w, alpha, local_steps, x0)?;
    let mut noise = Streams::new(seed).noise(w.n());
    run_method(&mut method, problem, iterations, &mut noise, eval)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::{proxskip_run, HyperParams};
    use crate::problems::make_quadratic;
    use crate::reference::solve_quadratic;
    use crate::topology::{metropolis, ring};

    #[test]
    fn communicates_every_k_steps() {
        let problem = make_quadratic(4, 2, 1.0, 0.0, 0);
        let w = metropolis(&ring(4).unwrap());
        let reference = solve_quadratic(&problem);
        let eval = Evaluator::new(&problem, &reference);
        let trace = local_dsgd_run(&problem, &w, 0.1, 5, 23, 0, &[0.0, 0.0], &eval).unwrap();
        assert_eq!(trace.len(), 24);
        assert_eq!(trace.final_comms(), 4);
        assert_eq!(trace.records[5].comms, 1);
        assert_eq!(trace.records[4].comms, 0);
    }

    #[test]
    fn single_local_step_converges_near_optimum() {
        // K = 1 is DSGD; with a small step its bias is O(α)
        let problem = make_quadratic(5, 3, 1.0, 0.0, 2);
        let w = metropolis(&ring(5).unwrap());
        let reference = solve_quadratic(&problem);
        let eval = Evaluator::new(&problem, &reference);
        let trace = local_dsgd_run(&problem, &w, 0.05, 1, 20_000, 0, &[0.0; 3], &eval).unwrap();
        assert!(trace.last().rel_error < 0.1, "{}", trace.last().rel_error);
    }

    #[test]
    fn drift_floor_exceeds_proxskip() {
        // heterogeneous data, no noise: local-DSGD stalls at a drift-induced
        // bias while ProxSkip converges
        let problem = make_quadratic(6, 3, 10.0, 0.0, 3);
        let w = metropolis(&ring(6).unwrap());
        let reference = solve_quadratic(&problem);
        let eval = Evaluator::new(&problem, &reference);
        let t = 8000;
        let local = local_dsgd_run(&problem, &w, 0.5, 5, t, 0, &[0.0; 3], &eval).unwrap();
        let ps = proxskip_run(&problem, &w, HyperParams::lemma1(0.5, 0.2, t, 0), &[0.0; 3], &eval).unwrap();
        assert!(local.last().rel_error > 1e-3, "{}", local.last().rel_error);
        assert!(ps.last().rel_error < 1e-6, "{}", ps.last().rel_error);
    }

    #[test]
    fn rejects_zero_local_steps() {
        let w = metropolis(&ring(3).unwrap());
        assert!(LocalDsgd::new(&w, 0.1, 0, &[0.0]).is_err());
    }
}
