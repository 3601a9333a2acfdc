//! Centralized ground-truth solutions used by every error metric.

use std::path::{Path, PathBuf};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problems::{Problem, QuadraticProblem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveMethod {
    ClosedForm,
    GradientDescent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSolution {
    pub xstar: Vec<f64>,
    pub fstar: f64,
    /// `‖∇f(x*)‖`.
    pub grad_norm: f64,
    pub method: SolveMethod,
    /// Gradient-norm tolerance the solver was asked to reach.
    pub tol: f64,
}

impl ReferenceSolution {
    pub fn xstar(&self) -> &[f64] {
        &self.xstar
    }

    pub fn xstar_norm(&self) -> f64 {
        self.xstar.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

pub fn solve_quadratic(p: &QuadraticProblem) -> ReferenceSolution {
    let xstar = p.minimizer();
    ReferenceSolution {
        fstar: p.value(xstar.as_slice()),
        grad_norm: p.grad(xstar.as_slice()).norm(),
        xstar: xstar.as_slice().to_vec(),
        method: SolveMethod::ClosedForm,
        tol: 0.0,
    }
}

const ARMIJO_C: f64 = 1e-4;
const MAX_HALVINGS: usize = 200;

/// Full-gradient descent on `f = (1/n) Σ f_i` from the origin.
pub fn solve_descent(p: &dyn Problem, tol: f64, max_iters: usize) -> Result<ReferenceSolution> {
    solve_descent_from(p, &vec![0.0; p.dim()], tol, max_iters)
}

/// Gradient descent with Armijo backtracking (`c = 1e-4`, halving), run
/// until `‖∇f‖ ≤ tol`.
///
/// Trial steps start at twice the last accepted step. Once the Armijo
/// decrease drops below the rounding noise of `f`, the test cannot tell good
/// steps from bad ones; a trial is then accepted when `f` does not rise beyond
/// that noise and the gradient norm shrinks.
pub fn solve_descent_from(p: &dyn Problem, x0: &[f64], tol: f64, max_iters: usize) -> Result<ReferenceSolution> {
    descent(p, x0, tol, max_iters, &mut |_| {})
}

fn descent(
    p: &dyn Problem,
    x0: &[f64],
    tol: f64,
    max_iters: usize,
    on_accept: &mut dyn FnMut(f64),
) -> Result<ReferenceSolution> {
    if !(tol >= 0.0) {
        return Err(Error::invalid(format!("tolerance must be nonnegative, got {tol}")));
    }
    let mut x = DVector::from_column_slice(x0);
    let mut f = p.value(x.as_slice());
    let mut g = p.grad(x.as_slice());
    let mut gnorm = g.norm();
    let mut step = 1.0 / p.smoothness();
    let mut iters = 0;
    while gnorm > tol {
        if iters >= max_iters {
            return Err(Error::NonConvergence { iters, grad_norm: gnorm });
        }
        iters += 1;
        let gsq = gnorm * gnorm;
        let noise = 8.0 * f64::EPSILON * f.abs().max(f64::MIN_POSITIVE);
        let mut t = 2.0 * step;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let trial = &x - &g * t;
            let ft = p.value(trial.as_slice());
            let decrease = ARMIJO_C * t * gsq;
            if decrease >= noise {
                if ft <= f - decrease {
                    accepted = Some((trial, ft, None));
                    break;
                }
            } else if ft <= f + noise {
                // f can no longer resolve the decrease; fall back on the gradient
                let gt = p.grad(trial.as_slice());
                if gt.norm() < gnorm {
                    accepted = Some((trial, ft, Some(gt)));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((trial, ft, gt)) = accepted else {
            return Err(Error::NonConvergence { iters, grad_norm: gnorm });
        };
        on_accept(ft);
        step = t;
        x = trial;
        f = ft;
        g = gt.unwrap_or_else(|| p.grad(x.as_slice()));
        gnorm = g.norm();
    }
    Ok(ReferenceSolution {
        xstar: x.as_slice().to_vec(),
        fstar: f,
        grad_norm: gnorm,
        method: SolveMethod::GradientDescent,
        tol,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativeError {
    pub value: f64,
    /// Set when `x* = 0` and the plain distance `‖x‖` is returned instead.
    pub absolute: bool,
}

/// `‖x − x*‖ / ‖x*‖`, falling back to `‖x − x*‖` when `x* = 0`.
pub fn relative_error(x: &[f64], reference: &ReferenceSolution) -> RelativeError {
    let dist = x
        .iter()
        .zip(reference.xstar())
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    let norm = reference.xstar_norm();
    if norm > 0.0 {
        RelativeError { value: dist / norm, absolute: false }
    } else {
        RelativeError { value: dist, absolute: true }
    }
}

/// On-disk JSON cache of reference solutions keyed by problem fingerprint.
#[derive(Debug, Clone)]
pub struct ReferenceCache {
    dir: PathBuf,
}

impl ReferenceCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        ReferenceCache { dir: dir.into() }
    }

    pub fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(format!("ref-{key}.json"))
    }

    pub fn load(&self, key: &str) -> Option<ReferenceSolution> {
        let text = std::fs::read_to_string(self.path_for(key)).ok()?;
        ReferenceSolution::from_json(&text).ok()
    }

    pub fn store(&self, key: &str, sol: &ReferenceSolution) -> Result<()> {
        write_file(&self.path_for(key), sol.to_json()?.as_bytes())
    }

    /// Returns the cached solution for `problem`, computing and storing it on
    /// a miss. The key covers the problem fingerprint and the solver tag.
    pub fn get_or_solve(
        &self,
        problem: &dyn Problem,
        solver_tag: &str,
        solve: impl FnOnce() -> Result<ReferenceSolution>,
    ) -> Result<ReferenceSolution> {
        let key = crate::problems::hash_hex(|h| {
            use sha2::Digest;
            h.update(problem.fingerprint().as_bytes());
            h.update(solver_tag.as_bytes());
        });
        let key = &key[..16];
        if let Some(hit) = self.load(key) {
            return Ok(hit);
        }
        let sol = solve()?;
        self.store(key, &sol)?;
        Ok(sol)
    }
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let wrap = |source| Error::Unwritable { path: path.to_path_buf(), source };
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(wrap)?;
        }
    }
    std::fs::write(path, bytes).map_err(wrap)
}
