//! Per-iteration metric records produced by every run.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problems::Problem;
use crate::reference::{relative_error, ReferenceSolution};

/// Metrics recorded at every iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// `‖x̄ − x*‖ / ‖x*‖` (absolute distance when `x* = 0`).
    RelError,
    /// `‖x̄ − x*‖²`.
    DistSq,
    /// `‖∇f(x̄)‖²`.
    GradNormSq,
    /// `(1/n)‖X − 1x̄ᵀ‖²_F`.
    ConsensusErr,
    /// `f(x̄) − f*`.
    Fgap,
}

impl Metric {
    pub const ALL: [Metric; 5] =
        [Metric::RelError, Metric::DistSq, Metric::GradNormSq, Metric::ConsensusErr, Metric::Fgap];

    pub fn name(&self) -> &'static str {
        match self {
            Metric::RelError => "rel_error",
            Metric::DistSq => "dist_sq",
            Metric::GradNormSq => "grad_norm_sq",
            Metric::ConsensusErr => "consensus_err",
            Metric::Fgap => "fgap",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown metric {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub t: usize,
    pub comms: usize,
    pub rel_error: f64,
    pub dist_sq: f64,
    pub grad_norm_sq: f64,
    pub consensus_err: f64,
    pub fgap: f64,
}

impl Record {
    pub fn get(&self, m: Metric) -> f64 {
        match m {
            Metric::RelError => self.rel_error,
            Metric::DistSq => self.dist_sq,
            Metric::GradNormSq => self.grad_norm_sq,
            Metric::ConsensusErr => self.consensus_err,
            Metric::Fgap => self.fgap,
        }
    }

    fn is_finite(&self) -> bool {
        Metric::ALL.iter().all(|&m| self.get(m).is_finite())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub records: Vec<Record>,
    /// Relative error is measured as absolute distance because `x* = 0`.
    pub absolute_error: bool,
    /// The run stopped early on an interrupt.
    pub truncated: bool,
}

impl RunTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn series(&self, m: Metric) -> Vec<f64> {
        self.records.iter().map(|r| r.get(m)).collect()
    }

    pub fn last(&self) -> &Record {
        self.records.last().expect("trace has the initial record")
    }

    pub fn final_comms(&self) -> usize {
        self.records.last().map_or(0, |r| r.comms)
    }

    /// Checks `t` strictly increasing, `comms` non-decreasing and every metric
    /// finite.
    pub fn validate(&self) -> Result<()> {
        for w in self.records.windows(2) {
            if w[1].t <= w[0].t {
                return Err(Error::ContractViolation(format!("t not increasing at {}", w[1].t)));
            }
            if w[1].comms < w[0].comms {
                return Err(Error::ContractViolation(format!("comms decreased at t={}", w[1].t)));
            }
        }
        if let Some(r) = self.records.iter().find(|r| !r.is_finite()) {
            return Err(Error::ContractViolation(format!("non-finite metric at t={}", r.t)));
        }
        Ok(())
    }
}

/// First communication-round count at which `metric ≤ eps`.
pub fn count_comms_to_accuracy(trace: &RunTrace, metric: Metric, eps: f64) -> Option<usize> {
    trace.records.iter().find(|r| r.get(metric) <= eps).map(|r| r.comms)
}

/// Column means of an `n × d` iterate matrix.
pub fn mean_row(x: &DMatrix<f64>) -> DVector<f64> {
    x.row_mean().transpose()
}

/// Computes [`Record`]s against a fixed reference solution.
#[derive(Clone)]
pub struct Evaluator<'a> {
    problem: &'a dyn Problem,
    reference: &'a ReferenceSolution,
}

impl<'a> Evaluator<'a> {
    pub fn new(problem: &'a dyn Problem, reference: &'a ReferenceSolution) -> Self {
        Evaluator { problem, reference }
    }

    pub fn absolute_error(&self) -> bool {
        self.reference.xstar_norm() == 0.0
    }

    pub fn record(&self, t: usize, comms: usize, x: &DMatrix<f64>) -> Record {
        let xbar = mean_row(x);
        let n = x.nrows() as f64;
        let mut consensus = 0.0;
        for (j, m) in xbar.iter().enumerate() {
            for v in x.column(j).iter() {
                consensus += (v - m).powi(2);
            }
        }
        let xs = self.reference.xstar();
        let dist_sq: f64 = xbar.iter().zip(xs).map(|(a, b)| (a - b).powi(2)).sum();
        Record {
            t,
            comms,
            rel_error: relative_error(xbar.as_slice(), self.reference).value,
            dist_sq,
            grad_norm_sq: self.problem.grad(xbar.as_slice()).norm_squared(),
            consensus_err: consensus / n,
            fgap: self.problem.value(xbar.as_slice()) - self.reference.fstar,
        }
    }
}
