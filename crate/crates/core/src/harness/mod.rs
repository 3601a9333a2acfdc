//! Multi-seed experiments: config resolution, repetitions, aggregation,
//! sweeps, steady-state floors and result files.

mod config;
mod output;

pub use config::{
    apply_override, AlgorithmKind, DataSource, ExperimentConfig, HyperSpec, ProblemSpec, RegularizerSpec, TopologySpec,
};
pub use output::{read_echo, read_result_csv, result_stem, write_result, CsvRow, ResultEcho, WrittenFiles, CSV_HEADER};

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algorithms::{proxskip_run, proxskip_run_dual_form, local_dsgd_run, HyperParams};
use crate::error::{Error, Result};
use crate::problems::{make_logistic, make_quadratic, parse_libsvm, partition, synthetic_fixture, Problem, Regularizer};
use crate::reference::{solve_descent, solve_quadratic, ReferenceCache, ReferenceSolution};
use crate::rng::child_seed;
use crate::topology::{complete, metropolis, path, random_connected, ring, MixingMatrix};
use crate::trace::{Evaluator, Metric, RunTrace};

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "PROXSKIP_WORKERS";

/// Gradient-norm tolerance for descent-based reference solutions.
pub const REFERENCE_TOL: f64 = 1e-10;

const DATA_SEED_INDEX: u64 = 1 << 40;

/// Worker count from [`WORKERS_ENV`], else the available parallelism.
pub fn default_workers() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&w| w > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preset {
    Lemma1,
    Theorem1,
    /// `α = 1/(2L)`, `β = p`.
    Theorem2NetIndep,
    /// `α = 0.001` on a 10-node ring with `σ² = 1`.
    Fig1Synthetic,
}

pub fn preset(name: &str) -> Result<Preset> {
    match name {
        "lemma1" => Ok(Preset::Lemma1),
        "theorem1" => Ok(Preset::Theorem1),
        "theorem2-netindep" => Ok(Preset::Theorem2NetIndep),
        "fig1-synthetic" => Ok(Preset::Fig1Synthetic),
        _ => Err(Error::invalid(format!(
            "unknown preset {name:?}; expected lemma1, theorem1, theorem2-netindep or fig1-synthetic"
        ))),
    }
}

/// Problem-side quantities some presets depend on.
#[derive(Debug, Clone, Copy)]
pub struct PresetInputs {
    pub smoothness: f64,
    pub lambda2: f64,
}

impl Preset {
    pub fn name(&self) -> &'static str {
        match self {
            Preset::Lemma1 => "lemma1",
            Preset::Theorem1 => "theorem1",
            Preset::Theorem2NetIndep => "theorem2-netindep",
            Preset::Fig1Synthetic => "fig1-synthetic",
        }
    }

    pub fn nodes(&self) -> Option<usize> {
        matches!(self, Preset::Fig1Synthetic).then_some(10)
    }

    pub fn sigma2(&self) -> Option<f64> {
        matches!(self, Preset::Fig1Synthetic).then_some(1.0)
    }

    /// Completes `spec` into hyperparameters. Fields the preset pins may be
    /// repeated in `spec` only with the same value.
    pub fn hyper(&self, spec: &HyperSpec, inputs: PresetInputs, iterations: usize, seed: u64) -> Result<HyperParams> {
        let p = spec.p.unwrap_or(1.0);
        let alpha_default = 1.0 / inputs.smoothness;
        let (alpha, beta, chi) = match self {
            Preset::Lemma1 => (None, Some(p), Some(1.0)),
            Preset::Theorem1 => {
                let h = HyperParams::theorem1(f64::NAN, p, inputs.lambda2, iterations, seed);
                (None, Some(h.beta), Some(h.chi))
            }
            Preset::Theorem2NetIndep => (Some(0.5 / inputs.smoothness), Some(p), None),
            Preset::Fig1Synthetic => (Some(0.001), Some(p), Some(1.0)),
        };
        let pin = |what: &str, pinned: Option<f64>, given: Option<f64>| -> Result<Option<f64>> {
            match (pinned, given) {
                (Some(a), Some(b)) if a != b => Err(Error::Config(format!(
                    "preset {} fixes {what} = {a}, config sets {b}",
                    self.name()
                ))),
                (Some(a), _) => Ok(Some(a)),
                (None, g) => Ok(g),
            }
        };
        let alpha = pin("alpha", alpha, spec.alpha)?;
        let alpha = match (self, alpha) {
            (_, Some(a)) => a,
            (Preset::Theorem1, None) => {
                return Err(Error::Config("preset theorem1 needs hyper.alpha".into()));
            }
            (_, None) => alpha_default,
        };
        let hp = HyperParams {
            alpha,
            beta: pin("beta", beta, spec.beta)?.unwrap_or(p),
            p,
            chi: pin("chi", chi, spec.chi)?.unwrap_or(1.0),
            iterations,
            seed,
        };
        hp.validate()?;
        Ok(hp)
    }
}

/// Hyperparameters after preset resolution; `seed` is the master seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolvedAlgorithm {
    pub kind: AlgorithmKind,
    pub hyper: HyperParams,
    /// Local-DSGD only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub local_steps: Option<usize>,
}

/// The fixed part of an experiment: data, network and reference solution.
pub struct Instance {
    pub problem: Box<dyn Problem>,
    pub mixing: MixingMatrix,
    pub reference: ReferenceSolution,
    pub algorithm: ResolvedAlgorithm,
}

impl fmt::Debug for Instance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Instance")
            .field("problem", &self.problem.fingerprint())
            .field("lambda2", &self.mixing.lambda2())
            .field("algorithm", &self.algorithm)
            .finish()
    }
}

/// Builds data, topology and the reference solution. Data and graph depend
/// on the master seed only, so every repetition sees the same instance.
pub fn build_instance(cfg: &ExperimentConfig) -> Result<Instance> {
    cfg.validate()?;
    let preset = cfg.preset.as_deref().map(preset).transpose()?;
    if let Some(pr) = preset {
        let clash = |what: &str| Err(Error::Config(format!("preset {} requires {what}", pr.name())));
        if pr.nodes().is_some_and(|n| n != cfg.nodes) {
            return clash("nodes = 10");
        }
        if pr.sigma2().is_some_and(|s| s != cfg.problem.sigma2()) {
            return clash("sigma2 = 1");
        }
        if pr == Preset::Fig1Synthetic && cfg.topology != TopologySpec::Ring {
            return clash("a ring topology");
        }
    }

    let n = cfg.nodes;
    let mixing = if n == 1 {
        MixingMatrix::single()
    } else {
        let graph = match cfg.topology {
            TopologySpec::Ring => ring(n)?,
            TopologySpec::Path => path(n)?,
            TopologySpec::Complete => complete(n)?,
            TopologySpec::Random { iota, seed } => random_connected(n, iota, seed.unwrap_or(cfg.seed))?,
        };
        metropolis(&graph)
    };

    let data_seed = child_seed(cfg.seed, DATA_SEED_INDEX);
    let (problem, reference): (Box<dyn Problem>, ReferenceSolution) = match &cfg.problem {
        ProblemSpec::Quadratic { dim, varsigma2, sigma2 } => {
            let q = make_quadratic(n, *dim, *varsigma2, *sigma2, data_seed);
            let r = solve_quadratic(&q);
            (Box::new(q), r)
        }
        ProblemSpec::Logistic { data, regularizer, sigma2 } => {
            let ds = match data {
                DataSource::Fixture => synthetic_fixture(),
                DataSource::Path(p) => read_libsvm_file(p)?,
            };
            let shards = partition(&ds, n, data_seed)?.materialize(&ds);
            let bare = make_logistic(&shards, Regularizer::L2 { coef: 0.0 }, *sigma2)?;
            let lp = bare.with_regularizer(regularizer.resolve(bare.data_smoothness()));
            let solve = || solve_descent(&lp, REFERENCE_TOL, 2_000_000);
            let r = match &cfg.reference_cache {
                Some(dir) => ReferenceCache::new(dir).get_or_solve(&lp, "descent-1e-10", solve)?,
                None => solve()?,
            };
            (Box::new(lp), r)
        }
    };

    let inputs = PresetInputs { smoothness: problem.smoothness(), lambda2: mixing.lambda2() };
    let hyper = match preset {
        Some(pr) => pr.hyper(&cfg.hyper, inputs, cfg.iterations, cfg.seed)?,
        None => {
            let alpha = cfg
                .hyper
                .alpha
                .ok_or_else(|| Error::Config("hyper.alpha is required without a preset".into()))?;
            let p = cfg.hyper.p.unwrap_or(1.0);
            let hp = HyperParams {
                alpha,
                beta: cfg.hyper.beta.unwrap_or(p),
                p,
                chi: cfg.hyper.chi.unwrap_or(1.0),
                iterations: cfg.iterations,
                seed: cfg.seed,
            };
            hp.validate()?;
            hp
        }
    };
    let local_steps = match cfg.algorithm {
        AlgorithmKind::LocalDsgd => Some(match cfg.hyper.local_steps {
            Some(0) => return Err(Error::Config("hyper.local_steps must be at least 1".into())),
            Some(k) => k,
            None => (1.0 / hyper.p).round().max(1.0) as usize,
        }),
        _ => None,
    };
    Ok(Instance {
        problem,
        mixing,
        reference,
        algorithm: ResolvedAlgorithm { kind: cfg.algorithm, hyper, local_steps },
    })
}

fn read_libsvm_file(path: &Path) -> Result<crate::problems::Dataset> {
    let file = std::fs::File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    parse_libsvm(std::io::BufReader::new(file))
}

/// Seed of repetition `r`.
pub fn repetition_seed(master: u64, r: usize) -> u64 {
    child_seed(master, r as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DivergedRun {
    pub seed: u64,
    pub t: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub seed: u64,
    pub trace: std::result::Result<RunTrace, DivergedRun>,
}

/// Runs one repetition of `instance` with the given seed.
pub fn run_once(instance: &Instance, seed: u64) -> Result<RunTrace> {
    let problem = instance.problem.as_ref();
    let eval = Evaluator::new(problem, &instance.reference);
    let x0 = vec![0.0; problem.dim()];
    let alg = &instance.algorithm;
    let hp = HyperParams { seed, ..alg.hyper };
    match alg.kind {
        AlgorithmKind::Proxskip => proxskip_run(problem, &instance.mixing, hp, &x0, &eval),
        AlgorithmKind::ProxskipDual => proxskip_run_dual_form(problem, &instance.mixing, hp, &x0, &eval),
        AlgorithmKind::LocalDsgd => local_dsgd_run(
            problem,
            &instance.mixing,
            hp.alpha,
            alg.local_steps.unwrap_or(1),
            hp.iterations,
            seed,
            &x0,
            &eval,
        ),
    }
}

/// Runs every repetition on up to `workers` threads. Outcomes come back in
/// repetition order whatever the completion order.
pub fn run_repetitions(cfg: &ExperimentConfig, instance: &Instance, workers: usize) -> Result<Vec<RunOutcome>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let seeds: Vec<u64> = (0..cfg.repetitions).map(|r| repetition_seed(cfg.seed, r)).collect();
    let results: Vec<Result<RunOutcome>> = pool.install(|| {
        seeds
            .par_iter()
            .map(|&seed| match run_once(instance, seed) {
                Ok(trace) => Ok(RunOutcome { seed, trace: Ok(trace) }),
                Err(Error::Divergence { t }) => Ok(RunOutcome { seed, trace: Err(DivergedRun { seed, t }) }),
                Err(e) => Err(e),
            })
            .collect()
    });
    results.into_iter().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSeries {
    pub metric: Metric,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub algorithm: ResolvedAlgorithm,
    pub lambda2: f64,
    pub smoothness: f64,
    pub strong_convexity: f64,
    /// Seeds of all repetitions, diverged ones included.
    pub seeds: Vec<u64>,
    pub diverged: Vec<DivergedRun>,
    /// Some repetition stopped early on an interrupt; series are cut to the
    /// shortest trace.
    pub truncated: bool,
    /// Repetitions that entered the aggregates.
    pub run_count: usize,
    pub iterations: Vec<usize>,
    /// Mean cumulative communication rounds at each iteration.
    pub comms: Vec<f64>,
    pub series: Vec<MetricSeries>,
}

impl ExperimentResult {
    pub fn series(&self, metric: Metric) -> Option<&MetricSeries> {
        self.series.iter().find(|s| s.metric == metric)
    }

    pub fn mean(&self, metric: Metric) -> &[f64] {
        self.series(metric).map_or(&[], |s| &s.mean)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Order-independent mean and sample standard deviation: values are sorted
/// before summation so the result does not depend on repetition order.
fn mean_std(values: &mut [f64]) -> (f64, f64) {
    values.sort_by(f64::total_cmp);
    let k = values.len() as f64;
    if values.first() == values.last() {
        return (values.first().copied().unwrap_or(f64::NAN), 0.0);
    }
    let mean = values.iter().sum::<f64>() / k;
    let mut dev: Vec<f64> = values.iter().map(|v| (v - mean).powi(2)).collect();
    dev.sort_by(f64::total_cmp);
    (mean, (dev.iter().sum::<f64>() / (k - 1.0)).sqrt())
}

/// Aggregates outcomes into per-iteration means and deviations.
pub fn aggregate(cfg: &ExperimentConfig, instance: &Instance, outcomes: &[RunOutcome]) -> ExperimentResult {
    let traces: Vec<&RunTrace> = outcomes.iter().filter_map(|o| o.trace.as_ref().ok()).collect();
    let diverged: Vec<DivergedRun> = outcomes.iter().filter_map(|o| o.trace.as_ref().err().copied()).collect();
    let len = traces.iter().map(|t| t.len()).min().unwrap_or(0);
    let truncated = traces.iter().any(|t| t.truncated);
    let mut series: Vec<MetricSeries> =
        Metric::ALL.iter().map(|&metric| MetricSeries { metric, mean: vec![], std: vec![] }).collect();
    let mut iterations = Vec::with_capacity(len);
    let mut comms = Vec::with_capacity(len);
    let mut buf = vec![0.0; traces.len()];
    for k in 0..len {
        iterations.push(traces[0].records[k].t);
        for (b, t) in buf.iter_mut().zip(&traces) {
            *b = t.records[k].comms as f64;
        }
        comms.push(mean_std(&mut buf).0);
        for s in series.iter_mut() {
            for (b, t) in buf.iter_mut().zip(&traces) {
                *b = t.records[k].get(s.metric);
            }
            let (m, sd) = mean_std(&mut buf);
            s.mean.push(m);
            s.std.push(sd);
        }
    }
    ExperimentResult {
        config: cfg.clone(),
        algorithm: instance.algorithm,
        lambda2: instance.mixing.lambda2(),
        smoothness: instance.problem.smoothness(),
        strong_convexity: instance.problem.strong_convexity(),
        seeds: outcomes.iter().map(|o| o.seed).collect(),
        diverged,
        truncated,
        run_count: traces.len(),
        iterations,
        comms,
        series,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub workers: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { workers: default_workers() }
    }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    run_experiment_with(cfg, &RunOptions::default())
}

pub fn run_experiment_with(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<ExperimentResult> {
    let instance = build_instance(cfg)?;
    let outcomes = run_repetitions(cfg, &instance, opts.workers)?;
    for d in outcomes.iter().filter_map(|o| o.trace.as_ref().err()) {
        log::warn!("repetition with seed {} diverged at t={}", d.seed, d.t);
    }
    Ok(aggregate(cfg, &instance, &outcomes))
}

/// Largest tolerated `|d ln(metric)/dt|` over the floor window.
pub const FLOOR_SLOPE_TOL: f64 = 1e-3;

/// Mean of the last `window_fraction` of `values`, after checking that the
/// least-squares slope of `ln(values)` over that window is below
/// [`FLOOR_SLOPE_TOL`] per step.
pub fn floor_of(values: &[f64], window_fraction: f64) -> Result<f64> {
    if !(window_fraction > 0.0 && window_fraction <= 1.0) {
        return Err(Error::invalid(format!("window fraction {window_fraction} outside (0, 1]")));
    }
    let w = ((values.len() as f64 * window_fraction).ceil() as usize).min(values.len());
    if w < 2 {
        return Err(Error::invalid("series too short for a floor estimate"));
    }
    let tail = &values[values.len() - w..];
    let logs: Vec<f64> = tail.iter().map(|v| v.max(f64::MIN_POSITIVE).ln()).collect();
    let tm = (w as f64 - 1.0) / 2.0;
    let lm = logs.iter().sum::<f64>() / w as f64;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (k, l) in logs.iter().enumerate() {
        let dt = k as f64 - tm;
        sxy += dt * (l - lm);
        sxx += dt * dt;
    }
    let slope = sxy / sxx;
    if slope.abs() >= FLOOR_SLOPE_TOL {
        return Err(Error::TransientNotReached { slope });
    }
    Ok(mean_std(&mut tail.to_vec()).0)
}

/// Steady-state floor of the mean trace of `metric`.
pub fn steady_state_floor(result: &ExperimentResult, metric: Metric, window_fraction: f64) -> Result<f64> {
    floor_of(result.mean(metric), window_fraction)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    N,
    P,
    Varsigma2,
    Sigma2,
    Iota,
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "n" => Ok(SweepAxis::N),
            "p" => Ok(SweepAxis::P),
            "varsigma2" => Ok(SweepAxis::Varsigma2),
            "sigma2" => Ok(SweepAxis::Sigma2),
            "iota" => Ok(SweepAxis::Iota),
            _ => Err(Error::invalid(format!("unknown sweep axis {s:?}; expected n, p, varsigma2, sigma2 or iota"))),
        }
    }
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::N => "n",
            SweepAxis::P => "p",
            SweepAxis::Varsigma2 => "varsigma2",
            SweepAxis::Sigma2 => "sigma2",
            SweepAxis::Iota => "iota",
        }
    }

    /// `cfg` with this axis set to `value`; the master seed is untouched so
    /// cells share repetition seeds.
    pub fn apply(&self, cfg: &ExperimentConfig, value: f64) -> Result<ExperimentConfig> {
        let mut c = cfg.clone();
        match self {
            SweepAxis::N => {
                if value.fract() != 0.0 || value < 1.0 {
                    return Err(Error::invalid(format!("n = {value} is not a positive integer")));
                }
                c.nodes = value as usize;
            }
            SweepAxis::P => c.hyper.p = Some(value),
            SweepAxis::Varsigma2 => match &mut c.problem {
                ProblemSpec::Quadratic { varsigma2, .. } => *varsigma2 = value,
                ProblemSpec::Logistic { .. } => {
                    return Err(Error::invalid("varsigma2 applies to the quadratic family only"));
                }
            },
            SweepAxis::Sigma2 => c.problem.set_sigma2(value),
            SweepAxis::Iota => match &mut c.topology {
                TopologySpec::Random { iota, .. } => *iota = value,
                _ => return Err(Error::invalid("iota applies to random topologies only")),
            },
        }
        c.validate()?;
        Ok(c)
    }
}

/// One result per value, in order. Every cell reuses the master seed, so
/// repetition `r` draws the same coins and noise in every cell.
pub fn sweep(cfg: &ExperimentConfig, axis: SweepAxis, values: &[f64], opts: &RunOptions) -> Result<Vec<ExperimentResult>> {
    if values.is_empty() {
        return Err(Error::invalid("sweep needs at least one value"));
    }
    let cells = values.iter().map(|&v| axis.apply(cfg, v)).collect::<Result<Vec<_>>>()?;
    cells.iter().map(|c| run_experiment_with(c, opts)).collect()
}
