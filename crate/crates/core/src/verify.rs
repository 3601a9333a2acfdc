//! Property suite behind `proxskip verify`: randomized instances, one
//! verdict per property.

use std::fmt;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::algorithms::{max_form_deviation, CoinSequence, HyperParams, Method, ProxSkip};
use crate::problems::{
    finite_difference_error, make_logistic, make_quadratic, parse_libsvm_str, partition, synthetic_dataset,
    synthetic_fixture, write_libsvm, Problem, Regularizer,
};
use crate::reference::{solve_descent, solve_quadratic};
use crate::rng::Streams;
use crate::topology::{augment, gamma_block_deviation, metropolis, random_connected, MixingMatrix};

pub const MATRIX_TOL: f64 = 1e-10;
pub const EQUIVALENCE_TOL: f64 = 1e-9;
pub const MEAN_IDENTITY_TOL: f64 = 1e-12;
pub const NULL_SUM_TOL: f64 = 1e-10;
pub const FD_TOL: f64 = 1e-5;
pub const GAMMA_TOL: f64 = 1e-10;
pub const ORACLE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Starts the primal form at `Y⁰ ≠ 0` in the equivalence check, which
    /// must then fail.
    pub inject_fault: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyResult {
    pub name: &'static str,
    pub passed: bool,
    /// Worst observed value against its tolerance, or the failing case.
    pub detail: String,
}

impl fmt::Display for PropertyResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{verdict}  {:<22} {}", self.name, self.detail)
    }
}

fn check(name: &'static str, worst: f64, tol: f64) -> PropertyResult {
    PropertyResult { name, passed: worst <= tol, detail: format!("worst {worst:.3e} (tol {tol:.0e})") }
}

fn random_mixing(rng: &mut ChaCha8Rng) -> MixingMatrix {
    let n = rng.random_range(2..=30);
    // below 2/n no connected graph fits the edge budget
    let iota = rng.random_range((2.0 / n as f64).max(0.05)..=1.0);
    metropolis(&random_connected(n, iota, rng.random()).expect("valid random graph parameters"))
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |a, v| a.max(v.abs()))
}

/// Symmetry, double stochasticity, spectrum in (−1, 1], `W_a ⪰ 0` and the
/// `W_a`/`W_b` identities on random topologies.
pub fn mixing_invariants(rng: &mut ChaCha8Rng, instances: usize) -> PropertyResult {
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let w = random_mixing(rng);
        if let Some(v) = w.invariant_violation() {
            return PropertyResult { name: "mixing-invariants", passed: false, detail: v };
        }
        let chi = rng.random_range(1.0..50.0);
        let r = augment(&w, chi).expect("chi >= 1").residuals(&w);
        if r.wa_min_eigenvalue < -MATRIX_TOL {
            return PropertyResult {
                name: "mixing-invariants",
                passed: false,
                detail: format!("W_a has eigenvalue {:.3e}", r.wa_min_eigenvalue),
            };
        }
        worst = worst.max(r.wb_square).max(r.wa_wb_identity).max(r.wa_formula).max(r.wb_asymmetry);
    }
    check("mixing-invariants", worst, MATRIX_TOL)
}

/// Primal and `U` forms agree over 200 steps with `β = p` and `Y⁰ = 0`.
pub fn form_equivalence(rng: &mut ChaCha8Rng, configs: usize, inject_fault: bool) -> PropertyResult {
    let mut worst = 0.0f64;
    for _ in 0..configs {
        let w = random_mixing(rng);
        let n = w.n();
        let d = rng.random_range(1..=6);
        let problem = make_quadratic(n, d, rng.random_range(0.0..10.0), rng.random_range(0.0..1.0), rng.random());
        let p = rng.random_range(0.05..=1.0);
        let hp = HyperParams {
            alpha: rng.random_range(0.05..1.0),
            beta: p,
            p,
            chi: rng.random_range(1.0..5.0),
            iterations: 200,
            seed: rng.random(),
        };
        let x0: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y0 = inject_fault.then(|| DMatrix::from_fn(n, d, |i, j| 0.1 * ((i + j) % 3) as f64 + 0.05));
        match max_form_deviation(&problem, &w, hp, &x0, y0) {
            Ok(dev) => worst = worst.max(dev),
            Err(e) => {
                return PropertyResult { name: "form-equivalence", passed: false, detail: e.to_string() };
            }
        }
    }
    check("form-equivalence", worst, EQUIVALENCE_TOL)
}

/// Runs ProxSkip on random instances and reports the monitored invariants.
pub fn step_invariants(rng: &mut ChaCha8Rng, runs: usize) -> (PropertyResult, PropertyResult) {
    let (mut mean_worst, mut null_worst) = (0.0f64, 0.0f64);
    for _ in 0..runs {
        let w = random_mixing(rng);
        let n = w.n();
        let d = rng.random_range(1..=5);
        let problem = make_quadratic(n, d, rng.random_range(0.0..10.0), rng.random_range(0.0..1.0), rng.random());
        let hp = HyperParams::lemma1(rng.random_range(0.05..1.0), rng.random_range(0.05..=1.0), 300, rng.random());
        let mut m = ProxSkip::new(&w, hp, &vec![0.0; d]).expect("valid hyperparameters");
        let mut noise = Streams::new(hp.seed).noise(n);
        for _ in 0..hp.iterations {
            m.step(&problem, &mut noise).expect("bounded run");
        }
        let inv = m.invariants();
        mean_worst = mean_worst.max(inv.mean_identity);
        null_worst = null_worst.max(inv.null_sum);
    }
    (check("mean-identity", mean_worst, MEAN_IDENTITY_TOL), check("control-null-sum", null_worst, NULL_SUM_TOL))
}

/// Numeric spectral radius of each 2×2 block against `sqrt(ν)`.
pub fn gamma_blocks_match(rng: &mut ChaCha8Rng, instances: usize) -> PropertyResult {
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let w = random_mixing(rng);
        worst = worst.max(gamma_block_deviation(&w, rng.random_range(1.0..20.0)));
    }
    check("gamma-blocks", worst, GAMMA_TOL)
}

/// The optimum with `Y = −α∇F(X*)` is a fixed point for both coin outcomes.
pub fn fixed_point(rng: &mut ChaCha8Rng) -> PropertyResult {
    let w = random_mixing(rng);
    let n = w.n();
    let problem = make_quadratic(n, 3, 5.0, 0.0, rng.random());
    let xs = problem.minimizer();
    let alpha = 0.5;
    let y0 = DMatrix::from_fn(n, 3, |i, j| -alpha * problem.grad_i(i, xs.as_slice())[j]);
    let mut worst = 0.0f64;
    for bit in [false, true] {
        let hp = HyperParams::lemma1(alpha, 0.5, 1, 0);
        let mut m = ProxSkip::new(&w, hp, xs.as_slice())
            .and_then(|m| m.with_initial_control(y0.clone()))
            .expect("valid instance")
            .with_coins(CoinSequence::constant(bit, 1));
        m.step(&problem, &mut Streams::new(0).noise(n)).expect("finite step");
        let target = DMatrix::from_fn(n, 3, |_, j| xs[j]);
        worst = worst.max(max_abs(&(m.iterates() - target))).max(max_abs(&(&m.state().y - &y0)));
    }
    check("fixed-point", worst, 1e-12)
}

/// Central differences against analytic gradients for every problem family.
pub fn gradient_checks(rng: &mut ChaCha8Rng) -> PropertyResult {
    let ds = synthetic_fixture();
    let shards = partition(&ds, 4, rng.random()).expect("nonempty").materialize(&ds);
    let mut worst = 0.0f64;
    let families: Vec<Box<dyn Problem>> = vec![
        Box::new(make_quadratic(5, 4, 3.0, 0.0, rng.random())),
        Box::new(make_logistic(&shards, Regularizer::L2 { coef: 0.1 }, 0.0).expect("valid shards")),
        Box::new(make_logistic(&shards, Regularizer::Nonconvex, 0.0).expect("valid shards")),
    ];
    for p in &families {
        for _ in 0..3 {
            let x: Vec<f64> = (0..p.dim()).map(|_| rng.random_range(-2.0..2.0)).collect();
            worst = worst.max(finite_difference_error(p.as_ref(), &x, 1e-6));
        }
    }
    check("finite-differences", worst, FD_TOL)
}

/// Closed-form quadratic minimizer against the descent solver.
pub fn oracle_agreement(rng: &mut ChaCha8Rng) -> PropertyResult {
    let problem = make_quadratic(rng.random_range(2..=12), 4, rng.random_range(0.5..20.0), 0.0, rng.random());
    let closed = solve_quadratic(&problem);
    let detail = match solve_descent(&problem, 1e-12, 1_000_000) {
        Ok(gd) => closed.xstar.iter().zip(&gd.xstar).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max),
        Err(e) => return PropertyResult { name: "oracle-agreement", passed: false, detail: e.to_string() },
    };
    check("oracle-agreement", detail, ORACLE_TOL)
}

/// LIBSVM write-then-parse reproduces the dataset exactly.
pub fn parser_round_trip(rng: &mut ChaCha8Rng) -> PropertyResult {
    let ds = synthetic_dataset(200, 22, rng.random());
    let ok = parse_libsvm_str(&write_libsvm(&ds))
        .and_then(|back| back.with_dim(22))
        .is_ok_and(|back| back == ds);
    PropertyResult {
        name: "parser-round-trip",
        passed: ok,
        detail: if ok { "exact".into() } else { "mismatch".into() },
    }
}

pub fn run_suite(opts: &VerifyOptions) -> Vec<PropertyResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let (mean, null) = step_invariants(&mut rng, 20);
    vec![
        mixing_invariants(&mut rng, 100),
        form_equivalence(&mut rng, 20, opts.inject_fault),
        mean,
        null,
        gamma_blocks_match(&mut rng, 20),
        fixed_point(&mut rng),
        gradient_checks(&mut rng),
        oracle_agreement(&mut rng),
        parser_round_trip(&mut rng),
    ]
}
