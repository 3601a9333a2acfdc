// Deterministic ProxSkip on a heterogeneous quadratic: the error decays
// geometrically at a rate set by `max{1 − αμ, 1 − (1−λ₂)p²/(2χ)}`.

use proxskip::algorithms::{proxskip_run, HyperParams};
use proxskip::problems::{make_quadratic, Problem};
use proxskip::reference::solve_quadratic;
use proxskip::topology::{metropolis, ring};
use proxskip::trace::{Evaluator, Metric};

/// Returns (predicted rate, observed per-iteration ratio, final error).
pub fn run_example() -> proxskip::Result<(f64, f64, f64)> {
    let n = 10;
    let problem = make_quadratic(n, 5, 10.0, 0.0, 3);
    let reference = solve_quadratic(&problem);
    let eval = Evaluator::new(&problem, &reference);
    let w = metropolis(&ring(n)?);
    let hp = HyperParams::lemma1(1.0 / problem.smoothness(), 0.5, 400, 0);
    let trace = proxskip_run(&problem, &w, hp, &[0.0; 5], &eval)?;

    let err = trace.series(Metric::RelError);
    let (a, b) = (100, 300);
    let ratio = (err[b] / err[a]).powf(1.0 / (b - a) as f64);
    let zeta = hp.linear_rate(problem.strong_convexity(), w.lambda2());
    println!("predicted rate {zeta:.4}, observed {ratio:.4}");
    println!("relative error after {} steps: {:.2e} ({} communications)", hp.iterations, err[hp.iterations], trace.final_comms());
    Ok((zeta, ratio, err[hp.iterations]))
}

#[allow(dead_code)]
fn main() -> proxskip::Result<()> {
    run_example().map(|_| ())
}
