// Logistic regression with the nonconvex regularizer `Σ x²/(1+x²)`:
// the running average of `‖∇f(x̄)‖²` falls toward a noise floor.

use proxskip::algorithms::{proxskip_run, HyperParams};
use proxskip::problems::{make_logistic, partition, synthetic_fixture, Regularizer};
use proxskip::reference::solve_descent;
use proxskip::topology::{metropolis, ring};
use proxskip::trace::{Evaluator, Metric};

/// `(running average with noise, final value without noise)`.
pub fn run_example() -> proxskip::Result<(f64, f64)> {
    let n = 10;
    let w = metropolis(&ring(n)?);
    let data = synthetic_fixture();
    let shards = partition(&data, n, 7)?.materialize(&data);
    let mut out = Vec::new();
    for sigma2 in [1e-3, 0.0] {
        let problem = make_logistic(&shards, Regularizer::Nonconvex, sigma2)?;
        let reference = solve_descent(&problem, 1e-12, 1_000_000)?;
        let eval = Evaluator::new(&problem, &reference);
        let trace = proxskip_run(&problem, &w, HyperParams::lemma1(0.1, 0.5, 3000, 0), &[0.0; 22], &eval)?;
        let g = trace.series(Metric::GradNormSq);
        let avg = g.iter().sum::<f64>() / g.len() as f64;
        println!("sigma2 = {sigma2:<6} running average {avg:.3e}, last {:.3e}", g[g.len() - 1]);
        out.push(if sigma2 > 0.0 { avg } else { g[g.len() - 1] });
    }
    Ok((out[0], out[1]))
}

#[allow(dead_code)]
fn main() -> proxskip::Result<()> {
    run_example().map(|_| ())
}
