// ProxSkip against local DSGD as data heterogeneity grows. The control
// variates keep ProxSkip's floor flat while local DSGD drifts.

use proxskip::algorithms::{local_dsgd_run, proxskip_run, HyperParams};
use proxskip::problems::make_quadratic;
use proxskip::reference::solve_quadratic;
use proxskip::topology::{metropolis, ring};
use proxskip::trace::{Evaluator, Metric};

/// `(varsigma2, proxskip tail error, local DSGD tail error)` per heterogeneity level.
pub fn run_example() -> proxskip::Result<Vec<(f64, f64, f64)>> {
    let n = 8;
    let w = metropolis(&ring(n)?);
    let (alpha, p, iterations) = (0.05, 0.2, 3000);
    let mut rows = Vec::new();
    println!("{:>9} {:>12} {:>12}", "varsigma2", "proxskip", "local-dsgd");
    for varsigma2 in [0.0, 10.0, 100.0] {
        let problem = make_quadratic(n, 4, varsigma2, 0.0, 11);
        let reference = solve_quadratic(&problem);
        let eval = Evaluator::new(&problem, &reference);
        let ps = proxskip_run(&problem, &w, HyperParams::lemma1(alpha, p, iterations, 1), &[0.0; 4], &eval)?;
        let ld = local_dsgd_run(&problem, &w, alpha, (1.0 / p) as usize, iterations, 1, &[0.0; 4], &eval)?;
        let tail = |v: Vec<f64>| v[v.len() / 2..].iter().sum::<f64>() / (v.len() - v.len() / 2) as f64;
        let a = tail(ps.series(Metric::DistSq));
        let b = tail(ld.series(Metric::DistSq));
        println!("{varsigma2:>9} {a:>12.3e} {b:>12.3e}");
        rows.push((varsigma2, a, b));
    }
    Ok(rows)
}

#[allow(dead_code)]
fn main() -> proxskip::Result<()> {
    run_example().map(|_| ())
}
