// Communication rounds needed to reach a target accuracy as a function of
// the communication probability `p`, on logistic regression with
// anisotropic features.

use proxskip::algorithms::{count_comms_to_accuracy, proxskip_run, HyperParams};
use proxskip::problems::{geometric_scales, make_logistic, partition, synthetic_fixture, Problem, Regularizer};
use proxskip::reference::solve_descent;
use proxskip::topology::{metropolis, random_connected, theory_optimal_p};
use proxskip::trace::{Evaluator, Metric};

/// `(p, communication rounds to 1e-4)` for each probability tried.
pub fn run_example() -> proxskip::Result<Vec<(f64, usize)>> {
    let n = 10;
    let w = metropolis(&random_connected(n, 0.5, 2)?);
    let data = synthetic_fixture();
    let data = data.scale_features(&geometric_scales(data.dim(), 0.1))?;
    let shards = partition(&data, n, 7)?.materialize(&data);
    let bare = make_logistic(&shards, Regularizer::L2 { coef: 0.0 }, 0.0)?;
    let problem = bare.with_regularizer(Regularizer::L2 { coef: bare.data_smoothness() / 100.0 });
    let reference = solve_descent(&problem, 1e-12, 5_000_000)?;
    let eval = Evaluator::new(&problem, &reference);
    let best = theory_optimal_p(&w, problem.condition_number());
    println!("kappa {:.1}, 1 - lambda2 {:.3}, suggested p {:.2}", problem.condition_number(), w.spectral_gap(), best.p);

    let mut rows = Vec::new();
    for p in [1.0, 0.5, 0.2] {
        let hp = HyperParams::lemma1(1.0 / problem.smoothness(), p, 2500, 0);
        let trace = proxskip_run(&problem, &w, hp, &vec![0.0; problem.dim()], &eval)?;
        let rounds = count_comms_to_accuracy(&trace, Metric::RelError, 1e-4).unwrap_or(usize::MAX);
        println!("p = {p:<4} rounds to 1e-4: {rounds}");
        rows.push((p, rounds));
    }
    Ok(rows)
}

#[allow(dead_code)]
fn main() -> proxskip::Result<()> {
    run_example().map(|_| ())
}
