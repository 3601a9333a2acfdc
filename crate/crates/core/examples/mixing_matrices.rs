// Builds the standard topologies, prints their spectra and checks the
// augmented matrices `W_a`, `W_b` used by ProxSkip.

use proxskip::topology::{augment, complete, metropolis, path, random_connected, ring, theory_optimal_p};

pub fn run_example() -> proxskip::Result<Vec<(String, f64)>> {
    let n = 12;
    let graphs = [
        ("ring", ring(n)?),
        ("path", path(n)?),
        ("complete", complete(n)?),
        ("random(0.3)", random_connected(n, 0.3, 4)?),
    ];
    let mut gaps = Vec::new();
    println!("{:<12} {:>8} {:>10} {:>10} {:>12}", "topology", "edges", "lambda2", "lambda_n", "p* (k=100)");
    for (name, g) in &graphs {
        let w = metropolis(g);
        assert!(w.invariant_violation().is_none());
        let r = augment(&w, 2.0)?.residuals(&w);
        assert!(r.wb_square < 1e-10 && r.wa_min_eigenvalue > -1e-10);
        println!(
            "{:<12} {:>8} {:>10.4} {:>10.4} {:>12.3}",
            name,
            g.edge_count(),
            w.lambda2(),
            w.lambda_n(),
            theory_optimal_p(&w, 100.0).p
        );
        gaps.push((name.to_string(), w.spectral_gap()));
    }
    Ok(gaps)
}

#[allow(dead_code)]
fn main() -> proxskip::Result<()> {
    run_example().map(|_| ())
}
