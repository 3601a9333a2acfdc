mod mixing_matrices {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/mixing_matrices.rs"));
}
mod linear_rate {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/linear_rate.rs"));
}
mod client_drift {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/client_drift.rs"));
}
mod communication_savings {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/communication_savings.rs"));
}
mod nonconvex {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/nonconvex.rs"));
}
mod experiment_pipeline {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/experiment_pipeline.rs"));
}
mod verify_suite {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/verify_suite.rs"));
}

#[test]
fn mixing_matrices_example_runs() {
    let gaps = mixing_matrices::run_example().unwrap();
    let gap = |name: &str| gaps.iter().find(|(n, _)| n == name).unwrap().1;
    // complete graph mixes in one round; path is the slowest
    assert!((gap("complete") - 1.0).abs() < 1e-12);
    assert!(gap("path") < gap("ring"));
}

#[test]
fn linear_rate_example_runs() {
    let (zeta, ratio, last) = linear_rate::run_example().unwrap();
    assert!(ratio <= zeta + 0.02);
    assert!(last < 1e-6);
}

#[test]
fn client_drift_example_runs() {
    let rows = client_drift::run_example().unwrap();
    for w in rows.windows(2) {
        assert!(w[1].2 > w[0].2, "local DSGD drift grows with heterogeneity");
    }
    for &(_, ps, ld) in &rows[1..] {
        assert!(ps < 1e-6 * ld);
    }
}

#[test]
fn communication_savings_example_runs() {
    let rows = communication_savings::run_example().unwrap();
    assert!(rows[2].1 < rows[0].1 / 2);
}

#[test]
fn nonconvex_example_runs() {
    let (noisy, clean) = nonconvex::run_example().unwrap();
    assert!(noisy < 1e-3);
    assert!(clean < 1e-10);
}

#[test]
fn experiment_pipeline_example_runs() {
    let dir = tempfile::tempdir().unwrap();
    let (svg, floors) = experiment_pipeline::run_in(dir.path()).unwrap();
    assert!(std::fs::read_to_string(svg).unwrap().contains("<svg"));
    assert!(floors[0] > floors[1] && floors[1] > floors[2]);
}

#[test]
fn verify_suite_example_runs() {
    assert!(verify_suite::run_example().unwrap());
}
