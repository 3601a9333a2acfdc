// Separate binary: the interrupt flag is process-global.

use proxskip::cli::{self, exit};
use proxskip::harness::{read_echo, read_result_csv};
use proxskip::interrupt;

#[test]
fn interrupted_run_flushes_partial_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.toml");
    std::fs::write(
        &cfg,
        r#"
seed = 1
nodes = 3
iterations = 500
repetitions = 2
algorithm = "local-dsgd"
metrics = ["rel_error"]

[hyper]
alpha = 0.1
p = 0.5

[problem]
family = "quadratic"
dim = 2
varsigma2 = 1.0
sigma2 = 0.0

[topology]
kind = "complete"
"#,
    )
    .unwrap();
    interrupt::request();
    let out_dir = dir.path().join("out");
    let mut out = Vec::new();
    let code = cli::run(
        ["proxskip", "run", "--workers", "1", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()],
        &mut out,
        &mut Vec::new(),
    );
    interrupt::reset();
    assert_eq!(code, exit::INTERRUPTED);
    let csv = std::path::PathBuf::from(String::from_utf8(out).unwrap().lines().next().unwrap());
    let rows = read_result_csv(&csv).unwrap();
    assert!(!rows.is_empty() && rows.len() < 501);
    assert!(read_echo(&csv).unwrap().truncated);
}
