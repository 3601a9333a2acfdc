use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

use proxskip::cli::{self, exit};
use proxskip::harness::{read_echo, read_result_csv, ExperimentConfig};

const QUICK: &str = r#"
seed = 2
nodes = 4
iterations = 60
repetitions = 3
algorithm = "proxskip"
preset = "lemma1"

[hyper]
alpha = 0.3
p = 0.5

[problem]
family = "quadratic"
dim = 3
varsigma2 = 1.0
sigma2 = 0.1

[topology]
kind = "ring"
"#;

fn call(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("proxskip").chain(args.iter().copied());
    let code = cli::run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("cfg.toml");
    fs::write(&p, text).unwrap();
    p
}

fn files_in(dir: &Path) -> Vec<PathBuf> {
    match fs::read_dir(dir) {
        Ok(rd) => rd.map(|e| e.unwrap().path()).collect(),
        Err(_) => Vec::new(),
    }
}

#[test]
fn run_writes_csv_and_echo() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), QUICK);
    let out = dir.path().join("out");
    let (code, stdout, _) = call(&["run", "--config", cfg.to_str().unwrap(), "--set", "hyper.p=0.25", "--out", out.to_str().unwrap()]);
    assert_eq!(code, exit::OK);
    let csv = PathBuf::from(stdout.lines().next().unwrap());
    let rows = read_result_csv(&csv).unwrap();
    assert_eq!(rows.len(), 61 * 5);
    assert!(rows.iter().all(|r| r.run_count == 3));
    let echo = read_echo(&csv).unwrap();
    assert_eq!(echo.config.hyper.p, Some(0.25));
    assert_eq!(echo.seeds.len(), 3);
}

#[test]
fn run_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), QUICK);
    let mut contents = Vec::new();
    for (k, workers) in ["1", "3"].iter().enumerate() {
        let out = dir.path().join(format!("o{k}"));
        let (code, stdout, _) = call(&["run", "--workers", workers, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(code, exit::OK);
        contents.push(fs::read(stdout.lines().next().unwrap()).unwrap());
    }
    assert_eq!(contents[0], contents[1]);
}

#[test]
fn bad_override_is_invalid_config_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), QUICK);
    let out = dir.path().join("out");
    let (code, _, err) = call(&["run", "--config", cfg.to_str().unwrap(), "--set", "hyper.bogus=1", "--out", out.to_str().unwrap()]);
    assert_eq!(code, exit::INVALID_CONFIG, "{err}");
    assert!(files_in(&out).is_empty());

    let (code, _, _) = call(&["run", "--config", cfg.to_str().unwrap(), "--set", "hyper.p=1.5", "--out", out.to_str().unwrap()]);
    assert_eq!(code, exit::INVALID_CONFIG);
    assert!(files_in(&out).is_empty());
}

#[test]
fn missing_config_and_usage_errors() {
    let (code, _, _) = call(&["run", "--config", "/nonexistent/cfg.toml", "--out", "/tmp/x"]);
    assert_eq!(code, exit::MISSING_FILE);
    let (code, _, _) = call(&["run", "--out", "/tmp/x"]);
    assert_eq!(code, exit::USAGE);
    let (code, _, _) = call(&["frobnicate"]);
    assert_eq!(code, exit::USAGE);
    let (code, stdout, _) = call(&["--help"]);
    assert_eq!(code, exit::OK);
    assert!(stdout.contains("sweep"));
}

#[test]
fn unwritable_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), QUICK);
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let (code, _, _) = call(&["run", "--config", cfg.to_str().unwrap(), "--out", blocker.join("sub").to_str().unwrap()]);
    assert_eq!(code, exit::UNWRITABLE);
}

#[test]
fn all_repetitions_diverging_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), QUICK);
    let out = dir.path().join("out");
    let (code, _, err) = call(&[
        "run", "--config", cfg.to_str().unwrap(), "--set", "hyper.alpha=50", "--set", "iterations=2000", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code, exit::DIVERGED, "{err}");
    assert!(files_in(&out).is_empty());
}

#[test]
fn sweep_then_plot() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), QUICK);
    let out = dir.path().join("out");
    let (code, stdout, err) = call(&[
        "sweep", "--config", cfg.to_str().unwrap(), "--axis", "p", "--values", "1,0.5,0.2", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code, exit::OK, "{err}");
    let csvs: Vec<&str> = stdout.lines().filter(|l| l.ends_with(".csv")).collect();
    assert_eq!(csvs.len(), 3);
    let ps: Vec<f64> = csvs.iter().map(|c| read_echo(Path::new(c)).unwrap().algorithm.hyper.p).collect();
    assert_eq!(ps, [1.0, 0.5, 0.2]);

    let svg = dir.path().join("fig.svg");
    let joined = csvs.join(",");
    let (code, _, err) = call(&["plot", "--in", &joined, "--x", "comms", "--y", "rel_error", "--out", svg.to_str().unwrap()]);
    assert_eq!(code, exit::OK, "{err}");
    let text = fs::read_to_string(&svg).unwrap();
    assert_eq!(text.matches("<path").count(), 3);
    assert!(text.contains("p=0.2"));

    let (code, _, _) = call(&["sweep", "--config", cfg.to_str().unwrap(), "--axis", "rho", "--values", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(code, exit::INVALID_CONFIG);
}

#[test]
fn plot_rejects_bad_inputs_without_writing() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "iteration,comms,value\n0,0,1\n").unwrap();
    let svg = dir.path().join("fig.svg");
    let (code, _, err) = call(&["plot", "--in", bad.to_str().unwrap(), "--y", "rel_error", "--out", svg.to_str().unwrap()]);
    assert_eq!(code, exit::BAD_INPUT);
    assert!(err.contains("value"), "{err}");
    assert!(!svg.exists());

    let (code, _, _) = call(&["plot", "--in", "/nonexistent.csv", "--out", svg.to_str().unwrap()]);
    assert_eq!(code, exit::MISSING_FILE);
    let (code, _, _) = call(&["plot", "--in", bad.to_str().unwrap(), "--x", "time", "--out", svg.to_str().unwrap()]);
    assert_eq!(code, exit::INVALID_CONFIG);
}

#[test]
fn verify_passes_and_fault_fails() {
    let (code, stdout, _) = call(&["verify", "--seed", "5"]);
    assert_eq!(code, exit::OK, "{stdout}");
    assert!(stdout.contains("all 9 properties passed"));
    let (code, stdout, _) = call(&["verify", "--seed", "5", "--inject-fault"]);
    assert_eq!(code, exit::VERIFY_FAILED);
    assert!(stdout.contains("FAIL  form-equivalence"));
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for path in files_in(&dir) {
        if path.extension().is_some_and(|e| e == "toml") {
            ExperimentConfig::load(&path, &[]).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            seen += 1;
        }
    }
    assert!(seen >= 3);
}

#[test]
fn binary_reads_worker_env() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), QUICK);
    let out = dir.path().join("out");
    let status = Command::new(env!("CARGO_BIN_EXE_proxskip"))
        .args(["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .env("PROXSKIP_WORKERS", "2")
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(exit::OK));
    let status = Command::new(env!("CARGO_BIN_EXE_proxskip"))
        .args(["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .env("PROXSKIP_WORKERS", "many")
        .stderr(Stdio::null())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(exit::USAGE));
}
