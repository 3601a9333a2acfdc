// Config-driven experiment: parse a TOML config, sweep the node count,
// write one CSV per cell and draw them into an SVG.

use std::path::{Path, PathBuf};

use proxskip::harness::{steady_state_floor, sweep, write_result, ExperimentConfig, RunOptions, SweepAxis};
use proxskip::plot::{plot_files, XAxis};
use proxskip::trace::Metric;

const CONFIG: &str = r#"
name = "speedup"
seed = 3
nodes = 4
iterations = 3000
repetitions = 6
algorithm = "proxskip"
preset = "lemma1"
metrics = ["dist_sq", "rel_error"]

[hyper]
alpha = 0.02
p = 0.5

[problem]
family = "quadratic"
dim = 4
varsigma2 = 1.0
sigma2 = 1.0

[topology]
kind = "complete"
"#;

/// Runs the sweep into `dir` and returns the SVG path and the floors.
pub fn run_in(dir: &Path) -> proxskip::Result<(PathBuf, Vec<f64>)> {
    let cfg = ExperimentConfig::from_toml(CONFIG)?;
    let results = sweep(&cfg, SweepAxis::N, &[4.0, 8.0, 16.0], &RunOptions::default())?;
    let mut csvs = Vec::new();
    let mut floors = Vec::new();
    for r in &results {
        let floor = steady_state_floor(r, Metric::DistSq, 0.5)?;
        println!("n = {:<3} floor {floor:.3e}", r.config.nodes);
        floors.push(floor);
        csvs.push(write_result(r, dir)?.csv);
    }
    let svg = dir.join("speedup.svg");
    let inputs: Vec<&Path> = csvs.iter().map(PathBuf::as_path).collect();
    plot_files(&inputs, XAxis::Iters, Metric::DistSq, true, &svg)?;
    println!("wrote {}", svg.display());
    Ok((svg, floors))
}

pub fn run_example() -> proxskip::Result<(PathBuf, Vec<f64>)> {
    run_in(&std::env::temp_dir().join("proxskip-example"))
}

#[allow(dead_code)]
fn main() -> proxskip::Result<()> {
    run_example().map(|_| ())
}
