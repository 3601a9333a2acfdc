// Runs the randomized property suite used by `proxskip verify`.

use proxskip::verify::{run_suite, VerifyOptions};

pub fn run_example() -> proxskip::Result<bool> {
    let results = run_suite(&VerifyOptions { seed: 42, inject_fault: false });
    for r in &results {
        println!("{r}");
    }
    Ok(results.iter().all(|r| r.passed))
}

#[allow(dead_code)]
fn main() -> proxskip::Result<()> {
    run_example().map(|_| ())
}
