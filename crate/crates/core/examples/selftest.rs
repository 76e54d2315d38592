//! Randomized consistency suites for every bundled problem.

use jetframe::problem::Problem;
use jetframe::selftest;

fn main() -> jetframe::Result<()> {
    for name in ["se2", "mobius", "heisenberg", "so3"] {
        let path = format!("{}/problems/{name}.toml", env!("CARGO_MANIFEST_DIR"));
        let report = selftest::run(&Problem::from_path(path)?, 7)?;
        println!("{name}: {}", if report.passed() { "passed" } else { "FAILED" });
        for s in &report.suites {
            println!("  {:<28} {:.1e} / {:.0e}", s.name, s.worst, s.tol);
        }
    }
    Ok(())
}
