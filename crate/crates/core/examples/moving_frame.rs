//! Solves the normalization equations of the Heisenberg-type group acting
//! on surfaces and checks the result numerically.

use jetframe::frame::{solve_normalization, verify_frame};
use jetframe::problem::Problem;

fn main() -> jetframe::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/problems/heisenberg.toml");
    let pr = Problem::from_path(path)?;
    let prolonged = pr.prolong()?;
    let frame = solve_normalization(&prolonged, &pr.cross_section, &pr.sampler)?;
    println!("{frame}");
    let report = verify_frame(&frame, &prolonged, &pr.cross_section, &pr.sampler, 1e-8)?;
    for (c, r) in &report.normalization {
        println!("residual on {c}: {r:.1e}");
    }
    println!("equivariance defect: {:.1e}", report.equivariance.unwrap_or(0.0));
    println!("verified: {}", report.passed());
    Ok(())
}
