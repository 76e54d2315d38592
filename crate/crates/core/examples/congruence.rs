//! Decides congruence of plane curves under rigid motions.

use jetframe::congruence::{decide_congruence, CheckOptions, ImmersionSpec};
use jetframe::expr::parse_any;
use jetframe::problem::{Pipeline, Problem, Stage};

fn curve(u: &str, v: &str) -> jetframe::Result<ImmersionSpec> {
    ImmersionSpec::symbolic([("u", parse_any(u)?), ("v", parse_any(v)?)])
}

fn main() -> jetframe::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/problems/se2.toml");
    let p = Pipeline::run(&Problem::from_path(path)?, Stage::Invariants)?;
    let ctx = p.congruence_context().unwrap();
    let parabola = curve("x", "x^2")?;
    let moved = curve("x*cos(1) - x^2*sin(1) + 2", "x*sin(1) + x^2*cos(1) - 5")?;
    let stretched = curve("x", "2*x^2")?;
    for (name, other) in [("moved parabola", &moved), ("stretched parabola", &stretched)] {
        let v = decide_congruence(&ctx, &parabola, other, &[0.25], &CheckOptions::default())?;
        println!("parabola vs {name}:\n{v}");
    }
    Ok(())
}
