//! Congruence with a curve known only through samples on a grid.

use std::collections::BTreeMap;

use jetframe::congruence::{decide_congruence, Axis, CheckOptions, ImmersionSpec, SampledImmersion};
use jetframe::expr::parse_any;
use jetframe::problem::{Pipeline, Problem, Stage};

fn main() -> jetframe::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/problems/se2.toml");
    let p = Pipeline::run(&Problem::from_path(path)?, Stage::Invariants)?;

    // a cubic turned by 0.7 and shifted, sampled every 0.02
    let (c, s) = (0.7f64.cos(), 0.7f64.sin());
    let axis = Axis { name: "x".into(), start: -0.4, step: 0.02, count: 41 };
    let xs: Vec<f64> = (0..axis.count).map(|i| axis.start + i as f64 * axis.step).collect();
    let mut values = BTreeMap::new();
    values.insert("u".to_string(), xs.iter().map(|x| x * c - x.powi(3) * s + 1.0).collect());
    values.insert("v".to_string(), xs.iter().map(|x| x * s + x.powi(3) * c).collect());
    let sampled = ImmersionSpec::Sampled(SampledImmersion { axes: vec![axis], values });

    let cubic = ImmersionSpec::symbolic([("u", parse_any("x")?), ("v", parse_any("x^3")?)])?;
    let v = decide_congruence(&p.congruence_context().unwrap(), &cubic, &sampled, &[0.0], &CheckOptions::default())?;
    println!("{v}");
    Ok(())
}
