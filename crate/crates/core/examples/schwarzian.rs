//! The Schwarzian derivative falls out as the invariant of linear
//! fractional maps acting on holomorphic functions. Compares it with a
//! direct evaluation on f(w) = tan(w).

use std::collections::BTreeMap;

use num_complex::Complex64;
use jetframe::problem::{Pipeline, Problem, Stage};

fn main() -> jetframe::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/problems/mobius.toml");
    let p = Pipeline::run(&Problem::from_path(path)?, Stage::Invariants)?;
    let inv = p.invariants.as_ref().unwrap();
    let s = &inv.nonconstant()[0].expr;
    println!("invariant: {s}");

    // tan has Schwarzian 2, so the invariant (half of it) is 1 everywhere
    let w = Complex64::new(0.3, 0.2);
    let sec2 = 1.0 / (w.cos() * w.cos());
    let jets = [
        ("z_w", sec2),
        ("z_ww", 2.0 * sec2 * w.tan()),
        ("z_www", 2.0 * sec2 * (sec2 + 2.0 * w.tan() * w.tan())),
    ];
    let point: BTreeMap<String, Complex64> = jets.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    println!("value on tan at w = {w}: {}", s.eval_complex(&point)?);
    Ok(())
}
