//! Rotations acting on surfaces: a hand-written orthonormal frame, its
//! Maurer-Cartan matrix and the resulting invariants.

use jetframe::problem::{Pipeline, Problem, Stage};

fn main() -> jetframe::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/problems/so3.toml");
    let p = Pipeline::run(&Problem::from_path(path)?, Stage::Invariants)?;
    let report = p.frame_report.as_ref().unwrap();
    println!("frame verified: {} (equivariance {:.1e})", report.passed(), report.equivariance.unwrap_or(0.0));

    let mm = p.matrix_mc.as_ref().unwrap();
    println!("(dρ)ρ^-1 antisymmetric: {}", mm.antisymmetric);
    // the coefficients are long; show which differentials each entry uses
    for (i, j) in &mm.entries {
        let support: Vec<String> = mm.full[*i][*j].support().iter().map(|c| format!("d{c}")).collect();
        println!("Ω{}{} involves {}", i + 1, j + 1, support.join(", "));
    }
    if let Some(c) = p.structure.as_ref().unwrap().constants() {
        c.equations("ω").iter().for_each(|l| println!("{l}"));
    }
    println!("{} nonconstant invariants", p.invariants.as_ref().unwrap().nonconstant().len());
    Ok(())
}
