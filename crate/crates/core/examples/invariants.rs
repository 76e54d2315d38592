//! Complete invariant system of a bundled problem.
//!
//!     cargo run --example invariants -- heisenberg

use jetframe::congruence::order_bound_check;
use jetframe::problem::{Pipeline, Problem, Stage};

fn main() -> jetframe::Result<()> {
    let name = std::env::args().nth(1).unwrap_or_else(|| "se2".into());
    let path = format!("{}/problems/{name}.toml", env!("CARGO_MANIFEST_DIR"));
    let p = Pipeline::run(&Problem::from_path(path)?, Stage::Invariants)?;
    let inv = p.invariants.as_ref().unwrap();
    for e in inv.nonconstant() {
        println!("[order {}] {} (d{}): {}", e.order, e.label, e.direction, e.expr);
    }
    println!(
        "{} entries, {} constant, max order {} (bound {}: {})",
        inv.entries.len(),
        inv.entries.len() - inv.nonconstant().len(),
        inv.max_order(),
        inv.k + 1,
        order_bound_check(inv)
    );
    Ok(())
}
