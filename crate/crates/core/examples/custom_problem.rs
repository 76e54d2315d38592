//! A problem defined inline: graphs u(x) under the affine maps
//! u -> a u + b. The frame is a = 1/u_x, b = -u/u_x and the only
//! nonconstant invariant is -u_xx/u_x.

use jetframe::problem::{Pipeline, Problem, Stage};

const PROBLEM: &str = r#"
name = "affine"
base = ["x"]
fiber = ["u"]
order = 1

[group]
params = ["a", "b"]
identity = [1, 0]
matrix = [["a", "b"], ["0", "1"]]

[group.action]
u = "a*u + b"

[cross_section]
u = 0
u_x = 1
"#;

fn main() -> jetframe::Result<()> {
    let p = Pipeline::run(&Problem::from_toml(PROBLEM)?, Stage::Invariants)?;
    println!("{}", p.freedom);
    println!("{}", p.frame.as_ref().unwrap());
    for e in p.invariants.as_ref().unwrap().nonconstant() {
        println!("{} (d{}): {}", e.label, e.direction, e.expr);
    }
    Ok(())
}
