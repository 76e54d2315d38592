//! Parsing, differentiation, substitution and randomized equality.

use std::collections::BTreeMap;

use jetframe::expr::{parse, probably_equal, Expr};
use jetframe::{VarKind, VarTable};

fn main() -> jetframe::Result<()> {
    let vars = VarTable::new().with(&["u_x", "v_x", "t"], VarKind::Jet)?;
    let speed = parse("sqrt(u_x^2 + v_x^2)", &vars)?;
    println!("speed        = {speed}");
    println!("d/du_x speed = {}", speed.diff("u_x")?);

    // unit tangent at angle t
    let mut at = BTreeMap::new();
    at.insert("u_x".to_string(), parse("cos(t)", &vars)?);
    at.insert("v_x".to_string(), parse("sin(t)", &vars)?);
    let unit = speed.substitute(&at)?;
    println!("speed on the unit circle = {unit}");
    println!("equal to 1: {}", probably_equal(&unit, &Expr::one(), 20, 1e-12)?);

    // unknown names are rejected against a registry
    match parse("u_x + w", &vars) {
        Err(e) => println!("parse error: {e}"),
        Ok(e) => println!("unexpected: {e}"),
    }
    Ok(())
}
