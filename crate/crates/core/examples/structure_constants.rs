//! Structure functions of hand-built coframes on the (u, v) plane.

use jetframe::coframe::OneForm;
use jetframe::expr::{parse_any, Sampler};
use jetframe::group::{structure_constants_of, StructureReport};

fn main() -> jetframe::Result<()> {
    let coords = vec!["u".to_string(), "v".to_string()];
    let cases = [
        ("du, dv", "0", "1"),
        ("du, v du + dv", "v", "1"),
        ("du, exp(u) dv", "0", "exp(u)"),
        ("du, u dv", "0", "u"),
    ];
    for (name, a, b) in cases {
        let second = OneForm::new([("u", parse_any(a)?), ("v", parse_any(b)?)])?;
        let forms = [OneForm::d("u"), second];
        match structure_constants_of(&forms, &coords, &Sampler::default())? {
            StructureReport::Constant(c) => println!("{name}: {}", c.equations("ω").join(", ")),
            StructureReport::NonConstant(n) => println!("{name}: {n}"),
        }
    }
    Ok(())
}
