//! Invariant coframe of the rigid motions of the plane on J^1 and its
//! structure equations.

use jetframe::problem::{Pipeline, Problem, Stage};

fn main() -> jetframe::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/problems/se2.toml");
    let p = Pipeline::run(&Problem::from_path(path)?, Stage::Coframe)?;
    let cf = p.coframe.as_ref().unwrap();
    let coords = cf.space.coords();
    for (i, f) in cf.forms.iter().enumerate() {
        println!("ω{} = {} = {}", i + 1, f.provenance, f.form.display_in(&coords));
    }
    match p.structure.as_ref().unwrap().constants() {
        Some(c) => c.equations("ω").iter().for_each(|l| println!("{l}")),
        None => println!("structure is not constant"),
    }
    Ok(())
}
