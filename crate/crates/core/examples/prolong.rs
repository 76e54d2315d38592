//! Prolonged action of the rigid motions of the plane and its local
//! freedom at increasing jet order.

use jetframe::frame::check_local_freedom;
use jetframe::problem::Problem;

fn main() -> jetframe::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/problems/se2.toml");
    let problem = Problem::from_path(path)?;
    for k in 0..=2 {
        let pr = problem.with_order(k);
        let prolonged = pr.prolong()?;
        println!("J^{k}: {}", check_local_freedom(&prolonged, &pr.sampler)?);
        if k == 2 {
            for (c, t) in prolonged.transforms() {
                println!("  g·{c} = {t}");
            }
        }
    }
    Ok(())
}
