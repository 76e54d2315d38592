//! Drives the command-line front end from code, as the `jetframe` binary
//! does.
//!
//!     cargo run --example cli -- check problems/se2.toml \
//!         problems/immersions/circle.toml problems/immersions/ellipse.toml

fn main() {
    let mut args: Vec<String> = std::env::args().collect();
    if args.len() == 1 {
        let dir = env!("CARGO_MANIFEST_DIR");
        args.extend(["invariants".into(), format!("{dir}/problems/se2.toml")]);
    }
    std::process::exit(jetframe::cli::main_with_args(args));
}
