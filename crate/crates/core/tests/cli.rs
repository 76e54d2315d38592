mod common;

use std::process::{Command, Output};

use common::*;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jetframe")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn p(name: &str) -> String {
    problem_path(name).display().to_string()
}

fn imm(name: &str) -> String {
    immersion_path(name).display().to_string()
}

#[test]
fn invariants_text() {
    let o = run(&["invariants", &p("se2")]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("local freedom: FREE"), "{out}");
    assert!(out.contains("3 nonconstant invariants"), "{out}");
    // timings go to stderr only
    assert!(!out.contains("time "));
    assert!(String::from_utf8_lossy(&o.stderr).contains("time prolong"));
}

#[test]
fn machine_output_is_deterministic_json() {
    let a = run(&["--format", "machine", "invariants", &p("mobius")]);
    let b = run(&["invariants", &p("mobius"), "--format", "machine"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["command"], "invariants");
    assert_eq!(v["problem"], "mobius");
    assert!(v.get("timings").is_none());
    assert_eq!(v["structure"]["constant"], true);
}

#[test]
fn output_file_holds_the_machine_report() {
    let path = std::env::temp_dir().join(format!("jetframe-cli-{}.json", std::process::id()));
    let o = run(&["frame", &p("heisenberg"), "--output", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    std::fs::remove_file(&path).unwrap();
    assert_eq!(v["command"], "frame");
    assert_eq!(v["frame"]["solved"], true);
}

#[test]
fn prolong_respects_the_order_flag() {
    let o = run(&["prolong", &p("se2"), "--order", "2"]);
    let out = stdout(&o);
    assert!(out.contains("g·u_xx"), "{out}");
    let o = run(&["prolong", &p("se2"), "--order", "0"]);
    assert!(stdout(&o).contains("NOT-FREE"));
}

#[test]
fn coframe_prints_structure_equations() {
    let o = run(&["coframe", &p("so3")]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("ρ*Ω12"), "{out}");
    assert!(out.contains("structure equations"), "{out}");
}

#[test]
fn check_exit_codes() {
    let ok = run(&["check", &p("se2"), &imm("circle"), &imm("circle_rotated"), "--at", "0.2"]);
    assert_eq!(ok.status.code(), Some(0), "{}", stdout(&ok));
    assert!(stdout(&ok).contains("decision: CONGRUENT"));
    let no = run(&["check", &p("se2"), &imm("circle"), &imm("ellipse"), "--at", "0.2"]);
    assert_eq!(no.status.code(), Some(1));
    assert!(stdout(&no).contains("decision: NOT-CONGRUENT"));
    let sampled = run(&["check", &p("se2"), &imm("circle_sampled"), &imm("circle_rotated"), "--at", "0.1"]);
    assert_eq!(sampled.status.code(), Some(0), "{}", stdout(&sampled));
    let mob = run(&["check", &p("mobius"), &imm("schwarzian_a"), &imm("schwarzian_b"), "--at=-0.3"]);
    assert_eq!(mob.status.code(), Some(0), "{}", stdout(&mob));
}

#[test]
fn input_errors() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(64));
    assert_eq!(run(&["invariants"]).status.code(), Some(64));
    assert_eq!(run(&["invariants", &p("se2"), "--box", "3"]).status.code(), Some(64));
    assert_eq!(run(&["invariants", "/no/such/problem.toml"]).status.code(), Some(66));
    // a problem file passed where an immersion is expected
    let o = run(&["check", &p("se2"), &imm("circle"), &p("se2")]);
    assert_eq!(o.status.code(), Some(64));
    let bad = std::env::temp_dir().join(format!("jetframe-bad-{}.toml", std::process::id()));
    std::fs::write(&bad, "base = [\"x\"]\n").unwrap();
    let o = run(&["prolong", bad.to_str().unwrap()]);
    std::fs::remove_file(&bad).unwrap();
    assert_eq!(o.status.code(), Some(64));
    assert!(String::from_utf8_lossy(&o.stderr).contains("invalid input"));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn selftest_passes_on_bundled_problems() {
    for name in ["se2", "so3"] {
        let o = run(&["selftest", &p(name), "--seed", "42"]);
        let out = stdout(&o);
        assert_eq!(o.status.code(), Some(0), "{out}");
        assert!(out.contains("selftest passed (seed 42)"));
        if name == "so3" {
            assert!(out.contains("pass maurer-cartan/antisymmetry"), "{out}");
        }
    }
}

#[test]
fn selftest_blames_a_corrupted_frame() {
    let text = std::fs::read_to_string(problem_path("so3")).unwrap();
    let bad = text.replace(r#"["t1", "t2", "t3"]"#, r#"["t1 + 1/10", "t2", "t3"]"#);
    let path = std::env::temp_dir().join(format!("jetframe-so3-bad-{}.toml", std::process::id()));
    std::fs::write(&path, bad).unwrap();
    let o = run(&["selftest", path.to_str().unwrap()]);
    std::fs::remove_file(&path).unwrap();
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    let line = out.lines().find(|l| l.contains("equivariance")).unwrap();
    assert!(line.starts_with("FAIL") && line.contains("rho"), "{out}");
}

#[test]
fn seed_and_box_flags_reach_the_report() {
    let o = run(&["--format", "machine", "--seed", "9", "--box", "0.6,1.4", "invariants", &p("se2")]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["seed"], 9);
}

#[test]
fn library_entry_point_matches_the_binary() {
    let code = jetframe::cli::main_with_args(["jetframe", "frame", &p("se2"), "--tol", "1e-8"]);
    assert_eq!(code, 0);
    assert_eq!(jetframe::cli::main_with_args(["jetframe", "--bogus"]), 64);
}
