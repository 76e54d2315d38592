mod common;

use common::*;
use jetframe::congruence::ImmersionSpec;
use jetframe::frame::MovingFrame;
use jetframe::problem::{immersion_from_toml, Problem};
use jetframe::Error;

fn se2_text() -> String {
    std::fs::read_to_string(problem_path("se2")).unwrap()
}

fn path_of(err: Error) -> String {
    match err {
        Error::Validation { path, .. } => path,
        other => panic!("expected a validation error, got {other:?}"),
    }
}

#[test]
fn bundled_problems_load() {
    for name in ["se2", "mobius", "heisenberg", "so3"] {
        let p = problem(name);
        assert_eq!(p.name, name);
        assert!(!p.description.is_empty());
        assert_eq!(p.cross_section.len(), p.action.dim());
    }
    assert!(problem("mobius").complex);
    assert!(matches!(problem("so3").frame_override, Some(MovingFrame::Matrix(_))));
}

#[test]
fn cross_section_is_sorted_by_coordinate_order() {
    let text = se2_text().replace("u = 0\nv = 0\nu_x = 0", "u_x = 0\nv = 0\nu = 0");
    assert_ne!(text, se2_text());
    let p = Problem::from_toml(&text).unwrap();
    let order: Vec<&str> = p.cross_section.entries().iter().map(|(c, _)| c.as_str()).collect();
    assert_eq!(order, ["u", "v", "u_x"]);
}

#[test]
fn unknown_fields_are_rejected() {
    let err = Problem::from_toml(&format!("colour = \"red\"\n{}", se2_text())).unwrap_err();
    assert!(err.to_string().contains("colour"), "{err}");
}

#[test]
fn errors_carry_field_paths() {
    let cases = [
        (se2_text().replace("u = \"u*cos(theta)", "u = \"q*cos(theta)"), "group.action.u"),
        (se2_text().replace("identity = [\"0\", \"0\", \"0\"]", "identity = [0, 0]"), "group.identity"),
        (se2_text().replace("u_x = 0", "u_xx = 0"), "cross_section.u_xx"),
        (se2_text().replace("u_x = 0", ""), "cross_section"),
        (se2_text().replace("v = \"u*sin(theta)", "w = \"u*sin(theta)"), "group.action.w"),
    ];
    for (text, want) in cases {
        assert_ne!(text, se2_text());
        let p = path_of(Problem::from_toml(&text).unwrap_err());
        assert_eq!(p, want);
    }
}

#[test]
fn frame_override_needs_exactly_one_form() {
    let both = format!("{}\n[frame_override]\nmatrix = [[\"1\"]]\n[frame_override.params]\ntheta = \"0\"\na = \"0\"\nb = \"0\"\n", se2_text());
    assert_eq!(path_of(Problem::from_toml(&both).unwrap_err()), "frame_override");
    let missing = format!("{}\n[frame_override.params]\ntheta = \"0\"\n", se2_text());
    assert_eq!(path_of(Problem::from_toml(&missing).unwrap_err()), "frame_override.params.a");
}

#[test]
fn let_bindings_substitute_in_order() {
    let text = format!(
        "{}\n[frame_override.let]\ns = \"sqrt(u_x^2 + v_x^2)\"\nt = \"1/s\"\n[frame_override.params]\ntheta = \"atan(u_x/v_x)\"\na = \"(v*u_x - u*v_x)*t\"\nb = \"(-u*u_x - v*v_x)*t\"\n",
        se2_text()
    );
    let p = Problem::from_toml(&text).unwrap();
    let f = p.frame_override.unwrap();
    let a = f.param("a").unwrap();
    assert!(!a.mentions("t") && !a.mentions("s"));
    assert!(close(a, &parse("(v*u_x - u*v_x)/sqrt(u_x^2 + v_x^2)"), 10, 1e-12));
}

#[test]
fn immersion_files() {
    let space = problem("se2").space;
    let sym = immersion_from_toml("[components]\nu = \"cos(x)\"\nv = \"x^2\"\n", &space).unwrap();
    assert!(matches!(sym, ImmersionSpec::Symbolic(_)));
    let err = immersion_from_toml("[components]\nu = \"cos(t)\"\nv = \"x\"\n", &space).unwrap_err();
    assert_eq!(path_of(err), "components.u");
    let err = immersion_from_toml("[components]\nu = \"x\"\n", &space).unwrap_err();
    assert_eq!(path_of(err), "components.v");
    let sampled = "[sampled]\naxes = [{ name = \"x\", start = 0.0, step = 0.1, count = 3 }]\n[sampled.values]\nu = [0.0, 0.1, 0.2]\nv = [0.0, 0.0, 0.0]\n";
    let s = immersion_from_toml(sampled, &space).unwrap();
    // three points cannot carry second derivatives
    assert!(s.jets(&space.with_order(2)).is_err());
}

#[test]
fn missing_files_are_io_errors() {
    let err = Problem::from_path("/definitely/not/here.toml").unwrap_err();
    assert!(matches!(err, Error::Io(_)));
}
