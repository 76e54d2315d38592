mod common;

use common::*;
use jetframe::congruence::{decide_congruence, order_bound_check, CheckOptions, CongruenceContext, Decision, ImmersionSpec};
use jetframe::expr::rational_from_f64;
use jetframe::problem::immersion_from_path;
use jetframe::Error;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use proptest::prelude::*;

fn spec(pairs: &[(&str, &str)]) -> ImmersionSpec {
    ImmersionSpec::symbolic(pairs.iter().map(|(k, v)| (*k, parse(v)))).unwrap()
}

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

fn check(name: &str, a: &ImmersionSpec, b: &ImmersionSpec, x0: &[f64]) -> jetframe::congruence::CongruenceVerdict {
    let p = pipeline(name);
    decide_congruence(&p.congruence_context().unwrap(), a, b, x0, &CheckOptions::default()).unwrap()
}

fn witness_error(w: &[f64], g0: &[BigRational]) -> f64 {
    w.iter().zip(g0).map(|(a, b)| (a - b.to_f64().unwrap()).abs()).fold(0.0, f64::max)
}

#[test]
fn extracted_systems_respect_the_order_bound() {
    for (name, k, max) in [("se2", 1, 2), ("mobius", 2, 3), ("heisenberg", 1, 2), ("so3", 1, 2)] {
        let inv = pipeline(name).invariants.as_ref().unwrap();
        assert_eq!(inv.k, k);
        assert_eq!(inv.max_order(), max, "{name}");
        assert!(order_bound_check(inv));
        // one entry per coframe form and base direction
        let n = pipeline(name).coframe.as_ref().unwrap().len();
        assert_eq!(inv.entries.len(), n * inv.space.base().len());
    }
}

#[test]
fn circle_against_rigid_copies() {
    let circle = spec(&[("u", "cos(x)"), ("v", "sin(x)")]);
    let turned = spec(&[("u", "cos(x + 1/2) + 3"), ("v", "sin(x + 1/2) - 1")]);
    let v = check("se2", &circle, &turned, &[0.2]);
    assert_eq!(v.decision, Decision::Congruent);
    assert!(witness_error(&v.witness_params().unwrap(), &[rat(1, 2), rat(3, 1), rat(-1, 1)]) < 1e-8);
    assert!(v.residual_inf.unwrap() < 1e-6);
    assert_eq!(v.grid_points, 3);

    let ellipse = spec(&[("u", "2*cos(x)"), ("v", "sin(x)")]);
    let v = check("se2", &circle, &ellipse, &[0.2]);
    assert_eq!(v.decision, Decision::NotCongruent);
    assert!(v.offending.is_some());
    assert!(v.witness.is_none());
}

#[test]
fn mirror_image_is_not_congruent() {
    // reflections flip the sign of the curvature invariant
    let circle = spec(&[("u", "cos(x)"), ("v", "sin(x)")]);
    let mirror = spec(&[("u", "cos(x)"), ("v", "-sin(x)")]);
    assert_eq!(check("se2", &circle, &mirror, &[0.2]).decision, Decision::NotCongruent);
}

#[test]
fn sampled_circle_is_congruent_to_the_rotated_circle() {
    let p = pipeline("se2");
    let space = &p.problem.space;
    let sampled = immersion_from_path(immersion_path("circle_sampled"), space).unwrap();
    let turned = immersion_from_path(immersion_path("circle_rotated"), space).unwrap();
    let ellipse = immersion_from_path(immersion_path("ellipse"), space).unwrap();
    let v = check("se2", &sampled, &turned, &[0.1]);
    assert_eq!(v.decision, Decision::Congruent, "{v}");
    assert!(witness_error(&v.witness_params().unwrap(), &[rat(1, 2), rat(3, 1), rat(-1, 1)]) < 1e-5);
    assert_eq!(check("se2", &sampled, &ellipse, &[0.1]).decision, Decision::NotCongruent);
}

#[test]
fn sampled_jets_approximate_exact_jets() {
    let p = pipeline("se2");
    let space = p.invariants.as_ref().unwrap().space.clone();
    let sampled = immersion_from_path(immersion_path("circle_sampled"), &p.problem.space).unwrap();
    let exact = spec(&[("u", "cos(x)"), ("v", "sin(x)")]);
    for x in [-0.1, 0.0, 0.15] {
        let a = sampled.jets(&space).unwrap().at(&[x]).unwrap();
        let b = exact.jets(&space).unwrap().at(&[x]).unwrap();
        for (s, e) in a.iter().zip(&b) {
            assert!((s - e).abs() < 1e-7, "{x}: {a:?} vs {b:?}");
        }
    }
}

#[test]
fn schwarzian_pairs() {
    let exp = spec(&[("z", "exp(w)")]);
    let lft = spec(&[("z", "(2*exp(w) + 1)/(exp(w) + 1)")]);
    let v = check("mobius", &exp, &lft, &[0.2]);
    assert_eq!(v.decision, Decision::Congruent);
    assert!(witness_error(&v.witness_params().unwrap(), &[rat(2, 1), rat(1, 1), rat(1, 1)]) < 1e-6);
    let cube = spec(&[("z", "w^3 + w")]);
    assert_eq!(check("mobius", &exp, &cube, &[0.2]).decision, Decision::NotCongruent);
}

#[test]
fn surfaces_under_the_heisenberg_group() {
    let p = pipeline("heisenberg");
    let psi = spec(&[("u", "x*y + sin(x)"), ("v", "x + y^2 + x*y"), ("w", "2*x + y + x^2")]);
    let g0 = [rat(1, 3), rat(-2, 5), rat(3, 2), rat(1, 4), rat(-1, 2)];
    let moved = psi.transformed(&p.prolonged, &g0).unwrap();
    let v = check("heisenberg", &psi, &moved, &[0.3, 0.2]);
    assert_eq!(v.decision, Decision::Congruent, "{v}");
    assert_eq!(v.grid_points, 25);
    assert!(witness_error(&v.witness_params().unwrap(), &g0) < 1e-5);
    let bumped = moved.bumped(&["x".into(), "y".into()], &[0.3, 0.2], 1e-2).unwrap();
    assert_eq!(check("heisenberg", &psi, &bumped, &[0.3, 0.2]).decision, Decision::NotCongruent);
}

#[test]
fn surfaces_under_rotations() {
    let p = pipeline("so3");
    let psi = spec(&[("u", "x + 1"), ("v", "y + x*y/3"), ("w", "x^2/2 + y^2/3 + 1")]);
    let g0 = [rat(1, 5), rat(-1, 3), rat(1, 2)];
    let moved = psi.transformed(&p.prolonged, &g0).unwrap();
    let v = check("so3", &psi, &moved, &[0.2, 0.1]);
    assert_eq!(v.decision, Decision::Congruent, "{v}");
    assert!(witness_error(&v.witness_params().unwrap(), &g0) < 1e-5);
    let bumped = moved.bumped(&["x".into(), "y".into()], &[0.2, 0.1], 1e-2).unwrap();
    assert_eq!(check("so3", &psi, &bumped, &[0.2, 0.1]).decision, Decision::NotCongruent);
}

#[test]
fn nonconstant_structure_downgrades_to_necessary_only() {
    let p = pipeline("se2");
    let ctx = CongruenceContext {
        prolonged: &p.prolonged,
        invariants: p.invariants.as_ref().unwrap(),
        constant_structure: false,
    };
    let circle = spec(&[("u", "cos(x)"), ("v", "sin(x)")]);
    let turned = spec(&[("u", "cos(x + 1/2) + 3"), ("v", "sin(x + 1/2) - 1")]);
    let v = decide_congruence(&ctx, &circle, &turned, &[0.2], &CheckOptions::default()).unwrap();
    assert_eq!(v.decision, Decision::NecessaryOnlyPass);
    assert_eq!(v.decision.exit_code(), 2);
    assert!(v.watermark.is_some());
}

#[test]
fn starved_search_is_inconclusive() {
    let p = pipeline("se2");
    let circle = spec(&[("u", "cos(x)"), ("v", "sin(x)")]);
    let far = spec(&[("u", "cos(x + 3) + 30"), ("v", "sin(x + 3) - 40")]);
    let opts = CheckOptions { max_iter: 1, seeds: 0, ..CheckOptions::default() };
    let v = decide_congruence(&p.congruence_context().unwrap(), &circle, &far, &[0.2], &opts).unwrap();
    assert_eq!(v.decision, Decision::Inconclusive, "{v}");
    assert!(v.witness.is_none());
}

#[test]
fn singular_immersions_are_rejected() {
    let point = spec(&[("u", "1"), ("v", "2")]);
    let circle = spec(&[("u", "cos(x)"), ("v", "sin(x)")]);
    let p = pipeline("se2");
    let err = decide_congruence(&p.congruence_context().unwrap(), &point, &circle, &[0.2], &CheckOptions::default()).unwrap_err();
    assert!(matches!(err, Error::Regularity(_)), "{err}");
}

#[test]
fn exit_codes() {
    assert_eq!(Decision::Congruent.exit_code(), 0);
    assert_eq!(Decision::NotCongruent.exit_code(), 1);
    assert_eq!(Decision::Inconclusive.exit_code(), 2);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn rigid_images_are_congruent(
        c in prop::collection::vec(-1.0f64..1.0, 4),
        g in prop::collection::vec(-1.2f64..1.2, 3),
    ) {
        let p = pipeline("se2");
        let q = |x: f64| rational_from_f64((x * 100.0).round() / 100.0);
        let psi = spec(&[
            ("u", &format!("x + {}*x^2", c[0])),
            ("v", &format!("{}*x + {}*x^3 + {}*sin(x)", c[1], c[2], c[3])),
        ]);
        let g0: Vec<BigRational> = g.iter().map(|x| q(*x)).collect();
        let moved = psi.transformed(&p.prolonged, &g0).unwrap();
        let v = check("se2", &psi, &moved, &[0.3]);
        prop_assert_eq!(v.decision, Decision::Congruent);
        prop_assert!(witness_error(&v.witness_params().unwrap(), &g0) < 1e-5);
    }
}
