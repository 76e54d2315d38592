mod common;

use std::collections::BTreeMap;

use common::*;
use jetframe::expr::Expr;
use jetframe::jet::{Coord, JetSpace, MultiIndex};
use jetframe::Error;
use num_rational::BigRational;
use proptest::prelude::*;

#[test]
fn coordinate_order_is_base_then_order_then_fiber_major() {
    let s = JetSpace::new(&["x", "y"], &["u", "v"], 2).unwrap();
    let want = [
        "x", "y", "u", "v", "u_x", "u_y", "v_x", "v_y", "u_xx", "u_xy", "u_yy", "v_xx", "v_xy", "v_yy",
    ];
    assert_eq!(s.coords(), want);
    assert_eq!(s.dim(), want.len());
}

#[test]
fn decoding_is_order_independent_for_mixed_partials() {
    let s = JetSpace::new(&["x", "y"], &["u"], 3).unwrap();
    assert_eq!(s.decode("u_xy"), Some(Coord::Jet(0, MultiIndex::new(vec![1, 0]))));
    assert_eq!(s.jet_order("u_xyy"), Some(3));
    assert_eq!(s.jet_order("y"), Some(0));
    // only the sorted spelling is a coordinate
    assert_eq!(s.decode("u_yx"), None);
    assert_eq!(s.decode("w_x"), None);
}

#[test]
fn total_derivative_example() {
    let s = JetSpace::new(&["x"], &["u", "v"], 2).unwrap();
    let d = s.total_derivative(&parse("u_x*v + x^2*u"), 0).unwrap();
    assert!(close(&d, &parse("u_xx*v + u_x*v_x + 2*x*u + x^2*u_x"), 10, 1e-12));
}

#[test]
fn total_derivative_past_the_top_order_overflows() {
    let s = JetSpace::new(&["x"], &["u"], 1).unwrap();
    match s.total_derivative(&parse("u_x^2"), 0) {
        Err(Error::OrderOverflow { coordinate, max }) => {
            assert_eq!(coordinate, "u_xx");
            assert_eq!(max, 1);
        }
        other => panic!("{other:?}"),
    }
}

/// `j^k(g·ψ) = g^(k)·j^kψ`, with the left side built by substituting the
/// immersion into the undifferentiated action and differentiating directly.
fn check_prolongation(name: &str, order: usize, psi: &[(&str, &str)], g: &[i64]) {
    let pr = problem(name).with_order(order);
    let prolonged = pr.prolong().unwrap();
    let space = &pr.space;
    let psi: BTreeMap<String, Expr> = psi.iter().map(|(k, v)| (k.to_string(), parse(v))).collect();
    let mut params: BTreeMap<String, Expr> = BTreeMap::new();
    for (p, v) in pr.action.params().iter().zip(g) {
        params.insert(p.clone(), Expr::Const(BigRational::new((*v).into(), 7.into())));
    }

    let mut moved = params.clone();
    moved.extend(psi.clone());
    let image: BTreeMap<String, Expr> = pr
        .action
        .fiber()
        .iter()
        .zip(pr.action.transforms())
        .map(|(f, t)| (f.clone(), t.substitute(&moved).unwrap()))
        .collect();
    let lhs = space.prolong_immersion(&image).unwrap();

    let mut rhs_bind = space.prolong_immersion(&psi).unwrap();
    rhs_bind.extend(params);
    for c in space.jet_coords() {
        let rhs = prolonged.transform(&c).unwrap().substitute(&rhs_bind).unwrap();
        let d = max_discrepancy(&lhs[&c], &rhs, 10);
        assert!(d < 1e-10, "{name}: {c} differs by {d}");
    }
}

#[test]
fn prolongation_commutes_with_graph_jets() {
    check_prolongation("se2", 3, &[("u", "x + x^3/3"), ("v", "exp(x/2)")], &[3, 5, -2]);
    check_prolongation("mobius", 3, &[("z", "w^2 + 1")], &[9, 2, -1]);
    check_prolongation(
        "heisenberg",
        2,
        &[("u", "x*y"), ("v", "x + y^2"), ("w", "x^2 + 2*y")],
        &[1, 2, 3, 4, 5],
    );
    check_prolongation("so3", 2, &[("u", "x"), ("v", "y"), ("w", "x*y + x^2")], &[1, -2, 3]);
}

#[test]
fn prolonged_action_matches_finite_differences() {
    // g·ψ evaluated on a small stencil, against the first-order transforms
    let pr = problem("se2");
    let prolonged = pr.prolong().unwrap().compile().unwrap();
    let (th, a, b): (f64, f64, f64) = (0.4, 1.0, -2.0);
    let psi = |x: f64| (x.sin() + x, x * x);
    let act = |x: f64| {
        let (u, v) = psi(x);
        (u * th.cos() - v * th.sin() + a, u * th.sin() + v * th.cos() + b)
    };
    let x0 = 0.7;
    let h = 1e-5;
    let (up, vp) = act(x0 + h);
    let (um, vm) = act(x0 - h);
    let (u, v) = psi(x0);
    let z = [x0, u, v, x0.cos() + 1.0, 2.0 * x0];
    let gz = prolonged.apply(&[th, a, b], &z).unwrap();
    assert!((gz[3] - (up - um) / (2.0 * h)).abs() < 1e-8);
    assert!((gz[4] - (vp - vm) / (2.0 * h)).abs() < 1e-8);
}

#[test]
fn base_dependent_actions_are_rejected() {
    let text = std::fs::read_to_string(problem_path("se2")).unwrap().replace("+ a\"", "+ a*x\"");
    let err = jetframe::problem::Problem::from_toml(&text).unwrap_err();
    assert!(matches!(&err, Error::Validation { path, .. } if path == "group.action.u"), "{err}");

    let action = jetframe::group::ActionSpec::new(
        vec!["a".into()],
        vec![BigRational::from_integer(0.into())],
        vec!["u".into()],
        vec![parse("u + a*x")],
    )
    .unwrap();
    let s = JetSpace::new(&["x"], &["u"], 1).unwrap();
    assert!(matches!(s.prolong_action(&action), Err(Error::Validation { .. })));
}

fn binom(n: usize, k: usize) -> usize {
    (1..=k).fold(1, |acc, i| acc * (n + 1 - i) / i)
}

proptest! {
    #[test]
    fn dimension_formula(p in 1usize..4, q in 1usize..4, k in 0usize..4) {
        let base: Vec<String> = (0..p).map(|i| format!("x{i}")).collect();
        let fiber: Vec<String> = (0..q).map(|i| format!("u{i}")).collect();
        let s = JetSpace::from_names(base, fiber, k).unwrap();
        prop_assert_eq!(s.dim(), p + q * binom(p + k, k));
        prop_assert_eq!(s.coords().len(), s.dim());
        let mut seen = std::collections::BTreeSet::new();
        for c in s.coords() {
            prop_assert!(s.decode(&c).is_some());
            prop_assert!(seen.insert(c));
        }
    }

    #[test]
    fn multi_index_counts(p in 1usize..5, m in 0usize..5) {
        let all = MultiIndex::all(p, m);
        prop_assert_eq!(all.len(), binom(p + m - 1, m));
        for j in &all {
            prop_assert_eq!(j.order(), m);
            prop_assert!(j.indices().windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn total_derivatives_commute(c in prop::collection::vec(-3i64..4, 3)) {
        let s = JetSpace::new(&["x", "y"], &["u"], 3).unwrap();
        let e = parse(&format!("{}*u_x*u + {}*x*u_y^2 + {}*y*u", c[0], c[1], c[2]));
        let xy = s.total_derivative(&s.total_derivative(&e, 0).unwrap(), 1).unwrap();
        let yx = s.total_derivative(&s.total_derivative(&e, 1).unwrap(), 0).unwrap();
        prop_assert!(close(&xy, &yx, 5, 1e-12));
    }
}
