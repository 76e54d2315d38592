mod common;

use std::collections::BTreeMap;

use common::*;
use jetframe::coframe::{exterior_derivative, pullback_form, OneForm, Provenance, TwoForm};
use jetframe::expr::{Expr, Sampler};
use jetframe::group::{structure_constants_of, StructureReport};
use jetframe::problem::Pipeline;
use proptest::prelude::*;

fn form(p: &Pipeline, prov: Provenance) -> &OneForm {
    &p.coframe.as_ref().unwrap().forms.iter().find(|f| f.provenance == prov).unwrap().form
}

fn of(terms: &[(&str, &str)]) -> OneForm {
    OneForm::new(terms.iter().map(|(c, e)| (*c, parse(e)))).unwrap()
}

#[test]
fn se2_coframe_matches_reference() {
    let p = pipeline("se2");
    assert_eq!(p.coframe.as_ref().unwrap().len(), 5);
    let s = "sqrt(u_x^2 + v_x^2)";
    let cases = [
        (Provenance::Invariantized("x".into()), of(&[("x", "1")])),
        (
            Provenance::Invariantized("v_x".into()),
            of(&[("u_x", &format!("u_x/{s}")), ("v_x", &format!("v_x/{s}"))]),
        ),
        (
            Provenance::MaurerCartan(1),
            of(&[("u_x", "v_x/(u_x^2 + v_x^2)"), ("v_x", "-u_x/(u_x^2 + v_x^2)")]),
        ),
        (Provenance::MaurerCartan(2), of(&[("u", &format!("-v_x/{s}")), ("v", &format!("u_x/{s}"))])),
        (Provenance::MaurerCartan(3), of(&[("u", &format!("-u_x/{s}")), ("v", &format!("-v_x/{s}"))])),
    ];
    for (prov, want) in &cases {
        let d = form_discrepancy(form(p, prov.clone()), want, 20);
        assert!(d < 1e-9, "{prov}: {d}");
    }
}

#[test]
fn heisenberg_coframe_matches_reference() {
    let p = pipeline("heisenberg");
    let cases = [
        (Provenance::MaurerCartan(4), of(&[("v_x", "-1/w_x"), ("w_x", "v_x/w_x^2")])),
        (
            Provenance::MaurerCartan(5),
            of(&[("v", "-1"), ("w", "v_x/w_x"), ("v_x", "w/w_x"), ("w_x", "-w*v_x/w_x^2")]),
        ),
        (
            Provenance::MaurerCartan(2),
            of(&[
                ("u_x", "(-v_y*w_x + v_x*w_y)/(v_y*w_x^2 - v_x*w_x*w_y)"),
                ("v_x", "(u_y*w_x - u_x*w_y)/(v_y*w_x^2 - v_x*w_x*w_y)"),
                ("w_x", "(-u_y*v_x + u_x*v_y)/(v_y*w_x^2 - v_x*w_x*w_y)"),
            ]),
        ),
        (
            Provenance::Invariantized("v_y".into()),
            of(&[("v_x", "-w_y/w_x"), ("v_y", "1"), ("w_x", "v_x*w_y/w_x^2"), ("w_y", "-v_x/w_x")]),
        ),
        (Provenance::Invariantized("w_y".into()), of(&[("w_y", "1")])),
    ];
    for (prov, want) in &cases {
        let d = form_discrepancy(form(p, prov.clone()), want, 20);
        assert!(d < 1e-9, "{prov}: {d}");
    }
    assert_eq!(p.coframe.as_ref().unwrap().len(), 11);
}

#[test]
fn mobius_structure_is_sl2() {
    let p = pipeline("mobius");
    let c = p.structure.as_ref().unwrap().constants().unwrap();
    // three Maurer-Cartan forms bracket like sl(2); dι*w is closed
    let lines = c.equations("ω");
    assert_eq!(lines[0], "dω1 = 0");
    assert!(!c.is_abelian());
}

#[test]
fn so3_matrix_entries() {
    let p = pipeline("so3");
    let mm = p.matrix_mc.as_ref().unwrap();
    assert!(mm.antisymmetric);
    assert_eq!(mm.entries, [(0, 1), (0, 2), (1, 2)]);
    // a wrong entry is told apart from the right one
    let d = form_discrepancy(&mm.full[0][1], &mm.full[0][2], 10);
    assert!(d > 1e-3);
    let labels = p.coframe.as_ref().unwrap().labels();
    assert!(labels.contains(&"ρ*Ω12".to_string()), "{labels:?}");
}

#[test]
fn coframes_are_invariant() {
    for name in ["se2", "mobius", "heisenberg", "so3"] {
        let d = coframe_invariance_defect(pipeline(name), 5, 5);
        assert!(d < 1e-8, "{name}: {d}");
    }
}

fn structure_of(forms: &[OneForm]) -> StructureReport {
    let coords = vec!["u".to_string(), "v".to_string()];
    structure_constants_of(forms, &coords, &Sampler::default()).unwrap()
}

#[test]
fn nonconstant_structure_names_its_variable() {
    // d(u dv) = du∧dv = (1/u) ω1∧ω2
    let r = structure_of(&[OneForm::d("u"), of(&[("v", "u")])]);
    match r {
        StructureReport::NonConstant(n) => {
            assert_eq!(n.function, (1, 0, 1));
            assert_eq!(n.depends_on, ["u"]);
            assert!(n.to_string().starts_with("NONCONSTANT"));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn shear_coframes_have_constant_structure() {
    // d(u du + dv) = 0 and d(v du + dv) = -du∧dv = -ω1∧ω2 after the change of basis
    let a = structure_of(&[OneForm::d("u"), of(&[("u", "u"), ("v", "1")])]);
    assert!(a.constants().unwrap().is_abelian());
    let b = structure_of(&[OneForm::d("u"), of(&[("u", "v"), ("v", "1")])]);
    let c = b.constants().unwrap();
    assert!((c.get(1, 0, 1) - 1.0).abs() < 1e-12);
}

#[test]
fn reconstructed_derivative_matches_exterior_derivative() {
    let p = pipeline("se2");
    let forms = p.coframe.as_ref().unwrap().one_forms();
    let c = p.structure.as_ref().unwrap().constants().unwrap();
    for (i, w) in forms.iter().enumerate() {
        let d = exterior_derivative(w);
        let rhs = c.reconstruct(&forms, i).unwrap();
        let diff = d.add(&rhs.scale(&Expr::int(-1)).unwrap());
        for (_, coef) in diff.terms() {
            assert!(close(&coef, &Expr::zero(), 20, 1e-9), "ω{}: {coef}", i + 1);
        }
    }
}

#[test]
fn wrong_count_is_not_a_coframe() {
    let coords = vec!["u".to_string(), "v".to_string()];
    let err = structure_constants_of(&[OneForm::d("u")], &coords, &Sampler::default()).unwrap_err();
    assert!(matches!(err, jetframe::Error::NotACoframe(_)));
}

#[test]
fn pullback_by_a_graph() {
    // (x, x^2) pulls u dv back to 2 x^2 dx
    let map: BTreeMap<String, Expr> = [("u".to_string(), parse("x")), ("v".to_string(), parse("x^2"))].into();
    let w = pullback_form(&of(&[("v", "u")]), &map).unwrap();
    assert!(w.structurally_equal(&of(&[("x", "2*x^2")])));
}

#[test]
fn exterior_derivative_example() {
    let d = exterior_derivative(&of(&[("v", "u*v"), ("u", "v^2")]));
    // d(v^2 du + u v dv) = (v - 2v) du∧dv
    assert!(close(&d.coefficient("u", "v"), &parse("-v"), 10, 1e-12));
    assert!(close(&d.coefficient("v", "u"), &parse("v"), 10, 1e-12));
}

fn poly() -> impl Strategy<Value = String> {
    prop::collection::vec((-4i64..5, 0u32..3, 0u32..3, 0u32..3), 1..5).prop_map(|ts| {
        ts.iter()
            .map(|(c, a, b, d)| format!("({c})*x^{a}*y^{b}*z^{d}"))
            .collect::<Vec<_>>()
            .join(" + ")
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn d_squared_vanishes(f in poly()) {
        let df = OneForm::differential(&parse(&f)).unwrap();
        prop_assert!(exterior_derivative(&df).is_zero());
    }

    #[test]
    fn wedge_is_antisymmetric(f in poly(), g in poly()) {
        let a = OneForm::differential(&parse(&f)).unwrap().scale(&parse(&g)).unwrap();
        let b = OneForm::differential(&parse(&g)).unwrap();
        let s = TwoForm::wedge(&a, &b).add(&TwoForm::wedge(&b, &a));
        prop_assert!(s.is_zero());
    }

    #[test]
    fn leibniz_rule(f in poly(), g in poly()) {
        // d(f dg) = df∧dg
        let fdg = OneForm::differential(&parse(&g)).unwrap().scale(&parse(&f)).unwrap();
        let lhs = exterior_derivative(&fdg);
        let rhs = TwoForm::wedge(&OneForm::differential(&parse(&f)).unwrap(), &OneForm::differential(&parse(&g)).unwrap());
        let diff = lhs.add(&rhs.scale(&Expr::int(-1)).unwrap());
        prop_assert!(diff.is_zero());
    }
}
