#![allow(dead_code)]

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Mutex, OnceLock};

use jetframe::coframe::OneForm;
use jetframe::expr::{Compiled, Expr, Sampler};
use jetframe::problem::{Pipeline, Problem, Stage};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn problem_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("problems").join(format!("{name}.toml"))
}

pub fn immersion_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("problems/immersions")
        .join(format!("{name}.toml"))
}

pub fn problem(name: &str) -> Problem {
    Problem::from_path(problem_path(name)).unwrap()
}

/// Full pipeline for a bundled problem, computed once per test binary.
pub fn pipeline(name: &str) -> &'static Pipeline {
    static CACHE: OnceLock<Mutex<HashMap<String, &'static Pipeline>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(p) = cache.lock().unwrap().get(name) {
        return p;
    }
    let p: &'static Pipeline = Box::leak(Box::new(Pipeline::run(&problem(name), Stage::Invariants).unwrap()));
    cache.lock().unwrap().insert(name.to_string(), p);
    p
}

pub fn parse(text: &str) -> Expr {
    jetframe::expr::parse_any(text).unwrap()
}

pub fn max_discrepancy(a: &Expr, b: &Expr, trials: usize) -> f64 {
    Sampler::default().max_discrepancy(a, b, trials).unwrap()
}

pub fn close(a: &Expr, b: &Expr, trials: usize, tol: f64) -> bool {
    max_discrepancy(a, b, trials) <= tol
}

/// Worst coefficient mismatch between two forms at random points.
pub fn form_discrepancy(a: &OneForm, b: &OneForm, trials: usize) -> f64 {
    let mut coords: Vec<String> = a.support();
    for c in b.support() {
        if !coords.contains(&c) {
            coords.push(c);
        }
    }
    coords
        .iter()
        .map(|c| max_discrepancy(&a.coefficient(c), &b.coefficient(c), trials))
        .fold(0.0, f64::max)
}

/// Largest `|g*ω - ω|` over `elements` random group elements and `points`
/// random jet points per element, computed from the prolonged action and its
/// Jacobian rather than the library's own checks.
pub fn coframe_invariance_defect(p: &Pipeline, elements: usize, points: usize) -> f64 {
    let coords = p.problem.space.coords();
    let action = p.prolonged.compile().unwrap();
    let cf = p.coframe.as_ref().unwrap();
    let compiled: Vec<_> = cf.forms.iter().map(|f| f.form.compile(&coords, &coords).unwrap()).collect();
    let guards: Vec<Expr> = cf.forms.iter().flat_map(|f| f.form.terms().into_iter().map(|(_, e)| e)).collect();
    let guard_refs: Vec<&Expr> = guards.iter().collect();
    let sampler = p.problem.sampler.clone().with_seed(11);
    let zs = sampler.valid_points(&coords, &guard_refs, points).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for _ in 0..elements {
        let g = p.problem.action.random_near_identity(&mut rng, 0.3);
        for z in &zs {
            let gz = action.apply(&g, z).unwrap();
            let jac = action.jacobian(&g, z).unwrap();
            for w in &compiled {
                let (Ok(at_z), Ok(at_gz)) = (w.eval(z), w.eval(&gz)) else { continue };
                for b in 0..coords.len() {
                    let pulled: f64 = (0..coords.len()).map(|a| at_gz[a] * jac[(a, b)]).sum();
                    worst = worst.max((pulled - at_z[b]).abs() / (1.0 + at_z[b].abs()));
                }
                checked += 1;
            }
        }
    }
    assert!(checked > 0, "no admissible samples");
    worst
}

/// Same test for the extracted invariants under the action prolonged to
/// `k + 1`.
pub fn invariant_invariance_defect(p: &Pipeline, elements: usize, points: usize) -> f64 {
    let inv = p.invariants.as_ref().unwrap();
    let prolonged = inv.space.prolong_action(&p.problem.action).unwrap();
    let action = prolonged.compile().unwrap();
    let coords = inv.space.coords();
    let exprs: Vec<&Expr> = inv.entries.iter().map(|e| &e.expr).collect();
    let compiled: Vec<Compiled> = exprs.iter().map(|e| Compiled::new(e, &coords).unwrap()).collect();
    let sampler = p.problem.sampler.clone().with_seed(12);
    let zs = sampler.valid_points(&coords, &exprs, points).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    for _ in 0..elements {
        let g = p.problem.action.random_near_identity(&mut rng, 0.3);
        for z in &zs {
            let gz = action.apply(&g, z).unwrap();
            for c in &compiled {
                let (Ok(a), Ok(b)) = (c.eval(z), c.eval(&gz)) else { continue };
                worst = worst.max((a - b).abs() / (1.0 + a.abs()));
            }
        }
    }
    worst
}
