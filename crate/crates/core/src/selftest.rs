//! Randomized consistency suites run by `selftest`: invariance of the
//! coframe and the invariants, constant structure, frame equivariance, the
//! order bound, right-invariance of the Maurer-Cartan forms and the group
//! law at jet level.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::congruence;
use crate::error::Result;
use crate::expr::{Compiled, Expr};
use crate::frame::MovingFrame;
use crate::group;
use crate::jet::NumericAction;
use crate::problem::{Pipeline, Problem, Stage};

/// Group elements per invariance check.
pub const ELEMENTS: usize = 5;
/// Jet points per group element.
pub const POINTS: usize = 5;
/// Radius of the random group elements around the identity.
pub const RADIUS: f64 = 0.3;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteResult {
    pub name: String,
    pub passed: bool,
    /// Largest observed defect (0 for pass/fail-only suites).
    pub worst: f64,
    pub tol: f64,
    pub checked: usize,
    pub detail: Option<String>,
}

impl SuiteResult {
    fn measured(name: &str, worst: f64, tol: f64, checked: usize, detail: Option<String>) -> Self {
        SuiteResult {
            name: name.into(),
            passed: worst <= tol && checked > 0,
            worst,
            tol,
            checked,
            detail: detail.or_else(|| (checked == 0).then(|| "no admissible sample points".into())),
        }
    }

    fn failed(name: &str, tol: f64, why: String) -> Self {
        SuiteResult {
            name: name.into(),
            passed: false,
            worst: f64::INFINITY,
            tol,
            checked: 0,
            detail: Some(why),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SelftestReport {
    pub problem: String,
    pub seed: u64,
    pub suites: Vec<SuiteResult>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.suites.iter().all(|s| s.passed)
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / (1.0 + a.abs().max(b.abs()))
}

/// `ω(g·z) ∂(g·z)/∂z` against `ω(z)` for every coframe form, over
/// `ELEMENTS × POINTS` samples.
pub fn coframe_invariance(p: &Pipeline, rng: &mut ChaCha8Rng, tol: f64) -> Result<SuiteResult> {
    let name = "invariance/coframe";
    let Some(cf) = &p.coframe else {
        return Ok(SuiteResult::failed(name, tol, "no coframe".into()));
    };
    let coords = cf.space.coords();
    let forms = cf
        .forms
        .iter()
        .map(|f| f.form.compile(&coords, &coords))
        .collect::<Result<Vec<_>>>()?;
    let action = p.prolonged.compile()?;
    let eval_all = |z: &[f64]| -> Result<DMatrix<f64>> {
        let n = coords.len();
        let mut w = DMatrix::zeros(forms.len(), n);
        for (i, f) in forms.iter().enumerate() {
            for (j, v) in f.eval(z)?.into_iter().enumerate() {
                w[(i, j)] = v;
            }
        }
        Ok(w)
    };
    let guards: Vec<Expr> = cf.forms.iter().flat_map(|f| f.form.terms().into_iter().map(|(_, e)| e)).collect();
    let refs: Vec<&Expr> = guards.iter().collect();
    let (worst, checked, at) = sample_pairs(p, rng, &action, &refs, |z, g, gz| {
        let lhs = eval_all(gz)? * action.jacobian(g, z)?;
        let rhs = eval_all(z)?;
        let mut worst = (0.0f64, 0usize);
        for i in 0..rhs.nrows() {
            for j in 0..rhs.ncols() {
                let d = rel(lhs[(i, j)], rhs[(i, j)]);
                if d > worst.0 {
                    worst = (d, i);
                }
            }
        }
        Ok(worst)
    })?;
    let detail = (worst > tol).then(|| format!("form {} moves by {worst:.3e}", cf.forms[at].provenance));
    Ok(SuiteResult::measured(name, worst, tol, checked, detail))
}

/// `I(g·z) = I(z)` for every nonconstant invariant on `J^{k+1}`.
pub fn invariant_invariance(p: &Pipeline, rng: &mut ChaCha8Rng, tol: f64) -> Result<SuiteResult> {
    let name = "invariance/invariants";
    let Some(inv) = &p.invariants else {
        return Ok(SuiteResult::failed(name, tol, "no invariants".into()));
    };
    let mut prolonged = p.prolonged.clone();
    prolonged.extend_to(inv.space.order())?;
    let action = prolonged.compile()?;
    let coords = inv.space.coords();
    let nonconst = inv.nonconstant();
    let compiled = nonconst
        .iter()
        .map(|e| Compiled::new(&e.expr, &coords))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&Expr> = nonconst.iter().map(|e| &e.expr).collect();
    let lifted = Pipeline { prolonged, ..p.clone() };
    let (worst, checked, at) = sample_pairs(&lifted, rng, &action, &refs, |z, _, gz| {
        let mut worst = (0.0f64, 0usize);
        for (i, c) in compiled.iter().enumerate() {
            let d = rel(c.eval(gz)?, c.eval(z)?);
            if d > worst.0 {
                worst = (d, i);
            }
        }
        Ok(worst)
    })?;
    let detail = (worst > tol && !nonconst.is_empty()).then(|| format!("{} moves by {worst:.3e}", nonconst[at].expr));
    if nonconst.is_empty() {
        return Ok(SuiteResult::measured(name, 0.0, tol, 1, Some("no nonconstant invariants".into())));
    }
    Ok(SuiteResult::measured(name, worst, tol, checked, detail))
}

/// Same as [`invariant_invariance`] at complex jets and complex group
/// elements, for holomorphic problems.
pub fn complex_invariance(p: &Pipeline, rng: &mut ChaCha8Rng, tol: f64) -> Result<SuiteResult> {
    let name = "invariance/complex";
    let Some(inv) = &p.invariants else {
        return Ok(SuiteResult::failed(name, tol, "no invariants".into()));
    };
    let mut prolonged = p.prolonged.clone();
    prolonged.extend_to(inv.space.order())?;
    let transforms: Vec<(String, Expr)> = prolonged.transforms();
    let coords = inv.space.coords();
    let sampler = &p.problem.sampler;
    let nonconst = inv.nonconstant();
    let mut worst = 0.0f64;
    let mut checked = 0;
    for _ in 0..ELEMENTS * POINTS * 4 {
        if checked == ELEMENTS * POINTS {
            break;
        }
        let mut pt: BTreeMap<String, Complex64> = BTreeMap::new();
        for c in &coords {
            let (lo, hi) = sampler.range(c);
            pt.insert(c.clone(), Complex64::new(rng.gen_range(lo..hi.max(lo + 1e-9)), rng.gen_range(-0.3..0.3)));
        }
        let mut with_g = pt.clone();
        for (name, id) in prolonged.params().iter().zip(prolonged.identity()) {
            with_g.insert(name.clone(), Complex64::new(id + rng.gen_range(-RADIUS..RADIUS), rng.gen_range(-RADIUS..RADIUS)));
        }
        let mut img = pt.clone();
        let mut ok = true;
        for (c, t) in &transforms {
            match t.eval_complex(&with_g) {
                Ok(v) => {
                    img.insert(c.clone(), v);
                }
                Err(_) => ok = false,
            }
        }
        if !ok {
            continue;
        }
        let mut vals = Vec::new();
        for e in &nonconst {
            match (e.expr.eval_complex(&pt), e.expr.eval_complex(&img)) {
                (Ok(a), Ok(b)) => vals.push((a - b).norm() / (1.0 + a.norm().max(b.norm()))),
                _ => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            continue;
        }
        checked += 1;
        worst = vals.into_iter().fold(worst, f64::max);
    }
    Ok(SuiteResult::measured(name, worst, tol, checked, None))
}

/// Draws `ELEMENTS` group elements and `POINTS` jet points per element with
/// every guard defined at `z` and `g·z`, and folds `check` over them.
/// Returns the worst defect, the number of checked pairs and the index
/// reported with the worst defect.
fn sample_pairs(
    p: &Pipeline,
    rng: &mut ChaCha8Rng,
    action: &NumericAction,
    guards: &[&Expr],
    mut check: impl FnMut(&[f64], &[f64], &[f64]) -> Result<(f64, usize)>,
) -> Result<(f64, usize, usize)> {
    let sampler = p.problem.sampler.clone().with_seed(rng.gen());
    let coords = action.coords().to_vec();
    let compiled = guards
        .iter()
        .map(|g| Compiled::new(g, &coords))
        .collect::<Result<Vec<_>>>()?;
    let candidates = sampler.valid_points(&coords, guards, ELEMENTS * POINTS * 4)?;
    let mut worst = (0.0f64, 0usize);
    let mut checked = 0;
    let mut next = candidates.iter();
    for _ in 0..ELEMENTS {
        let g = p.problem.action.random_near_identity(rng, RADIUS);
        let mut done = 0;
        for z in next.by_ref() {
            let Ok(gz) = action.apply(&g, z) else { continue };
            if compiled.iter().any(|c| c.eval(&gz).is_err()) {
                continue;
            }
            let Ok((d, at)) = check(z, &g, &gz) else { continue };
            if d >= worst.0 {
                worst = (d, at);
            }
            checked += 1;
            done += 1;
            if done == POINTS {
                break;
            }
        }
    }
    Ok((worst.0, checked, worst.1))
}

pub fn structure_suite(p: &Pipeline, tol: f64) -> SuiteResult {
    let name = "structure";
    match &p.structure {
        None => SuiteResult::failed(name, tol, "no coframe".into()),
        Some(group::StructureReport::Constant(c)) => SuiteResult::measured(name, c.max_deviation, tol, c.points, None),
        Some(group::StructureReport::NonConstant(r)) => SuiteResult {
            name: name.into(),
            passed: false,
            worst: r.spread,
            tol,
            checked: 10,
            detail: Some(r.to_string()),
        },
    }
}

pub fn equivariance_suite(p: &Pipeline, tol: f64) -> SuiteResult {
    let name = "equivariance";
    match &p.frame_report {
        None => SuiteResult::failed(name, tol, "no frame".into()),
        Some(r) => {
            let worst = r
                .normalization
                .iter()
                .map(|(_, v)| *v)
                .chain(r.equivariance)
                .chain([r.normal_form_invariance, r.identity_locus])
                .fold(0.0, f64::max);
            SuiteResult {
                name: name.into(),
                passed: r.passed(),
                worst,
                tol,
                checked: 20,
                detail: (!r.passed()).then(|| format!("frame rho: {}", r.failures.join("; "))),
            }
        }
    }
}

pub fn order_bound_suite(p: &Pipeline) -> SuiteResult {
    let name = "order-bound";
    match &p.invariants {
        None => SuiteResult::failed(name, 0.0, "no invariants".into()),
        Some(inv) => {
            let ok = congruence::order_bound_check(inv);
            SuiteResult {
                name: name.into(),
                passed: ok,
                worst: 0.0,
                tol: 0.0,
                checked: inv.entries.len(),
                detail: Some(format!("max order {} with k = {}", inv.max_order(), inv.k)),
            }
        }
    }
}

/// Right-invariance of the Maurer-Cartan basis at random `(g, h)`.
pub fn maurer_cartan_suite(p: &Pipeline, rng: &mut ChaCha8Rng, tol: f64) -> Result<Option<SuiteResult>> {
    let (Some(basis), Some(rep)) = (&p.maurer_cartan, p.problem.action.matrix()) else {
        return Ok(None);
    };
    let action = &p.problem.action;
    let cm = rep.compile(action.params())?;
    let mut worst = 0.0f64;
    let mut checked = 0;
    for _ in 0..ELEMENTS {
        let g = action.random_near_identity(rng, RADIUS);
        let h = action.random_near_identity(rng, RADIUS);
        if let Ok(d) = group::right_invariance_defect(action, &cm, basis, &g, &h) {
            worst = worst.max(d);
            checked += 1;
        }
    }
    Ok(Some(SuiteResult::measured("maurer-cartan", worst, tol, checked, None)))
}

/// For a matrix frame into an orthogonal group, `ρ*((dR)R^{-1})` must be
/// antisymmetric.
pub fn antisymmetry_suite(p: &Pipeline, rng: &mut ChaCha8Rng, tol: f64) -> Result<Option<SuiteResult>> {
    let (Some(mm), Some(rep)) = (&p.matrix_mc, p.problem.action.matrix()) else {
        return Ok(None);
    };
    let action = &p.problem.action;
    let cm = rep.compile(action.params())?;
    let m = rep.size();
    let orthogonal = (0..ELEMENTS).all(|_| {
        let g = action.random_near_identity(rng, RADIUS);
        cm.eval(&g)
            .map(|a| (&a * a.transpose() - DMatrix::<f64>::identity(m, m)).amax() < 1e-10)
            .unwrap_or(false)
    });
    if !orthogonal {
        return Ok(None);
    }
    let coords = p.problem.space.coords();
    let sampler = p.problem.sampler.clone().with_seed(rng.gen());
    let guards: Vec<Expr> = mm.full.iter().flatten().flat_map(|w| w.terms().into_iter().map(|(_, e)| e)).collect();
    let refs: Vec<&Expr> = guards.iter().collect();
    let pts = sampler.valid_points(&coords, &refs, POINTS)?;
    let mut worst = 0.0f64;
    for a in 0..m {
        for b in a..m {
            let sum = mm.full[a][b].add(&mm.full[b][a]).compile(&coords, &coords)?;
            for z in &pts {
                worst = sum.eval(z)?.into_iter().fold(worst, |w, v| w.max(v.abs()));
            }
        }
    }
    let detail = (!mm.antisymmetric).then(|| "entries were not recognized as antisymmetric".to_string());
    let mut r = SuiteResult::measured("maurer-cartan/antisymmetry", worst, tol, pts.len(), detail);
    r.passed &= mm.antisymmetric;
    Ok(Some(r))
}

/// `g1·(g2·z) = (g1 g2)·z` on the prolonged action.
pub fn group_law_suite(p: &Pipeline, rng: &mut ChaCha8Rng, tol: f64) -> Result<Option<SuiteResult>> {
    let Some(rep) = p.problem.action.matrix() else {
        return Ok(None);
    };
    let action = &p.problem.action;
    let cm = rep.compile(action.params())?;
    let numeric = p.prolonged.compile()?;
    let sampler = p.problem.sampler.clone().with_seed(rng.gen());
    let pts = sampler.valid_points(&p.prolonged.space().coords(), &[], ELEMENTS)?;
    let mut worst = 0.0f64;
    let mut checked = 0;
    for z in &pts {
        let g1 = action.random_near_identity(rng, RADIUS);
        let g2 = action.random_near_identity(rng, RADIUS);
        let Ok(g12) = action.compose_params(&cm, &g1, &g2) else { continue };
        let (Ok(inner), Ok(direct)) = (numeric.apply(&g2, z), numeric.apply(&g12, z)) else { continue };
        let Ok(outer) = numeric.apply(&g1, &inner) else { continue };
        worst = outer.iter().zip(&direct).map(|(a, b)| rel(*a, *b)).fold(worst, f64::max);
        checked += 1;
    }
    Ok(Some(SuiteResult::measured("group-law", worst, tol, checked, None)))
}

/// Runs every applicable suite. Pipeline failures after the frame stage
/// are reported as failed suites rather than errors.
pub fn run(problem: &Problem, seed: u64) -> Result<SelftestReport> {
    let problem = problem.with_seed(seed);
    let tol = problem.tolerances.invariance;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = Pipeline::run_lenient(&problem, Stage::Frame)?;
    let mut suites = vec![equivariance_suite(&p, tol)];
    if let Err(e) = p.advance(Stage::Invariants) {
        let why = format!("pipeline stopped: {e}");
        for name in ["invariance/coframe", "invariance/invariants", "structure", "order-bound"] {
            suites.push(SuiteResult::failed(name, tol, why.clone()));
        }
        return Ok(SelftestReport {
            problem: problem.name.clone(),
            seed,
            suites,
        });
    }
    suites.push(coframe_invariance(&p, &mut rng, tol)?);
    suites.push(invariant_invariance(&p, &mut rng, tol)?);
    if problem.complex {
        suites.push(complex_invariance(&p, &mut rng, tol)?);
    }
    suites.push(structure_suite(&p, tol));
    suites.push(order_bound_suite(&p));
    match p.frame {
        Some(MovingFrame::Params(_)) => suites.extend(maurer_cartan_suite(&p, &mut rng, tol)?),
        _ => suites.extend(antisymmetry_suite(&p, &mut rng, tol)?),
    }
    suites.extend(group_law_suite(&p, &mut rng, tol)?);
    Ok(SelftestReport {
        problem: problem.name.clone(),
        seed,
        suites,
    })
}
