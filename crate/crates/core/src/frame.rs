//! Cross-sections, moving frames and invariantization.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;
use num_rational::{BigRational, Rational64};
use num_traits::{ToPrimitive, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::canon::{Atom, Bindings};
use crate::expr::{Compiled, Expr, Func, RatFunc, Sampler};
use crate::group::ActionSpec;
use crate::jet::{JetSpace, NumericAction, ProlongedAction};
use crate::numeric;

/// Normalization `coordinate = constant` for `r` jet coordinates.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CrossSection {
    entries: Vec<(String, BigRational)>,
}

impl CrossSection {
    pub fn new(entries: Vec<(String, BigRational)>) -> Result<Self> {
        for (i, (c, _)) in entries.iter().enumerate() {
            if entries[..i].iter().any(|(d, _)| d == c) {
                return Err(Error::validation(
                    format!("cross_section.{c}"),
                    "coordinate normalized twice",
                ));
            }
        }
        Ok(CrossSection { entries })
    }

    /// Checks coordinates against the space and the entry count against `r`.
    pub fn validate(&self, space: &JetSpace, r: usize) -> Result<()> {
        if self.entries.len() != r {
            return Err(Error::validation(
                "cross_section",
                format!("{} entries for a {r}-parameter group", self.entries.len()),
            ));
        }
        for (c, _) in &self.entries {
            if !space.jet_coords().contains(c) {
                return Err(Error::validation(
                    format!("cross_section.{c}"),
                    format!("not a jet coordinate of order <= {}", space.order()),
                ));
            }
        }
        Ok(())
    }

    pub fn entries(&self) -> &[(String, BigRational)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, coord: &str) -> bool {
        self.entries.iter().any(|(c, _)| c == coord)
    }

    pub fn value(&self, coord: &str) -> Option<&BigRational> {
        self.entries.iter().find(|(c, _)| c == coord).map(|(_, v)| v)
    }
}

/// Equivariant map from jet space to the group.
#[derive(Clone, Debug, PartialEq)]
pub enum MovingFrame {
    /// Group parameters as functions of the jet coordinates.
    Params(Vec<(String, Expr)>),
    /// Group element as a matrix of functions of the jet coordinates.
    Matrix(Vec<Vec<Expr>>),
}

impl MovingFrame {
    pub fn param(&self, name: &str) -> Option<&Expr> {
        match self {
            MovingFrame::Params(ps) => ps.iter().find(|(p, _)| p == name).map(|(_, e)| e),
            MovingFrame::Matrix(_) => None,
        }
    }

    pub fn exprs(&self) -> Vec<&Expr> {
        match self {
            MovingFrame::Params(ps) => ps.iter().map(|(_, e)| e).collect(),
            MovingFrame::Matrix(m) => m.iter().flatten().collect(),
        }
    }

    pub fn bindings(&self) -> BTreeMap<String, Expr> {
        match self {
            MovingFrame::Params(ps) => ps.iter().cloned().collect(),
            MovingFrame::Matrix(_) => BTreeMap::new(),
        }
    }
}

impl fmt::Display for MovingFrame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MovingFrame::Params(ps) => {
                for (p, e) in ps {
                    writeln!(f, "{p} = {e}")?;
                }
            }
            MovingFrame::Matrix(m) => {
                for (i, row) in m.iter().enumerate() {
                    for (j, e) in row.iter().enumerate() {
                        writeln!(f, "rho[{i}][{j}] = {e}")?;
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Pattern {
    Linear,
    SinCos,
    Square,
}

struct Candidate {
    eq: usize,
    param: String,
    solution: RatFunc,
    key: (usize, Pattern, usize),
}

/// Solves the normalization equations `T_c(z, t) = c` for the parameters
/// by the sequential strategy: at each step one equation is linear in one
/// parameter, a pure square `A t^2 + B`, or homogeneous linear in
/// `(sin t, cos t)`.
pub fn solve_normalization(prolonged: &ProlongedAction, cs: &CrossSection, sampler: &Sampler) -> Result<MovingFrame> {
    let params = prolonged.params().to_vec();
    cs.validate(prolonged.space(), params.len())?;
    let mut eqs: Vec<(String, RatFunc)> = Vec::new();
    for (c, v) in cs.entries() {
        let t = prolonged
            .transform_canon(c)
            .ok_or_else(|| Error::validation(format!("cross_section.{c}"), "coordinate outside the prolonged space"))?;
        eqs.push((c.clone(), t.sub(&RatFunc::constant(v.clone())).numerator()));
    }
    let coords = prolonged.space().coords();
    let mut solved: Vec<(String, RatFunc)> = Vec::new();
    let mut unsolved: Vec<String> = params.clone();

    while !unsolved.is_empty() {
        drop_trivial(&mut eqs, &unsolved, &coords, sampler)?;
        let mut best: Option<Candidate> = None;
        for (ei, (_, eq)) in eqs.iter().enumerate() {
            for t in &unsolved {
                if !eq.mentions(t) {
                    continue;
                }
                for cand in candidates(ei, eq, t, &unsolved, &coords, sampler)? {
                    if best.as_ref().map_or(true, |b| cand.key < b.key) {
                        best = Some(cand);
                    }
                }
            }
        }
        let Some(c) = best else {
            let stuck: Vec<String> = eqs
                .iter()
                .map(|(name, e)| format!("{name}: {} = 0", Expr::from_canon(e)))
                .collect();
            let msg = if stuck.is_empty() {
                format!("parameters {} are not determined", unsolved.join(", "))
            } else {
                stuck.join("; ")
            };
            return Err(Error::Unsolvable(msg));
        };
        let mut b = Bindings::new();
        b.insert(c.param.clone(), c.solution.clone());
        eqs.remove(c.eq);
        for (_, e) in eqs.iter_mut() {
            *e = e.subst(&b)?.numerator();
        }
        for (_, s) in solved.iter_mut() {
            *s = s.subst(&b)?;
        }
        solved.push((c.param.clone(), c.solution));
        unsolved.retain(|p| p != &c.param);
    }
    drop_trivial(&mut eqs, &unsolved, &coords, sampler)?;

    let frame = MovingFrame::Params(
        params
            .iter()
            .map(|p| {
                let s = solved.iter().find(|(q, _)| q == p).unwrap();
                (p.clone(), Expr::from_canon(&s.1))
            })
            .collect(),
    );
    // back-substitution check on 20 points
    let inv = invariantize(prolonged, &frame)?;
    for (c, v) in cs.entries() {
        let target = Expr::Const(v.clone());
        if !sampler.probably_equal(inv.get(c).unwrap(), &target, 20, 1e-9)? {
            return Err(Error::InconsistentCrossSection(format!(
                "solved frame does not normalize {c} to {v}"
            )));
        }
    }
    Ok(frame)
}

/// Removes equations free of unsolved parameters, failing if one is not
/// identically zero.
fn drop_trivial(eqs: &mut Vec<(String, RatFunc)>, unsolved: &[String], coords: &[String], sampler: &Sampler) -> Result<()> {
    let mut keep = Vec::new();
    for (c, e) in eqs.drain(..) {
        if unsolved.iter().any(|t| e.mentions(t)) {
            keep.push((c, e));
            continue;
        }
        if e.is_zero() {
            continue;
        }
        let ex = Expr::from_canon(&e);
        let names: Vec<String> = ex.vars().into_iter().collect();
        if names.iter().any(|v| !coords.contains(v)) || !sampler.probably_equal(&ex, &Expr::zero(), 20, 1e-9)? {
            return Err(Error::InconsistentCrossSection(format!("{c}: {ex} = 0 has no solution")));
        }
    }
    *eqs = keep;
    Ok(())
}

fn others(sol: &RatFunc, t: &str, unsolved: &[String]) -> usize {
    unsolved.iter().filter(|u| *u != t && sol.mentions(u)).count()
}

fn candidates(
    ei: usize,
    eq: &RatFunc,
    t: &str,
    unsolved: &[String],
    coords: &[String],
    sampler: &Sampler,
) -> Result<Vec<Candidate>> {
    let mut out = Vec::new();
    let var = Atom::Var(t.to_string());
    if let Some(groups) = eq.num.collect_atoms(std::slice::from_ref(&var), t) {
        let one = Rational64::from_integer(1);
        let two = Rational64::from_integer(2);
        let zero = Rational64::zero();
        let coef = |k: Rational64| {
            groups
                .get(&vec![k])
                .cloned()
                .map(RatFunc::from_poly)
                .unwrap_or_else(RatFunc::zero)
        };
        let keys: Vec<Rational64> = groups.keys().map(|k| k[0]).collect();
        if keys.iter().all(|k| *k == zero || *k == one) && keys.contains(&one) {
            let sol = coef(zero).neg().div(&coef(one))?;
            out.push(Candidate {
                eq: ei,
                param: t.to_string(),
                key: (others(&sol, t, unsolved), Pattern::Linear, sol.size()),
                solution: sol,
            });
        } else if keys.iter().all(|k| *k == zero || *k == two) && keys.contains(&two) {
            let sq = coef(zero).neg().div(&coef(two))?;
            if others(&sq, t, unsolved) == 0 {
                let sol = sq.pow(Rational64::new(1, 2))?;
                out.push(Candidate {
                    eq: ei,
                    param: t.to_string(),
                    key: (0, Pattern::Square, sol.size()),
                    solution: sol,
                });
            }
        }
    }
    let arg = vec![RatFunc::var(t)];
    let sin = Atom::Func(Func::Sin, arg.clone());
    let cos = Atom::Func(Func::Cos, arg);
    if let Some(groups) = eq.num.collect_atoms(&[sin, cos], t) {
        let z = Rational64::zero();
        let o = Rational64::from_integer(1);
        let ok = groups.keys().all(|k| *k == vec![o, z] || *k == vec![z, o]);
        if ok && !groups.is_empty() {
            // A cos t + B sin t = 0
            let a = groups.get(&vec![z, o]).cloned().map(RatFunc::from_poly).unwrap_or_else(RatFunc::zero);
            let b = groups.get(&vec![o, z]).cloned().map(RatFunc::from_poly).unwrap_or_else(RatFunc::zero);
            if others(&a, t, unsolved) + others(&b, t, unsolved) == 0 {
                let sol = sin_cos_root(&a, &b, coords, sampler)?;
                out.push(Candidate {
                    eq: ei,
                    param: t.to_string(),
                    key: (0, Pattern::SinCos, sol.size()),
                    solution: sol,
                });
            }
        }
    }
    Ok(out)
}

/// Root of `A cos t + B sin t = 0` on the branch through `t = 0` where
/// `A = 0`, chosen by the sign of `-B` on the sampling box.
fn sin_cos_root(a: &RatFunc, b: &RatFunc, coords: &[String], sampler: &Sampler) -> Result<RatFunc> {
    let nb = Expr::from_canon(&b.neg());
    let names: Vec<String> = nb.vars().into_iter().filter(|v| coords.contains(v)).collect();
    let sign = if names.len() == nb.vars().len() {
        let c = Compiled::new(&nb, &names)?;
        let pts = sampler.valid_points(&names, &[&nb], 10)?;
        let pos = pts.iter().filter(|p| c.eval(p).map(|v| v > 0.0).unwrap_or(false)).count();
        if pos * 2 >= pts.len() { 1 } else { -1 }
    } else {
        1
    };
    let (y, x) = if sign > 0 { (a.clone(), b.neg()) } else { (a.neg(), b.clone()) };
    crate::expr::canon::make_func(Func::Atan2, vec![y, x])
}

/// Invariantized coordinates `ι*c`.
#[derive(Clone, Debug, PartialEq)]
pub struct Invariantization {
    space: JetSpace,
    map: BTreeMap<String, Expr>,
    canon: BTreeMap<String, RatFunc>,
}

impl Invariantization {
    pub fn space(&self) -> &JetSpace {
        &self.space
    }

    pub fn get(&self, coord: &str) -> Option<&Expr> {
        self.map.get(coord)
    }

    pub(crate) fn get_canon(&self, coord: &str) -> Option<&RatFunc> {
        self.canon.get(coord)
    }

    /// Coordinates in space order with their invariantizations.
    pub fn entries(&self) -> Vec<(String, Expr)> {
        self.space
            .coords()
            .into_iter()
            .map(|c| {
                let e = self.map[&c].clone();
                (c, e)
            })
            .collect()
    }
}

/// How a matrix representation acts on the fiber coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Natural {
    Linear,
    Affine,
}

fn natural_action(action: &ActionSpec) -> Result<Natural> {
    let rep = action
        .matrix()
        .ok_or_else(|| Error::validation("group.matrix", "a matrix frame needs a matrix representation"))?;
    let n = action.fiber().len();
    let m = rep.size();
    let kind = if m == n {
        Natural::Linear
    } else if m == n + 1 {
        Natural::Affine
    } else {
        return Err(Error::validation(
            "group.matrix",
            "matrix frames need the matrix to act linearly or affinely on the fiber",
        ));
    };
    for (a, t) in action.transforms().iter().enumerate() {
        let mut lin = RatFunc::zero();
        for (b, f) in action.fiber().iter().enumerate() {
            lin = lin.add(&rep.entry(a, b).canon()?.mul(&RatFunc::var(f)));
        }
        if kind == Natural::Affine {
            lin = lin.add(&rep.entry(a, n).canon()?);
        }
        if !t.canon()?.sub(&lin).is_zero() {
            return Err(Error::validation(
                format!("group.action.{}", action.fiber()[a]),
                "transform is not the matrix action on the fiber, so a matrix frame cannot be used",
            ));
        }
    }
    Ok(kind)
}

/// `ι*c = T_c(z, ρ(z))` for every coordinate of the prolonged space.
pub fn invariantize(prolonged: &ProlongedAction, frame: &MovingFrame) -> Result<Invariantization> {
    let space = prolonged.space().clone();
    let mut canon = BTreeMap::new();
    match frame {
        MovingFrame::Params(ps) => {
            let b: Bindings = ps.iter().map(|(p, e)| Ok((p.clone(), e.canon()?))).collect::<Result<_>>()?;
            for c in space.coords() {
                let t = prolonged.transform_canon(&c).unwrap();
                canon.insert(c, t.subst(&b)?);
            }
        }
        MovingFrame::Matrix(rows) => {
            let kind = natural_action(prolonged.action())?;
            let r: Vec<Vec<RatFunc>> = rows
                .iter()
                .map(|row| row.iter().map(Expr::canon).collect::<Result<Vec<_>>>())
                .collect::<Result<_>>()?;
            let n = space.fiber().len();
            for b in space.base() {
                canon.insert(b.clone(), RatFunc::var(b));
            }
            for m in 0..=space.order() {
                for j in crate::jet::MultiIndex::all(space.base().len(), m) {
                    for a in 0..n {
                        let mut s = RatFunc::zero();
                        for b in 0..n {
                            s = s.add(&r[a][b].mul(&RatFunc::var(&space.coord_name(b, &j))));
                        }
                        if m == 0 && kind == Natural::Affine {
                            s = s.add(&r[a][n]);
                        }
                        canon.insert(space.coord_name(a, &j), s);
                    }
                }
            }
        }
    }
    let map = canon.iter().map(|(k, v)| (k.clone(), Expr::from_canon(v))).collect();
    Ok(Invariantization { space, map, canon })
}

/// Numeric frame evaluation: `ρ(z)` and `ρ(z)·z`.
pub struct NumericFrame {
    kind: NumericFrameKind,
    action: NumericAction,
    coords: Vec<String>,
    fiber_groups: Vec<Vec<usize>>,
    n_fiber: usize,
}

enum NumericFrameKind {
    Params(Vec<Compiled>),
    Matrix { m: usize, entries: Vec<Compiled>, natural: Natural },
}

/// Positions of `(u^1_J, ..., u^q_J)` for every multi-index `J`, order 0 first.
fn fiber_groups(space: &JetSpace, coords: &[String]) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for m in 0..=space.order() {
        for j in crate::jet::MultiIndex::all(space.base().len(), m) {
            out.push(
                (0..space.fiber().len())
                    .map(|a| coords.iter().position(|c| *c == space.coord_name(a, &j)).unwrap())
                    .collect(),
            );
        }
    }
    out
}

impl NumericFrame {
    pub fn new(prolonged: &ProlongedAction, frame: &MovingFrame) -> Result<Self> {
        let coords = prolonged.space().coords();
        let kind = match frame {
            MovingFrame::Params(ps) => NumericFrameKind::Params(
                ps.iter().map(|(_, e)| Compiled::new(e, &coords)).collect::<Result<_>>()?,
            ),
            MovingFrame::Matrix(rows) => NumericFrameKind::Matrix {
                m: rows.len(),
                entries: rows.iter().flatten().map(|e| Compiled::new(e, &coords)).collect::<Result<_>>()?,
                natural: natural_action(prolonged.action())?,
            },
        };
        Ok(NumericFrame {
            kind,
            action: prolonged.compile()?,
            n_fiber: prolonged.space().fiber().len(),
            fiber_groups: fiber_groups(prolonged.space(), &coords),
            coords,
        })
    }

    /// Frame parameters at `z` (parameter frames only).
    pub fn params(&self, z: &[f64]) -> Result<Option<Vec<f64>>> {
        match &self.kind {
            NumericFrameKind::Params(cs) => Ok(Some(cs.iter().map(|c| c.eval(z)).collect::<Result<_>>()?)),
            NumericFrameKind::Matrix { .. } => Ok(None),
        }
    }

    /// Frame as a matrix, using `rep` for parameter frames.
    pub fn matrix(&self, z: &[f64], rep: Option<&crate::group::CompiledMatrix>) -> Result<Option<DMatrix<f64>>> {
        match &self.kind {
            NumericFrameKind::Params(_) => match rep {
                Some(cm) => Ok(Some(cm.eval(&self.params(z)?.unwrap())?)),
                None => Ok(None),
            },
            NumericFrameKind::Matrix { m, entries, .. } => {
                let mut out = DMatrix::zeros(*m, *m);
                for (k, c) in entries.iter().enumerate() {
                    out[(k / m, k % m)] = c.eval(z)?;
                }
                Ok(Some(out))
            }
        }
    }

    /// `ρ(z)·z`.
    pub fn normalize(&self, z: &[f64]) -> Result<Vec<f64>> {
        match &self.kind {
            NumericFrameKind::Params(_) => self.action.apply(&self.params(z)?.unwrap(), z),
            NumericFrameKind::Matrix { natural, .. } => {
                let r = self.matrix(z, None)?.unwrap();
                let n = self.n_fiber;
                let mut out = z.to_vec();
                for (m, group) in self.fiber_groups.iter().enumerate() {
                    for a in 0..n {
                        let mut s = 0.0;
                        for b in 0..n {
                            s += r[(a, b)] * z[group[b]];
                        }
                        if m == 0 && *natural == Natural::Affine {
                            s += r[(a, n)];
                        }
                        out[group[a]] = s;
                    }
                }
                Ok(out)
            }
        }
    }

    pub fn coords(&self) -> &[String] {
        &self.coords
    }
}

/// Outcome of [`verify_frame`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FrameReport {
    /// Largest normalization residual per cross-section coordinate.
    pub normalization: Vec<(String, f64)>,
    /// Largest `ρ(g·z) vs ρ(z) g^{-1}` mismatch (needs a matrix representation).
    pub equivariance: Option<f64>,
    /// Largest `ρ(g·z)·(g·z) vs ρ(z)·z` mismatch.
    pub normal_form_invariance: f64,
    /// Largest distance of `ρ(ρ(z)·z)` from the identity.
    pub identity_locus: f64,
    pub tol: f64,
    pub failures: Vec<String>,
}

impl FrameReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

fn scaled(a: f64, b: f64) -> f64 {
    (a - b).abs() / (1.0 + a.abs().max(b.abs()))
}

/// Jet points of `space` inside the sampling box where every guard evaluates.
pub fn jet_points(space: &JetSpace, guards: &[&Expr], sampler: &Sampler, n: usize) -> Result<Vec<Vec<f64>>> {
    sampler.valid_points(&space.coords(), guards, n)
}

/// Normalization residuals at 20 points and equivariance at 5 `(g, z)`
/// pairs, each against `tol`.
pub fn verify_frame(
    frame: &MovingFrame,
    prolonged: &ProlongedAction,
    cs: &CrossSection,
    sampler: &Sampler,
    tol: f64,
) -> Result<FrameReport> {
    let space = prolonged.space();
    let nf = NumericFrame::new(prolonged, frame)?;
    let action = prolonged.action();
    let cm = match action.matrix() {
        Some(rep) => Some(rep.compile(action.params())?),
        None => None,
    };
    let coords = space.coords();
    let exprs = frame.exprs();
    let mut failures = Vec::new();

    let pts = jet_points(space, &exprs, sampler, 20)?;
    let mut normalization: Vec<(String, f64)> = cs.entries().iter().map(|(c, _)| (c.clone(), 0.0)).collect();
    let mut identity_locus: f64 = 0.0;
    for z in &pts {
        let zn = nf.normalize(z)?;
        for (k, (c, v)) in cs.entries().iter().enumerate() {
            let i = coords.iter().position(|x| x == c).unwrap();
            normalization[k].1 = normalization[k].1.max(scaled(zn[i], v.to_f64().unwrap_or(f64::NAN)));
        }
        // the normal form should map to the identity element
        if let Ok(Some(p)) = nf.params(&zn) {
            for (a, b) in p.iter().zip(prolonged.identity()) {
                identity_locus = identity_locus.max(scaled(*a, *b));
            }
        } else if let Ok(Some(m)) = nf.matrix(&zn, None) {
            let eye = DMatrix::<f64>::identity(m.nrows(), m.ncols());
            identity_locus = identity_locus.max((m - eye).amax());
        }
    }
    for (c, r) in &normalization {
        if !(*r <= tol) {
            failures.push(format!("normalization residual {r:.3e} on {c}"));
        }
    }
    if !(identity_locus <= tol) {
        failures.push(format!("frame is {identity_locus:.3e} away from the identity on the cross-section"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(sampler.seed ^ 0x9e37);
    let napply = prolonged.compile()?;
    let mut equivariance: Option<f64> = None;
    let mut nfi: f64 = 0.0;
    let pairs = jet_points(space, &exprs, &sampler.clone().with_seed(sampler.seed.wrapping_add(1)), 5)?;
    for z in &pairs {
        let mut tries = 0;
        let (g, gz) = loop {
            let g = action.random_near_identity(&mut rng, 0.3);
            let gz = napply.apply(&g, z)?;
            if nf.normalize(&gz).is_ok() || tries > 20 {
                break (g, gz);
            }
            tries += 1;
        };
        let a = nf.normalize(&gz)?;
        let b = nf.normalize(z)?;
        for (x, y) in a.iter().zip(&b) {
            nfi = nfi.max(scaled(*x, *y));
        }
        if let Some(cm) = &cm {
            let lhs = nf.matrix(&gz, Some(cm))?.unwrap();
            let ginv = cm.eval(&g)?.try_inverse().ok_or(Error::SingularFrame)?;
            let rhs = nf.matrix(z, Some(cm))?.unwrap() * ginv;
            let d = lhs.iter().zip(rhs.iter()).map(|(x, y)| scaled(*x, *y)).fold(0.0, f64::max);
            equivariance = Some(equivariance.unwrap_or(0.0).max(d));
        }
    }
    if !(nfi <= tol) {
        failures.push(format!("normal form rho(z).z is not invariant (mismatch {nfi:.3e}); rho is not equivariant"));
    }
    if let Some(e) = equivariance {
        if !(e <= tol) {
            failures.push(format!("equivariance rho(g.z) = rho(z) g^-1 fails by {e:.3e}"));
        }
    }
    Ok(FrameReport {
        normalization,
        equivariance,
        normal_form_invariance: nfi,
        identity_locus,
        tol,
        failures,
    })
}

/// Result of [`check_local_freedom`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FreedomReport {
    pub free: bool,
    pub group_dim: usize,
    pub ranks: Vec<usize>,
    pub max_rank: usize,
    pub order: usize,
}

impl fmt::Display for FreedomReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.free {
            write!(f, "FREE (rank {} = r on J^{})", self.group_dim, self.order)
        } else {
            write!(
                f,
                "NOT-FREE (max rank {} < r = {} on J^{}); prolong to a higher order",
                self.max_rank, self.group_dim, self.order
            )
        }
    }
}

/// Rank of the parameter Jacobian of the prolonged action at the identity,
/// at 10 random jet points.
pub fn check_local_freedom(prolonged: &ProlongedAction, sampler: &Sampler) -> Result<FreedomReport> {
    let r = prolonged.params().len();
    let space = prolonged.space();
    if r == 0 {
        return Ok(FreedomReport {
            free: true,
            group_dim: 0,
            ranks: vec![],
            max_rank: 0,
            order: space.order(),
        });
    }
    let at_id: Bindings = prolonged
        .action()
        .identity_bindings()
        .iter()
        .map(|(k, v)| Ok((k.clone(), v.canon()?)))
        .collect::<Result<_>>()?;
    let coords = space.coords();
    let mut rows: Vec<Vec<Expr>> = Vec::new();
    for c in space.jet_coords() {
        let t = prolonged.transform_canon(&c).unwrap();
        let mut row = Vec::new();
        for p in prolonged.params() {
            row.push(Expr::from_canon(&t.diff(p).subst(&at_id)?));
        }
        rows.push(row);
    }
    let compiled: Vec<Vec<Compiled>> = rows
        .iter()
        .map(|row| row.iter().map(|e| Compiled::new(e, &coords)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    let guards: Vec<&Expr> = rows.iter().flatten().collect();
    let pts = sampler.valid_points(&coords, &guards, 10)?;
    let mut ranks = Vec::new();
    for z in &pts {
        let m = DMatrix::from_fn(rows.len(), r, |i, j| compiled[i][j].eval(z).unwrap_or(f64::NAN));
        ranks.push(numeric::rank(&m, 1e-8));
    }
    let max_rank = ranks.iter().copied().max().unwrap_or(0);
    Ok(FreedomReport {
        free: ranks.iter().all(|k| *k == r),
        group_dim: r,
        ranks,
        max_rank,
        order: space.order(),
    })
}

/// Parses rational cross-section values from their decimal or fraction text.
pub fn rational_value(text: &str) -> Result<BigRational> {
    crate::expr::parse_any(text)?
        .as_rational()
        .ok_or_else(|| Error::validation("cross_section", format!("`{text}` is not a rational constant")))
}
