//! Complete invariant systems and the congruence decision procedure.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coframe::{CoframeField, OneForm};
use crate::error::{Error, Result};
use crate::expr::{Compiled, Expr, RatFunc};
use crate::jet::{Coord, JetSpace, MultiIndex, NumericAction, ProlongedAction};
use crate::numeric::{self, Residuals};

/// One invariant: the coefficient of `dx^l` in the pullback of a coframe
/// form by a generic prolonged graph.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InvariantEntry {
    #[serde(serialize_with = "as_text")]
    pub expr: Expr,
    /// Index of the source coframe form.
    pub form: usize,
    pub label: String,
    /// Base differential `dx^l`.
    pub direction: String,
    /// Highest jet order among the variables.
    pub order: usize,
    #[serde(skip)]
    pub constant: Option<BigRational>,
}

fn as_text<S: serde::Serializer>(e: &Expr, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&e.to_string())
}

impl InvariantEntry {
    pub fn is_constant(&self) -> bool {
        self.constant.is_some()
    }
}

/// Invariants extracted from a coframe on `J^k`; entries live on `J^{k+1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct InvariantSystem {
    pub k: usize,
    pub space: JetSpace,
    pub entries: Vec<InvariantEntry>,
}

impl InvariantSystem {
    pub fn nonconstant(&self) -> Vec<&InvariantEntry> {
        self.entries.iter().filter(|e| !e.is_constant()).collect()
    }

    pub fn max_order(&self) -> usize {
        self.entries.iter().map(|e| e.order).max().unwrap_or(0)
    }
}

/// `D_l c` for a coordinate `c` of `space` (order `k`), as a coordinate of
/// order `k + 1`.
fn total_image(space: &JetSpace, c: &str, l: usize) -> RatFunc {
    match space.decode(c) {
        Some(Coord::Base(i)) => {
            if i == l {
                RatFunc::one()
            } else {
                RatFunc::zero()
            }
        }
        Some(Coord::Jet(a, j)) => RatFunc::var(&space.coord_name(a, &j.with(l))),
        None => RatFunc::zero(),
    }
}

/// Coefficients of `dx^l` in the pullbacks of all coframe forms by a generic
/// prolonged graph, with constants tagged.
pub fn extract_invariants(cf: &CoframeField) -> Result<InvariantSystem> {
    let k = cf.space.order();
    let space1 = cf.space.with_order(k + 1);
    let mut entries = Vec::new();
    for (i, f) in cf.forms.iter().enumerate() {
        for (l, b) in cf.space.base().iter().enumerate() {
            let mut s = RatFunc::zero();
            for (c, coef) in f.form.canon_terms() {
                let img = total_image(&cf.space, c, l);
                if !img.is_zero() {
                    s = s.add(&coef.mul(&img));
                }
            }
            let expr = Expr::from_canon(&s);
            entries.push(InvariantEntry {
                order: space1.max_order(&expr),
                constant: s.as_constant(),
                expr,
                form: i,
                label: f.provenance.to_string(),
                direction: b.clone(),
            });
        }
    }
    Ok(InvariantSystem {
        k,
        space: space1,
        entries,
    })
}

/// True iff every entry has differential order at most `k + 1`.
pub fn order_bound_check(inv: &InvariantSystem) -> bool {
    inv.max_order() <= inv.k + 1
}

/// Fiber values on a rectangular base grid, row-major with the first axis
/// slowest. Derivatives come from local least-squares polynomial fits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampledImmersion {
    pub axes: Vec<Axis>,
    pub values: BTreeMap<String, Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub name: String,
    pub start: f64,
    pub step: f64,
    pub count: usize,
}

/// An immersion `x ↦ ψ(x)` of the base into the fiber.
#[derive(Clone, Debug, PartialEq)]
pub enum ImmersionSpec {
    Symbolic(BTreeMap<String, Expr>),
    Sampled(SampledImmersion),
}

impl ImmersionSpec {
    pub fn symbolic<I, S>(components: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, Expr)>,
        S: Into<String>,
    {
        Ok(ImmersionSpec::Symbolic(
            components
                .into_iter()
                .map(|(k, v)| Ok((k.into(), v.simplify()?)))
                .collect::<Result<_>>()?,
        ))
    }

    /// Evaluator for the jets of the immersion up to the order of `space`.
    pub fn jets(&self, space: &JetSpace) -> Result<ImmersionJets> {
        match self {
            ImmersionSpec::Symbolic(psi) => {
                let map = space.prolong_immersion(psi)?;
                let base = space.base().to_vec();
                let fns = space
                    .jet_coords()
                    .iter()
                    .map(|c| Compiled::new(&map[c], &base))
                    .collect::<Result<Vec<_>>>()?;
                Ok(ImmersionJets {
                    space: space.clone(),
                    kind: JetsKind::Symbolic(fns),
                })
            }
            ImmersionSpec::Sampled(s) => {
                s.validate(space)?;
                Ok(ImmersionJets {
                    space: space.clone(),
                    kind: JetsKind::Sampled(s.clone()),
                })
            }
        }
    }

    /// Image of the immersion under the group element `params`, for
    /// symbolic immersions.
    pub fn transformed(&self, prolonged: &ProlongedAction, params: &[BigRational]) -> Result<ImmersionSpec> {
        let ImmersionSpec::Symbolic(psi) = self else {
            return Err(Error::validation("immersion", "only symbolic immersions can be transformed"));
        };
        let action = prolonged.action();
        let mut b: BTreeMap<String, Expr> = psi.clone();
        for (p, v) in action.params().iter().zip(params) {
            b.insert(p.clone(), Expr::Const(v.clone()));
        }
        let mut out = BTreeMap::new();
        for (f, t) in action.fiber().iter().zip(action.transforms()) {
            out.insert(f.clone(), t.substitute(&b)?);
        }
        Ok(ImmersionSpec::Symbolic(out))
    }

    /// Adds `eps * exp(-25 |x - x0|^2)` to every fiber component.
    pub fn bumped(&self, base: &[String], x0: &[f64], eps: f64) -> Result<ImmersionSpec> {
        let ImmersionSpec::Symbolic(psi) = self else {
            return Err(Error::validation("immersion", "only symbolic immersions can be perturbed"));
        };
        let q = |x: f64| Expr::Const(crate::expr::rational_from_f64(x));
        let mut r2 = Expr::zero();
        for (b, x) in base.iter().zip(x0) {
            r2 = r2 + (Expr::var(b.as_str()) - q(*x)).powi(2);
        }
        let bump = q(eps) * Expr::func(crate::expr::Func::Exp, vec![Expr::int(-25) * r2]);
        let mut out = BTreeMap::new();
        for (f, e) in psi {
            out.insert(f.clone(), (e.clone() + bump.clone()).simplify()?);
        }
        Ok(ImmersionSpec::Symbolic(out))
    }
}

impl SampledImmersion {
    fn validate(&self, space: &JetSpace) -> Result<()> {
        if self.axes.len() != space.base().len() {
            return Err(Error::validation("sampled.axes", "one axis per base coordinate required"));
        }
        for (a, b) in self.axes.iter().zip(space.base()) {
            if &a.name != b {
                return Err(Error::validation("sampled.axes", format!("axis `{}` should be `{b}`", a.name)));
            }
            if !(a.step > 0.0) || a.count < 2 * space.order() + 3 {
                return Err(Error::validation(
                    format!("sampled.axes.{}", a.name),
                    "axis needs a positive step and enough points for the derivative order",
                ));
            }
        }
        let total: usize = self.axes.iter().map(|a| a.count).product();
        for f in space.fiber() {
            let v = self
                .values
                .get(f)
                .ok_or_else(|| Error::validation(format!("sampled.values.{f}"), "missing component"))?;
            if v.len() != total {
                return Err(Error::validation(
                    format!("sampled.values.{f}"),
                    format!("{} values for a grid of {total}", v.len()),
                ));
            }
        }
        Ok(())
    }

    /// Derivatives `∂_J ψ^α(x)` for all multi-indices up to `order`.
    fn derivatives(&self, space: &JetSpace, x: &[f64]) -> Result<Vec<f64>> {
        let p = self.axes.len();
        let order = space.order();
        let deg = order + 2;
        let half = (deg / 2 + 1) as isize;
        // stencil window around the nearest grid node, clamped to the grid
        let mut lo = Vec::with_capacity(p);
        for (a, xa) in self.axes.iter().zip(x) {
            let idx = ((xa - a.start) / a.step).round() as isize;
            let w = 2 * half + 1;
            if (a.count as isize) < w {
                return Err(Error::GridDomain(format!("axis {} too short", a.name)));
            }
            let start = (idx - half).clamp(0, a.count as isize - w);
            if idx < -1 || idx > a.count as isize {
                return Err(Error::GridDomain(format!("{} = {xa} outside the sampled grid", a.name)));
            }
            lo.push(start as usize);
        }
        let w = (2 * half + 1) as usize;
        let monos: Vec<Vec<usize>> = exponents(p, deg);
        let npts = w.pow(p as u32);
        let mut a_mat = DMatrix::zeros(npts, monos.len());
        let mut nodes = Vec::with_capacity(npts);
        for k in 0..npts {
            let mut rem = k;
            let mut idx = vec![0usize; p];
            for d in (0..p).rev() {
                idx[d] = lo[d] + rem % w;
                rem /= w;
            }
            let off: Vec<f64> = (0..p)
                .map(|d| (self.axes[d].start + idx[d] as f64 * self.axes[d].step - x[d]) / self.axes[d].step)
                .collect();
            for (m, e) in monos.iter().enumerate() {
                a_mat[(k, m)] = e.iter().zip(&off).map(|(ei, o)| o.powi(*ei as i32)).product();
            }
            let mut flat = 0;
            for d in 0..p {
                flat = flat * self.axes[d].count + idx[d];
            }
            nodes.push(flat);
        }
        let svd = a_mat.svd(true, true);
        let mut out = Vec::new();
        for m in 0..=order {
            for (fi, f) in space.fiber().iter().enumerate() {
                let vals = &self.values[f];
                let rhs = DMatrix::from_fn(npts, 1, |k, _| vals[nodes[k]]);
                let coef = svd.solve(&rhs, 1e-12).map_err(|e| Error::GridDomain(e.to_string()))?;
                for j in MultiIndex::all(p, m) {
                    let mut e = vec![0usize; p];
                    for i in j.indices() {
                        e[*i] += 1;
                    }
                    let pos = monos.iter().position(|q| *q == e).unwrap();
                    let mut fact = 1.0;
                    let mut scale = 1.0;
                    for d in 0..p {
                        fact *= (1..=e[d]).product::<usize>() as f64;
                        scale *= self.axes[d].step.powi(e[d] as i32);
                    }
                    out.push((fi, j, coef[(pos, 0)] * fact / scale));
                }
            }
        }
        // reorder to the space's jet coordinate order
        let names = space.jet_coords();
        let mut vals = vec![0.0; names.len()];
        for (fi, j, v) in out {
            let name = space.coord_name(fi, &j);
            let i = names.iter().position(|n| *n == name).unwrap();
            vals[i] = v;
        }
        Ok(vals)
    }
}

fn exponents(p: usize, deg: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for d in 0..=deg {
        for j in MultiIndex::all(p, d) {
            let mut e = vec![0usize; p];
            for i in j.indices() {
                e[*i] += 1;
            }
            out.push(e);
        }
    }
    out
}

/// Jet evaluator of an immersion.
pub struct ImmersionJets {
    space: JetSpace,
    kind: JetsKind,
}

enum JetsKind {
    Symbolic(Vec<Compiled>),
    Sampled(SampledImmersion),
}

impl ImmersionJets {
    /// Point of `J^k` over base point `x`, laid out as [`JetSpace::coords`].
    pub fn at(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = x.to_vec();
        match &self.kind {
            JetsKind::Symbolic(fns) => {
                for f in fns {
                    out.push(f.eval(x)?);
                }
            }
            JetsKind::Sampled(s) => out.extend(s.derivatives(&self.space, x)?),
        }
        Ok(out)
    }

    /// Rank of the fiber Jacobian `∂ψ/∂x` at `x`.
    pub fn regular_at(&self, x: &[f64]) -> Result<bool> {
        let z = self.at(x)?;
        let p = self.space.base().len();
        let n = self.space.fiber().len();
        if self.space.order() == 0 {
            return Ok(true);
        }
        let coords = self.space.coords();
        let m = DMatrix::from_fn(n, p, |a, i| {
            let name = self.space.coord_name(a, &MultiIndex::new(vec![i]));
            z[coords.iter().position(|c| *c == name).unwrap()]
        });
        Ok(numeric::rank(&m, 1e-8) == p)
    }
}

/// Pullbacks of the coframe forms by the prolonged graph of `psi`, as forms
/// on the base.
pub fn pullback_report(cf: &CoframeField, psi: &ImmersionSpec) -> Result<Vec<OneForm>> {
    let ImmersionSpec::Symbolic(components) = psi else {
        return Err(Error::validation("immersion", "pullback_report needs a symbolic immersion"));
    };
    let mut map = cf.space.prolong_immersion(components)?;
    for b in cf.space.base() {
        map.insert(b.clone(), Expr::var(b.as_str()));
    }
    cf.forms.iter().map(|f| f.form.pullback(&map)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING-KEBAB-CASE")]
pub enum Decision {
    Congruent,
    NotCongruent,
    NecessaryOnlyPass,
    Inconclusive,
}

impl Decision {
    /// 0 congruent, 1 not congruent, 2 anything short of a proof.
    pub fn exit_code(self) -> i32 {
        match self {
            Decision::Congruent => 0,
            Decision::NotCongruent => 1,
            Decision::Inconclusive | Decision::NecessaryOnlyPass => 2,
        }
    }
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Decision::Congruent => "CONGRUENT",
            Decision::NotCongruent => "NOT-CONGRUENT",
            Decision::NecessaryOnlyPass => "NECESSARY-ONLY-PASS",
            Decision::Inconclusive => "INCONCLUSIVE",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Discrepancy {
    pub label: String,
    pub direction: String,
    pub invariant: String,
    pub max_discrepancy: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CongruenceVerdict {
    pub decision: Decision,
    /// Group element with `g · j^kψ1(x0) = j^kψ2(x0)`.
    pub witness: Option<Vec<(String, f64)>>,
    /// Jet residuals at the witness (or at the best point found).
    pub residuals: Vec<(String, f64)>,
    pub residual_inf: Option<f64>,
    pub discrepancies: Vec<Discrepancy>,
    pub offending: Option<String>,
    pub tol: f64,
    pub half_width: f64,
    pub grid_points: usize,
    pub starts_tried: usize,
    pub watermark: Option<String>,
}

impl CongruenceVerdict {
    pub fn witness_params(&self) -> Option<Vec<f64>> {
        self.witness.as_ref().map(|w| w.iter().map(|(_, v)| *v).collect())
    }
}

impl fmt::Display for CongruenceVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "decision: {}", self.decision)?;
        if let Some(w) = &self.watermark {
            writeln!(f, "note: {w}")?;
        }
        if let Some(o) = &self.offending {
            writeln!(f, "offending invariant: {o}")?;
        }
        if let Some(w) = &self.witness {
            let s: Vec<String> = w.iter().map(|(p, v)| format!("{p} = {v:.10}")).collect();
            writeln!(f, "witness: {}", s.join(", "))?;
        }
        if let Some(r) = self.residual_inf {
            writeln!(f, "jet residual (inf-norm): {r:.3e}")?;
        }
        writeln!(
            f,
            "grid: {} points, half-width {}, tol {:e}",
            self.grid_points, self.half_width, self.tol
        )?;
        writeln!(f, "invariant discrepancies:")?;
        for d in &self.discrepancies {
            writeln!(
                f,
                "  {:<14} d{:<4} {:>10.3e} {}",
                d.label,
                d.direction,
                d.max_discrepancy,
                if d.passed { "ok" } else { "FAIL" }
            )?;
        }
        Ok(())
    }
}

/// Options for [`decide_congruence`].
#[derive(Clone, Debug, PartialEq)]
pub struct CheckOptions {
    pub tol: f64,
    pub half_width: f64,
    pub seed: u64,
    pub max_iter: usize,
    pub seeds: usize,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            tol: 1e-6,
            half_width: 0.1,
            seed: crate::expr::DEFAULT_SEED,
            max_iter: 200,
            seeds: 8,
        }
    }
}

/// Everything the decision procedure needs from the pipeline.
pub struct CongruenceContext<'a> {
    pub prolonged: &'a ProlongedAction,
    pub invariants: &'a InvariantSystem,
    pub constant_structure: bool,
}

struct JetMatch<'a> {
    action: &'a NumericAction,
    from: &'a [f64],
    to: &'a [f64],
    skip: usize,
}

impl Residuals for JetMatch<'_> {
    fn residuals(&self, g: &[f64]) -> Option<Vec<f64>> {
        let img = self.action.apply(g, self.from).ok()?;
        Some(img[self.skip..].iter().zip(&self.to[self.skip..]).map(|(a, b)| a - b).collect())
    }
}

/// Decides whether `psi2 = g · psi1` near `x0` for some group element `g`.
///
/// Step 1 compares the nonconstant invariants on a `(2p+1)^p` grid; step 2
/// searches for `g` matching the `k`-jets at `x0`.
pub fn decide_congruence(
    ctx: &CongruenceContext<'_>,
    psi1: &ImmersionSpec,
    psi2: &ImmersionSpec,
    x0: &[f64],
    opts: &CheckOptions,
) -> Result<CongruenceVerdict> {
    let inv = ctx.invariants;
    let space1 = &inv.space;
    let p = space1.base().len();
    if x0.len() != p {
        return Err(Error::validation("x0", format!("expected {p} coordinates")));
    }
    let j1 = psi1.jets(space1)?;
    let j2 = psi2.jets(space1)?;
    for (name, j) in [("psi1", &j1), ("psi2", &j2)] {
        if !j.regular_at(x0)? {
            return Err(Error::Regularity(format!("{name} has rank < {p} at x0")));
        }
    }

    // step 1: invariant profiles on the grid
    let coords1 = space1.coords();
    let nonconst = inv.nonconstant();
    let compiled = nonconst
        .iter()
        .map(|e| Compiled::new(&e.expr, &coords1))
        .collect::<Result<Vec<_>>>()?;
    let grid = grid_points(x0, opts.half_width);
    let mut worst = vec![0.0f64; nonconst.len()];
    for x in &grid {
        let z1 = j1.at(x)?;
        let z2 = j2.at(x)?;
        for (i, c) in compiled.iter().enumerate() {
            let label = format!("{} (d{})", nonconst[i].label, nonconst[i].direction);
            let a = c.eval(&z1).map_err(|e| Error::GridDomain(format!("{label} on psi1 at {x:?}: {e}")))?;
            let b = c.eval(&z2).map_err(|e| Error::GridDomain(format!("{label} on psi2 at {x:?}: {e}")))?;
            worst[i] = worst[i].max((a - b).abs() / (1.0 + a.abs().max(b.abs())));
        }
    }
    let discrepancies: Vec<Discrepancy> = nonconst
        .iter()
        .zip(&worst)
        .map(|(e, w)| Discrepancy {
            label: e.label.clone(),
            direction: e.direction.clone(),
            invariant: e.expr.to_string(),
            max_discrepancy: *w,
            passed: *w <= opts.tol,
        })
        .collect();
    let watermark = (!ctx.constant_structure)
        .then(|| "coframe structure is not constant; only necessary conditions were checked".to_string());
    let mut verdict = CongruenceVerdict {
        decision: Decision::NotCongruent,
        witness: None,
        residuals: Vec::new(),
        residual_inf: None,
        offending: None,
        tol: opts.tol,
        half_width: opts.half_width,
        grid_points: grid.len(),
        starts_tried: 0,
        watermark,
        discrepancies,
    };
    if let Some(bad) = verdict.discrepancies.iter().find(|d| !d.passed) {
        verdict.offending = Some(format!("{} (d{}): {}", bad.label, bad.direction, bad.invariant));
        return Ok(verdict);
    }

    // step 2: jet-matching witness
    let space = ctx.prolonged.space();
    let jk1 = psi1.jets(space)?.at(x0)?;
    let jk2 = psi2.jets(space)?.at(x0)?;
    let action = ctx.prolonged.compile()?;
    let prob = JetMatch {
        action: &action,
        from: &jk1,
        to: &jk2,
        skip: p,
    };
    let id = ctx.prolonged.identity().to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut starts = vec![id.clone()];
    for s in 0..opts.seeds {
        let radius = 0.25 * f64::powi(2.0, (s / 2) as i32);
        starts.push(id.iter().map(|x| x + rng.gen_range(-radius..radius)).collect());
    }
    let mut best: Option<numeric::SolveReport> = None;
    for s in &starts {
        verdict.starts_tried += 1;
        let rep = numeric::least_squares(&prob, s, opts.max_iter);
        let done = rep.residual_inf <= opts.tol;
        if best.as_ref().map_or(true, |b| rep.residual_inf < b.residual_inf) {
            best = Some(rep);
        }
        if done {
            break;
        }
    }
    let best = best.unwrap();
    let names = space.jet_coords();
    if let Some(r) = prob.residuals(&best.x) {
        verdict.residuals = names.iter().cloned().zip(r).collect();
    }
    verdict.residual_inf = Some(best.residual_inf);
    if best.residual_inf <= opts.tol {
        verdict.witness = Some(ctx.prolonged.params().iter().cloned().zip(best.x).collect());
        verdict.decision = if ctx.constant_structure {
            Decision::Congruent
        } else {
            Decision::NecessaryOnlyPass
        };
    } else {
        verdict.decision = if ctx.constant_structure {
            Decision::Inconclusive
        } else {
            Decision::NecessaryOnlyPass
        };
    }
    Ok(verdict)
}

/// Tensor grid around `x0` with `2p+1` points per axis.
fn grid_points(x0: &[f64], half_width: f64) -> Vec<Vec<f64>> {
    let p = x0.len();
    let per = 2 * p + 1;
    let offsets: Vec<f64> = (0..per)
        .map(|i| -half_width + 2.0 * half_width * i as f64 / (per - 1) as f64)
        .collect();
    let mut out = vec![Vec::new()];
    for x in x0 {
        let mut next = Vec::new();
        for pt in &out {
            for o in &offsets {
                let mut q: Vec<f64> = pt.clone();
                q.push(x + o);
                next.push(q);
            }
        }
        out = next;
    }
    out
}
