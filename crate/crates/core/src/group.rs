//! Group actions, matrix representations, Maurer-Cartan forms and structure
//! constants of coframes.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use rand::Rng;
use serde::Serialize;

use crate::coframe::{OneForm, TwoForm};
use crate::error::{Error, Result};
use crate::expr::{Compiled, Expr, RatFunc, Sampler};
use crate::numeric::{self, Residuals};

/// Square matrix of expressions in the group parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixRep {
    rows: Vec<Vec<Expr>>,
}

impl MatrixRep {
    pub fn new(rows: Vec<Vec<Expr>>) -> Result<Self> {
        let m = rows.len();
        if m == 0 || rows.iter().any(|r| r.len() != m) {
            return Err(Error::validation("group.matrix", "matrix must be square and non-empty"));
        }
        let rows = rows
            .into_iter()
            .map(|r| r.iter().map(Expr::simplify).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Ok(MatrixRep { rows })
    }

    pub fn size(&self) -> usize {
        self.rows.len()
    }

    pub fn entry(&self, i: usize, j: usize) -> &Expr {
        &self.rows[i][j]
    }

    pub fn rows(&self) -> &[Vec<Expr>] {
        &self.rows
    }

    pub fn compile(&self, params: &[String]) -> Result<CompiledMatrix> {
        let m = self.size();
        let mut entries = Vec::with_capacity(m * m);
        let mut partials = Vec::with_capacity(params.len());
        for row in &self.rows {
            for e in row {
                entries.push(Compiled::new(e, params)?);
            }
        }
        for p in params {
            let mut d = Vec::with_capacity(m * m);
            for row in &self.rows {
                for e in row {
                    d.push(Compiled::new(&e.diff(p)?, params)?);
                }
            }
            partials.push(d);
        }
        Ok(CompiledMatrix { m, entries, partials })
    }
}

/// Numeric matrix representation with parameter partials.
#[derive(Clone, Debug)]
pub struct CompiledMatrix {
    m: usize,
    entries: Vec<Compiled>,
    partials: Vec<Vec<Compiled>>,
}

impl CompiledMatrix {
    pub fn size(&self) -> usize {
        self.m
    }

    fn fill(&self, cs: &[Compiled], p: &[f64]) -> Result<DMatrix<f64>> {
        let mut out = DMatrix::zeros(self.m, self.m);
        for (k, c) in cs.iter().enumerate() {
            out[(k / self.m, k % self.m)] = c.eval(p)?;
        }
        Ok(out)
    }

    pub fn eval(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        self.fill(&self.entries, p)
    }

    /// `∂M/∂p_i`.
    pub fn partial(&self, i: usize, p: &[f64]) -> Result<DMatrix<f64>> {
        self.fill(&self.partials[i], p)
    }
}

/// Lie group acting on the fiber coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct ActionSpec {
    params: Vec<String>,
    identity: Vec<BigRational>,
    fiber: Vec<String>,
    transforms: Vec<Expr>,
    matrix: Option<MatrixRep>,
    mc_entries: Option<Vec<(usize, usize)>>,
}

impl ActionSpec {
    /// `transforms[α]` is the image of `fiber[α]`.
    pub fn new(params: Vec<String>, identity: Vec<BigRational>, fiber: Vec<String>, transforms: Vec<Expr>) -> Result<Self> {
        if identity.len() != params.len() {
            return Err(Error::validation(
                "group.identity",
                format!("{} identity values for {} parameters", identity.len(), params.len()),
            ));
        }
        if transforms.len() != fiber.len() {
            return Err(Error::validation("group.action", "one transform per fiber coordinate required"));
        }
        let transforms = transforms.iter().map(Expr::simplify).collect::<Result<Vec<_>>>()?;
        let spec = ActionSpec {
            params,
            identity,
            fiber,
            transforms,
            matrix: None,
            mc_entries: None,
        };
        let at_id = spec.identity_bindings();
        for (f, t) in spec.fiber.iter().zip(&spec.transforms) {
            if t.substitute(&at_id)? != Expr::var(f.as_str()) {
                return Err(Error::validation(
                    format!("group.action.{f}"),
                    "transform is not the identity at the identity parameters",
                ));
            }
        }
        Ok(spec)
    }

    pub fn with_matrix(mut self, rep: MatrixRep) -> Result<Self> {
        let c = rep.compile(&self.params)?;
        let id = c.eval(&self.identity_f64())?;
        let eye = DMatrix::<f64>::identity(rep.size(), rep.size());
        if (&id - &eye).amax() > 1e-12 {
            return Err(Error::validation("group.matrix", "matrix is not the identity at the identity parameters"));
        }
        self.matrix = Some(rep);
        Ok(self)
    }

    /// Overrides the row-major selection of Maurer-Cartan entries.
    pub fn with_mc_entries(mut self, entries: Vec<(usize, usize)>) -> Result<Self> {
        let m = self.matrix.as_ref().map(MatrixRep::size).unwrap_or(0);
        if entries.iter().any(|(i, j)| *i >= m || *j >= m) {
            return Err(Error::validation("group.mc_entries", "entry outside the matrix"));
        }
        self.mc_entries = Some(entries);
        Ok(self)
    }

    pub fn params(&self) -> &[String] {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.params.len()
    }

    pub fn identity(&self) -> &[BigRational] {
        &self.identity
    }

    pub fn identity_f64(&self) -> Vec<f64> {
        self.identity.iter().map(|q| q.to_f64().unwrap_or(f64::NAN)).collect()
    }

    pub fn identity_bindings(&self) -> BTreeMap<String, Expr> {
        self.params
            .iter()
            .zip(&self.identity)
            .map(|(p, q)| (p.clone(), Expr::Const(q.clone())))
            .collect()
    }

    pub fn fiber(&self) -> &[String] {
        &self.fiber
    }

    pub fn transforms(&self) -> &[Expr] {
        &self.transforms
    }

    pub fn matrix(&self) -> Option<&MatrixRep> {
        self.matrix.as_ref()
    }

    pub fn mc_entries(&self) -> Option<&[(usize, usize)]> {
        self.mc_entries.as_deref()
    }

    /// Random parameters within `radius` of the identity (box metric).
    pub fn random_near_identity(&self, rng: &mut impl Rng, radius: f64) -> Vec<f64> {
        self.identity_f64()
            .iter()
            .map(|x| x + rng.gen_range(-radius..radius))
            .collect()
    }

    pub fn maurer_cartan(&self) -> Result<MaurerCartanBasis> {
        let rep = self
            .matrix
            .as_ref()
            .ok_or_else(|| Error::validation("group.matrix", "a matrix representation is required"))?;
        maurer_cartan(rep, &self.params, &self.identity_f64(), self.mc_entries.as_deref())
    }

    /// Parameters of `M(p1) M(p2)`, recovered by least squares.
    pub fn compose_params(&self, cm: &CompiledMatrix, p1: &[f64], p2: &[f64]) -> Result<Vec<f64>> {
        let target = cm.eval(p1)? * cm.eval(p2)?;
        let id = self.identity_f64();
        let guess: Vec<f64> = (0..p1.len()).map(|i| p1[i] + p2[i] - id[i]).collect();
        self.params_of(cm, &target, &[guess, p1.to_vec(), p2.to_vec(), id.clone()])
    }

    /// Parameters of `M(p)^{-1}`.
    pub fn inverse_params(&self, cm: &CompiledMatrix, p: &[f64]) -> Result<Vec<f64>> {
        let target = cm.eval(p)?.try_inverse().ok_or(Error::SingularFrame)?;
        let id = self.identity_f64();
        let guess: Vec<f64> = (0..p.len()).map(|i| 2.0 * id[i] - p[i]).collect();
        self.params_of(cm, &target, &[guess, id])
    }

    /// Parameters whose matrix is `target`.
    pub fn params_of(&self, cm: &CompiledMatrix, target: &DMatrix<f64>, starts: &[Vec<f64>]) -> Result<Vec<f64>> {
        let prob = MatrixMatch { cm, target };
        let rep = numeric::multi_start(&prob, starts, 200, 1e-12)
            .ok_or_else(|| Error::Unsolvable("no start for parameter recovery".into()))?;
        if rep.residual_inf > 1e-9 {
            return Err(Error::Unsolvable(format!(
                "parameter recovery from matrix left residual {:.3e}",
                rep.residual_inf
            )));
        }
        Ok(rep.x)
    }
}

struct MatrixMatch<'a> {
    cm: &'a CompiledMatrix,
    target: &'a DMatrix<f64>,
}

impl Residuals for MatrixMatch<'_> {
    fn residuals(&self, x: &[f64]) -> Option<Vec<f64>> {
        let m = self.cm.eval(x).ok()?;
        Some((m - self.target).iter().copied().collect())
    }

    fn jacobian(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        let n = self.cm.size();
        let mut j = DMatrix::zeros(n * n, x.len());
        for i in 0..x.len() {
            let d = self.cm.partial(i, x).ok()?;
            for (k, v) in d.iter().enumerate() {
                j[(k, i)] = *v;
            }
        }
        Some(j)
    }
}

/// Right-invariant forms read off `(dg) g^{-1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct MaurerCartanBasis {
    pub params: Vec<String>,
    pub entries: Vec<(usize, usize)>,
    pub forms: Vec<OneForm>,
}

impl MaurerCartanBasis {
    pub fn len(&self) -> usize {
        self.forms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forms.is_empty()
    }
}

pub(crate) fn determinant(m: &[Vec<RatFunc>]) -> RatFunc {
    match m.len() {
        0 => RatFunc::one(),
        1 => m[0][0].clone(),
        2 => m[0][0].mul(&m[1][1]).sub(&m[0][1].mul(&m[1][0])),
        n => {
            let mut acc = RatFunc::zero();
            for j in 0..n {
                if m[0][j].is_zero() {
                    continue;
                }
                let minor = minor(m, 0, j);
                let t = m[0][j].mul(&determinant(&minor));
                acc = if j % 2 == 0 { acc.add(&t) } else { acc.sub(&t) };
            }
            acc
        }
    }
}

fn minor(m: &[Vec<RatFunc>], r: usize, c: usize) -> Vec<Vec<RatFunc>> {
    m.iter()
        .enumerate()
        .filter(|(i, _)| *i != r)
        .map(|(_, row)| {
            row.iter()
                .enumerate()
                .filter(|(j, _)| *j != c)
                .map(|(_, x)| x.clone())
                .collect()
        })
        .collect()
}

/// Symbolic inverse by adjugate.
pub(crate) fn inverse(m: &[Vec<RatFunc>]) -> Result<Vec<Vec<RatFunc>>> {
    let n = m.len();
    let det = determinant(m);
    if det.is_zero() {
        return Err(Error::DivisionByZero);
    }
    let inv_det = det.recip()?;
    let mut out = vec![vec![RatFunc::zero(); n]; n];
    for (i, row) in m.iter().enumerate() {
        for j in 0..row.len() {
            let c = determinant(&minor(m, i, j)).mul(&inv_det);
            // adj is the transposed cofactor matrix
            out[j][i] = if (i + j) % 2 == 0 { c } else { c.neg() };
        }
    }
    Ok(out)
}

/// Entries of `(dg) g^{-1}` as one-forms in the parameter differentials.
pub fn maurer_cartan_matrix(rep: &MatrixRep, params: &[String]) -> Result<Vec<Vec<OneForm>>> {
    let g: Vec<Vec<RatFunc>> = rep
        .rows
        .iter()
        .map(|r| r.iter().map(Expr::canon).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    let inv = inverse(&g)?;
    let n = g.len();
    let mut out = vec![vec![OneForm::zero(); n]; n];
    for (a, out_row) in out.iter_mut().enumerate() {
        for (b, slot) in out_row.iter_mut().enumerate() {
            let mut coeffs = BTreeMap::new();
            for p in params {
                let mut s = RatFunc::zero();
                for c in 0..n {
                    if inv[c][b].is_zero() {
                        continue;
                    }
                    s = s.add(&g[a][c].diff(p).mul(&inv[c][b]));
                }
                coeffs.insert(p.clone(), s);
            }
            *slot = OneForm::from_canon(coeffs);
        }
    }
    Ok(out)
}

/// Maurer-Cartan basis: `r` entries of `(dg) g^{-1}` independent at the
/// identity, chosen greedily in row-major order unless `selection` is given.
pub fn maurer_cartan(
    rep: &MatrixRep,
    params: &[String],
    identity: &[f64],
    selection: Option<&[(usize, usize)]>,
) -> Result<MaurerCartanBasis> {
    let omega = maurer_cartan_matrix(rep, params)?;
    let r = params.len();
    let row_at_id = |w: &OneForm| -> Result<Vec<f64>> { w.compile(params, params)?.eval(identity) };
    let n = rep.size();
    let candidates: Vec<(usize, usize)> = match selection {
        Some(s) => s.to_vec(),
        None => (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).collect(),
    };
    let mut chosen: Vec<(usize, usize)> = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, j) in candidates {
        if chosen.len() == r {
            break;
        }
        let row = row_at_id(&omega[i][j])?;
        let mut trial = rows.clone();
        trial.push(row.clone());
        let m = DMatrix::from_fn(trial.len(), r, |a, b| trial[a][b]);
        if numeric::rank(&m, 1e-10) == trial.len() {
            rows.push(row);
            chosen.push((i, j));
        } else if selection.is_some() {
            return Err(Error::RankDeficient { rank: rows.len(), wanted: r });
        }
    }
    if chosen.len() < r {
        return Err(Error::RankDeficient { rank: chosen.len(), wanted: r });
    }
    let forms = chosen.iter().map(|(i, j)| omega[*i][*j].clone()).collect();
    Ok(MaurerCartanBasis {
        params: params.to_vec(),
        entries: chosen,
        forms,
    })
}

/// Largest deviation `|μ(gh)·∂(gh)/∂g − μ(g)|` of the basis from
/// right-invariance at the given parameter point and right factor `h`.
pub fn right_invariance_defect(
    action: &ActionSpec,
    cm: &CompiledMatrix,
    basis: &MaurerCartanBasis,
    p: &[f64],
    h: &[f64],
) -> Result<f64> {
    let params = action.params();
    let r = params.len();
    let forms = basis
        .forms
        .iter()
        .map(|w| w.compile(params, params))
        .collect::<Result<Vec<_>>>()?;
    let q = action.compose_params(cm, p, h)?;
    let mh = cm.eval(h)?;
    let m = cm.size();
    // J' X = B, J' = ∂M/∂q at q, B_i = ∂M/∂p_i (p) M(h)
    let mut jq = DMatrix::zeros(m * m, r);
    let mut b = DMatrix::zeros(m * m, r);
    for i in 0..r {
        let dq = cm.partial(i, &q)?;
        let dp = cm.partial(i, p)? * &mh;
        for k in 0..m * m {
            jq[(k, i)] = dq[(k / m, k % m)];
            b[(k, i)] = dp[(k / m, k % m)];
        }
    }
    let x = jq
        .svd(true, true)
        .solve(&b, 1e-12)
        .map_err(|e| Error::Unsolvable(e.to_string()))?;
    let mut worst: f64 = 0.0;
    for f in &forms {
        let at_q = DMatrix::from_row_slice(1, r, &f.eval(&q)?);
        let at_p = f.eval(p)?;
        let pulled = at_q * &x;
        for i in 0..r {
            worst = worst.max((pulled[(0, i)] - at_p[i]).abs());
        }
    }
    Ok(worst)
}

/// Constant structure coefficients `C^i_jk` with
/// `dω^i = -Σ_{j<k} C^i_jk ω^j ∧ ω^k`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StructureConstants {
    pub n: usize,
    /// `c[i][j][k]`, antisymmetric in `j, k`.
    pub c: Vec<Vec<Vec<f64>>>,
    pub max_deviation: f64,
    pub points: usize,
}

impl StructureConstants {
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.c[i][j][k]
    }

    pub fn is_abelian(&self) -> bool {
        self.c.iter().flatten().flatten().all(|x| x.abs() < 1e-12)
    }

    /// Symbolic right-hand side `-Σ_{j<k} C^i_jk ω^j∧ω^k` using rational
    /// approximations of the constants.
    pub fn reconstruct(&self, forms: &[OneForm], i: usize) -> Result<TwoForm> {
        let mut out = TwoForm::default();
        for j in 0..self.n {
            for k in j + 1..self.n {
                let c = self.c[i][j][k];
                if c.abs() < 1e-12 {
                    continue;
                }
                let q = rational_guess(c).unwrap_or_else(|| float_to_rational(c));
                let w = TwoForm::wedge(&forms[j], &forms[k]).scale(&Expr::Const(-q))?;
                out = out.add(&w);
            }
        }
        Ok(out)
    }

    /// Lines like `dω2 = -ω1∧ω3` (1-based indices).
    pub fn equations(&self, symbol: &str) -> Vec<String> {
        (0..self.n)
            .map(|i| {
                let mut s = format!("d{symbol}{} =", i + 1);
                let mut first = true;
                for j in 0..self.n {
                    for k in j + 1..self.n {
                        let c = -self.c[i][j][k];
                        if c.abs() < 1e-12 {
                            continue;
                        }
                        let mag = match rational_guess(c.abs()) {
                            Some(q) if q == BigRational::from_integer(1.into()) => String::new(),
                            Some(q) => format!("{q} "),
                            None => format!("{:.6} ", c.abs()),
                        };
                        let sign = if c < 0.0 { "-" } else if first { "" } else { "+" };
                        if first {
                            s.push_str(&format!(" {sign}{mag}{symbol}{}∧{symbol}{}", j + 1, k + 1));
                        } else {
                            s.push_str(&format!(" {sign} {mag}{symbol}{}∧{symbol}{}", j + 1, k + 1));
                        }
                        first = false;
                    }
                }
                if first {
                    s.push_str(" 0");
                }
                s
            })
            .collect()
    }
}

/// A structure function that varies from point to point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NonConstantReport {
    /// `(i, j, k)`, 0-based.
    pub function: (usize, usize, usize),
    pub spread: f64,
    /// Coordinates the function is sensitive to.
    pub depends_on: Vec<String>,
}

impl fmt::Display for NonConstantReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (i, j, k) = self.function;
        write!(
            f,
            "NONCONSTANT: C^{}_{}{} varies by {:.3e}, depends on {}",
            i + 1,
            j + 1,
            k + 1,
            self.spread,
            self.depends_on.join(", ")
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StructureReport {
    Constant(StructureConstants),
    NonConstant(NonConstantReport),
}

impl StructureReport {
    pub fn constants(&self) -> Option<&StructureConstants> {
        match self {
            StructureReport::Constant(c) => Some(c),
            StructureReport::NonConstant(_) => None,
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, StructureReport::Constant(_))
    }
}

struct StructureEval {
    rows: Vec<crate::coframe::CompiledForm>,
}

impl StructureEval {
    fn conditioning(&self, p: &[f64]) -> Result<f64> {
        let n = self.rows.len();
        let mut w = DMatrix::zeros(n, n);
        for (i, r) in self.rows.iter().enumerate() {
            for (j, v) in r.eval(p)?.into_iter().enumerate() {
                w[(i, j)] = v;
            }
        }
        Ok(numeric::condition_ratio(&w))
    }

    /// `V^T dω^i V` with `V = W^{-1}`; `dω^i` comes from forward-mode
    /// derivatives of the coefficient rows, which keeps the cost
    /// independent of expression size.
    fn at(&self, p: &[f64]) -> Result<Vec<DMatrix<f64>>> {
        let n = self.rows.len();
        let mut w = DMatrix::zeros(n, n);
        let mut jacs = Vec::with_capacity(n);
        for (i, r) in self.rows.iter().enumerate() {
            let (row, jac) = r.eval_jacobian(p)?;
            for (j, v) in row.into_iter().enumerate() {
                w[(i, j)] = v;
            }
            jacs.push(jac);
        }
        if numeric::condition_ratio(&w) < 1e-12 {
            return Err(Error::NotACoframe(format!("forms are dependent at {p:?}")));
        }
        let v = w.try_inverse().ok_or_else(|| Error::NotACoframe("singular coefficient matrix".into()))?;
        Ok(jacs
            .iter()
            .map(|jac| {
                // d(Σ f_b dz_b) has da∧db coefficient ∂_a f_b - ∂_b f_a
                let d = DMatrix::from_fn(n, n, |a, b| jac[(b, a)] - jac[(a, b)]);
                -(v.transpose() * d * &v)
            })
            .collect())
    }
}

/// Structure functions of a coframe on the coordinate space `coords`,
/// sampled at 10 points of `sampler`.
pub fn structure_constants_of(forms: &[OneForm], coords: &[String], sampler: &Sampler) -> Result<StructureReport> {
    let n = forms.len();
    if n != coords.len() {
        return Err(Error::NotACoframe(format!("{n} forms on a {}-dimensional space", coords.len())));
    }
    let ev = StructureEval {
        rows: forms.iter().map(|w| w.compile(coords, coords)).collect::<Result<_>>()?,
    };
    let mut guards: Vec<Expr> = Vec::new();
    for w in forms {
        guards.extend(w.terms().into_iter().map(|(_, e)| e));
    }
    let guard_refs: Vec<&Expr> = guards.iter().collect();
    // keep the 10 best-conditioned of 30 candidates; near-degenerate
    // points only add rounding noise to the spread
    let mut scored = Vec::new();
    for p in sampler.valid_points(coords, &guard_refs, 30)? {
        let s = ev.at(&p)?;
        scored.push((ev.conditioning(&p)?, p, s));
    }
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    scored.truncate(10);
    let (points, samples): (Vec<_>, Vec<_>) = scored.into_iter().map(|(_, p, s)| (p, s)).unzip();

    let mut c = vec![vec![vec![0.0; n]; n]; n];
    let mut worst = (0.0, (0, 0, 0));
    for i in 0..n {
        for j in 0..n {
            for k in j + 1..n {
                let vals: Vec<f64> = samples.iter().map(|s| s[i][(j, k)]).collect();
                let mean = vals.iter().sum::<f64>() / vals.len() as f64;
                let spread = vals.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max) / (1.0 + mean.abs());
                if spread > worst.0 {
                    worst = (spread, (i, j, k));
                }
                let snapped = rational_guess(mean)
                    .and_then(|q| q.to_f64())
                    .filter(|q| (q - mean).abs() < 1e-9)
                    .unwrap_or(mean);
                c[i][j][k] = snapped;
                c[i][k][j] = -snapped;
            }
        }
    }
    if worst.0 > 1e-8 {
        let (i, j, k) = worst.1;
        let p0 = &points[0];
        let base = samples[0][i][(j, k)];
        let mut depends_on = Vec::new();
        for (a, name) in coords.iter().enumerate() {
            let h = 1e-5 * (1.0 + p0[a].abs());
            let mut q = p0.clone();
            q[a] += h;
            let Ok(s) = ev.at(&q) else { continue };
            if ((s[i][(j, k)] - base) / h).abs() > 1e-4 * (1.0 + base.abs()) {
                depends_on.push(name.clone());
            }
        }
        return Ok(StructureReport::NonConstant(NonConstantReport {
            function: (i, j, k),
            spread: worst.0,
            depends_on,
        }));
    }
    Ok(StructureReport::Constant(StructureConstants {
        n,
        c,
        max_deviation: worst.0,
        points: points.len(),
    }))
}

/// Small-denominator rational within 1e-9 of `x`.
pub fn rational_guess(x: f64) -> Option<BigRational> {
    if !x.is_finite() {
        return None;
    }
    for d in 1..=24i64 {
        let n = (x * d as f64).round();
        if (n / d as f64 - x).abs() < 1e-9 && n.abs() < 1e12 {
            return Some(BigRational::new((n as i64).into(), d.into()));
        }
    }
    None
}

fn float_to_rational(x: f64) -> BigRational {
    BigRational::from_float(x).unwrap_or_default()
}
