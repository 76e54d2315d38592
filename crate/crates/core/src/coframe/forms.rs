use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::{Error, Result};
use crate::expr::{Compiled, Expr, RatFunc};

/// Linear combination of coordinate differentials `Σ f_c dc`.
///
/// Coefficients are held in canonical form; zero coefficients are dropped.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct OneForm {
    coeffs: BTreeMap<String, RatFunc>,
}

/// Two-form as coefficients of `da ∧ db` with `a < b` (string order).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TwoForm {
    coeffs: BTreeMap<(String, String), RatFunc>,
}

impl OneForm {
    pub fn zero() -> Self {
        Self::default()
    }

    /// `dc` for a single coordinate.
    pub fn d(coord: &str) -> Self {
        let mut coeffs = BTreeMap::new();
        coeffs.insert(coord.to_string(), RatFunc::one());
        OneForm { coeffs }
    }

    pub fn new<I, S>(terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, Expr)>,
        S: Into<String>,
    {
        let mut out = OneForm::zero();
        for (c, e) in terms {
            out.add_term(c.into(), e.canon()?);
        }
        Ok(out)
    }

    pub(crate) fn from_canon(coeffs: BTreeMap<String, RatFunc>) -> Self {
        let mut out = OneForm::zero();
        for (c, f) in coeffs {
            out.add_term(c, f);
        }
        out
    }

    pub(crate) fn add_term(&mut self, coord: String, f: RatFunc) {
        if f.is_zero() {
            return;
        }
        let sum = match self.coeffs.remove(&coord) {
            Some(g) => g.add(&f),
            None => f,
        };
        if !sum.is_zero() {
            self.coeffs.insert(coord, sum);
        }
    }

    /// Exterior derivative of a function: every variable of `f` is treated
    /// as a coordinate.
    pub fn differential(f: &Expr) -> Result<Self> {
        Ok(Self::differential_canon(&f.canon()?))
    }

    pub(crate) fn differential_canon(f: &RatFunc) -> Self {
        let mut out = OneForm::zero();
        for v in f.vars() {
            out.add_term(v.clone(), f.diff(&v));
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coefficient(&self, coord: &str) -> Expr {
        self.coeffs.get(coord).map(Expr::from_canon).unwrap_or_else(Expr::zero)
    }

    pub(crate) fn canon_terms(&self) -> &BTreeMap<String, RatFunc> {
        &self.coeffs
    }

    /// Coordinates with a nonzero coefficient.
    pub fn support(&self) -> Vec<String> {
        self.coeffs.keys().cloned().collect()
    }

    pub fn terms(&self) -> Vec<(String, Expr)> {
        self.coeffs.iter().map(|(c, f)| (c.clone(), Expr::from_canon(f))).collect()
    }

    /// Variables appearing in the coefficients.
    pub fn coefficient_vars(&self) -> BTreeSet<String> {
        self.coeffs.values().flat_map(|f| f.vars()).collect()
    }

    pub fn add(&self, other: &OneForm) -> OneForm {
        let mut out = self.clone();
        for (c, f) in &other.coeffs {
            out.add_term(c.clone(), f.clone());
        }
        out
    }

    pub fn sub(&self, other: &OneForm) -> OneForm {
        self.add(&other.scale_canon(&RatFunc::one().neg()))
    }

    pub fn scale(&self, f: &Expr) -> Result<OneForm> {
        Ok(self.scale_canon(&f.canon()?))
    }

    pub(crate) fn scale_canon(&self, f: &RatFunc) -> OneForm {
        OneForm::from_canon(self.coeffs.iter().map(|(c, g)| (c.clone(), g.mul(f))).collect())
    }

    /// Structural check after canonicalization; see [`OneForm::probably_equal`]
    /// for the randomized test.
    pub fn structurally_equal(&self, other: &OneForm) -> bool {
        self.sub(other).is_zero()
    }

    /// Coefficient-wise randomized equality on the default sampling box.
    pub fn probably_equal(&self, other: &OneForm, sampler: &crate::expr::Sampler, trials: usize, tol: f64) -> Result<bool> {
        let keys: BTreeSet<&String> = self.coeffs.keys().chain(other.coeffs.keys()).collect();
        for k in keys {
            if !sampler.probably_equal(&self.coefficient(k), &other.coefficient(k), trials, tol)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Substitutes `map` into the coefficients and replaces each differential
    /// `du` by `d(map[u])`, expanded over the variables of `map[u]`.
    pub fn pullback(&self, map: &BTreeMap<String, Expr>) -> Result<OneForm> {
        let canon = map
            .iter()
            .map(|(k, v)| Ok((k.clone(), v.canon()?)))
            .collect::<Result<BTreeMap<_, _>>>()?;
        self.pullback_canon(&canon)
    }

    pub(crate) fn pullback_canon(&self, map: &BTreeMap<String, RatFunc>) -> Result<OneForm> {
        let mut out = OneForm::zero();
        for (c, f) in &self.coeffs {
            let image = map.get(c).ok_or_else(|| Error::UnboundVariable(c.clone()))?;
            let fs = f.subst(map)?;
            let dimg = OneForm::differential_canon(image);
            out = out.add(&dimg.scale_canon(&fs));
        }
        Ok(out)
    }

    /// `dω` as a two-form.
    pub fn exterior_derivative(&self) -> TwoForm {
        let mut out = TwoForm::default();
        for (c, f) in &self.coeffs {
            for v in f.vars() {
                // d(f dc) = Σ ∂f/∂v dv ∧ dc
                out.add_wedge(&v, c, f.diff(&v));
            }
        }
        out
    }

    /// Evaluator for coefficient rows over the given coordinate order.
    pub fn compile(&self, coords: &[String], vars: &[String]) -> Result<CompiledForm> {
        let mut cols = Vec::new();
        for (c, f) in &self.coeffs {
            let idx = coords
                .iter()
                .position(|x| x == c)
                .ok_or_else(|| Error::UnboundVariable(c.clone()))?;
            cols.push((idx, Compiled::new(&Expr::from_canon(f), vars)?));
        }
        Ok(CompiledForm { width: coords.len(), cols })
    }

    /// Writes the form using the coordinate order `coords` where possible.
    pub fn display_in(&self, coords: &[String]) -> String {
        let mut keys: Vec<&String> = self.coeffs.keys().collect();
        keys.sort_by_key(|k| coords.iter().position(|c| c == *k).unwrap_or(usize::MAX));
        if keys.is_empty() {
            return "0".into();
        }
        let mut s = String::new();
        for (i, k) in keys.iter().enumerate() {
            let e = Expr::from_canon(&self.coeffs[*k]);
            let (neg, body) = match &e {
                Expr::Neg(inner) => (true, (**inner).clone()),
                Expr::Quotient(a, b) => match &**a {
                    Expr::Neg(inner) => (true, Expr::Quotient(inner.clone(), b.clone())),
                    _ => (false, e.clone()),
                },
                _ => (false, e.clone()),
            };
            if i == 0 {
                if neg {
                    s.push('-');
                }
            } else {
                s.push_str(if neg { " - " } else { " + " });
            }
            if body.is_one() {
                s.push_str(&format!("d{k}"));
            } else if matches!(body, Expr::Sum(_)) {
                s.push_str(&format!("({body}) d{k}"));
            } else {
                s.push_str(&format!("{body} d{k}"));
            }
        }
        s
    }
}

impl fmt::Display for OneForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.display_in(&[]))
    }
}

impl TwoForm {
    pub(crate) fn add_wedge(&mut self, a: &str, b: &str, f: RatFunc) {
        if a == b || f.is_zero() {
            return;
        }
        let (key, f) = if a < b {
            ((a.to_string(), b.to_string()), f)
        } else {
            ((b.to_string(), a.to_string()), f.neg())
        };
        let sum = match self.coeffs.remove(&key) {
            Some(g) => g.add(&f),
            None => f,
        };
        if !sum.is_zero() {
            self.coeffs.insert(key, sum);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Coefficient of `da ∧ db`; antisymmetric in the arguments.
    pub fn coefficient(&self, a: &str, b: &str) -> Expr {
        if a < b {
            self.coeffs.get(&(a.into(), b.into())).map(Expr::from_canon).unwrap_or_else(Expr::zero)
        } else if a > b {
            self.coeffs
                .get(&(b.into(), a.into()))
                .map(|f| Expr::from_canon(&f.neg()))
                .unwrap_or_else(Expr::zero)
        } else {
            Expr::zero()
        }
    }

    pub fn terms(&self) -> Vec<((String, String), Expr)> {
        self.coeffs.iter().map(|(k, f)| (k.clone(), Expr::from_canon(f))).collect()
    }

    /// `α ∧ β`.
    pub fn wedge(a: &OneForm, b: &OneForm) -> TwoForm {
        let mut out = TwoForm::default();
        for (ca, fa) in &a.coeffs {
            for (cb, fb) in &b.coeffs {
                out.add_wedge(ca, cb, fa.mul(fb));
            }
        }
        out
    }

    pub fn add(&self, other: &TwoForm) -> TwoForm {
        let mut out = self.clone();
        for ((a, b), f) in &other.coeffs {
            out.add_wedge(a, b, f.clone());
        }
        out
    }

    pub fn scale(&self, f: &Expr) -> Result<TwoForm> {
        let g = f.canon()?;
        let mut out = TwoForm::default();
        for ((a, b), h) in &self.coeffs {
            out.add_wedge(a, b, h.mul(&g));
        }
        Ok(out)
    }

    /// Antisymmetric coefficient matrix `A` with `Σ_{a<b} A_ab da∧db`,
    /// compiled over the given coordinate order.
    pub fn compile(&self, coords: &[String], vars: &[String]) -> Result<CompiledTwoForm> {
        let mut entries = Vec::new();
        for ((a, b), f) in &self.coeffs {
            let pos = |x: &String| {
                coords
                    .iter()
                    .position(|c| c == x)
                    .ok_or_else(|| Error::UnboundVariable(x.clone()))
            };
            entries.push((pos(a)?, pos(b)?, Compiled::new(&Expr::from_canon(f), vars)?));
        }
        Ok(CompiledTwoForm { width: coords.len(), entries })
    }
}

/// Numeric coefficient row of a one-form.
#[derive(Clone, Debug)]
pub struct CompiledForm {
    width: usize,
    cols: Vec<(usize, Compiled)>,
}

impl CompiledForm {
    pub fn eval(&self, point: &[f64]) -> Result<Vec<f64>> {
        let mut row = vec![0.0; self.width];
        for (i, c) in &self.cols {
            row[*i] = c.eval(point)?;
        }
        Ok(row)
    }

    /// Coefficient row and its Jacobian, `jac[(b, a)] = d f_b / dz_a`.
    pub fn eval_jacobian(&self, point: &[f64]) -> Result<(Vec<f64>, nalgebra::DMatrix<f64>)> {
        let mut row = vec![0.0; self.width];
        let mut jac = nalgebra::DMatrix::zeros(self.width, point.len());
        for (i, c) in &self.cols {
            let (v, g) = c.eval_grad(point)?;
            row[*i] = v;
            for (a, d) in g.into_iter().enumerate() {
                jac[(*i, a)] = d;
            }
        }
        Ok((row, jac))
    }
}

#[derive(Clone, Debug)]
pub struct CompiledTwoForm {
    width: usize,
    entries: Vec<(usize, usize, Compiled)>,
}

impl CompiledTwoForm {
    /// Full antisymmetric matrix.
    pub fn eval(&self, point: &[f64]) -> Result<nalgebra::DMatrix<f64>> {
        let mut m = nalgebra::DMatrix::zeros(self.width, self.width);
        for (a, b, c) in &self.entries {
            let v = c.eval(point)?;
            m[(*a, *b)] += v;
            m[(*b, *a)] -= v;
        }
        Ok(m)
    }
}
