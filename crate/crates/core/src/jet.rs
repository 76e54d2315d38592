//! Jet coordinates, total derivatives and prolonged (verticalized) actions.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::expr::{Compiled, Expr, RatFunc, VarKind, VarTable};
use crate::group::ActionSpec;

/// Sorted multiset of base indices.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MultiIndex(Vec<usize>);

impl MultiIndex {
    pub fn new(mut idx: Vec<usize>) -> Self {
        idx.sort_unstable();
        MultiIndex(idx)
    }

    pub fn empty() -> Self {
        MultiIndex(Vec::new())
    }

    pub fn order(&self) -> usize {
        self.0.len()
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn with(&self, i: usize) -> Self {
        let mut v = self.0.clone();
        v.push(i);
        MultiIndex::new(v)
    }

    /// Drops the last (largest) index.
    pub fn parent(&self) -> Option<(MultiIndex, usize)> {
        let mut v = self.0.clone();
        let i = v.pop()?;
        Some((MultiIndex(v), i))
    }

    /// All multi-indices of exactly `order` over `p` base indices, ordered
    /// lexicographically.
    pub fn all(p: usize, order: usize) -> Vec<MultiIndex> {
        fn rec(p: usize, start: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<MultiIndex>) {
            if left == 0 {
                out.push(MultiIndex(cur.clone()));
                return;
            }
            for i in start..p {
                cur.push(i);
                rec(p, i, left - 1, cur, out);
                cur.pop();
            }
        }
        let mut out = Vec::new();
        rec(p, 0, order, &mut Vec::new(), &mut out);
        out
    }
}

/// Coordinates of J^k(X, M).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JetSpace {
    base: Vec<String>,
    fiber: Vec<String>,
    order: usize,
}

/// A jet coordinate decoded into fiber index and multi-index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Coord {
    Base(usize),
    Jet(usize, MultiIndex),
}

impl JetSpace {
    pub fn new(base: &[&str], fiber: &[&str], order: usize) -> Result<Self> {
        Self::from_names(
            base.iter().map(|s| s.to_string()).collect(),
            fiber.iter().map(|s| s.to_string()).collect(),
            order,
        )
    }

    pub fn from_names(base: Vec<String>, fiber: Vec<String>, order: usize) -> Result<Self> {
        let space = JetSpace { base, fiber, order };
        // Building the table checks identifiers and name collisions.
        space.var_table(&[])?;
        Ok(space)
    }

    pub fn base(&self) -> &[String] {
        &self.base
    }

    pub fn fiber(&self) -> &[String] {
        &self.fiber
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn with_order(&self, order: usize) -> JetSpace {
        JetSpace {
            base: self.base.clone(),
            fiber: self.fiber.clone(),
            order,
        }
    }

    pub fn coord_name(&self, alpha: usize, j: &MultiIndex) -> String {
        let mut s = self.fiber[alpha].clone();
        if j.order() > 0 {
            s.push('_');
            for i in j.indices() {
                s.push_str(&self.base[*i]);
            }
        }
        s
    }

    /// Jet coordinates (fiber and derivatives) of exactly order `m`.
    pub fn jet_coords_of_order(&self, m: usize) -> Vec<String> {
        let mut out = Vec::new();
        for a in 0..self.fiber.len() {
            for j in MultiIndex::all(self.base.len(), m) {
                out.push(self.coord_name(a, &j));
            }
        }
        out
    }

    /// Jet coordinates up to the space order, grouped by order.
    pub fn jet_coords(&self) -> Vec<String> {
        (0..=self.order).flat_map(|m| self.jet_coords_of_order(m)).collect()
    }

    /// Base coordinates followed by all jet coordinates.
    pub fn coords(&self) -> Vec<String> {
        let mut v = self.base.clone();
        v.extend(self.jet_coords());
        v
    }

    /// p + n * C(p + k, k).
    pub fn dim(&self) -> usize {
        let p = self.base.len();
        let mut binom = 1usize;
        for i in 1..=self.order {
            binom = binom * (p + i) / i;
        }
        p + self.fiber.len() * binom
    }

    /// Decodes any coordinate name, including those above the space order.
    pub fn decode(&self, name: &str) -> Option<Coord> {
        if let Some(i) = self.base.iter().position(|b| b == name) {
            return Some(Coord::Base(i));
        }
        for (a, f) in self.fiber.iter().enumerate() {
            if name == f {
                return Some(Coord::Jet(a, MultiIndex::empty()));
            }
            let Some(rest) = name.strip_prefix(f.as_str()).and_then(|r| r.strip_prefix('_')) else {
                continue;
            };
            if let Some(idx) = self.split_base(rest) {
                let j = MultiIndex::new(idx);
                if self.coord_name(a, &j) == name {
                    return Some(Coord::Jet(a, j));
                }
            }
        }
        None
    }

    fn split_base(&self, mut s: &str) -> Option<Vec<usize>> {
        let mut out = Vec::new();
        while !s.is_empty() {
            let (i, b) = self
                .base
                .iter()
                .enumerate()
                .filter(|(_, b)| s.starts_with(b.as_str()))
                .max_by_key(|(_, b)| b.len())?;
            out.push(i);
            s = &s[b.len()..];
        }
        (!out.is_empty()).then_some(out)
    }

    pub fn jet_order(&self, name: &str) -> Option<usize> {
        match self.decode(name)? {
            Coord::Base(_) => Some(0),
            Coord::Jet(_, j) => Some(j.order()),
        }
    }

    /// Highest jet order among the variables of `e` that are coordinates.
    pub fn max_order(&self, e: &Expr) -> usize {
        e.vars().iter().filter_map(|v| self.jet_order(v)).max().unwrap_or(0)
    }

    /// Registry of base, fiber and jet names (plus `params`).
    pub fn var_table(&self, params: &[String]) -> Result<VarTable> {
        let mut t = VarTable::new();
        for b in &self.base {
            t.add(b.clone(), VarKind::Base)?;
        }
        for c in self.jet_coords() {
            let kind = if self.fiber.contains(&c) { VarKind::Fiber } else { VarKind::Jet };
            t.add(c, kind)?;
        }
        for p in params {
            t.add(p.clone(), VarKind::GroupParam)?;
        }
        Ok(t)
    }

    pub(crate) fn total_derivative_canon(&self, e: &RatFunc, i: usize) -> Result<RatFunc> {
        let mut out = e.diff(&self.base[i]);
        for v in e.vars() {
            let Some(Coord::Jet(a, j)) = self.decode(&v) else {
                continue;
            };
            let d = e.diff(&v);
            if d.is_zero() {
                continue;
            }
            if j.order() >= self.order {
                return Err(Error::OrderOverflow {
                    coordinate: self.coord_name(a, &j.with(i)),
                    max: self.order,
                });
            }
            out = out.add(&d.mul(&RatFunc::var(&self.coord_name(a, &j.with(i)))));
        }
        Ok(out)
    }

    /// D_i e. Variables that are not coordinates are treated as constants.
    pub fn total_derivative(&self, e: &Expr, i: usize) -> Result<Expr> {
        Ok(Expr::from_canon(&self.total_derivative_canon(&e.canon()?, i)?))
    }

    /// Jets of a graph x -> (x, psi(x)): every jet coordinate as a function of
    /// the base coordinates.
    pub fn prolong_immersion(&self, psi: &BTreeMap<String, Expr>) -> Result<BTreeMap<String, Expr>> {
        let mut canon: BTreeMap<String, RatFunc> = BTreeMap::new();
        for f in &self.fiber {
            let e = psi
                .get(f)
                .ok_or_else(|| Error::validation(format!("immersion.{f}"), "missing component"))?;
            for v in e.vars() {
                if !self.base.contains(&v) {
                    return Err(Error::validation(
                        format!("immersion.{f}"),
                        format!("`{v}` is not a base coordinate"),
                    ));
                }
            }
            canon.insert(f.clone(), e.canon()?);
        }
        for m in 1..=self.order {
            for (a, _) in self.fiber.iter().enumerate() {
                for j in MultiIndex::all(self.base.len(), m) {
                    let (parent, i) = j.parent().unwrap();
                    let d = canon[&self.coord_name(a, &parent)].diff(&self.base[i]);
                    canon.insert(self.coord_name(a, &j), d);
                }
            }
        }
        Ok(canon.iter().map(|(k, v)| (k.clone(), Expr::from_canon(v))).collect())
    }

    /// Prolonged action to the order of this space.
    pub fn prolong_action(&self, action: &ActionSpec) -> Result<ProlongedAction> {
        ProlongedAction::new(action, self)
    }
}

/// Transforms of every jet coordinate under the prolonged action.
#[derive(Clone, Debug)]
pub struct ProlongedAction {
    space: JetSpace,
    action: ActionSpec,
    params: Vec<String>,
    identity: Vec<f64>,
    transforms: BTreeMap<String, Expr>,
    canon: BTreeMap<String, RatFunc>,
}

impl ProlongedAction {
    fn new(action: &ActionSpec, space: &JetSpace) -> Result<Self> {
        if action.fiber() != space.fiber() {
            return Err(Error::validation(
                "group.action",
                "action fiber coordinates differ from the jet space fiber",
            ));
        }
        let mut canon = BTreeMap::new();
        for (f, t) in space.fiber.iter().zip(action.transforms()) {
            for v in t.vars() {
                if space.base.contains(&v) {
                    return Err(Error::validation(
                        format!("group.action.{f}"),
                        "verticalized actions may not involve base coordinates",
                    ));
                }
            }
            canon.insert(f.clone(), t.canon()?);
        }
        let mut out = ProlongedAction {
            space: space.with_order(0),
            action: action.clone(),
            params: action.params().to_vec(),
            identity: action.identity_f64(),
            transforms: BTreeMap::new(),
            canon,
        };
        out.extend_to(space.order)?;
        Ok(out)
    }

    /// Adds the transforms of orders up to `k`, reusing lower orders.
    pub fn extend_to(&mut self, k: usize) -> Result<()> {
        let full = self.space.with_order(k.max(self.space.order));
        for m in self.space.order + 1..=k {
            for a in 0..full.fiber.len() {
                for j in MultiIndex::all(full.base.len(), m) {
                    let (parent, i) = j.parent().unwrap();
                    let src = &self.canon[&full.coord_name(a, &parent)];
                    let d = full.total_derivative_canon(src, i)?;
                    self.canon.insert(full.coord_name(a, &j), d);
                }
            }
        }
        self.space = full;
        for (k, v) in &self.canon {
            if !self.transforms.contains_key(k) {
                self.transforms.insert(k.clone(), Expr::from_canon(v));
            }
        }
        Ok(())
    }

    pub fn space(&self) -> &JetSpace {
        &self.space
    }

    pub fn action(&self) -> &ActionSpec {
        &self.action
    }

    pub fn params(&self) -> &[String] {
        &self.params
    }

    pub fn identity(&self) -> &[f64] {
        &self.identity
    }

    /// Transform of a coordinate; base coordinates map to themselves.
    pub fn transform(&self, coord: &str) -> Option<Expr> {
        if self.space.base.iter().any(|b| b == coord) {
            return Some(Expr::var(coord));
        }
        self.transforms.get(coord).cloned()
    }

    pub(crate) fn transform_canon(&self, coord: &str) -> Option<RatFunc> {
        if self.space.base.iter().any(|b| b == coord) {
            return Some(RatFunc::var(coord));
        }
        self.canon.get(coord).cloned()
    }

    /// Jet coordinates paired with their transforms, in coordinate order.
    pub fn transforms(&self) -> Vec<(String, Expr)> {
        self.space
            .jet_coords()
            .into_iter()
            .map(|c| {
                let t = self.transforms[&c].clone();
                (c, t)
            })
            .collect()
    }

    /// Numeric evaluator for the whole action.
    pub fn compile(&self) -> Result<NumericAction> {
        let coords = self.space.coords();
        let mut names = coords.clone();
        names.extend(self.params.iter().cloned());
        let jets = self.space.jet_coords();
        let fns = jets
            .iter()
            .map(|c| Compiled::new(&self.transforms[c], &names))
            .collect::<Result<Vec<_>>>()?;
        Ok(NumericAction {
            coords,
            n_base: self.space.base.len(),
            fns,
        })
    }
}

/// Compiled prolonged action: `apply(params, point)` with points laid out as
/// [`JetSpace::coords`].
#[derive(Clone, Debug)]
pub struct NumericAction {
    coords: Vec<String>,
    n_base: usize,
    fns: Vec<Compiled>,
}

impl NumericAction {
    pub fn coords(&self) -> &[String] {
        &self.coords
    }

    pub fn apply(&self, params: &[f64], point: &[f64]) -> Result<Vec<f64>> {
        let mut input = point.to_vec();
        input.extend_from_slice(params);
        let mut out = point[..self.n_base].to_vec();
        for f in &self.fns {
            out.push(f.eval(&input)?);
        }
        Ok(out)
    }

    /// `∂(g·z)/∂z` at `point`, rows and columns in coordinate order.
    pub fn jacobian(&self, params: &[f64], point: &[f64]) -> Result<nalgebra::DMatrix<f64>> {
        let n = point.len();
        let mut input = point.to_vec();
        input.extend_from_slice(params);
        let mut out = nalgebra::DMatrix::zeros(n, n);
        for i in 0..self.n_base {
            out[(i, i)] = 1.0;
        }
        for (r, f) in self.fns.iter().enumerate() {
            let (_, g) = f.eval_grad(&input)?;
            for c in 0..n {
                out[(self.n_base + r, c)] = g[c];
            }
        }
        Ok(out)
    }
}
