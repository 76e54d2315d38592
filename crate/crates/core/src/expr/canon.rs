//! Canonical rational-function form used by `simplify`.
//!
//! An expression is held as `N / (f1^k1 * ... * fm^km)` where `N` is a
//! Laurent polynomial over atoms and each `fi` is a monic polynomial with no
//! monomial content. Atoms are variables, elementary function applications
//! (arguments themselves canonical) and radicals `[B]^e` of non-trivial
//! polynomials with `0 < e < 1`. Two reductions keep the form tight:
//! radical exponents that reach 1 are multiplied back out into `B`, and
//! `cos(a)^2` is rewritten as `1 - sin(a)^2`.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::{BigRational, Rational64};
use num_traits::{One, Signed, Zero};

use super::{Expr, Func};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub(crate) enum Atom {
    Var(String),
    Func(Func, Vec<RatFunc>),
    Root(Poly),
}

/// Exponent vector; zero exponents are never stored.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub(crate) struct Mono(pub(crate) BTreeMap<Atom, Rational64>);

#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub(crate) struct Poly(pub(crate) BTreeMap<Mono, BigRational>);

#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub(crate) struct RatFunc {
    pub(crate) num: Poly,
    pub(crate) den: Vec<(Poly, u32)>,
}

fn r64(n: i64) -> Rational64 {
    Rational64::from_integer(n)
}

fn big(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

// ---------------------------------------------------------------------------
// Monomials

impl Mono {
    pub(crate) fn one() -> Self {
        Mono(BTreeMap::new())
    }

    pub(crate) fn atom(a: Atom, e: Rational64) -> Self {
        let mut m = BTreeMap::new();
        if !e.is_zero() {
            m.insert(a, e);
        }
        Mono(m)
    }

    pub(crate) fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    fn degree(&self) -> Rational64 {
        self.0.values().fold(r64(0), |acc, e| acc + e)
    }

    fn mul(&self, other: &Mono) -> Mono {
        let mut out = self.0.clone();
        for (a, e) in &other.0 {
            let entry = out.entry(a.clone()).or_insert_with(|| r64(0));
            *entry += e;
            if entry.is_zero() {
                out.remove(a);
            }
        }
        Mono(out)
    }

    fn div(&self, other: &Mono) -> Mono {
        let mut out = self.0.clone();
        for (a, e) in &other.0 {
            let entry = out.entry(a.clone()).or_insert_with(|| r64(0));
            *entry -= e;
            if entry.is_zero() {
                out.remove(a);
            }
        }
        Mono(out)
    }

    /// Radical atoms may not carry negative exponents in a quotient.
    fn is_valid_quotient(&self) -> bool {
        self.0
            .iter()
            .all(|(a, e)| !matches!(a, Atom::Root(_)) || *e > r64(0))
    }
}

impl Ord for Mono {
    // Graded lexicographic order; this is a monomial order, which the
    // division routine relies on.
    fn cmp(&self, other: &Self) -> Ordering {
        match self.degree().cmp(&other.degree()) {
            Ordering::Equal => {}
            o => return o,
        }
        let mut a = self.0.iter().peekable();
        let mut b = other.0.iter().peekable();
        loop {
            match (a.peek(), b.peek()) {
                (None, None) => return Ordering::Equal,
                (Some((ka, ea)), None) => {
                    let _ = ka;
                    return ea.cmp(&&r64(0));
                }
                (None, Some((_, eb))) => return r64(0).cmp(eb),
                (Some((ka, ea)), Some((kb, eb))) => match ka.cmp(kb) {
                    Ordering::Equal => {
                        if ea != eb {
                            return ea.cmp(eb);
                        }
                        a.next();
                        b.next();
                    }
                    Ordering::Less => return ea.cmp(&&r64(0)),
                    Ordering::Greater => return r64(0).cmp(eb),
                },
            }
        }
    }
}

impl PartialOrd for Mono {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

// ---------------------------------------------------------------------------
// Polynomials

impl Poly {
    pub(crate) fn zero() -> Self {
        Poly(BTreeMap::new())
    }

    pub(crate) fn constant(c: BigRational) -> Self {
        Self::term(Mono::one(), c)
    }

    pub(crate) fn term(m: Mono, c: BigRational) -> Self {
        let mut p = BTreeMap::new();
        if !c.is_zero() {
            p.insert(m, c);
        }
        Poly(p)
    }

    pub(crate) fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub(crate) fn as_constant(&self) -> Option<BigRational> {
        match self.0.len() {
            0 => Some(BigRational::zero()),
            1 => {
                let (m, c) = self.0.iter().next().unwrap();
                m.is_one().then(|| c.clone())
            }
            _ => None,
        }
    }

    fn single_term(&self) -> Option<(&Mono, &BigRational)> {
        if self.0.len() == 1 {
            self.0.iter().next()
        } else {
            None
        }
    }

    fn leading(&self) -> (&Mono, &BigRational) {
        self.0.iter().next_back().expect("leading term of zero polynomial")
    }

    fn add_term(&mut self, m: Mono, c: BigRational) {
        if c.is_zero() {
            return;
        }
        match self.0.get_mut(&m) {
            Some(v) => {
                *v += c;
                if v.is_zero() {
                    self.0.remove(&m);
                }
            }
            None => {
                self.0.insert(m, c);
            }
        }
    }

    pub(crate) fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (m, c) in &other.0 {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub(crate) fn neg(&self) -> Poly {
        Poly(self.0.iter().map(|(m, c)| (m.clone(), -c)).collect())
    }

    pub(crate) fn scale(&self, s: &BigRational) -> Poly {
        if s.is_zero() {
            return Poly::zero();
        }
        Poly(self.0.iter().map(|(m, c)| (m.clone(), c * s)).collect())
    }

    fn mul_term_raw(&self, m: &Mono, c: &BigRational) -> Poly {
        Poly(self.0.iter().map(|(k, v)| (k.mul(m), v * c)).collect())
    }

    fn mul_raw(&self, other: &Poly) -> Poly {
        let mut out = Poly::zero();
        for (m1, c1) in &self.0 {
            for (m2, c2) in &other.0 {
                out.add_term(m1.mul(m2), c1 * c2);
            }
        }
        out
    }

    /// Product followed by radical/Pythagorean reduction.
    pub(crate) fn mul(&self, other: &Poly) -> Poly {
        self.mul_raw(other).reduce_overflow()
    }

    fn pow_u(&self, k: u32) -> Poly {
        let mut acc = Poly::constant(BigRational::one());
        for _ in 0..k {
            acc = acc.mul(self);
        }
        acc
    }

    fn needs_reduction(m: &Mono) -> bool {
        m.0.iter().any(|(a, e)| match a {
            Atom::Root(_) => *e >= r64(1),
            Atom::Func(Func::Cos, _) => *e >= r64(2),
            _ => false,
        })
    }

    /// Multiplies out radical exponents >= 1 and rewrites cos^2.
    pub(crate) fn reduce_overflow(self) -> Poly {
        if !self.0.keys().any(Self::needs_reduction) {
            return self;
        }
        let mut out = Poly::zero();
        for (m, c) in self.0 {
            if !Self::needs_reduction(&m) {
                out.add_term(m, c);
                continue;
            }
            let mut kept = BTreeMap::new();
            let mut extra: Vec<Poly> = Vec::new();
            for (a, e) in m.0 {
                match &a {
                    Atom::Root(base) if e >= r64(1) => {
                        let k = e.floor();
                        let rest = e - k;
                        for _ in 0..k.to_integer() {
                            extra.push(base.clone());
                        }
                        if !rest.is_zero() {
                            kept.insert(a, rest);
                        }
                    }
                    Atom::Func(Func::Cos, args) if e >= r64(2) => {
                        let mut e = e;
                        let sin = Atom::Func(Func::Sin, args.clone());
                        let one_minus_sin2 = Poly::constant(BigRational::one())
                            .add(&Poly::term(Mono::atom(sin, r64(2)), big(-1)));
                        while e >= r64(2) {
                            extra.push(one_minus_sin2.clone());
                            e -= r64(2);
                        }
                        if !e.is_zero() {
                            kept.insert(a, e);
                        }
                    }
                    _ => {
                        kept.insert(a, e);
                    }
                }
            }
            let mut t = Poly::term(Mono(kept), c);
            for p in extra {
                t = t.mul(&p);
            }
            out = out.add(&t);
        }
        out
    }

    fn min_degree(&self) -> Rational64 {
        self.0.keys().next().map(|m| m.degree()).unwrap_or_else(|| r64(0))
    }

    /// Smallest and largest exponent of each atom over all terms, with
    /// absent atoms counting as exponent zero.
    fn exponent_spans(&self) -> BTreeMap<&Atom, (Rational64, Rational64)> {
        let mut out: BTreeMap<&Atom, (Rational64, Rational64)> = BTreeMap::new();
        for m in self.0.keys() {
            for (a, e) in &m.0 {
                let s = out.entry(a).or_insert((*e, *e));
                s.0 = s.0.min(*e);
                s.1 = s.1.max(*e);
            }
        }
        for (a, s) in out.iter_mut() {
            if self.0.keys().any(|m| !m.0.contains_key(*a)) {
                s.0 = s.0.min(r64(0));
                s.1 = s.1.max(r64(0));
            }
        }
        out
    }

    /// Exact formal division; `None` when `f` does not divide `self`.
    pub(crate) fn div_exact(&self, f: &Poly) -> Option<Poly> {
        if f.is_zero() {
            return None;
        }
        if self.is_zero() {
            return Some(Poly::zero());
        }
        if let Some(c) = f.as_constant() {
            return Some(self.scale(&c.recip()));
        }
        let (lm_f, lc_f) = f.leading();
        let lm_f = lm_f.clone();
        let lc_f = lc_f.clone();
        let floor = self.min_degree() - f.min_degree();
        // Per-atom exponent window of any exact quotient; Laurent division
        // would otherwise wander through infinitely many same-degree terms.
        let (ss, fs) = (self.exponent_spans(), f.exponent_spans());
        let mut window: BTreeMap<&Atom, (Rational64, Rational64)> = BTreeMap::new();
        for a in ss.keys().chain(fs.keys()) {
            let (slo, shi) = ss.get(a).copied().unwrap_or((r64(0), r64(0)));
            let (flo, fhi) = fs.get(a).copied().unwrap_or((r64(0), r64(0)));
            let (lo, hi) = (slo - flo, shi - fhi);
            if lo > hi {
                return None;
            }
            window.insert(*a, (lo, hi));
        }
        let inside = |m: &Mono| {
            window.iter().all(|(a, (lo, hi))| {
                let e = m.0.get(*a).copied().unwrap_or_else(|| r64(0));
                *lo <= e && e <= *hi
            }) && m.0.keys().all(|a| window.contains_key(a))
        };
        let mut r = self.clone();
        let mut q = Poly::zero();
        let cap = 20 * (self.0.len() + 1) * (f.0.len() + 1) + 200;
        for _ in 0..cap {
            if r.is_zero() {
                return Some(q);
            }
            let (lm_r, lc_r) = r.leading();
            let m = lm_r.div(&lm_f);
            if !m.is_valid_quotient() || m.degree() < floor || !inside(&m) {
                return None;
            }
            let c = lc_r / &lc_f;
            let sub = f.mul_term_raw(&m, &c);
            q.add_term(m, c);
            r = r.add(&sub.neg());
        }
        None
    }

    /// Splits `self = c * m * p0` with `p0` monic and free of monomial content.
    fn content(&self) -> (BigRational, Mono, Poly) {
        let mut mins: BTreeMap<Atom, Rational64> = BTreeMap::new();
        let mut first = true;
        for m in self.0.keys() {
            if first {
                mins = m.0.clone();
                first = false;
                continue;
            }
            let keys: Vec<Atom> = mins.keys().cloned().chain(m.0.keys().cloned()).collect();
            for k in keys {
                let a = mins.get(&k).copied().unwrap_or_else(|| r64(0));
                let b = m.0.get(&k).copied().unwrap_or_else(|| r64(0));
                let v = a.min(b);
                if v.is_zero() {
                    mins.remove(&k);
                } else {
                    mins.insert(k, v);
                }
            }
        }
        // Radical atoms can only be pulled out with positive exponent.
        mins.retain(|a, e| !matches!(a, Atom::Root(_)) || *e > r64(0));
        let m = Mono(mins);
        let shifted = Poly(self.0.iter().map(|(k, v)| (k.div(&m), v.clone())).collect());
        if shifted.0.keys().any(Self::needs_reduction) {
            // dividing out negative powers can expose cos^2 or whole radicals
            let (c, m2, p0) = shifted.reduce_overflow().content();
            return (c, m.mul(&m2), p0);
        }
        let lc = shifted.leading().1.clone();
        let p0 = shifted.scale(&lc.recip());
        (lc, m, p0)
    }

    pub(crate) fn vars(&self, out: &mut std::collections::BTreeSet<String>) {
        for m in self.0.keys() {
            for a in m.0.keys() {
                a.vars(out);
            }
        }
    }
}

impl Atom {
    pub(crate) fn vars(&self, out: &mut std::collections::BTreeSet<String>) {
        match self {
            Atom::Var(v) => {
                out.insert(v.clone());
            }
            Atom::Func(_, args) => args.iter().for_each(|a| out.extend(a.vars())),
            Atom::Root(p) => p.vars(out),
        }
    }
}

// ---------------------------------------------------------------------------
// Rational functions

impl RatFunc {
    pub(crate) fn zero() -> Self {
        RatFunc::default()
    }

    pub(crate) fn one() -> Self {
        Self::constant(BigRational::one())
    }

    pub(crate) fn constant(c: BigRational) -> Self {
        Self::from_poly(Poly::constant(c))
    }

    pub(crate) fn from_poly(p: Poly) -> Self {
        RatFunc { num: p, den: Vec::new() }
    }

    pub(crate) fn var(name: &str) -> Self {
        Self::from_poly(Poly::term(Mono::atom(Atom::Var(name.to_string()), r64(1)), BigRational::one()))
    }

    fn atom(a: Atom, e: Rational64) -> Self {
        Self::from_poly(Poly::term(Mono::atom(a, e), BigRational::one()).reduce_overflow())
    }

    pub(crate) fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub(crate) fn as_constant(&self) -> Option<BigRational> {
        if self.den.is_empty() {
            self.num.as_constant()
        } else {
            None
        }
    }

    pub(crate) fn vars(&self) -> std::collections::BTreeSet<String> {
        let mut out = std::collections::BTreeSet::new();
        self.num.vars(&mut out);
        for (f, _) in &self.den {
            f.vars(&mut out);
        }
        out
    }

    pub(crate) fn neg(&self) -> RatFunc {
        RatFunc {
            num: self.num.neg(),
            den: self.den.clone(),
        }
    }

    pub(crate) fn scale(&self, c: &BigRational) -> RatFunc {
        if c.is_zero() {
            return RatFunc::zero();
        }
        RatFunc {
            num: self.num.scale(c),
            den: self.den.clone(),
        }
    }

    fn den_mult(&self, f: &Poly) -> u32 {
        self.den
            .iter()
            .find(|(g, _)| g == f)
            .map(|(_, k)| *k)
            .unwrap_or(0)
    }

    pub(crate) fn add(&self, other: &RatFunc) -> RatFunc {
        if self.is_zero() {
            return other.clone();
        }
        if other.is_zero() {
            return self.clone();
        }
        if self.den == other.den {
            let mut out = RatFunc {
                num: self.num.add(&other.num),
                den: self.den.clone(),
            };
            out.cancel();
            return out;
        }
        let mut den: Vec<(Poly, u32)> = self.den.clone();
        for (f, k) in &other.den {
            match den.iter_mut().find(|(g, _)| g == f) {
                Some(entry) => entry.1 = entry.1.max(*k),
                None => den.push((f.clone(), *k)),
            }
        }
        den.sort();
        let lift = |r: &RatFunc| -> Poly {
            let mut p = r.num.clone();
            for (f, k) in &den {
                let missing = k - r.den_mult(f);
                if missing > 0 {
                    p = p.mul(&f.pow_u(missing));
                }
            }
            p
        };
        let num = lift(self).add(&lift(other));
        let mut out = RatFunc { num, den };
        out.cancel();
        out
    }

    pub(crate) fn sub(&self, other: &RatFunc) -> RatFunc {
        self.add(&other.neg())
    }

    pub(crate) fn mul(&self, other: &RatFunc) -> RatFunc {
        if self.is_zero() || other.is_zero() {
            return RatFunc::zero();
        }
        let mut out = RatFunc {
            num: self.num.mul(&other.num),
            den: self.den.clone(),
        };
        for (f, k) in &other.den {
            match out.den.iter_mut().find(|(g, _)| g == f) {
                Some(entry) => entry.1 += k,
                None => out.den.push((f.clone(), *k)),
            }
        }
        out.den.sort();
        out.cancel();
        out
    }

    /// Removes denominator factors that divide the numerator.
    fn cancel(&mut self) {
        if self.num.is_zero() {
            self.den.clear();
            return;
        }
        let mut den = std::mem::take(&mut self.den);
        for (f, k) in den.iter_mut() {
            while *k > 0 {
                match self.num.div_exact(f) {
                    Some(q) => {
                        self.num = q.reduce_overflow();
                        *k -= 1;
                    }
                    None => break,
                }
            }
        }
        den.retain(|(_, k)| *k > 0);
        self.den = den;
    }

    /// Inverse of a monomial, as a rational function.
    fn inv_mono(m: &Mono) -> RatFunc {
        let mut plain = BTreeMap::new();
        let mut out_den: Vec<Poly> = Vec::new();
        for (a, e) in &m.0 {
            match a {
                Atom::Root(base) => {
                    // [B]^-e = [B]^(1-e) / B for 0 < e < 1
                    let k = e.ceil();
                    let rest = k - e;
                    if !rest.is_zero() {
                        plain.insert(a.clone(), rest);
                    }
                    for _ in 0..k.to_integer() {
                        out_den.push(base.clone());
                    }
                }
                _ => {
                    plain.insert(a.clone(), -e);
                }
            }
        }
        let mut out = RatFunc::from_poly(Poly::term(Mono(plain), BigRational::one()));
        for b in out_den {
            out.divide_by_poly(&b, 1);
        }
        out
    }

    /// Divides `self` by `f^k` for a polynomial `f`.
    fn divide_by_poly(&mut self, f: &Poly, k: u32) {
        if k == 0 {
            return;
        }
        let (c, m, f0) = f.content();
        let mut scale = RatFunc::constant(c.recip().pow(k as i32));
        if !m.is_one() {
            let inv = Self::inv_mono(&m);
            for _ in 0..k {
                scale = scale.mul(&inv);
            }
        }
        let mut base = std::mem::take(self);
        if f0.as_constant().is_none() {
            insert_factor(&mut base.den, f0, k);
            base.den.sort();
        }
        base.cancel();
        *self = base.mul(&scale);
    }

    pub(crate) fn recip(&self) -> Result<RatFunc> {
        if self.is_zero() {
            return Err(Error::DivisionByZero);
        }
        let mut num = Poly::constant(BigRational::one());
        for (f, k) in &self.den {
            num = num.mul(&f.pow_u(*k));
        }
        let mut out = RatFunc::from_poly(num);
        out.divide_by_poly(&self.num, 1);
        Ok(out)
    }

    pub(crate) fn div(&self, other: &RatFunc) -> Result<RatFunc> {
        Ok(self.mul(&other.recip()?))
    }

    pub(crate) fn pow(&self, q: Rational64) -> Result<RatFunc> {
        if q.is_zero() {
            return Ok(RatFunc::one());
        }
        if q.is_integer() {
            let n = q.to_integer();
            let base = if n < 0 { self.recip()? } else { self.clone() };
            let mut acc = RatFunc::one();
            let mut sq = base;
            let mut k = n.unsigned_abs();
            while k > 0 {
                if k & 1 == 1 {
                    acc = acc.mul(&sq);
                }
                k >>= 1;
                if k > 0 {
                    sq = sq.mul(&sq);
                }
            }
            return Ok(acc);
        }
        if self.is_zero() {
            return if q > r64(0) {
                Ok(RatFunc::zero())
            } else {
                Err(Error::DivisionByZero)
            };
        }
        let mut out = root_pow(&self.num, q)?;
        for (f, k) in &self.den {
            let k64 = r64(*k as i64);
            let piece = if foldable(k64, q) {
                root_pow(f, -q * k64)?
            } else {
                radical_atom(f.pow_u(*k), -q)
            };
            out = out.mul(&piece);
        }
        Ok(out)
    }

    /// Partial derivative with respect to the named variable.
    pub(crate) fn diff(&self, var: &str) -> RatFunc {
        if !self.mentions(var) {
            return RatFunc::zero();
        }
        let dn = diff_poly(&self.num, var);
        let mut out = dn.mul(&RatFunc {
            num: Poly::constant(BigRational::one()),
            den: self.den.clone(),
        });
        for (f, k) in &self.den {
            let df = diff_poly(f, var);
            if df.is_zero() {
                continue;
            }
            // - k * N * f' / (D * f)
            let mut term = RatFunc {
                num: self.num.scale(&big(-(*k as i64))),
                den: self.den.clone(),
            }
            .mul(&df);
            term.divide_by_poly(f, 1);
            out = out.add(&term);
        }
        out
    }

}

fn insert_factor(den: &mut Vec<(Poly, u32)>, f0: Poly, k: u32) {
    if k == 0 || f0.as_constant().is_some() {
        return;
    }
    if let Some(entry) = den.iter_mut().find(|(g, _)| *g == f0) {
        entry.1 += k;
        return;
    }
    for i in 0..den.len() {
        let g = den[i].0.clone();
        if let Some(h) = f0.div_exact(&g) {
            let h = h.reduce_overflow();
            den[i].1 += k;
            let (_, _, h0) = h.content();
            insert_factor(den, h0, k);
            return;
        }
        if let Some(h) = g.div_exact(&f0) {
            let h = h.reduce_overflow();
            let kg = den[i].1;
            den.remove(i);
            insert_factor(den, f0, k + kg);
            let (_, _, h0) = h.content();
            insert_factor(den, h0, kg);
            return;
        }
    }
    den.push((f0, k));
}

fn diff_poly(p: &Poly, var: &str) -> RatFunc {
    let mut out = RatFunc::zero();
    for (m, c) in &p.0 {
        for (a, e) in &m.0 {
            let da = diff_atom(a, var);
            if da.is_zero() {
                continue;
            }
            // e * c * m / a * da
            let rest = m.div(&Mono::atom(a.clone(), r64(1)));
            let coeff = c * BigRational::new(BigInt::from(*e.numer()), BigInt::from(*e.denom()));
            let (rest, extra) = split_negative_roots(rest);
            let mut t = RatFunc::from_poly(Poly::term(rest, coeff).reduce_overflow()).mul(&da);
            for b in extra {
                t.divide_by_poly(&b, 1);
            }
            out = out.add(&t);
        }
    }
    out
}

/// Root atoms with negative exponent `e - 1` are rewritten as `[B]^e / B`.
fn split_negative_roots(m: Mono) -> (Mono, Vec<Poly>) {
    let mut extra = Vec::new();
    let mut kept = BTreeMap::new();
    for (a, e) in m.0 {
        match &a {
            Atom::Root(b) if e < r64(0) => {
                let k = (-e).ceil();
                let rest = e + k;
                for _ in 0..k.to_integer() {
                    extra.push(b.clone());
                }
                if !rest.is_zero() {
                    kept.insert(a, rest);
                }
            }
            _ => {
                kept.insert(a, e);
            }
        }
    }
    (Mono(kept), extra)
}

fn diff_atom(a: &Atom, var: &str) -> RatFunc {
    match a {
        Atom::Var(v) => {
            if v == var {
                RatFunc::one()
            } else {
                RatFunc::zero()
            }
        }
        Atom::Root(base) => {
            // d/dv of [B] itself (exponent handled by caller): B'
            diff_poly(base, var)
        }
        Atom::Func(f, args) => {
            let arg = &args[0];
            match f {
                Func::Sin => {
                    let d = arg.diff(var);
                    if d.is_zero() {
                        return d;
                    }
                    make_func(Func::Cos, vec![arg.clone()]).unwrap().mul(&d)
                }
                Func::Cos => {
                    let d = arg.diff(var);
                    if d.is_zero() {
                        return d;
                    }
                    make_func(Func::Sin, vec![arg.clone()]).unwrap().neg().mul(&d)
                }
                Func::Exp => {
                    let d = arg.diff(var);
                    if d.is_zero() {
                        return d;
                    }
                    RatFunc::atom(a.clone(), r64(1)).mul(&d)
                }
                Func::Ln => {
                    let d = arg.diff(var);
                    if d.is_zero() {
                        return d;
                    }
                    d.div(arg).unwrap_or_default()
                }
                Func::Atan => {
                    let d = arg.diff(var);
                    if d.is_zero() {
                        return d;
                    }
                    let den = RatFunc::one().add(&arg.mul(arg));
                    d.div(&den).unwrap_or_default()
                }
                Func::Atan2 => {
                    let (y, x) = (&args[0], &args[1]);
                    let dy = y.diff(var);
                    let dx = x.diff(var);
                    if dy.is_zero() && dx.is_zero() {
                        return RatFunc::zero();
                    }
                    let num = x.mul(&dy).sub(&y.mul(&dx));
                    let den = x.mul(x).add(&y.mul(y));
                    num.div(&den).unwrap_or_default()
                }
                Func::Tan | Func::Sqrt => unreachable!("not a canonical atom"),
            }
        }
    }
}

// The derivative of a Root atom must include the exponent chain rule:
// d([B]^e) = e [B]^e B'/B. `diff_poly` treats the atom as `a` with exponent
// `e`, producing `e * [B]^(e-1) * d(atom)` where d(atom) = B'. Since
// [B]^(e-1) = [B]^e / B this is exactly right once negative radical
// exponents are split off, which `split_negative_roots` does.

/// Exact rational p-th root helper: returns `Some(r)` with r^den == n.
fn exact_root(n: &BigInt, den: u32) -> Option<BigInt> {
    if n.is_negative() {
        return None;
    }
    let r = n.nth_root(den);
    if r.pow(den) == *n {
        Some(r)
    } else {
        None
    }
}

/// Raises a positive rational constant to a rational power.
fn const_pow(c: &BigRational, q: Rational64) -> RatFunc {
    debug_assert!(c.is_positive());
    let den = *q.denom() as u32;
    let num = *q.numer();
    let pn = exact_root(c.numer(), den);
    let pd = exact_root(c.denom(), den);
    if let (Some(a), Some(b)) = (pn.clone(), pd.clone()) {
        let r = BigRational::new(a, b);
        return RatFunc::constant(r.pow(num as i32));
    }
    let mut out = RatFunc::one();
    for (part, exact, sign) in [(c.numer(), pn, 1i64), (c.denom(), pd, -1i64)] {
        let e = q * r64(sign);
        let piece = match exact {
            Some(r) => RatFunc::constant(BigRational::from_integer(r).pow((num * sign) as i32)),
            None => {
                if part.is_one() {
                    RatFunc::one()
                } else {
                    radical_atom(Poly::constant(BigRational::from_integer(part.clone())), e)
                }
            }
        };
        out = out.mul(&piece);
    }
    out
}

/// `[base]^e` with the integer part of `e` multiplied out.
fn radical_atom(base: Poly, e: Rational64) -> RatFunc {
    let k = e.floor();
    let frac = e - k;
    let mut out = if frac.is_zero() {
        RatFunc::one()
    } else {
        RatFunc::atom(Atom::Root(base.clone()), frac)
    };
    let k = k.to_integer();
    if k > 0 {
        out = out.mul(&RatFunc::from_poly(base.pow_u(k as u32)));
    } else if k < 0 {
        out.divide_by_poly(&base, (-k) as u32);
    }
    out
}

/// Whether `(a^e)^q` may be folded into `a^(e q)` without losing a sign.
fn foldable(e: Rational64, q: Rational64) -> bool {
    !(e.numer() % 2 == 0 && q.denom() % 2 == 0)
}

fn root_pow(base: &Poly, q: Rational64) -> Result<RatFunc> {
    if base.is_zero() {
        return if q > r64(0) {
            Ok(RatFunc::zero())
        } else {
            Err(Error::DivisionByZero)
        };
    }
    if let Some((m, c)) = base.single_term() {
        return Ok(term_pow(c, m, q));
    }
    let lc = base.leading().1.abs();
    let b0 = base.scale(&lc.recip());
    Ok(const_pow(&lc, q).mul(&radical_atom(b0, q)))
}

fn term_pow(c: &BigRational, m: &Mono, q: Rational64) -> RatFunc {
    let mut out = if c.is_positive() {
        const_pow(c, q)
    } else if q.denom() % 2 == 1 {
        let sign = if q.numer() % 2 == 0 { 1 } else { -1 };
        const_pow(&c.abs(), q).scale(&big(sign))
    } else {
        radical_atom(Poly::constant(c.clone()), q)
    };
    for (a, e) in &m.0 {
        let piece = if foldable(*e, q) {
            match a {
                Atom::Root(b) => radical_atom(b.clone(), *e * q),
                _ => RatFunc::atom(a.clone(), *e * q),
            }
        } else {
            radical_atom(Poly::term(Mono::atom(a.clone(), *e), BigRational::one()), q)
        };
        out = out.mul(&piece);
    }
    out
}

pub(crate) fn make_func(f: Func, args: Vec<RatFunc>) -> Result<RatFunc> {
    let one = RatFunc::one;
    let single_atom = |r: &RatFunc| -> Option<Atom> {
        if !r.den.is_empty() {
            return None;
        }
        let (m, c) = r.num.single_term()?;
        if !c.is_one() || m.0.len() != 1 {
            return None;
        }
        let (a, e) = m.0.iter().next()?;
        (*e == r64(1)).then(|| a.clone())
    };
    let arg = args[0].clone();
    Ok(match f {
        Func::Sqrt => arg.pow(Rational64::new(1, 2))?,
        Func::Tan => {
            let s = make_func(Func::Sin, vec![arg.clone()])?;
            let c = make_func(Func::Cos, vec![arg])?;
            s.div(&c)?
        }
        Func::Sin | Func::Cos => {
            if arg.is_zero() {
                return Ok(if f == Func::Sin { RatFunc::zero() } else { one() });
            }
            match single_atom(&arg) {
                Some(Atom::Func(Func::Atan2, inner)) => {
                    let (y, x) = (&inner[0], &inner[1]);
                    let r2 = x.mul(x).add(&y.mul(y));
                    let top = if f == Func::Sin { y } else { x };
                    top.mul(&r2.pow(Rational64::new(-1, 2))?)
                }
                Some(Atom::Func(Func::Atan, inner)) => {
                    let u = &inner[0];
                    let r2 = one().add(&u.mul(u));
                    let top = if f == Func::Sin { u.clone() } else { one() };
                    top.mul(&r2.pow(Rational64::new(-1, 2))?)
                }
                _ => RatFunc::atom(Atom::Func(f, vec![arg]), r64(1)),
            }
        }
        Func::Atan => {
            if arg.is_zero() {
                RatFunc::zero()
            } else {
                RatFunc::atom(Atom::Func(f, vec![arg]), r64(1))
            }
        }
        Func::Atan2 => {
            let x = args[1].clone();
            if arg.is_zero() && x.as_constant().map(|c| c.is_positive()).unwrap_or(false) {
                RatFunc::zero()
            } else {
                RatFunc::atom(Atom::Func(f, vec![arg, x]), r64(1))
            }
        }
        Func::Exp => {
            if arg.is_zero() {
                one()
            } else {
                RatFunc::atom(Atom::Func(f, vec![arg]), r64(1))
            }
        }
        Func::Ln => {
            if arg.as_constant().map(|c| c.is_one()).unwrap_or(false) {
                RatFunc::zero()
            } else {
                RatFunc::atom(Atom::Func(f, vec![arg]), r64(1))
            }
        }
    })
}

// ---------------------------------------------------------------------------
// Conversion to and from expression trees

pub(crate) fn from_expr(e: &Expr) -> Result<RatFunc> {
    Ok(match e {
        Expr::Const(c) => RatFunc::constant(c.clone()),
        Expr::Var(v) => RatFunc::var(v),
        Expr::Sum(ts) => {
            let mut acc = RatFunc::zero();
            for t in ts {
                acc = acc.add(&from_expr(t)?);
            }
            acc
        }
        Expr::Product(fs) => {
            let mut acc = RatFunc::one();
            for f in fs {
                acc = acc.mul(&from_expr(f)?);
            }
            acc
        }
        Expr::Neg(a) => from_expr(a)?.neg(),
        Expr::Quotient(a, b) => from_expr(a)?.mul(&recip_expr(b)?),
        Expr::Pow(b, q) => from_expr(b)?.pow(*q)?,
        Expr::Func(f, args) => {
            let args = args.iter().map(from_expr).collect::<Result<Vec<_>>>()?;
            make_func(*f, args)?
        }
    })
}

/// Reciprocal that distributes over products so that factored
/// denominators keep their factor structure.
fn recip_expr(e: &Expr) -> Result<RatFunc> {
    match e {
        Expr::Product(fs) => {
            let mut acc = RatFunc::one();
            for f in fs {
                acc = acc.mul(&recip_expr(f)?);
            }
            Ok(acc)
        }
        Expr::Pow(b, q) if q.is_integer() && *q > r64(0) => recip_expr(b)?.pow(*q),
        Expr::Quotient(a, b) => Ok(from_expr(b)?.mul(&recip_expr(a)?)),
        Expr::Neg(a) => Ok(recip_expr(a)?.neg()),
        _ => from_expr(e)?.recip(),
    }
}

pub(crate) fn to_expr(r: &RatFunc) -> Expr {
    let num = poly_to_expr(&r.num);
    if r.den.is_empty() {
        return num;
    }
    let mut fs: Vec<Expr> = r
        .den
        .iter()
        .map(|(f, k)| {
            let fe = poly_to_expr(f);
            if *k == 1 {
                fe
            } else {
                Expr::Pow(Box::new(fe), r64(*k as i64))
            }
        })
        .collect();
    let den = if fs.len() == 1 { fs.pop().unwrap() } else { Expr::Product(fs) };
    Expr::Quotient(Box::new(num), Box::new(den))
}

fn atom_to_expr(a: &Atom) -> Expr {
    match a {
        Atom::Var(v) => Expr::Var(v.clone()),
        Atom::Func(f, args) => Expr::Func(*f, args.iter().map(to_expr).collect()),
        Atom::Root(b) => poly_to_expr(b),
    }
}

fn atom_pow_expr(a: &Atom, e: Rational64) -> Expr {
    let base = atom_to_expr(a);
    if e == r64(1) {
        base
    } else if e == Rational64::new(1, 2) {
        Expr::Func(Func::Sqrt, vec![base])
    } else {
        Expr::Pow(Box::new(base), e)
    }
}

fn term_to_expr(m: &Mono, c: &BigRational) -> Expr {
    if m.is_one() {
        let t = Expr::Const(c.abs());
        return if c.is_negative() { Expr::Neg(Box::new(t)) } else { t };
    }
    let mut top: Vec<Expr> = Vec::new();
    let mut bottom: Vec<Expr> = Vec::new();
    let n = c.numer().abs();
    if !n.is_one() || m.is_one() {
        top.push(Expr::Const(BigRational::from_integer(n)));
    }
    if !c.denom().is_one() {
        bottom.push(Expr::Const(BigRational::from_integer(c.denom().clone())));
    }
    for (a, e) in &m.0 {
        if *e > r64(0) {
            top.push(atom_pow_expr(a, *e));
        } else {
            bottom.push(atom_pow_expr(a, -*e));
        }
    }
    let pack = |mut v: Vec<Expr>| match v.len() {
        0 => Expr::Const(BigRational::one()),
        1 => v.pop().unwrap(),
        _ => Expr::Product(v),
    };
    let t = if bottom.is_empty() {
        pack(top)
    } else {
        Expr::Quotient(Box::new(pack(top)), Box::new(pack(bottom)))
    };
    if c.is_negative() {
        Expr::Neg(Box::new(t))
    } else {
        t
    }
}

pub(crate) fn poly_to_expr(p: &Poly) -> Expr {
    if p.is_zero() {
        return Expr::Const(BigRational::zero());
    }
    let mut terms: Vec<Expr> = p.0.iter().rev().map(|(m, c)| term_to_expr(m, c)).collect();
    if terms.len() == 1 {
        terms.pop().unwrap()
    } else {
        Expr::Sum(terms)
    }
}


// ---------------------------------------------------------------------------
// Substitution

pub(crate) type Bindings = BTreeMap<String, RatFunc>;

impl RatFunc {
    pub(crate) fn subst(&self, b: &Bindings) -> Result<RatFunc> {
        if b.is_empty() || !self.vars().iter().any(|v| b.contains_key(v)) {
            return Ok(self.clone());
        }
        let mut out = subst_poly(&self.num, b)?;
        for (f, k) in &self.den {
            let fs = subst_poly(f, b)?;
            out = out.div(&fs.pow(r64(*k as i64))?)?;
        }
        Ok(out)
    }
}

fn subst_poly(p: &Poly, b: &Bindings) -> Result<RatFunc> {
    let mut out = RatFunc::zero();
    for (m, c) in &p.0 {
        let mut t = RatFunc::constant(c.clone());
        for (a, e) in &m.0 {
            let piece = match a {
                Atom::Var(v) => match b.get(v) {
                    Some(r) => r.pow(*e)?,
                    None => RatFunc::atom(a.clone(), *e),
                },
                Atom::Func(f, args) => {
                    let args = args.iter().map(|r| r.subst(b)).collect::<Result<Vec<_>>>()?;
                    make_func(*f, args)?.pow(*e)?
                }
                Atom::Root(base) => subst_poly(base, b)?.pow(*e)?,
            };
            t = t.mul(&piece);
        }
        out = out.add(&t);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Structural queries used by the normalization solver

impl Mono {
    fn mentions(&self, var: &str) -> bool {
        let mut vs = std::collections::BTreeSet::new();
        for a in self.0.keys() {
            a.vars(&mut vs);
        }
        vs.contains(var)
    }
}

impl Poly {
    /// Groups terms by the exponents of `atoms`. Returns `None` when `var`
    /// also occurs anywhere other than in a direct factor `atoms[i]^e`.
    pub(crate) fn collect_atoms(&self, atoms: &[Atom], var: &str) -> Option<BTreeMap<Vec<Rational64>, Poly>> {
        let mut out: BTreeMap<Vec<Rational64>, Poly> = BTreeMap::new();
        for (m, c) in &self.0 {
            let mut rest = m.0.clone();
            let key: Vec<Rational64> = atoms
                .iter()
                .map(|a| rest.remove(a).unwrap_or_else(|| r64(0)))
                .collect();
            let rm = Mono(rest);
            if rm.mentions(var) {
                return None;
            }
            out.entry(key).or_insert_with(Poly::zero).add_term(rm, c.clone());
        }
        out.retain(|_, p| !p.is_zero());
        Some(out)
    }

    pub(crate) fn mentions(&self, var: &str) -> bool {
        self.0.keys().any(|m| m.mentions(var))
    }
}

impl RatFunc {
    pub(crate) fn numerator(&self) -> RatFunc {
        RatFunc::from_poly(self.num.clone())
    }

    pub(crate) fn mentions(&self, var: &str) -> bool {
        self.num.mentions(var) || self.den.iter().any(|(f, _)| f.mentions(var))
    }

    /// Rough size measure used to pick among equivalent candidates.
    pub(crate) fn size(&self) -> usize {
        self.num.0.len() + self.den.iter().map(|(f, _)| f.0.len()).sum::<usize>()
    }
}
