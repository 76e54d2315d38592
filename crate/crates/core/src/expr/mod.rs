//! Symbolic expressions: parsing, printing, differentiation, substitution,
//! simplification, numeric evaluation and randomized equality testing.

pub(crate) mod canon;
mod display;
mod eval;
mod parse;
mod sample;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops;

use num_bigint::BigInt;
use num_rational::{BigRational, Rational64};
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use eval::{Compiled, EvalOptions};
pub use sample::{Sampler, DEFAULT_SEED};

pub(crate) use canon::RatFunc;

/// Elementary functions understood by the parser and evaluator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Atan,
    Atan2,
    Sqrt,
    Exp,
    Ln,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Atan => "atan",
            Func::Atan2 => "atan2",
            Func::Sqrt => "sqrt",
            Func::Exp => "exp",
            Func::Ln => "ln",
        }
    }

    pub fn from_name(s: &str) -> Option<Func> {
        Some(match s {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "atan" => Func::Atan,
            "atan2" => Func::Atan2,
            "sqrt" => Func::Sqrt,
            "exp" => Func::Exp,
            "ln" => Func::Ln,
            _ => return None,
        })
    }

    pub fn arity(self) -> usize {
        if self == Func::Atan2 {
            2
        } else {
            1
        }
    }
}

/// Immutable expression tree.
///
/// Trees built by hand or by [`parse_raw`] are kept as written;
/// [`Expr::simplify`] produces the canonical form.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Expr {
    Const(BigRational),
    Var(String),
    Sum(Vec<Expr>),
    Product(Vec<Expr>),
    Pow(Box<Expr>, Rational64),
    Quotient(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Func(Func, Vec<Expr>),
}

impl Expr {
    pub fn int(n: i64) -> Expr {
        Expr::Const(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn rational(n: i64, d: i64) -> Expr {
        Expr::Const(BigRational::new(BigInt::from(n), BigInt::from(d)))
    }

    pub fn zero() -> Expr {
        Expr::int(0)
    }

    pub fn one() -> Expr {
        Expr::int(1)
    }

    pub fn var(name: impl Into<String>) -> Expr {
        Expr::Var(name.into())
    }

    pub fn func(f: Func, args: Vec<Expr>) -> Expr {
        Expr::Func(f, args)
    }

    pub fn sqrt(self) -> Expr {
        Expr::Func(Func::Sqrt, vec![self])
    }

    pub fn pow(self, q: Rational64) -> Expr {
        Expr::Pow(Box::new(self), q)
    }

    pub fn powi(self, n: i64) -> Expr {
        self.pow(Rational64::from_integer(n))
    }

    /// The rational value of a constant tree, if it is one.
    pub fn as_rational(&self) -> Option<BigRational> {
        match self {
            Expr::Const(c) => Some(c.clone()),
            Expr::Neg(a) => a.as_rational().map(|c| -c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Const(c) if c.is_zero())
    }

    pub fn is_one(&self) -> bool {
        matches!(self, Expr::Const(c) if c.is_one())
    }

    /// Names of all variables occurring in the tree.
    pub fn vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(v) => {
                out.insert(v.clone());
            }
            Expr::Sum(xs) | Expr::Product(xs) | Expr::Func(_, xs) => {
                xs.iter().for_each(|x| x.collect_vars(out))
            }
            Expr::Pow(a, _) | Expr::Neg(a) => a.collect_vars(out),
            Expr::Quotient(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    pub fn mentions(&self, v: &str) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::Var(w) => w == v,
            Expr::Sum(xs) | Expr::Product(xs) | Expr::Func(_, xs) => xs.iter().any(|x| x.mentions(v)),
            Expr::Pow(a, _) | Expr::Neg(a) => a.mentions(v),
            Expr::Quotient(a, b) => a.mentions(v) || b.mentions(v),
        }
    }

    /// Canonical form.
    pub fn simplify(&self) -> Result<Expr> {
        Ok(canon::to_expr(&self.canon()?))
    }

    pub(crate) fn canon(&self) -> Result<RatFunc> {
        canon::from_expr(self)
    }

    pub(crate) fn from_canon(r: &RatFunc) -> Expr {
        canon::to_expr(r)
    }

    /// Exact partial derivative, simplified.
    pub fn diff(&self, v: &str) -> Result<Expr> {
        if !self.mentions(v) {
            return Ok(Expr::zero());
        }
        Ok(canon::to_expr(&self.canon()?.diff(v)))
    }

    /// Simultaneous substitution followed by simplification.
    pub fn substitute(&self, bindings: &BTreeMap<String, Expr>) -> Result<Expr> {
        let b = bindings
            .iter()
            .map(|(k, v)| Ok((k.clone(), v.canon()?)))
            .collect::<Result<canon::Bindings>>()?;
        Ok(canon::to_expr(&self.canon()?.subst(&b)?))
    }

    /// Single-point evaluation; see [`Compiled`] for repeated evaluation.
    pub fn eval(&self, point: &BTreeMap<String, f64>) -> Result<f64> {
        eval::eval_tree(self, point, &EvalOptions::default())
    }

    pub fn eval_complex(
        &self,
        point: &BTreeMap<String, num_complex::Complex64>,
    ) -> Result<num_complex::Complex64> {
        eval::eval_complex(self, point, &EvalOptions::default())
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        display::write_expr(self, f)
    }
}

impl From<i64> for Expr {
    fn from(n: i64) -> Expr {
        Expr::int(n)
    }
}

impl From<&str> for Expr {
    fn from(s: &str) -> Expr {
        Expr::var(s)
    }
}

impl ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        match self {
            Expr::Sum(mut xs) => {
                xs.push(rhs);
                Expr::Sum(xs)
            }
            lhs => Expr::Sum(vec![lhs, rhs]),
        }
    }
}

impl ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        self + (-rhs)
    }
}

impl ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        match self {
            Expr::Product(mut xs) => {
                xs.push(rhs);
                Expr::Product(xs)
            }
            lhs => Expr::Product(vec![lhs, rhs]),
        }
    }
}

impl ops::Div for Expr {
    type Output = Expr;
    fn div(self, rhs: Expr) -> Expr {
        Expr::Quotient(Box::new(self), Box::new(rhs))
    }
}

impl ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::Neg(Box::new(self))
    }
}

/// Role of a registered variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VarKind {
    Base,
    Fiber,
    Jet,
    GroupParam,
    Auxiliary,
}

/// Ordered registry of variable names.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct VarTable {
    names: Vec<(String, VarKind)>,
}

impl VarTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, kind: VarKind) -> Result<()> {
        let name = name.into();
        if !is_identifier(&name) {
            return Err(Error::validation("vars", format!("`{name}` is not an identifier")));
        }
        if Func::from_name(&name).is_some() {
            return Err(Error::validation("vars", format!("`{name}` is a reserved function name")));
        }
        if self.contains(&name) {
            return Err(Error::validation("vars", format!("duplicate variable `{name}`")));
        }
        self.names.push((name, kind));
        Ok(())
    }

    pub fn with(mut self, names: &[&str], kind: VarKind) -> Result<Self> {
        for n in names {
            self.add(*n, kind)?;
        }
        Ok(self)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.names.iter().any(|(n, _)| n == name)
    }

    pub fn kind(&self, name: &str) -> Option<VarKind> {
        self.names.iter().find(|(n, _)| n == name).map(|(_, k)| *k)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.names.iter().map(|(n, _)| n.as_str())
    }

    pub fn of_kind(&self, kind: VarKind) -> Vec<String> {
        self.names
            .iter()
            .filter(|(_, k)| *k == kind)
            .map(|(n, _)| n.clone())
            .collect()
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut cs = s.chars();
    matches!(cs.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && cs.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Parses and simplifies `text`; every identifier must be registered in `vars`.
pub fn parse(text: &str, vars: &VarTable) -> Result<Expr> {
    parse_raw(text, Some(vars))?.simplify()
}

/// Parses without registry checks and without simplification.
pub fn parse_raw(text: &str, vars: Option<&VarTable>) -> Result<Expr> {
    parse::Parser::new(text, vars).parse()
}

/// Parses and simplifies, accepting any identifier.
pub fn parse_any(text: &str) -> Result<Expr> {
    parse_raw(text, None)?.simplify()
}

pub fn diff(e: &Expr, v: &str) -> Result<Expr> {
    e.diff(v)
}

pub fn substitute(e: &Expr, bindings: &BTreeMap<String, Expr>) -> Result<Expr> {
    e.substitute(bindings)
}

pub fn simplify(e: &Expr) -> Result<Expr> {
    e.simplify()
}

pub fn eval(e: &Expr, point: &BTreeMap<String, f64>) -> Result<f64> {
    e.eval(point)
}

/// Randomized equality test on the default sampling box.
pub fn probably_equal(e1: &Expr, e2: &Expr, trials: usize, tol: f64) -> Result<bool> {
    Sampler::default().probably_equal(e1, e2, trials, tol)
}
#[cfg(test)]
mod tests;

/// Exact rational with the same shortest decimal representation as `x`.
pub fn rational_from_f64(x: f64) -> BigRational {
    parse_raw(&format!("{x:e}"), None)
        .ok()
        .and_then(|e| e.simplify().ok())
        .and_then(|e| e.as_rational())
        .unwrap_or_default()
}
