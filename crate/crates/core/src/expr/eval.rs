use std::collections::BTreeMap;

use num_complex::Complex64;
use num_rational::Rational64;
use num_traits::ToPrimitive;

use super::{Expr, Func};
use crate::error::{Error, Result};

/// Numeric guard rails for evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalOptions {
    /// Denominators with magnitude below this are a domain error.
    pub eps: f64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions { eps: 1e-12 }
    }
}

fn domain(e: &Expr) -> Error {
    let mut s = e.to_string();
    if s.len() > 200 {
        s.truncate(200);
        s.push_str("...");
    }
    Error::Domain(s)
}

fn real_pow(x: f64, q: Rational64) -> Option<f64> {
    let (p, d) = (*q.numer(), *q.denom());
    if d == 1 {
        if x == 0.0 && p < 0 {
            return None;
        }
        return Some(x.powi(p as i32));
    }
    if x < 0.0 {
        if d % 2 == 0 {
            return None;
        }
        let mag = (-x).powf(p as f64 / d as f64);
        return Some(if p % 2 == 0 { mag } else { -mag });
    }
    if x == 0.0 && p < 0 {
        return None;
    }
    Some(x.powf(p as f64 / d as f64))
}

pub(super) fn eval_tree(e: &Expr, point: &BTreeMap<String, f64>, opt: &EvalOptions) -> Result<f64> {
    let v = match e {
        Expr::Const(c) => c.to_f64().unwrap_or(f64::NAN),
        Expr::Var(name) => *point
            .get(name)
            .ok_or_else(|| Error::UnboundVariable(name.clone()))?,
        Expr::Sum(xs) => {
            let mut acc = 0.0;
            for x in xs {
                acc += eval_tree(x, point, opt)?;
            }
            acc
        }
        Expr::Product(xs) => {
            let mut acc = 1.0;
            for x in xs {
                acc *= eval_tree(x, point, opt)?;
            }
            acc
        }
        Expr::Neg(a) => -eval_tree(a, point, opt)?,
        Expr::Quotient(a, b) => {
            let d = eval_tree(b, point, opt)?;
            if d.abs() < opt.eps {
                return Err(domain(e));
            }
            eval_tree(a, point, opt)? / d
        }
        Expr::Pow(b, q) => {
            let x = eval_tree(b, point, opt)?;
            if *q.numer() < 0 && x.abs() < opt.eps {
                return Err(domain(e));
            }
            real_pow(x, *q).ok_or_else(|| domain(e))?
        }
        Expr::Func(f, args) => {
            let x = eval_tree(&args[0], point, opt)?;
            match f {
                Func::Sin => x.sin(),
                Func::Cos => x.cos(),
                Func::Tan => {
                    if x.cos().abs() < opt.eps {
                        return Err(domain(e));
                    }
                    x.tan()
                }
                Func::Atan => x.atan(),
                Func::Atan2 => {
                    let xx = eval_tree(&args[1], point, opt)?;
                    if x == 0.0 && xx == 0.0 {
                        return Err(domain(e));
                    }
                    x.atan2(xx)
                }
                Func::Sqrt => {
                    if x < 0.0 {
                        return Err(domain(e));
                    }
                    x.sqrt()
                }
                Func::Exp => x.exp(),
                Func::Ln => {
                    if x <= 0.0 {
                        return Err(domain(e));
                    }
                    x.ln()
                }
            }
        }
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(domain(e))
    }
}

pub(super) fn eval_complex(
    e: &Expr,
    point: &BTreeMap<String, Complex64>,
    opt: &EvalOptions,
) -> Result<Complex64> {
    let v = match e {
        Expr::Const(c) => Complex64::new(c.to_f64().unwrap_or(f64::NAN), 0.0),
        Expr::Var(name) => *point
            .get(name)
            .ok_or_else(|| Error::UnboundVariable(name.clone()))?,
        Expr::Sum(xs) => {
            let mut acc = Complex64::new(0.0, 0.0);
            for x in xs {
                acc += eval_complex(x, point, opt)?;
            }
            acc
        }
        Expr::Product(xs) => {
            let mut acc = Complex64::new(1.0, 0.0);
            for x in xs {
                acc *= eval_complex(x, point, opt)?;
            }
            acc
        }
        Expr::Neg(a) => -eval_complex(a, point, opt)?,
        Expr::Quotient(a, b) => {
            let d = eval_complex(b, point, opt)?;
            if d.norm() < opt.eps {
                return Err(domain(e));
            }
            eval_complex(a, point, opt)? / d
        }
        Expr::Pow(b, q) => {
            let x = eval_complex(b, point, opt)?;
            if x.norm() < opt.eps && *q.numer() < 0 {
                return Err(domain(e));
            }
            if q.is_integer() {
                x.powi(*q.numer() as i32)
            } else if x.norm() == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                x.powf(*q.numer() as f64 / *q.denom() as f64)
            }
        }
        Expr::Func(f, args) => {
            let x = eval_complex(&args[0], point, opt)?;
            match f {
                Func::Sin => x.sin(),
                Func::Cos => x.cos(),
                Func::Tan => x.tan(),
                Func::Atan => x.atan(),
                Func::Atan2 => {
                    let xx = eval_complex(&args[1], point, opt)?;
                    let r = (x * x + xx * xx).sqrt();
                    if r.norm() < opt.eps {
                        return Err(domain(e));
                    }
                    -Complex64::i() * ((xx + Complex64::i() * x) / r).ln()
                }
                Func::Sqrt => x.sqrt(),
                Func::Exp => x.exp(),
                Func::Ln => {
                    if x.norm() < opt.eps {
                        return Err(domain(e));
                    }
                    x.ln()
                }
            }
        }
    };
    if v.re.is_finite() && v.im.is_finite() {
        Ok(v)
    } else {
        Err(domain(e))
    }
}

#[derive(Clone, Debug)]
enum Node {
    Const(f64),
    Var(usize),
    Sum(Vec<Node>),
    Product(Vec<Node>),
    Neg(Box<Node>),
    Quotient(Box<Node>, Box<Node>),
    Pow(Box<Node>, Rational64),
    Func(Func, Vec<Node>),
}

/// An expression bound to a fixed variable order for fast repeated
/// evaluation on `&[f64]` slices.
#[derive(Clone, Debug)]
pub struct Compiled {
    expr: Expr,
    names: Vec<String>,
    root: Node,
    opt: EvalOptions,
}

impl Compiled {
    /// Every variable of `expr` must be listed in `names`.
    pub fn new(expr: &Expr, names: &[String]) -> Result<Self> {
        let root = compile(expr, names)?;
        Ok(Compiled {
            expr: expr.clone(),
            names: names.to_vec(),
            root,
            opt: EvalOptions::default(),
        })
    }

    pub fn with_options(mut self, opt: EvalOptions) -> Self {
        self.opt = opt;
        self
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        match run(&self.root, x, &self.opt) {
            Some(v) => Ok(v),
            None => {
                // Re-walk the tree to name the offending subexpression.
                let point = self
                    .names
                    .iter()
                    .cloned()
                    .zip(x.iter().copied())
                    .collect::<BTreeMap<_, _>>();
                match eval_tree(&self.expr, &point, &self.opt) {
                    Err(e) => Err(e),
                    Ok(_) => Err(domain(&self.expr)),
                }
            }
        }
    }
}

impl Compiled {
    /// Value and exact gradient (forward mode) with respect to the
    /// compiled variable order.
    pub fn eval_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        match run_grad(&self.root, x, &self.opt) {
            Some(v) => Ok(v),
            None => self.eval(x).and_then(|_| Err(domain(&self.expr))),
        }
    }
}

fn run_grad(n: &Node, x: &[f64], opt: &EvalOptions) -> Option<(f64, Vec<f64>)> {
    let dim = x.len();
    let chain = |(v, g): (f64, Vec<f64>), f: f64, df: f64| -> Option<(f64, Vec<f64>)> {
        let _ = v;
        Some((f, g.into_iter().map(|d| d * df).collect()))
    };
    let out = match n {
        Node::Const(c) => (*c, vec![0.0; dim]),
        Node::Var(i) => {
            let mut g = vec![0.0; dim];
            g[*i] = 1.0;
            (x[*i], g)
        }
        Node::Sum(xs) => {
            let mut acc = (0.0, vec![0.0; dim]);
            for t in xs {
                let (v, g) = run_grad(t, x, opt)?;
                acc.0 += v;
                acc.1.iter_mut().zip(g).for_each(|(a, b)| *a += b);
            }
            acc
        }
        Node::Product(xs) => {
            let mut acc = (1.0, vec![0.0; dim]);
            for t in xs {
                let (v, g) = run_grad(t, x, opt)?;
                acc.1.iter_mut().zip(g).for_each(|(a, b)| *a = *a * v + acc.0 * b);
                acc.0 *= v;
            }
            acc
        }
        Node::Neg(a) => {
            let (v, g) = run_grad(a, x, opt)?;
            (-v, g.into_iter().map(|d| -d).collect())
        }
        Node::Quotient(a, b) => {
            let (d, gd) = run_grad(b, x, opt)?;
            if d.abs() < opt.eps {
                return None;
            }
            let (u, gu) = run_grad(a, x, opt)?;
            let g = gu.iter().zip(&gd).map(|(p, q)| (p * d - u * q) / (d * d)).collect();
            (u / d, g)
        }
        Node::Pow(b, q) => {
            let inner = run_grad(b, x, opt)?;
            let v = inner.0;
            if *q.numer() < 0 && v.abs() < opt.eps {
                return None;
            }
            let f = real_pow(v, *q)?;
            let df = if q.is_integer() && *q.numer() > 0 && *q.numer() < 2 {
                1.0
            } else {
                let q64 = *q.numer() as f64 / *q.denom() as f64;
                q64 * real_pow(v, *q - Rational64::from_integer(1))?
            };
            chain(inner, f, df)?
        }
        Node::Func(func, args) => {
            let inner = run_grad(&args[0], x, opt)?;
            let a = inner.0;
            match func {
                Func::Sin => chain(inner, a.sin(), a.cos())?,
                Func::Cos => chain(inner, a.cos(), -a.sin())?,
                Func::Tan => {
                    let c = a.cos();
                    if c.abs() < opt.eps {
                        return None;
                    }
                    chain(inner, a.tan(), 1.0 / (c * c))?
                }
                Func::Atan => chain(inner, a.atan(), 1.0 / (1.0 + a * a))?,
                Func::Atan2 => {
                    let (b, gb) = run_grad(&args[1], x, opt)?;
                    let r2 = a * a + b * b;
                    if r2 == 0.0 {
                        return None;
                    }
                    let g = inner.1.iter().zip(&gb).map(|(ga, gb)| (b * ga - a * gb) / r2).collect();
                    (a.atan2(b), g)
                }
                Func::Sqrt => {
                    if a <= 0.0 {
                        return None;
                    }
                    let r = a.sqrt();
                    chain(inner, r, 0.5 / r)?
                }
                Func::Exp => {
                    let e = a.exp();
                    chain(inner, e, e)?
                }
                Func::Ln => {
                    if a <= 0.0 {
                        return None;
                    }
                    chain(inner, a.ln(), 1.0 / a)?
                }
            }
        }
    };
    (out.0.is_finite() && out.1.iter().all(|d| d.is_finite())).then_some(out)
}

fn compile(e: &Expr, names: &[String]) -> Result<Node> {
    let many = |xs: &[Expr]| xs.iter().map(|x| compile(x, names)).collect::<Result<Vec<_>>>();
    Ok(match e {
        Expr::Const(c) => Node::Const(c.to_f64().unwrap_or(f64::NAN)),
        Expr::Var(v) => Node::Var(
            names
                .iter()
                .position(|n| n == v)
                .ok_or_else(|| Error::UnboundVariable(v.clone()))?,
        ),
        Expr::Sum(xs) => Node::Sum(many(xs)?),
        Expr::Product(xs) => Node::Product(many(xs)?),
        Expr::Neg(a) => Node::Neg(Box::new(compile(a, names)?)),
        Expr::Quotient(a, b) => Node::Quotient(Box::new(compile(a, names)?), Box::new(compile(b, names)?)),
        Expr::Pow(b, q) => Node::Pow(Box::new(compile(b, names)?), *q),
        Expr::Func(f, xs) => Node::Func(*f, many(xs)?),
    })
}

fn run(n: &Node, x: &[f64], opt: &EvalOptions) -> Option<f64> {
    let v = match n {
        Node::Const(c) => *c,
        Node::Var(i) => x[*i],
        Node::Sum(xs) => {
            let mut acc = 0.0;
            for t in xs {
                acc += run(t, x, opt)?;
            }
            acc
        }
        Node::Product(xs) => {
            let mut acc = 1.0;
            for t in xs {
                acc *= run(t, x, opt)?;
            }
            acc
        }
        Node::Neg(a) => -run(a, x, opt)?,
        Node::Quotient(a, b) => {
            let d = run(b, x, opt)?;
            if d.abs() < opt.eps {
                return None;
            }
            run(a, x, opt)? / d
        }
        Node::Pow(b, q) => {
            let v = run(b, x, opt)?;
            if *q.numer() < 0 && v.abs() < opt.eps {
                return None;
            }
            real_pow(v, *q)?
        }
        Node::Func(f, args) => {
            let a = run(&args[0], x, opt)?;
            match f {
                Func::Sin => a.sin(),
                Func::Cos => a.cos(),
                Func::Tan => {
                    if a.cos().abs() < opt.eps {
                        return None;
                    }
                    a.tan()
                }
                Func::Atan => a.atan(),
                Func::Atan2 => {
                    let b = run(&args[1], x, opt)?;
                    if a == 0.0 && b == 0.0 {
                        return None;
                    }
                    a.atan2(b)
                }
                Func::Sqrt => {
                    if a < 0.0 {
                        return None;
                    }
                    a.sqrt()
                }
                Func::Exp => a.exp(),
                Func::Ln => {
                    if a <= 0.0 {
                        return None;
                    }
                    a.ln()
                }
            }
        }
    };
    v.is_finite().then_some(v)
}
