use std::fmt;

use num_rational::Rational64;
use num_traits::{One, Signed};

use super::Expr;

// Binding strength of the printed form of a node.
const SUM: u8 = 1;
const PRODUCT: u8 = 2;
const UNARY: u8 = 3;
const POWER: u8 = 4;
const ATOM: u8 = 5;

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Const(c) => {
            if c.is_negative() {
                UNARY
            } else if !c.denom().is_one() {
                PRODUCT
            } else {
                ATOM
            }
        }
        Expr::Var(_) | Expr::Func(..) => ATOM,
        Expr::Sum(xs) if xs.len() == 1 => prec(&xs[0]),
        Expr::Sum(xs) if xs.is_empty() => ATOM,
        Expr::Sum(_) => SUM,
        Expr::Product(xs) if xs.is_empty() => ATOM,
        Expr::Product(xs) if xs.len() == 1 => prec(&xs[0]),
        Expr::Product(_) | Expr::Quotient(..) => PRODUCT,
        Expr::Neg(a) => prec(a).min(UNARY).max(PRODUCT),
        Expr::Pow(..) => POWER,
    }
}

fn wrap(e: &Expr, min: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if prec(e) < min {
        write!(f, "(")?;
        write_expr(e, f)?;
        write!(f, ")")
    } else {
        write_expr(e, f)
    }
}

fn write_exponent(q: Rational64, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if *q.denom() == 1 && *q.numer() >= 0 {
        write!(f, "{}", q.numer())
    } else if *q.denom() == 1 {
        write!(f, "({})", q.numer())
    } else {
        write!(f, "({}/{})", q.numer(), q.denom())
    }
}

pub(super) fn write_expr(e: &Expr, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match e {
        Expr::Const(c) => {
            if c.denom().is_one() {
                write!(f, "{}", c.numer())
            } else {
                write!(f, "{}/{}", c.numer(), c.denom())
            }
        }
        Expr::Var(v) => write!(f, "{v}"),
        Expr::Sum(xs) => {
            if xs.is_empty() {
                return write!(f, "0");
            }
            for (i, x) in xs.iter().enumerate() {
                if i == 0 {
                    wrap(x, SUM, f)?;
                    continue;
                }
                match x {
                    Expr::Neg(inner) => {
                        write!(f, " - ")?;
                        wrap(inner, PRODUCT, f)?;
                    }
                    Expr::Const(c) if c.is_negative() => {
                        write!(f, " - ")?;
                        write_expr(&Expr::Const(-c), f)?;
                    }
                    _ => {
                        write!(f, " + ")?;
                        wrap(x, PRODUCT, f)?;
                    }
                }
            }
            Ok(())
        }
        Expr::Product(xs) => {
            if xs.is_empty() {
                return write!(f, "1");
            }
            for (i, x) in xs.iter().enumerate() {
                if i > 0 {
                    write!(f, "*")?;
                    wrap(x, UNARY, f)?;
                } else {
                    wrap(x, PRODUCT, f)?;
                }
            }
            Ok(())
        }
        Expr::Quotient(a, b) => {
            wrap(a, PRODUCT, f)?;
            write!(f, "/")?;
            wrap(b, UNARY, f)
        }
        Expr::Neg(a) => {
            write!(f, "-")?;
            wrap(a, PRODUCT, f)
        }
        Expr::Pow(b, q) => {
            wrap(b, ATOM, f)?;
            write!(f, "^")?;
            write_exponent(*q, f)
        }
        Expr::Func(func, args) => {
            write!(f, "{}(", func.name())?;
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    write!(f, ", ")?;
                }
                write_expr(a, f)?;
            }
            write!(f, ")")
        }
    }
}
