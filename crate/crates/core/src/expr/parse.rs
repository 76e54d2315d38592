use num_bigint::BigInt;
use num_rational::{BigRational, Rational64};
use num_traits::{One, ToPrimitive, Zero};

use super::{Expr, Func, VarTable};
use crate::error::{Error, Result};

// Grammar:
//   sum     := product (('+' | '-') product)*
//   product := unary (('*' | '/') unary)*
//   unary   := '-' unary | '+' unary | power
//   power   := primary ('^' unary)?        right-associative
//   primary := number | ident | ident '(' sum (',' sum)* ')' | '(' sum ')'
pub(super) struct Parser<'a> {
    src: &'a str,
    pos: usize,
    vars: Option<&'a VarTable>,
}

impl<'a> Parser<'a> {
    pub(super) fn new(src: &'a str, vars: Option<&'a VarTable>) -> Self {
        Parser { src, pos: 0, vars }
    }

    pub(super) fn parse(mut self) -> Result<Expr> {
        self.skip_ws();
        if self.pos == self.src.len() {
            return Err(self.err("empty expression"));
        }
        let e = self.sum()?;
        self.skip_ws();
        if self.pos != self.src.len() {
            return Err(self.err(format!("unexpected `{}`", self.peek().unwrap())));
        }
        Ok(e)
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::Syntax {
            offset: self.pos,
            message: message.into(),
        }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn sum(&mut self) -> Result<Expr> {
        let mut terms = vec![self.product()?];
        loop {
            if self.eat('+') {
                terms.push(self.product()?);
            } else if self.eat('-') {
                terms.push(Expr::Neg(Box::new(self.product()?)));
            } else {
                break;
            }
        }
        Ok(if terms.len() == 1 {
            terms.pop().unwrap()
        } else {
            Expr::Sum(terms)
        })
    }

    fn product(&mut self) -> Result<Expr> {
        let mut acc = self.unary()?;
        let mut factors: Vec<Expr> = Vec::new();
        loop {
            if self.eat('*') {
                factors.push(acc);
                acc = self.unary()?;
            } else if self.eat('/') {
                let rhs = self.unary()?;
                factors.push(acc);
                let num = if factors.len() == 1 {
                    factors.pop().unwrap()
                } else {
                    Expr::Product(std::mem::take(&mut factors))
                };
                acc = Expr::Quotient(Box::new(num), Box::new(rhs));
            } else {
                break;
            }
        }
        if factors.is_empty() {
            Ok(acc)
        } else {
            factors.push(acc);
            Ok(Expr::Product(factors))
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat('-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.primary()?;
        if self.eat('^') {
            let at = self.pos;
            let exp = self.unary()?;
            let q = constant_exponent(&exp).ok_or(Error::Syntax {
                offset: at,
                message: "exponent must be a rational constant".into(),
            })?;
            return Ok(Expr::Pow(Box::new(base), q));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr> {
        self.skip_ws();
        let start = self.pos;
        match self.peek() {
            None => Err(self.err("unexpected end of input")),
            Some('(') => {
                self.pos += 1;
                let e = self.sum()?;
                if !self.eat(')') {
                    return Err(self.err("expected `)`"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == '_' => {
                while let Some(c) = self.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' {
                        self.pos += 1;
                    } else {
                        break;
                    }
                }
                let name = &self.src[start..self.pos];
                let save = self.pos;
                if self.eat('(') {
                    let f = Func::from_name(name).ok_or_else(|| {
                        Error::UnknownIdentifier(name.to_string())
                    })?;
                    let mut args = vec![self.sum()?];
                    while self.eat(',') {
                        args.push(self.sum()?);
                    }
                    if !self.eat(')') {
                        return Err(self.err("expected `)`"));
                    }
                    if args.len() != f.arity() {
                        return Err(Error::Syntax {
                            offset: start,
                            message: format!("`{}` takes {} argument(s)", name, f.arity()),
                        });
                    }
                    return Ok(Expr::Func(f, args));
                }
                self.pos = save;
                if Func::from_name(name).is_some() {
                    return Err(Error::Syntax {
                        offset: start,
                        message: format!("`{name}` needs an argument list"),
                    });
                }
                if let Some(vars) = self.vars {
                    if !vars.contains(name) {
                        return Err(Error::UnknownIdentifier(name.to_string()));
                    }
                }
                Ok(Expr::Var(name.to_string()))
            }
            Some(c) => Err(self.err(format!("unexpected `{c}`"))),
        }
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        let bytes = self.src.as_bytes();
        let mut i = self.pos;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
        let int_part = &self.src[start..i];
        let mut frac_part = "";
        if i < bytes.len() && bytes[i] == b'.' {
            let f0 = i + 1;
            i += 1;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            frac_part = &self.src[f0..i];
        }
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(self.err("malformed number"));
        }
        let mut exp10: i64 = 0;
        if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
            let mut j = i + 1;
            if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                j += 1;
            }
            let d0 = j;
            while j < bytes.len() && bytes[j].is_ascii_digit() {
                j += 1;
            }
            if j > d0 {
                exp10 = self.src[i + 1..j].parse().map_err(|_| self.err("bad exponent"))?;
                i = j;
            }
        }
        self.pos = i;
        let digits = format!("{int_part}{frac_part}");
        let mantissa: BigInt = digits.parse().map_err(|_| Error::Syntax {
            offset: start,
            message: "malformed number".into(),
        })?;
        let scale = exp10 - frac_part.len() as i64;
        let ten = BigInt::from(10);
        let value = if scale >= 0 {
            BigRational::from_integer(mantissa * num_traits::pow(ten, scale as usize))
        } else {
            BigRational::new(mantissa, num_traits::pow(ten, (-scale) as usize))
        };
        Ok(Expr::Const(value))
    }
}

fn constant_exponent(e: &Expr) -> Option<Rational64> {
    let v = fold_constant(e)?;
    Some(Rational64::new(v.numer().to_i64()?, v.denom().to_i64()?))
}

fn fold_constant(e: &Expr) -> Option<BigRational> {
    match e {
        Expr::Const(c) => Some(c.clone()),
        Expr::Neg(a) => fold_constant(a).map(|c| -c),
        Expr::Quotient(a, b) => {
            let d = fold_constant(b)?;
            if d.is_zero() {
                None
            } else {
                Some(fold_constant(a)? / d)
            }
        }
        Expr::Product(xs) => xs
            .iter()
            .try_fold(BigRational::one(), |acc, x| Some(acc * fold_constant(x)?)),
        Expr::Sum(xs) => xs
            .iter()
            .try_fold(BigRational::zero(), |acc, x| Some(acc + fold_constant(x)?)),
        Expr::Pow(b, q) if q.is_integer() => {
            let b = fold_constant(b)?;
            if b.is_zero() && *q.numer() < 0 {
                return None;
            }
            Some(b.pow(i32::try_from(*q.numer()).ok()?))
        }
        _ => None,
    }
}
