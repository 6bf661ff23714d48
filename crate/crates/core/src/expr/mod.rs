//! Algebraic expressions over indexed variables.
//!
//! Expressions are parsed from text against a symbol table (see [`Model`]),
//! so variables are stored as indices. Besides point and interval
//! evaluation, an expression can be differentiated symbolically; the result
//! is again an [`Expr`].

mod criterion;
mod model;
mod parse;
mod tape;

pub use criterion::{CmpOp, Comparison, Criterion, Truth};
pub use model::{Derived, Model};
pub use parse::{parse_expression, ParseError};
pub use tape::Tape;

use std::fmt;

use thiserror::Error;

use crate::interval::{Interval, Rounding};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("variable index {0} has no value")]
    UnboundVariable(usize),
}

/// An expression tree. Powers carry a nonnegative integer exponent.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Exp(Box<Expr>),
    Pow(Box<Expr>, u32),
}

// Smart constructors. They fold the trivial identities that symbolic
// differentiation produces in bulk (0*x, 1*x, x+0, ...); nothing more.
impl Expr {
    pub fn constant(c: f64) -> Expr {
        Expr::Const(c)
    }

    pub fn var(i: usize) -> Expr {
        Expr::Var(i)
    }

    fn as_const(&self) -> Option<f64> {
        match self {
            Expr::Const(c) => Some(*c),
            _ => None,
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn neg(a: Expr) -> Expr {
        match a {
            Expr::Const(c) => Expr::Const(-c),
            Expr::Neg(inner) => *inner,
            other => Expr::Neg(Box::new(other)),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn add(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::Const(x + y),
            (Some(x), None) if x == 0.0 => b,
            (None, Some(y)) if y == 0.0 => a,
            _ => Expr::Add(Box::new(a), Box::new(b)),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn sub(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::Const(x - y),
            (Some(x), None) if x == 0.0 => Expr::neg(b),
            (None, Some(y)) if y == 0.0 => a,
            _ => Expr::Sub(Box::new(a), Box::new(b)),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn mul(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::Const(x * y),
            (Some(x), _) if x == 0.0 => Expr::Const(0.0),
            (_, Some(y)) if y == 0.0 => Expr::Const(0.0),
            (Some(x), _) if x == 1.0 => b,
            (_, Some(y)) if y == 1.0 => a,
            (Some(x), _) if x == -1.0 => Expr::neg(b),
            (_, Some(y)) if y == -1.0 => Expr::neg(a),
            _ => Expr::Mul(Box::new(a), Box::new(b)),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn div(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), _) if x == 0.0 => Expr::Const(0.0),
            (_, Some(y)) if y == 1.0 => a,
            _ => Expr::Div(Box::new(a), Box::new(b)),
        }
    }

    pub fn exp(a: Expr) -> Expr {
        Expr::Exp(Box::new(a))
    }

    pub fn pow(a: Expr, n: u32) -> Expr {
        match n {
            0 => Expr::Const(1.0),
            1 => a,
            _ => match a.as_const() {
                Some(c) => Expr::Const(c.powi(n as i32)),
                None => Expr::Pow(Box::new(a), n),
            },
        }
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Var(_) => 1,
            Expr::Neg(a) | Expr::Exp(a) | Expr::Pow(a, _) => 1 + a.size(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                1 + a.size() + b.size()
            }
        }
    }

    /// Sorted, deduplicated variable indices referenced by the expression.
    pub fn variables(&self) -> Vec<usize> {
        fn walk(e: &Expr, out: &mut Vec<usize>) {
            match e {
                Expr::Const(_) => {}
                Expr::Var(i) => out.push(*i),
                Expr::Neg(a) | Expr::Exp(a) | Expr::Pow(a, _) => walk(a, out),
                Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                    walk(a, out);
                    walk(b, out);
                }
            }
        }
        let mut out = Vec::new();
        walk(self, &mut out);
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Replaces every variable `i` for which `f(i)` is `Some` by that expression.
    pub fn substitute(&self, f: &dyn Fn(usize) -> Option<Expr>) -> Expr {
        match self {
            Expr::Const(c) => Expr::Const(*c),
            Expr::Var(i) => f(*i).unwrap_or(Expr::Var(*i)),
            Expr::Neg(a) => Expr::Neg(Box::new(a.substitute(f))),
            Expr::Add(a, b) => Expr::Add(Box::new(a.substitute(f)), Box::new(b.substitute(f))),
            Expr::Sub(a, b) => Expr::Sub(Box::new(a.substitute(f)), Box::new(b.substitute(f))),
            Expr::Mul(a, b) => Expr::Mul(Box::new(a.substitute(f)), Box::new(b.substitute(f))),
            Expr::Div(a, b) => Expr::Div(Box::new(a.substitute(f)), Box::new(b.substitute(f))),
            Expr::Exp(a) => Expr::Exp(Box::new(a.substitute(f))),
            Expr::Pow(a, n) => Expr::Pow(Box::new(a.substitute(f)), *n),
        }
    }

    /// Exact partial derivative with respect to variable `v`.
    ///
    /// Every other variable is treated as independent of `v`; inline derived
    /// variables first (see [`Model::expand`]) when that is not the case.
    pub fn differentiate(&self, v: usize) -> Expr {
        match self {
            Expr::Const(_) => Expr::Const(0.0),
            Expr::Var(i) => Expr::Const(if *i == v { 1.0 } else { 0.0 }),
            Expr::Neg(a) => Expr::neg(a.differentiate(v)),
            Expr::Add(a, b) => Expr::add(a.differentiate(v), b.differentiate(v)),
            Expr::Sub(a, b) => Expr::sub(a.differentiate(v), b.differentiate(v)),
            Expr::Mul(a, b) => Expr::add(
                Expr::mul(a.differentiate(v), (**b).clone()),
                Expr::mul((**a).clone(), b.differentiate(v)),
            ),
            Expr::Div(a, b) => {
                // (a'b - ab') / b^2
                let num = Expr::sub(
                    Expr::mul(a.differentiate(v), (**b).clone()),
                    Expr::mul((**a).clone(), b.differentiate(v)),
                );
                Expr::div(num, Expr::pow((**b).clone(), 2))
            }
            Expr::Exp(a) => Expr::mul(self.clone(), a.differentiate(v)),
            Expr::Pow(a, n) => match n {
                0 => Expr::Const(0.0),
                _ => Expr::mul(
                    Expr::mul(Expr::Const(*n as f64), Expr::pow((**a).clone(), n - 1)),
                    a.differentiate(v),
                ),
            },
        }
    }

    /// IEEE evaluation at a point; `values[i]` is the value of variable `i`.
    pub fn eval_point(&self, values: &[f64]) -> Result<f64, EvalError> {
        Ok(match self {
            Expr::Const(c) => *c,
            Expr::Var(i) => *values.get(*i).ok_or(EvalError::UnboundVariable(*i))?,
            Expr::Neg(a) => -a.eval_point(values)?,
            Expr::Add(a, b) => a.eval_point(values)? + b.eval_point(values)?,
            Expr::Sub(a, b) => a.eval_point(values)? - b.eval_point(values)?,
            Expr::Mul(a, b) => a.eval_point(values)? * b.eval_point(values)?,
            Expr::Div(a, b) => {
                let d = b.eval_point(values)?;
                if d == 0.0 {
                    return Err(EvalError::DivisionByZero);
                }
                a.eval_point(values)? / d
            }
            Expr::Exp(a) => a.eval_point(values)?.exp(),
            Expr::Pow(a, n) => a.eval_point(values)?.powi(*n as i32),
        })
    }

    /// Natural interval extension: an enclosure of the expression's range
    /// when each variable ranges over its interval independently.
    pub fn eval_interval(&self, values: &[Interval], r: Rounding) -> Interval {
        match self {
            Expr::Const(c) => Interval::point(*c),
            Expr::Var(i) => values[*i],
            Expr::Neg(a) => a.eval_interval(values, r).neg(),
            Expr::Add(a, b) => a.eval_interval(values, r).add(b.eval_interval(values, r), r),
            Expr::Sub(a, b) => a.eval_interval(values, r).sub(b.eval_interval(values, r), r),
            Expr::Mul(a, b) => a.eval_interval(values, r).mul(b.eval_interval(values, r), r),
            Expr::Div(a, b) => a.eval_interval(values, r).div(b.eval_interval(values, r), r),
            Expr::Exp(a) => a.eval_interval(values, r).exp(r),
            Expr::Pow(a, n) => a.eval_interval(values, r).powi(*n, r),
        }
    }

    /// Fully parenthesized text form; parses back to the same tree.
    pub fn display<'a>(&'a self, names: &'a [String]) -> DisplayExpr<'a> {
        DisplayExpr { expr: self, names }
    }
}

pub struct DisplayExpr<'a> {
    expr: &'a Expr,
    names: &'a [String],
}

impl fmt::Display for DisplayExpr<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(self.expr, self.names, f)
    }
}

fn write_expr(e: &Expr, names: &[String], f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let bin = |f: &mut fmt::Formatter<'_>, a: &Expr, op: &str, b: &Expr| -> fmt::Result {
        f.write_str("(")?;
        write_expr(a, names, f)?;
        write!(f, " {op} ")?;
        write_expr(b, names, f)?;
        f.write_str(")")
    };
    match e {
        Expr::Const(c) => {
            if c.is_sign_negative() {
                // "(-2.5)" reads back as a single literal
                write!(f, "({c:?})")
            } else {
                write!(f, "{c:?}")
            }
        }
        Expr::Var(i) => match names.get(*i) {
            Some(n) => f.write_str(n),
            None => write!(f, "${i}"),
        },
        Expr::Neg(a) => {
            f.write_str("(-(")?;
            write_expr(a, names, f)?;
            f.write_str("))")
        }
        Expr::Add(a, b) => bin(f, a, "+", b),
        Expr::Sub(a, b) => bin(f, a, "-", b),
        Expr::Mul(a, b) => bin(f, a, "*", b),
        Expr::Div(a, b) => bin(f, a, "/", b),
        Expr::Exp(a) => {
            f.write_str("exp(")?;
            write_expr(a, names, f)?;
            f.write_str(")")
        }
        Expr::Pow(a, n) => {
            f.write_str("(")?;
            write_expr(a, names, f)?;
            write!(f, ")^{n}")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn product_rule_with_constant_factor() {
        let syms = names(&["a", "b"]);
        let e = parse_expression("a*b", &syms).unwrap();
        assert_eq!(e.differentiate(0), Expr::Var(1));
    }

    #[test]
    fn chain_rule_through_exp() {
        let syms = names(&["c"]);
        let e = parse_expression("exp(-c^2)", &syms).unwrap();
        let d = e.differentiate(0);
        for &c in &[-1.3, 0.0, 0.4, 2.0] {
            let got = d.eval_point(&[c]).unwrap();
            let want = -2.0 * c * (-c * c).exp();
            assert!((got - want).abs() < 1e-14, "{got} vs {want}");
        }
    }

    #[test]
    fn point_evaluation_of_pvr() {
        let syms = names(&["PAP", "LAP", "CO"]);
        let e = parse_expression("(PAP - LAP)/CO", &syms).unwrap();
        let v = e.eval_point(&[23.94, 15.29, 6.49]).unwrap();
        // (23.94 - 15.29) / 6.49 = 8.65 / 6.49
        assert!((v - 1.332_819_722_650_231).abs() < 1e-12);
    }

    #[test]
    fn exp_of_zero_and_pole() {
        let syms = names(&["x", "y"]);
        assert_eq!(parse_expression("exp(0)", &syms).unwrap().eval_point(&[]).unwrap(), 1.0);
        let q = parse_expression("x/y", &syms).unwrap();
        assert_eq!(q.eval_point(&[1.0, 0.0]), Err(EvalError::DivisionByZero));
    }

    #[test]
    fn display_is_reparsable() {
        let syms = names(&["x", "y"]);
        for src in ["-2^2", "-x*3", "x^3/(y - -1.5e-7)", "exp(-(x+y))^2", "-(3)"] {
            let e = parse_expression(src, &syms).unwrap();
            let printed = e.display(&syms).to_string();
            let back = parse_expression(&printed, &syms).unwrap();
            assert_eq!(back, e, "{src} -> {printed}");
        }
    }

    #[test]
    fn negative_literal_binds_looser_than_power() {
        let syms = names(&[]);
        let e = parse_expression("-2^2", &syms).unwrap();
        assert_eq!(e.eval_point(&[]).unwrap(), -4.0);
        let e = parse_expression("(-2)^2", &syms).unwrap();
        assert_eq!(e.eval_point(&[]).unwrap(), 4.0);
    }
}
