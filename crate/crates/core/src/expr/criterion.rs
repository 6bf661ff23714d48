use std::fmt;

use crate::interval::{Interval, Rounding};

use super::{EvalError, Expr};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Le,
    Lt,
    Ge,
    Gt,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Le => "<=",
            CmpOp::Lt => "<",
            CmpOp::Ge => ">=",
            CmpOp::Gt => ">",
        }
    }

    pub fn holds(self, x: f64, c: f64) -> bool {
        match self {
            CmpOp::Le => x <= c,
            CmpOp::Lt => x < c,
            CmpOp::Ge => x >= c,
            CmpOp::Gt => x > c,
        }
    }

    /// Truth of `x op c` for every `x` in `v`.
    ///
    /// Strict and non-strict comparisons differ only at the border: `x <= c`
    /// is false on `v` only when `v.lo > c`, while `x < c` is already false
    /// when `v.lo >= c`.
    pub fn decide(self, v: Interval, c: f64) -> Truth {
        let (t, f) = match self {
            CmpOp::Le => (v.hi() <= c, v.lo() > c),
            CmpOp::Lt => (v.hi() < c, v.lo() >= c),
            CmpOp::Ge => (v.lo() >= c, v.hi() < c),
            CmpOp::Gt => (v.lo() > c, v.hi() <= c),
        };
        if t {
            Truth::True
        } else if f {
            Truth::False
        } else {
            Truth::Unknown
        }
    }
}

/// Three-valued truth.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Truth {
    True,
    False,
    Unknown,
}

impl Truth {
    fn and(self, other: Truth) -> Truth {
        match (self, other) {
            (Truth::False, _) | (_, Truth::False) => Truth::False,
            (Truth::True, Truth::True) => Truth::True,
            _ => Truth::Unknown,
        }
    }

    fn or(self, other: Truth) -> Truth {
        match (self, other) {
            (Truth::True, _) | (_, Truth::True) => Truth::True,
            (Truth::False, Truth::False) => Truth::False,
            _ => Truth::Unknown,
        }
    }
}

/// `expr op rhs`.
#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub expr: Expr,
    pub op: CmpOp,
    pub rhs: f64,
}

/// An and/or combination of comparisons against constants.
#[derive(Clone, Debug, PartialEq)]
pub enum Criterion {
    Cmp(Comparison),
    And(Vec<Criterion>),
    Or(Vec<Criterion>),
}

impl Criterion {
    /// Decides the criterion over a box of variable values.
    pub fn eval_interval(&self, values: &[Interval], r: Rounding) -> Truth {
        match self {
            Criterion::Cmp(c) => c.op.decide(c.expr.eval_interval(values, r), c.rhs),
            Criterion::And(parts) => parts
                .iter()
                .fold(Truth::True, |acc, p| acc.and(p.eval_interval(values, r))),
            Criterion::Or(parts) => parts
                .iter()
                .fold(Truth::False, |acc, p| acc.or(p.eval_interval(values, r))),
        }
    }

    pub fn eval_point(&self, values: &[f64]) -> Result<bool, EvalError> {
        Ok(match self {
            Criterion::Cmp(c) => c.op.holds(c.expr.eval_point(values)?, c.rhs),
            Criterion::And(parts) => {
                for p in parts {
                    if !p.eval_point(values)? {
                        return Ok(false);
                    }
                }
                true
            }
            Criterion::Or(parts) => {
                for p in parts {
                    if p.eval_point(values)? {
                        return Ok(true);
                    }
                }
                false
            }
        })
    }

    pub fn display<'a>(&'a self, names: &'a [String]) -> DisplayCriterion<'a> {
        DisplayCriterion { c: self, names }
    }
}

pub struct DisplayCriterion<'a> {
    c: &'a Criterion,
    names: &'a [String],
}

impl fmt::Display for DisplayCriterion<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |f: &mut fmt::Formatter<'_>, parts: &[Criterion], word: &str| -> fmt::Result {
            for (i, p) in parts.iter().enumerate() {
                if i > 0 {
                    write!(f, " {word} ")?;
                }
                write!(f, "({})", p.display(self.names))?;
            }
            Ok(())
        };
        match self.c {
            Criterion::Cmp(c) => write!(f, "{} {} {:?}", c.expr.display(self.names), c.op.symbol(), c.rhs),
            Criterion::And(parts) => join(f, parts, "and"),
            Criterion::Or(parts) => join(f, parts, "or"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse::parse_criterion;

    #[test]
    fn border_semantics() {
        let v = Interval::new(1.0, 2.0);
        assert_eq!(CmpOp::Le.decide(v, 2.0), Truth::True);
        assert_eq!(CmpOp::Lt.decide(v, 2.0), Truth::Unknown);
        assert_eq!(CmpOp::Lt.decide(v, 1.0), Truth::False);
        assert_eq!(CmpOp::Le.decide(v, 1.0), Truth::Unknown);
        assert_eq!(CmpOp::Gt.decide(v, 2.0), Truth::False);
        assert_eq!(CmpOp::Ge.decide(v, 1.0), Truth::True);
    }

    #[test]
    fn behavior_split_example() {
        let names = vec!["a".to_string(), "b".to_string()];
        let c = parse_criterion("a*b < 3", &names, 1).unwrap();
        let x = [Interval::new(0.0, 1.0), Interval::new(0.0, 2.0)];
        let y = [Interval::new(1.0, 2.0), Interval::new(0.0, 2.0)];
        assert_eq!(c.eval_interval(&x, Rounding::Outward), Truth::True);
        assert_eq!(c.eval_interval(&y, Rounding::Outward), Truth::Unknown);
    }

    #[test]
    fn kleene_logic() {
        let names = vec!["x".to_string()];
        let c = parse_criterion("x > 5 or x < 1", &names, 1).unwrap();
        assert_eq!(c.eval_interval(&[Interval::new(0.0, 0.5)], Rounding::Outward), Truth::True);
        assert_eq!(c.eval_interval(&[Interval::new(2.0, 3.0)], Rounding::Outward), Truth::False);
        assert_eq!(c.eval_interval(&[Interval::new(0.0, 3.0)], Rounding::Outward), Truth::Unknown);
        let c = parse_criterion("x > 5 and x < 1", &names, 1).unwrap();
        assert_eq!(c.eval_interval(&[Interval::new(0.0, 3.0)], Rounding::Outward), Truth::False);
    }

    #[test]
    fn display_roundtrip() {
        let names = vec!["x".to_string(), "y".to_string()];
        let c = parse_criterion("x + y <= -1.5 or (x > 0 and y >= 2)", &names, 1).unwrap();
        let text = c.display(&names).to_string();
        assert_eq!(parse_criterion(&text, &names, 1).unwrap(), c);
    }
}
