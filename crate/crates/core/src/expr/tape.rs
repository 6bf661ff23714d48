//! Flattened expressions.
//!
//! A [`Tape`] lists the nodes of an expression in post-order, each node
//! writing one slot. Variable and constant leaves are shared, so every
//! occurrence of a variable reads and narrows the same slot during backward
//! propagation.

use std::collections::HashMap;

use crate::interval::{round, Interval, Rounding};

use super::Expr;

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum Op {
    Const(f64),
    Var(usize),
    Neg(u32),
    Add(u32, u32),
    Sub(u32, u32),
    Mul(u32, u32),
    Div(u32, u32),
    Exp(u32),
    Pow(u32, u32),
}

/// An expression compiled to a linear instruction list.
#[derive(Clone, Debug, PartialEq)]
pub struct Tape {
    ops: Vec<Op>,
    /// (slot, variable) for every variable leaf.
    vars: Vec<(u32, usize)>,
    /// Some variable leaf feeds more than one node.
    repeats: bool,
}

impl Tape {
    pub fn compile(e: &Expr) -> Tape {
        let mut b = Builder {
            ops: Vec::new(),
            vars: HashMap::new(),
            consts: HashMap::new(),
        };
        b.emit(e);
        let mut vars: Vec<(u32, usize)> = b.vars.into_iter().map(|(v, s)| (s, v)).collect();
        vars.sort_unstable_by_key(|&(_, v)| v);
        let mut uses = vec![0u32; b.ops.len()];
        for op in &b.ops {
            match *op {
                Op::Neg(a) | Op::Exp(a) | Op::Pow(a, _) => uses[a as usize] += 1,
                Op::Add(a, c) | Op::Sub(a, c) | Op::Mul(a, c) | Op::Div(a, c) => {
                    uses[a as usize] += 1;
                    uses[c as usize] += 1;
                }
                Op::Const(_) | Op::Var(_) => {}
            }
        }
        let repeats = vars.iter().any(|&(s, _)| uses[s as usize] > 1);
        Tape { ops: b.ops, vars, repeats }
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    /// Variables referenced, ascending.
    pub fn variables(&self) -> impl Iterator<Item = usize> + '_ {
        self.vars.iter().map(|&(_, v)| v)
    }

    /// IEEE evaluation. Division by zero yields an infinity or NaN rather
    /// than an error; use [`Expr::eval_point`] where that matters.
    pub fn eval_point(&self, values: &[f64], buf: &mut Vec<f64>) -> f64 {
        buf.clear();
        for op in &self.ops {
            let s = |i: &u32| buf[*i as usize];
            let v = match op {
                Op::Const(c) => *c,
                Op::Var(i) => values[*i],
                Op::Neg(a) => -s(a),
                Op::Add(a, b) => s(a) + s(b),
                Op::Sub(a, b) => s(a) - s(b),
                Op::Mul(a, b) => s(a) * s(b),
                Op::Div(a, b) => s(a) / s(b),
                Op::Exp(a) => s(a).exp(),
                Op::Pow(a, n) => s(a).powi(*n as i32),
            };
            buf.push(v);
        }
        *buf.last().expect("empty tape")
    }

    /// Interval evaluation; `buf` keeps every slot for a following backward pass.
    pub fn eval_interval(&self, values: &[Interval], r: Rounding, buf: &mut Vec<Interval>) -> Interval {
        buf.clear();
        for op in &self.ops {
            let s = |i: &u32| buf[*i as usize];
            let v = match op {
                Op::Const(c) => Interval::point(*c),
                Op::Var(i) => values[*i],
                Op::Neg(a) => s(a).neg(),
                Op::Add(a, b) => s(a).add(s(b), r),
                Op::Sub(a, b) => s(a).sub(s(b), r),
                Op::Mul(a, b) => s(a).mul(s(b), r),
                Op::Div(a, b) => s(a).div(s(b), r),
                Op::Exp(a) => s(a).exp(r),
                Op::Pow(a, n) => s(a).powi(*n, r),
            };
            buf.push(v);
        }
        *buf.last().expect("empty tape")
    }

    /// Narrows the slots in `buf` (filled by [`Tape::eval_interval`]) given
    /// that the root lies in `target`. Returns `false` on an empty result.
    pub(crate) fn backward(&self, target: Interval, r: Rounding, buf: &mut [Interval]) -> bool {
        let root = buf.len() - 1;
        match buf[root].intersect(target) {
            Some(v) => buf[root] = v,
            None => return false,
        }
        for i in (0..self.ops.len()).rev() {
            let z = buf[i];
            let ok = match self.ops[i] {
                Op::Const(_) | Op::Var(_) => true,
                Op::Neg(a) => narrow(buf, a, z.neg()),
                Op::Add(a, b) => {
                    narrow(buf, a, z.sub(buf[b as usize], r)) && narrow(buf, b, z.sub(buf[a as usize], r))
                }
                Op::Sub(a, b) => {
                    narrow(buf, a, z.add(buf[b as usize], r)) && narrow(buf, b, buf[a as usize].sub(z, r))
                }
                Op::Mul(a, b) => {
                    let ok_a = if z.contains_zero() && buf[b as usize].contains_zero() {
                        true
                    } else {
                        narrow(buf, a, z.div(buf[b as usize], r))
                    };
                    ok_a && if z.contains_zero() && buf[a as usize].contains_zero() {
                        true
                    } else {
                        narrow(buf, b, z.div(buf[a as usize], r))
                    }
                }
                Op::Div(a, b) => {
                    // a = z * b wherever the quotient is defined
                    let ok_a = narrow(buf, a, z.mul(buf[b as usize], r));
                    ok_a && if z.contains_zero() && buf[a as usize].contains_zero() {
                        true
                    } else {
                        narrow(buf, b, buf[a as usize].div(z, r))
                    }
                }
                Op::Exp(a) => {
                    if z.hi() <= f64::MIN_POSITIVE {
                        true
                    } else {
                        narrow(buf, a, z.ln(r))
                    }
                }
                Op::Pow(a, n) => backward_pow(buf, a, n, z),
            };
            if !ok {
                return false;
            }
        }
        true
    }

    /// Whether a variable occurs more than once. Backward propagation is
    /// then not idempotent.
    pub(crate) fn repeats_variable(&self) -> bool {
        self.repeats
    }

    /// Slot of each variable leaf, for reading back narrowed values.
    pub(crate) fn var_slots(&self) -> &[(u32, usize)] {
        &self.vars
    }
}

fn narrow(buf: &mut [Interval], slot: u32, by: Interval) -> bool {
    match buf[slot as usize].intersect(by) {
        Some(v) => {
            buf[slot as usize] = v;
            true
        }
        None => false,
    }
}

fn backward_pow(buf: &mut [Interval], a: u32, n: u32, z: Interval) -> bool {
    match n {
        0 => true,
        1 => narrow(buf, a, z),
        _ if n % 2 == 0 => {
            if z.hi() < 0.0 {
                return false;
            }
            let r_hi = round::root_up(z.hi(), n);
            let r_lo = round::root_dn(z.lo().max(0.0), n);
            let x = buf[a as usize];
            let pos = x.intersect(Interval::new(r_lo, r_hi));
            let neg = x.intersect(Interval::new(-r_hi, -r_lo));
            match (pos, neg) {
                (Some(p), Some(q)) => {
                    buf[a as usize] = p.hull(q);
                    true
                }
                (Some(p), None) | (None, Some(p)) => {
                    buf[a as usize] = p;
                    true
                }
                (None, None) => false,
            }
        }
        _ => {
            let signed_dn = |y: f64| {
                if y >= 0.0 {
                    round::root_dn(y, n)
                } else {
                    -round::root_up(-y, n)
                }
            };
            let signed_up = |y: f64| {
                if y >= 0.0 {
                    round::root_up(y, n)
                } else {
                    -round::root_dn(-y, n)
                }
            };
            narrow(buf, a, Interval::new(signed_dn(z.lo()), signed_up(z.hi())))
        }
    }
}

struct Builder {
    ops: Vec<Op>,
    vars: HashMap<usize, u32>,
    consts: HashMap<u64, u32>,
}

impl Builder {
    fn push(&mut self, op: Op) -> u32 {
        self.ops.push(op);
        (self.ops.len() - 1) as u32
    }

    fn emit(&mut self, e: &Expr) -> u32 {
        match e {
            Expr::Const(c) => {
                if let Some(&s) = self.consts.get(&c.to_bits()) {
                    return s;
                }
                let s = self.push(Op::Const(*c));
                self.consts.insert(c.to_bits(), s);
                s
            }
            Expr::Var(i) => {
                if let Some(&s) = self.vars.get(i) {
                    return s;
                }
                let s = self.push(Op::Var(*i));
                self.vars.insert(*i, s);
                s
            }
            Expr::Neg(a) => {
                let a = self.emit(a);
                self.push(Op::Neg(a))
            }
            Expr::Add(a, b) => {
                let (a, b) = (self.emit(a), self.emit(b));
                self.push(Op::Add(a, b))
            }
            Expr::Sub(a, b) => {
                let (a, b) = (self.emit(a), self.emit(b));
                self.push(Op::Sub(a, b))
            }
            Expr::Mul(a, b) => {
                let (a, b) = (self.emit(a), self.emit(b));
                self.push(Op::Mul(a, b))
            }
            Expr::Div(a, b) => {
                let (a, b) = (self.emit(a), self.emit(b));
                self.push(Op::Div(a, b))
            }
            Expr::Exp(a) => {
                let a = self.emit(a);
                self.push(Op::Exp(a))
            }
            Expr::Pow(a, n) => {
                let a = self.emit(a);
                self.push(Op::Pow(a, *n))
            }
        }
    }
}
