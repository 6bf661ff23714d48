#![allow(dead_code)]

use proptest::prelude::*;
use splitbound::expr::Expr;
use splitbound::interval::Interval;

/// Expressions over `nvars` variables built from +, -, *, neg, exp and
/// small integer powers, nested at most `depth` levels.
pub fn poly_exp(nvars: usize, depth: u32) -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (-4i32..=4).prop_map(|k| Expr::Const(k as f64 * 0.5)),
        (0..nvars).prop_map(Expr::Var),
    ];
    leaf.prop_recursive(depth, 48, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|a| Expr::Neg(Box::new(a))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Add(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Sub(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Mul(Box::new(a), Box::new(b))),
            inner.clone().prop_map(|a| Expr::Exp(Box::new(a))),
            (inner, 0u32..4).prop_map(|(a, n)| Expr::Pow(Box::new(a), n)),
        ]
    })
}

/// Like [`poly_exp`] but also with division and arbitrary finite constants.
pub fn any_expr(nvars: usize, depth: u32) -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (-1e6f64..1e6).prop_map(Expr::Const),
        prop_oneof![Just(1e-7), Just(-3.25e12), Just(0.1), Just(-0.0)].prop_map(Expr::Const),
        (0..nvars).prop_map(Expr::Var),
    ];
    leaf.prop_recursive(depth, 48, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|a| Expr::Neg(Box::new(a))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Add(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Sub(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Mul(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Div(Box::new(a), Box::new(b))),
            inner.clone().prop_map(|a| Expr::Exp(Box::new(a))),
            (inner, 0u32..5).prop_map(|(a, n)| Expr::Pow(Box::new(a), n)),
        ]
    })
}

/// A box inside `[-r, r]^n` with every side at least `min_width` wide.
pub fn sub_box(n: usize, r: f64, min_width: f64) -> impl Strategy<Value = Vec<Interval>> {
    proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0), n).prop_map(move |v| {
        v.into_iter()
            .map(|(a, b)| {
                let lo = -r + a * (2.0 * r - min_width);
                let hi = lo + min_width + b * (r - lo - min_width);
                Interval::new(lo, hi)
            })
            .collect()
    })
}

/// The point at fractions `t` of the way across each side of `b`.
pub fn point_in(b: &[Interval], t: &[f64]) -> Vec<f64> {
    b.iter()
        .zip(t)
        .map(|(iv, &u)| (iv.lo() + u * (iv.hi() - iv.lo())).clamp(iv.lo(), iv.hi()))
        .collect()
}

pub fn names(n: usize) -> Vec<String> {
    ["x", "y", "z", "w"][..n].iter().map(|s| s.to_string()).collect()
}
