//! Directed rounding on top of round-to-nearest hardware arithmetic.
//!
//! Sums, products and quotients use error-free transformations to find the
//! sign of the rounding error, so a result is only moved by one ulp when the
//! nearest-rounded value is actually on the wrong side of the exact one.
//! Transcendental functions are not correctly rounded by libm and are widened
//! by two ulps unconditionally.

/// Below this magnitude the FMA residual of a product may itself be rounded.
const TINY: f64 = 1e-290;

#[inline]
fn two_sum_err(a: f64, b: f64, s: f64) -> f64 {
    let bb = s - a;
    (a - (s - bb)) + (b - bb)
}

#[inline]
fn overflow_dn(s: f64, a: f64, b: f64) -> f64 {
    if s == f64::INFINITY && a.is_finite() && b.is_finite() {
        f64::MAX
    } else {
        s
    }
}

#[inline]
fn overflow_up(s: f64, a: f64, b: f64) -> f64 {
    if s == f64::NEG_INFINITY && a.is_finite() && b.is_finite() {
        f64::MIN
    } else {
        s
    }
}

#[inline]
pub fn add_dn(a: f64, b: f64) -> f64 {
    let s = a + b;
    if !s.is_finite() {
        return overflow_dn(s, a, b);
    }
    if two_sum_err(a, b, s) < 0.0 {
        s.next_down()
    } else {
        s
    }
}

#[inline]
pub fn add_up(a: f64, b: f64) -> f64 {
    let s = a + b;
    if !s.is_finite() {
        return overflow_up(s, a, b);
    }
    if two_sum_err(a, b, s) > 0.0 {
        s.next_up()
    } else {
        s
    }
}

#[inline]
pub fn sub_dn(a: f64, b: f64) -> f64 {
    add_dn(a, -b)
}

#[inline]
pub fn sub_up(a: f64, b: f64) -> f64 {
    add_up(a, -b)
}

/// Sign of `exact(a*b) - fl(a*b)`, or `None` when it cannot be trusted.
#[inline]
fn mul_residual_sign(a: f64, b: f64, p: f64) -> Option<f64> {
    if p.abs() < TINY {
        None
    } else {
        Some(a.mul_add(b, -p))
    }
}

#[inline]
pub fn mul_dn(a: f64, b: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        return 0.0;
    }
    let p = a * b;
    if !p.is_finite() {
        return overflow_dn(p, a, b);
    }
    match mul_residual_sign(a, b, p) {
        Some(e) if e >= 0.0 => p,
        _ => p.next_down(),
    }
}

#[inline]
pub fn mul_up(a: f64, b: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        return 0.0;
    }
    let p = a * b;
    if !p.is_finite() {
        return overflow_up(p, a, b);
    }
    match mul_residual_sign(a, b, p) {
        Some(e) if e <= 0.0 => p,
        _ => p.next_up(),
    }
}

/// Sign of `exact(a/b) - fl(a/b)`; zero means exact, `None` means unknown.
#[inline]
fn div_error_sign(a: f64, b: f64, q: f64) -> Option<f64> {
    if a == 0.0 || b.is_infinite() || a.is_infinite() {
        return Some(0.0);
    }
    if q.abs() < TINY {
        return None;
    }
    let r = (-q).mul_add(b, a);
    if r == 0.0 {
        Some(0.0)
    } else if (r < 0.0) == (b < 0.0) {
        Some(1.0)
    } else {
        Some(-1.0)
    }
}

#[inline]
pub fn div_dn(a: f64, b: f64) -> f64 {
    let q = a / b;
    if !q.is_finite() {
        return overflow_dn(q, a, b);
    }
    match div_error_sign(a, b, q) {
        Some(s) if s >= 0.0 => q,
        _ => q.next_down(),
    }
}

#[inline]
pub fn div_up(a: f64, b: f64) -> f64 {
    let q = a / b;
    if !q.is_finite() {
        return overflow_up(q, a, b);
    }
    match div_error_sign(a, b, q) {
        Some(s) if s <= 0.0 => q,
        _ => q.next_up(),
    }
}

#[inline]
pub fn sqrt_dn(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let s = x.sqrt();
    if s.is_infinite() {
        return f64::MAX;
    }
    // sqrt is correctly rounded; check which side it landed on
    if s.mul_add(s, -x) > 0.0 {
        s.next_down()
    } else {
        s
    }
}

#[inline]
pub fn sqrt_up(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let s = x.sqrt();
    if s.is_infinite() {
        return s;
    }
    if s.mul_add(s, -x) < 0.0 {
        s.next_up()
    } else {
        s
    }
}

#[inline]
pub fn exp_dn(x: f64) -> f64 {
    if x == 0.0 {
        return 1.0;
    }
    if x == f64::NEG_INFINITY {
        return 0.0;
    }
    let e = x.exp();
    if e == f64::INFINITY {
        return f64::MAX;
    }
    e.next_down().next_down().max(0.0)
}

#[inline]
pub fn exp_up(x: f64) -> f64 {
    if x == 0.0 {
        return 1.0;
    }
    let e = x.exp();
    if e.is_infinite() {
        return e;
    }
    e.next_up().next_up()
}

#[inline]
pub fn ln_dn(x: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if x == 1.0 {
        return 0.0;
    }
    if x.is_infinite() {
        return f64::MAX;
    }
    x.ln().next_down().next_down()
}

#[inline]
pub fn ln_up(x: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if x == 1.0 {
        return 0.0;
    }
    if x.is_infinite() {
        return x;
    }
    x.ln().next_up().next_up()
}

/// Nonnegative integer power of a nonnegative base, rounded down.
pub fn powi_nonneg_dn(x: f64, n: u32) -> f64 {
    debug_assert!(x >= 0.0);
    let mut acc = 1.0;
    for _ in 0..n {
        acc = mul_dn(acc, x);
    }
    acc
}

/// Nonnegative integer power of a nonnegative base, rounded up.
pub fn powi_nonneg_up(x: f64, n: u32) -> f64 {
    debug_assert!(x >= 0.0);
    let mut acc = 1.0;
    for _ in 0..n {
        acc = mul_up(acc, x);
    }
    acc
}

/// Lower bound on the real `n`-th root of `x >= 0`.
pub fn root_dn(x: f64, n: u32) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    match n {
        1 => x,
        2 => sqrt_dn(x),
        _ => {
            if x.is_infinite() {
                return f64::MAX;
            }
            let r = x.powf(1.0 / n as f64);
            (r * (1.0 - 8.0 * f64::EPSILON)).next_down().max(0.0)
        }
    }
}

/// Upper bound on the real `n`-th root of `x >= 0`.
pub fn root_up(x: f64, n: u32) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    match n {
        1 => x,
        2 => sqrt_up(x),
        _ => {
            if x.is_infinite() {
                return x;
            }
            let r = x.powf(1.0 / n as f64);
            (r * (1.0 + 8.0 * f64::EPSILON)).next_up()
        }
    }
}
