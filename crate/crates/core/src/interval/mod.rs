//! Closed real intervals and the bounds-propagation fixpoint built on them.
//!
//! An [`Interval`] is the currency of every bound in the crate: behavior
//! bounds on model variables, density bounds over a region, and derivative
//! enclosures used for sign tests. With [`Rounding::Outward`] every
//! operation returns an enclosure of the exact real result set.

mod propagate;
pub(crate) mod round;

pub use propagate::{propagate, BoundsStore, Contradiction, PropagationSettings};

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Rounding applied to interval endpoints after each primitive operation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rounding {
    /// Endpoints move outward whenever the nearest result may be inexact.
    #[default]
    Outward,
    /// Plain IEEE round-to-nearest. Faster, not a guaranteed enclosure.
    Nearest,
}

/// A closed interval `[lo, hi]` with `lo <= hi`.
///
/// Endpoints may be infinite; this happens for extended division and for
/// variables whose range has not been bounded yet.
#[derive(Clone, Copy, PartialEq)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    pub const ENTIRE: Interval = Interval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };
    pub const ZERO: Interval = Interval { lo: 0.0, hi: 0.0 };
    pub const NONNEGATIVE: Interval = Interval {
        lo: 0.0,
        hi: f64::INFINITY,
    };

    /// Creates `[lo, hi]`.
    ///
    /// Panics if either endpoint is NaN or `lo > hi`.
    pub fn new(lo: f64, hi: f64) -> Self {
        Self::try_new(lo, hi).unwrap_or_else(|| panic!("invalid interval [{lo}, {hi}]"))
    }

    /// Creates `[lo, hi]`, or `None` if that is not a valid interval.
    pub fn try_new(lo: f64, hi: f64) -> Option<Self> {
        if lo <= hi && lo != f64::INFINITY && hi != f64::NEG_INFINITY {
            Some(Self { lo, hi })
        } else {
            None
        }
    }

    pub fn point(x: f64) -> Self {
        Self::new(x, x)
    }

    #[inline]
    pub fn lo(self) -> f64 {
        self.lo
    }

    #[inline]
    pub fn hi(self) -> f64 {
        self.hi
    }

    pub fn is_point(self) -> bool {
        self.lo == self.hi
    }

    pub fn is_finite(self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    pub fn contains(self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_zero(self) -> bool {
        self.lo <= 0.0 && 0.0 <= self.hi
    }

    pub fn is_subset_of(self, other: Interval) -> bool {
        other.lo <= self.lo && self.hi <= other.hi
    }

    /// Width rounded up (an upper bound on `hi - lo`).
    pub fn width(self) -> f64 {
        round::sub_up(self.hi, self.lo)
    }

    /// Width as an enclosing interval.
    pub fn width_enclosure(self) -> Interval {
        Interval {
            lo: round::sub_dn(self.hi, self.lo).max(0.0),
            hi: round::sub_up(self.hi, self.lo),
        }
    }

    /// Midpoint of a finite interval.
    pub fn mid(self) -> f64 {
        let m = 0.5 * (self.lo + self.hi);
        if m.is_finite() {
            m
        } else {
            0.5 * self.lo + 0.5 * self.hi
        }
    }

    pub fn intersect(self, other: Interval) -> Option<Interval> {
        Interval::try_new(self.lo.max(other.lo), self.hi.min(other.hi))
    }

    pub fn hull(self, other: Interval) -> Interval {
        Interval {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
        }
    }

    /// Clamps the interval into `range` (the image of `x -> clamp(x, range)`).
    pub fn clamp_to(self, range: Interval) -> Interval {
        let lo = self.lo.clamp(range.lo, range.hi);
        let hi = self.hi.clamp(range.lo, range.hi);
        Interval { lo, hi }
    }

    pub fn neg(self) -> Interval {
        Interval {
            lo: -self.hi,
            hi: -self.lo,
        }
    }

    pub fn add(self, rhs: Interval, r: Rounding) -> Interval {
        match r {
            Rounding::Outward => Interval {
                lo: round::add_dn(self.lo, rhs.lo),
                hi: round::add_up(self.hi, rhs.hi),
            },
            Rounding::Nearest => Interval {
                lo: self.lo + rhs.lo,
                hi: self.hi + rhs.hi,
            },
        }
    }

    pub fn sub(self, rhs: Interval, r: Rounding) -> Interval {
        self.add(rhs.neg(), r)
    }

    pub fn mul(self, rhs: Interval, r: Rounding) -> Interval {
        let (a, b, c, d) = (self.lo, self.hi, rhs.lo, rhs.hi);
        match r {
            Rounding::Outward => {
                let lo = round::mul_dn(a, c)
                    .min(round::mul_dn(a, d))
                    .min(round::mul_dn(b, c))
                    .min(round::mul_dn(b, d));
                let hi = round::mul_up(a, c)
                    .max(round::mul_up(a, d))
                    .max(round::mul_up(b, c))
                    .max(round::mul_up(b, d));
                Interval { lo, hi }
            }
            Rounding::Nearest => {
                let p = |x: f64, y: f64| if x == 0.0 || y == 0.0 { 0.0 } else { x * y };
                let (ac, ad, bc, bd) = (p(a, c), p(a, d), p(b, c), p(b, d));
                Interval {
                    lo: ac.min(ad).min(bc).min(bd),
                    hi: ac.max(ad).max(bc).max(bd),
                }
            }
        }
    }

    /// Extended division.
    ///
    /// A divisor that contains zero in its interior gives the whole line; a
    /// divisor with zero as one endpoint gives a half-line where the sign of
    /// the numerator allows it.
    pub fn div(self, rhs: Interval, r: Rounding) -> Interval {
        let (dn, up): (fn(f64, f64) -> f64, fn(f64, f64) -> f64) = match r {
            Rounding::Outward => (round::div_dn, round::div_up),
            Rounding::Nearest => (|x, y| x / y, |x, y| x / y),
        };
        let (a, b) = (self.lo, self.hi);
        let (c, d) = (rhs.lo, rhs.hi);
        if c > 0.0 || d < 0.0 {
            let cands_lo = [dn(a, c), dn(a, d), dn(b, c), dn(b, d)];
            let cands_hi = [up(a, c), up(a, d), up(b, c), up(b, d)];
            // f64::min/max skip the NaN of inf/inf
            let lo = cands_lo.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = cands_hi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            return Interval::try_new(lo, hi).unwrap_or(Interval::ENTIRE);
        }
        if c == 0.0 && d == 0.0 {
            return Interval::ENTIRE;
        }
        if c == 0.0 {
            // divisor in (0, d]
            if a >= 0.0 {
                Interval::new(dn(a, d).max(0.0), f64::INFINITY)
            } else if b <= 0.0 {
                Interval::new(f64::NEG_INFINITY, up(b, d).min(0.0))
            } else {
                Interval::ENTIRE
            }
        } else if d == 0.0 {
            // divisor in [c, 0)
            if a >= 0.0 {
                Interval::new(f64::NEG_INFINITY, up(a, c).min(0.0))
            } else if b <= 0.0 {
                Interval::new(dn(b, c).max(0.0), f64::INFINITY)
            } else {
                Interval::ENTIRE
            }
        } else {
            Interval::ENTIRE
        }
    }

    pub fn exp(self, r: Rounding) -> Interval {
        match r {
            Rounding::Outward => Interval {
                lo: round::exp_dn(self.lo),
                hi: round::exp_up(self.hi),
            },
            Rounding::Nearest => Interval {
                lo: self.lo.exp(),
                hi: self.hi.exp(),
            },
        }
    }

    /// Natural logarithm of the positive part; `lo <= 0` maps to `-inf`.
    pub fn ln(self, r: Rounding) -> Interval {
        match r {
            Rounding::Outward => Interval {
                lo: round::ln_dn(self.lo),
                hi: round::ln_up(self.hi),
            },
            Rounding::Nearest => Interval {
                lo: if self.lo <= 0.0 {
                    f64::NEG_INFINITY
                } else {
                    self.lo.ln()
                },
                hi: if self.hi <= 0.0 {
                    f64::NEG_INFINITY
                } else {
                    self.hi.ln()
                },
            },
        }
    }

    /// Nonnegative integer power.
    pub fn powi(self, n: u32, r: Rounding) -> Interval {
        if n == 0 {
            return Interval::point(1.0);
        }
        if n == 1 {
            return self;
        }
        let (pdn, pup): (fn(f64, u32) -> f64, fn(f64, u32) -> f64) = match r {
            Rounding::Outward => (round::powi_nonneg_dn, round::powi_nonneg_up),
            Rounding::Nearest => (|x, n| x.powi(n as i32), |x, n| x.powi(n as i32)),
        };
        let (a, b) = (self.lo, self.hi);
        if n % 2 == 1 {
            let lo = if a >= 0.0 { pdn(a, n) } else { -pup(-a, n) };
            let hi = if b >= 0.0 { pup(b, n) } else { -pdn(-b, n) };
            Interval { lo, hi }
        } else if a >= 0.0 {
            Interval {
                lo: pdn(a, n),
                hi: pup(b, n),
            }
        } else if b <= 0.0 {
            Interval {
                lo: pdn(-b, n),
                hi: pup(-a, n),
            }
        } else {
            Interval {
                lo: 0.0,
                hi: pup((-a).max(b), n),
            }
        }
    }

    /// Scales by a real constant.
    pub fn scale(self, k: f64, r: Rounding) -> Interval {
        self.mul(Interval::point(k), r)
    }
}

impl fmt::Debug for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:?}, {:?}]", self.lo, self.hi)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

/// Serialized as a two-element array; infinite endpoints become the strings
/// `"inf"` and `"-inf"` because JSON has no literal for them.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum Endpoint {
    Number(f64),
    Text(String),
}

impl Endpoint {
    fn from_f64(x: f64) -> Self {
        if x == f64::INFINITY {
            Endpoint::Text("inf".into())
        } else if x == f64::NEG_INFINITY {
            Endpoint::Text("-inf".into())
        } else {
            Endpoint::Number(x)
        }
    }

    fn to_f64(&self) -> Result<f64, String> {
        match self {
            Endpoint::Number(x) => Ok(*x),
            Endpoint::Text(s) => match s.as_str() {
                "inf" | "+inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                other => Err(format!("invalid interval endpoint `{other}`")),
            },
        }
    }
}

impl Serialize for Interval {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        (Endpoint::from_f64(self.lo), Endpoint::from_f64(self.hi)).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Interval {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let (lo, hi) = <(Endpoint, Endpoint)>::deserialize(d)?;
        let lo = lo.to_f64().map_err(serde::de::Error::custom)?;
        let hi = hi.to_f64().map_err(serde::de::Error::custom)?;
        Interval::try_new(lo, hi)
            .ok_or_else(|| serde::de::Error::custom(format!("invalid interval [{lo}, {hi}]")))
    }
}

/// Product of the widths of a box, as an enclosing interval.
pub fn box_volume(region: &[Interval]) -> Interval {
    region.iter().fold(Interval::point(1.0), |acc, iv| {
        acc.mul(iv.width_enclosure(), Rounding::Outward)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const O: Rounding = Rounding::Outward;

    fn iv(a: f64, b: f64) -> Interval {
        Interval::new(a, b)
    }

    #[test]
    fn endpoint_addition() {
        assert_eq!(iv(1.0, 2.0).add(iv(3.0, 4.0), O), iv(4.0, 6.0));
    }

    #[test]
    fn product_of_behavior_example() {
        // a, b in [0, 2] gives ab in [0, 4]
        assert_eq!(iv(0.0, 2.0).mul(iv(0.0, 2.0), O), iv(0.0, 4.0));
    }

    #[test]
    fn division_by_zero_straddling_divisor_is_entire() {
        assert_eq!(iv(1.0, 2.0).div(iv(-1.0, 1.0), O), Interval::ENTIRE);
    }

    #[test]
    fn division_by_half_open_divisor() {
        assert_eq!(iv(1.0, 2.0).div(iv(0.0, 4.0), O), iv(0.25, f64::INFINITY));
        assert_eq!(iv(-2.0, -1.0).div(iv(0.0, 4.0), O), iv(f64::NEG_INFINITY, -0.25));
        assert_eq!(iv(1.0, 2.0).div(iv(-4.0, 0.0), O), iv(f64::NEG_INFINITY, -0.25));
        assert_eq!(iv(0.0, 0.0).div(iv(0.0, 0.0), O), Interval::ENTIRE);
    }

    #[test]
    fn zero_times_infinity_is_zero() {
        let z = iv(0.0, 0.0).mul(Interval::ENTIRE, O);
        assert_eq!(z, iv(0.0, 0.0));
        let h = iv(0.0, 1.0).mul(iv(1.0, f64::INFINITY), O);
        assert_eq!(h, iv(0.0, f64::INFINITY));
    }

    #[test]
    fn even_powers_straddling_zero() {
        assert_eq!(iv(-3.0, 2.0).powi(2, O), iv(0.0, 9.0));
        assert_eq!(iv(-3.0, -2.0).powi(2, O), iv(4.0, 9.0));
        assert_eq!(iv(-3.0, 2.0).powi(3, O), iv(-27.0, 8.0));
        assert_eq!(iv(-3.0, 2.0).powi(0, O), iv(1.0, 1.0));
    }

    #[test]
    fn exp_at_zero_is_exact() {
        assert_eq!(Interval::point(0.0).exp(O), Interval::point(1.0));
        let e = Interval::point(1.0).exp(O);
        assert!(e.contains(std::f64::consts::E));
        assert!(e.lo() < e.hi());
    }

    #[test]
    fn serde_roundtrip_with_infinities() {
        let v = vec![iv(0.0, f64::INFINITY), iv(-1.5, 2.25), Interval::ENTIRE];
        let s = serde_json::to_string(&v).unwrap();
        assert_eq!(s, r#"[[0.0,"inf"],[-1.5,2.25],["-inf","inf"]]"#);
        let back: Vec<Interval> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, v);
        assert!(serde_json::from_str::<Interval>("[2.0, 1.0]").is_err());
    }

    #[test]
    fn clamp_reproduces_max_zero() {
        assert_eq!(iv(-87.0, 87.0).clamp_to(Interval::NONNEGATIVE), iv(0.0, 87.0));
        assert_eq!(iv(-5.0, -1.0).clamp_to(Interval::NONNEGATIVE), iv(0.0, 0.0));
    }
}
