use crate::expr::{Expr, Tape};
use crate::interval::{Interval, Rounding};

use super::integrate::{integrate_adaptive, AdaptiveOptions};
use super::sample::Sampler;
use super::{DensityBound, DensityError, MassFraction};

const O: Rounding = Rounding::Outward;

/// A density bound given by a formula: `max(f(x), 0)` on a support box and
/// zero outside it.
///
/// Derivative enclosures come from symbolic derivatives of `f`. Across the
/// support border the bound jumps, so regions not inside the support get
/// unknown derivative signs.
#[derive(Clone, Debug)]
pub struct ExpressionLowerBound {
    expr: Expr,
    support: Vec<Interval>,
    value: Tape,
    slopes: Vec<Tape>,
    curvatures: Vec<Tape>,
    mass: MassFraction,
}

impl ExpressionLowerBound {
    /// `expr` may mention variables `0..support.len()`.
    pub fn new(expr: Expr, support: Vec<Interval>) -> Result<Self, DensityError> {
        let n = support.len();
        if n == 0 {
            return Err(DensityError::BadParameter("a density needs at least one variable".into()));
        }
        if let Some(&v) = expr.variables().iter().find(|&&v| v >= n) {
            return Err(DensityError::Expression(format!("variable index {v} is outside the support")));
        }
        if let Some(s) = support.iter().find(|s| !s.is_finite() || s.width() <= 0.0) {
            return Err(DensityError::BadParameter(format!("support interval {s} must be finite and wide")));
        }
        let slopes_e: Vec<Expr> = (0..n).map(|k| expr.differentiate(k)).collect();
        let curv_e: Vec<Expr> = slopes_e.iter().enumerate().map(|(k, d)| d.differentiate(k)).collect();
        let mut d = ExpressionLowerBound {
            value: Tape::compile(&expr),
            slopes: slopes_e.iter().map(Tape::compile).collect(),
            curvatures: curv_e.iter().map(Tape::compile).collect(),
            expr,
            support,
            mass: MassFraction {
                value: 0.0,
                estimated: true,
            },
        };
        let opts = AdaptiveOptions {
            abs_tol: 1e-6,
            max_evals: 5_000_000,
            ..Default::default()
        };
        let i = integrate_adaptive(&|x: &[f64]| d.value(x), &d.support, &opts);
        d.mass.value = i.value;
        if !(i.value.is_finite() && i.value <= 1.0 + 1e-3) {
            return Err(DensityError::MassTooLarge(i.value));
        }
        d.mass.value = i.value.clamp(0.0, 1.0);
        Ok(d)
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn support(&self) -> &[Interval] {
        &self.support
    }

    fn inside(&self, region: &[Interval]) -> bool {
        region.iter().zip(&self.support).all(|(r, s)| r.is_subset_of(*s))
    }

    fn raw_range(&self, region: &[Interval]) -> Interval {
        let mut buf = Vec::with_capacity(self.value.len());
        self.value.eval_interval(region, O, &mut buf)
    }
}

impl DensityBound for ExpressionLowerBound {
    fn dim(&self) -> usize {
        self.support.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        if !x.iter().zip(&self.support).all(|(xi, s)| s.contains(*xi)) {
            return 0.0;
        }
        let mut buf = Vec::with_capacity(self.value.len());
        let v = self.value.eval_point(x, &mut buf);
        if v > 0.0 {
            v
        } else {
            0.0
        }
    }

    fn range(&self, region: &[Interval]) -> Interval {
        let clipped: Option<Vec<Interval>> = region.iter().zip(&self.support).map(|(r, s)| r.intersect(*s)).collect();
        match clipped {
            None => Interval::ZERO,
            Some(c) => {
                let v = self.raw_range(&c).clamp_to(Interval::NONNEGATIVE);
                if self.inside(region) {
                    v
                } else {
                    Interval::new(0.0, v.hi())
                }
            }
        }
    }

    fn slope(&self, region: &[Interval], k: usize) -> Interval {
        if !self.inside(region) {
            return Interval::ENTIRE;
        }
        let f = self.raw_range(region);
        if f.hi() <= 0.0 {
            return Interval::ZERO;
        }
        let mut buf = Vec::with_capacity(self.slopes[k].len());
        let s = self.slopes[k].eval_interval(region, O, &mut buf);
        if f.lo() >= 0.0 {
            s
        } else {
            s.hull(Interval::ZERO)
        }
    }

    fn curvature(&self, region: &[Interval], k: usize) -> Interval {
        if !self.inside(region) {
            return Interval::ENTIRE;
        }
        let f = self.raw_range(region);
        if f.hi() <= 0.0 {
            return Interval::ZERO;
        }
        if f.lo() < 0.0 {
            return Interval::ENTIRE;
        }
        let mut buf = Vec::with_capacity(self.curvatures[k].len());
        self.curvatures[k].eval_interval(region, O, &mut buf)
    }

    fn mass_fraction(&self) -> MassFraction {
        self.mass
    }

    fn scales(&self) -> Vec<f64> {
        self.support.iter().map(|s| (s.hi() - s.lo()) / 12f64.sqrt()).collect()
    }

    fn proposal(&self) -> Sampler {
        Sampler::Uniform(self.support.clone())
    }

    fn base_member(&self) -> Option<Sampler> {
        None
    }
}
