//! Gaussian densities and the two Gaussian-derived lower bounds.
//!
//! For a Gaussian `f(x) = c exp(-Q(x)/2)` with `Q(x) = (x-m)' L (x-m)` the
//! region enclosures are structured rather than naive interval evaluations:
//! `Q` is convex, so its maximum over a box sits at a vertex, and its
//! minimum is bounded below by the tangent plane at the box center. The
//! derivative `df/dx_k = f * s_k` with `s_k = -(L(x-m))_k` linear, so `s_k`
//! is enclosed exactly.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::expr::Expr;
use crate::interval::{Interval, Rounding};

use super::integrate::{integrate_adaptive, AdaptiveOptions};
use super::piecewise::{active, min_curvature, min_range, min_slope};
use super::sample::Sampler;
use super::{DensityBound, DensityError, MassFraction};

const O: Rounding = Rounding::Outward;

/// Above this dimension vertex enumeration gives way to interval evaluation.
const MAX_VERTEX_DIM: usize = 12;

/// A multivariate normal density, usable as its own lower bound.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianLowerBound {
    mean: Vec<f64>,
    sd: Vec<f64>,
    corr: Vec<Vec<f64>>,
    /// Precision matrix, row-major.
    prec: Vec<f64>,
    /// Lower Cholesky factor of the covariance, row-major.
    chol: Vec<f64>,
    norm: f64,
}

impl GaussianLowerBound {
    /// Builds the density from means, standard deviations and a correlation
    /// matrix (identity when `None`).
    pub fn new(mean: Vec<f64>, sd: Vec<f64>, corr: Option<Vec<Vec<f64>>>) -> Result<Self, DensityError> {
        let n = mean.len();
        if n == 0 {
            return Err(DensityError::BadParameter("a density needs at least one variable".into()));
        }
        if sd.len() != n {
            return Err(DensityError::DimensionMismatch {
                expected: n,
                found: sd.len(),
            });
        }
        for (i, s) in sd.iter().enumerate() {
            if !(s.is_finite() && *s > 0.0) {
                return Err(DensityError::BadParameter(format!("standard deviation {i} must be positive, got {s}")));
            }
        }
        if let Some(m) = mean.iter().find(|m| !m.is_finite()) {
            return Err(DensityError::BadParameter(format!("mean {m} is not finite")));
        }
        let corr = match corr {
            Some(c) => c,
            None => (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect(),
        };
        validate_correlation(&corr, n)?;

        let cov = DMatrix::from_fn(n, n, |i, j| corr[i][j] * sd[i] * sd[j]);
        let chol = cov.clone().cholesky().ok_or(DensityError::NotPositiveDefinite)?;
        let l = chol.l();
        let diag_prod: f64 = (0..n).map(|i| l[(i, i)]).product();
        if !(diag_prod > 0.0 && diag_prod.is_finite()) {
            return Err(DensityError::NotPositiveDefinite);
        }
        let inv = chol.inverse();
        let norm = 1.0 / ((2.0 * std::f64::consts::PI).powf(n as f64 / 2.0) * diag_prod);
        Ok(GaussianLowerBound {
            prec: (0..n * n).map(|k| 0.5 * (inv[(k / n, k % n)] + inv[(k % n, k / n)])).collect(),
            chol: (0..n * n).map(|k| l[(k / n, k % n)]).collect(),
            mean,
            sd,
            corr,
            norm,
        })
    }

    /// Same covariance, different mean.
    pub fn with_mean(&self, mean: Vec<f64>) -> Self {
        assert_eq!(mean.len(), self.dim());
        GaussianLowerBound { mean, ..self.clone() }
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn std_devs(&self) -> &[f64] {
        &self.sd
    }

    pub fn correlation(&self) -> &[Vec<f64>] {
        &self.corr
    }

    pub fn normalization(&self) -> f64 {
        self.norm
    }

    pub fn precision(&self, i: usize, j: usize) -> f64 {
        self.prec[i * self.dim() + j]
    }

    /// The density written out as an expression over variables `0..n`:
    /// `c * exp(-(sum_i a_ii P_i^2 + sum_{i<j} a_ij P_i P_j))` with
    /// `P_i = x_i - m_i`, `a_ii = L_ii / 2` and `a_ij = L_ij`.
    pub fn expression(&self) -> Expr {
        let n = self.dim();
        let shift = |i: usize| Expr::Sub(Box::new(Expr::Var(i)), Box::new(Expr::Const(self.mean[i])));
        let mut terms: Vec<Expr> = Vec::new();
        for i in 0..n {
            for j in i..n {
                let (coef, t) = if i == j {
                    (0.5 * self.precision(i, i), Expr::Pow(Box::new(shift(i)), 2))
                } else {
                    (self.precision(i, j), Expr::Mul(Box::new(shift(i)), Box::new(shift(j))))
                };
                terms.push(Expr::Mul(Box::new(Expr::Const(coef)), Box::new(t)));
            }
        }
        let sum = terms
            .into_iter()
            .reduce(|a, b| Expr::Add(Box::new(a), Box::new(b)))
            .expect("nonempty");
        Expr::Mul(
            Box::new(Expr::Const(self.norm)),
            Box::new(Expr::Exp(Box::new(Expr::Neg(Box::new(sum))))),
        )
    }

    fn quad_point(&self, x: &[f64]) -> f64 {
        let n = self.dim();
        let mut q = 0.0;
        for i in 0..n {
            let di = x[i] - self.mean[i];
            let mut row = 0.0;
            for j in 0..n {
                row += self.prec[i * n + j] * (x[j] - self.mean[j]);
            }
            q += di * row;
        }
        q
    }

    /// Upper bound on `Q(x)`: the float evaluation plus an a priori bound
    /// on its rounding error, `gamma_(n^2+3)` times the sum of absolute
    /// terms, padded.
    fn quad_upper_at(&self, x: &[f64]) -> f64 {
        let n = self.dim();
        let mut q = 0.0;
        let mut abs = 0.0;
        for i in 0..n {
            let di = x[i] - self.mean[i];
            for j in 0..n {
                let t = self.prec[i * n + j] * di * (x[j] - self.mean[j]);
                q += t;
                abs += t.abs();
            }
        }
        let m = (n * n + 3) as f64 * f64::EPSILON;
        let err = 1.01 * m / (1.0 - m) * abs + f64::MIN_POSITIVE * (n * n) as f64;
        crate::interval::round::add_up(q, err)
    }

    /// Enclosure of `Q` at the exact point `x`.
    fn quad_at(&self, x: &[f64]) -> Interval {
        let d: Vec<Interval> = x
            .iter()
            .zip(&self.mean)
            .map(|(&xi, &m)| Interval::point(xi).sub(Interval::point(m), O))
            .collect();
        self.quad_natural(&d)
    }

    /// Natural interval extension of `Q` over offsets `d = x - m`.
    fn quad_natural(&self, d: &[Interval]) -> Interval {
        let n = self.dim();
        let mut q = Interval::ZERO;
        for i in 0..n {
            q = q.add(d[i].powi(2, O).scale(self.prec[i * n + i], O), O);
            for j in i + 1..n {
                let c = 2.0 * self.prec[i * n + j];
                q = q.add(d[i].mul(d[j], O).scale(c, O), O);
            }
        }
        q
    }

    fn offsets(&self, region: &[Interval]) -> Vec<Interval> {
        region
            .iter()
            .zip(&self.mean)
            .map(|(r, &m)| r.sub(Interval::point(m), O))
            .collect()
    }

    /// Enclosure of `Q` over a box.
    fn quad_range(&self, region: &[Interval]) -> Interval {
        let n = self.dim();
        let d = self.offsets(region);
        let natural = self.quad_natural(&d);

        let qmax = if n <= MAX_VERTEX_DIM {
            let mut best = f64::NEG_INFINITY;
            let mut v = vec![0.0; n];
            for mask in 0u32..(1u32 << n) {
                for k in 0..n {
                    v[k] = if mask >> k & 1 == 1 { region[k].hi() } else { region[k].lo() };
                }
                best = best.max(self.quad_upper_at(&v));
            }
            best.min(natural.hi())
        } else {
            natural.hi()
        };

        // tangent plane at the center, minimized over the box
        let c: Vec<f64> = region.iter().map(|r| r.mid()).collect();
        let mut tangent = self.quad_at(&c);
        for k in 0..n {
            let mut g = Interval::ZERO;
            for j in 0..n {
                let dj = Interval::point(c[j]).sub(Interval::point(self.mean[j]), O);
                g = g.add(dj.scale(2.0 * self.prec[k * n + j], O), O);
            }
            let h = crate::interval::round::sub_up(c[k], region[k].lo())
                .max(crate::interval::round::sub_up(region[k].hi(), c[k]));
            tangent = tangent.add(g.mul(Interval::new(-h, h), O), O);
        }
        let qmin = tangent.lo().max(natural.lo()).max(0.0);
        Interval::new(qmin.min(qmax), qmax)
    }

    /// `s_k = -(L (x - m))_k` over a box; exact up to rounding.
    fn score(&self, d: &[Interval], k: usize) -> Interval {
        let n = self.dim();
        let mut s = Interval::ZERO;
        for j in 0..n {
            s = s.add(d[j].scale(-self.prec[k * n + j], O), O);
        }
        s
    }

    fn density_from_quad(&self, q: Interval) -> Interval {
        q.scale(-0.5, O).exp(O).scale(self.norm, O)
    }

    pub(crate) fn draw<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let n = self.dim();
        let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        for i in 0..n {
            let mut acc = self.mean[i];
            for j in 0..=i {
                acc += self.chol[i * n + j] * z[j];
            }
            out[i] = acc;
        }
    }

    /// A box holding all but a negligible fraction of the mass.
    fn bulk_box(&self, sigmas: f64) -> Vec<Interval> {
        self.mean
            .iter()
            .zip(&self.sd)
            .map(|(&m, &s)| Interval::new(m - sigmas * s, m + sigmas * s))
            .collect()
    }
}

impl DensityBound for GaussianLowerBound {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.norm * (-0.5 * self.quad_point(x)).exp()
    }

    fn range(&self, region: &[Interval]) -> Interval {
        self.density_from_quad(self.quad_range(region))
    }

    fn slope(&self, region: &[Interval], k: usize) -> Interval {
        let d = self.offsets(region);
        self.range(region).mul(self.score(&d, k), O)
    }

    fn curvature(&self, region: &[Interval], k: usize) -> Interval {
        let d = self.offsets(region);
        let n = self.dim();
        let s2 = self.score(&d, k).powi(2, O);
        let lkk = Interval::point(self.prec[k * n + k]);
        self.range(region).mul(s2.sub(lkk, O), O)
    }

    fn derivatives(&self, region: &[Interval]) -> Vec<(Interval, Interval)> {
        let n = self.dim();
        let f = self.range(region);
        let d = self.offsets(region);
        (0..n)
            .map(|k| {
                let s = self.score(&d, k);
                let lkk = Interval::point(self.prec[k * n + k]);
                (f.mul(s, O), f.mul(s.powi(2, O).sub(lkk, O), O))
            })
            .collect()
    }

    fn mass_fraction(&self) -> MassFraction {
        MassFraction {
            value: 1.0,
            estimated: false,
        }
    }

    fn scales(&self) -> Vec<f64> {
        self.sd.clone()
    }

    fn proposal(&self) -> Sampler {
        Sampler::Gaussian(self.clone())
    }

    fn base_member(&self) -> Option<Sampler> {
        Some(Sampler::Gaussian(self.clone()))
    }
}

fn validate_correlation(c: &[Vec<f64>], n: usize) -> Result<(), DensityError> {
    if c.len() != n || c.iter().any(|row| row.len() != n) {
        return Err(DensityError::BadCorrelation(format!("expected a {n}x{n} matrix")));
    }
    for i in 0..n {
        if c[i][i] != 1.0 {
            return Err(DensityError::BadCorrelation(format!("diagonal entry {i} is {}, not 1", c[i][i])));
        }
        for j in 0..n {
            let v = c[i][j];
            if !v.is_finite() || v.abs() > 1.0 {
                return Err(DensityError::BadCorrelation(format!("entry ({i},{j}) = {v} is outside [-1, 1]")));
            }
            if (v - c[j][i]).abs() > 1e-12 {
                return Err(DensityError::BadCorrelation(format!("entries ({i},{j}) and ({j},{i}) differ")));
            }
        }
    }
    Ok(())
}

/// Default integration settings for mass fractions.
fn mass_options() -> AdaptiveOptions {
    AdaptiveOptions {
        abs_tol: 2e-5,
        ..AdaptiveOptions::default()
    }
}

/// A Gaussian whose peak is cut off at a constant height.
///
/// The default cap is the height of the joint uniform density with the same
/// means and standard deviations: `prod_i 1 / (2 sqrt(3) sd_i)`.
#[derive(Clone, Debug)]
pub struct CappedGaussianLowerBound {
    base: GaussianLowerBound,
    cap: f64,
    mass: MassFraction,
}

impl CappedGaussianLowerBound {
    pub fn new(base: GaussianLowerBound, cap: Option<f64>) -> Result<Self, DensityError> {
        let cap = cap.unwrap_or_else(|| Self::uniform_height(base.std_devs()));
        if !(cap.is_finite() && cap > 0.0) {
            return Err(DensityError::BadParameter(format!("cap must be positive, got {cap}")));
        }
        let mut d = CappedGaussianLowerBound {
            base,
            cap,
            mass: MassFraction {
                value: 0.0,
                estimated: true,
            },
        };
        let bulk = d.base.bulk_box(8.0);
        let integral = integrate_adaptive(&|x: &[f64]| d.value(x), &bulk, &mass_options());
        d.mass.value = integral.value.clamp(0.0, 1.0);
        Ok(d)
    }

    /// Height of the uniform density on `mean +- sqrt(3) sd` in each variable.
    pub fn uniform_height(sd: &[f64]) -> f64 {
        sd.iter().map(|s| 1.0 / (2.0 * 3f64.sqrt() * s)).product()
    }

    pub fn base(&self) -> &GaussianLowerBound {
        &self.base
    }

    pub fn cap(&self) -> f64 {
        self.cap
    }

    fn pieces(&self, region: &[Interval]) -> [Interval; 2] {
        [self.base.range(region), Interval::point(self.cap)]
    }
}

impl DensityBound for CappedGaussianLowerBound {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.base.value(x).min(self.cap)
    }

    fn range(&self, region: &[Interval]) -> Interval {
        min_range(&self.pieces(region))
    }

    fn slope(&self, region: &[Interval], k: usize) -> Interval {
        let on = active(&self.pieces(region));
        let slopes = [
            if on[0] { self.base.slope(region, k) } else { Interval::ZERO },
            Interval::ZERO,
        ];
        min_slope(&on, slopes.into_iter())
    }

    fn curvature(&self, region: &[Interval], k: usize) -> Interval {
        let on = active(&self.pieces(region));
        let curv = [
            if on[0] { self.base.curvature(region, k) } else { Interval::ZERO },
            Interval::ZERO,
        ];
        min_curvature(&on, curv.into_iter())
    }

    fn derivatives(&self, region: &[Interval]) -> Vec<(Interval, Interval)> {
        let on = active(&self.pieces(region));
        let zero = (Interval::ZERO, Interval::ZERO);
        let base = if on[0] { self.base.derivatives(region) } else { vec![zero; self.dim()] };
        base.into_iter()
            .map(|(s, c)| {
                (
                    min_slope(&on, [s, Interval::ZERO].into_iter()),
                    min_curvature(&on, [c, Interval::ZERO].into_iter()),
                )
            })
            .collect()
    }

    fn mass_fraction(&self) -> MassFraction {
        self.mass
    }

    fn scales(&self) -> Vec<f64> {
        self.base.scales()
    }

    fn proposal(&self) -> Sampler {
        Sampler::Gaussian(self.base.clone())
    }

    fn base_member(&self) -> Option<Sampler> {
        Some(Sampler::Gaussian(self.base.clone()))
    }
}

/// The pointwise infimum of a Gaussian family whose means range over a box.
///
/// For fixed `x` the density is log-concave in the mean, so the infimum over
/// a box of means is attained at one of its corners; the bound is the
/// minimum over the corner members.
#[derive(Clone, Debug)]
pub struct ParameterEnvelopeLowerBound {
    mid: GaussianLowerBound,
    mean_ranges: Vec<Interval>,
    corners: Vec<GaussianLowerBound>,
    mass: MassFraction,
}

impl ParameterEnvelopeLowerBound {
    /// `mean_ranges[i]` is the set of admissible means of variable `i`; a
    /// point interval fixes it. Covariance comes from `base`.
    pub fn new(base: &GaussianLowerBound, mean_ranges: Vec<Interval>) -> Result<Self, DensityError> {
        let n = base.dim();
        if mean_ranges.len() != n {
            return Err(DensityError::DimensionMismatch {
                expected: n,
                found: mean_ranges.len(),
            });
        }
        if let Some(r) = mean_ranges.iter().find(|r| !r.is_finite()) {
            return Err(DensityError::BadParameter(format!("mean range {r} is not finite")));
        }
        let free: Vec<usize> = (0..n).filter(|&i| !mean_ranges[i].is_point()).collect();
        if free.len() > 16 {
            return Err(DensityError::BadParameter("at most 16 mean ranges may be free".into()));
        }
        let mut corners = Vec::with_capacity(1 << free.len());
        for mask in 0u32..(1u32 << free.len()) {
            let mut m: Vec<f64> = mean_ranges.iter().map(|r| r.lo()).collect();
            for (b, &i) in free.iter().enumerate() {
                if mask >> b & 1 == 1 {
                    m[i] = mean_ranges[i].hi();
                }
            }
            corners.push(base.with_mean(m));
        }
        let mid = base.with_mean(mean_ranges.iter().map(|r| r.mid()).collect());
        let mut d = ParameterEnvelopeLowerBound {
            mid,
            mean_ranges,
            corners,
            mass: MassFraction {
                value: 0.0,
                estimated: true,
            },
        };
        let bulk: Vec<Interval> = d
            .mean_ranges
            .iter()
            .zip(d.mid.std_devs())
            .map(|(r, &s)| Interval::new(r.lo() - 8.0 * s, r.hi() + 8.0 * s))
            .collect();
        let integral = integrate_adaptive(&|x: &[f64]| d.value(x), &bulk, &mass_options());
        d.mass.value = integral.value.clamp(0.0, 1.0);
        Ok(d)
    }

    pub fn mean_ranges(&self) -> &[Interval] {
        &self.mean_ranges
    }

    pub fn corners(&self) -> &[GaussianLowerBound] {
        &self.corners
    }

    /// The member with midpoint means.
    pub fn midpoint_member(&self) -> &GaussianLowerBound {
        &self.mid
    }

    fn pieces(&self, region: &[Interval]) -> Vec<Interval> {
        self.corners.iter().map(|g| g.range(region)).collect()
    }
}

impl DensityBound for ParameterEnvelopeLowerBound {
    fn dim(&self) -> usize {
        self.mid.dim()
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.corners.iter().map(|g| g.value(x)).fold(f64::INFINITY, f64::min)
    }

    fn range(&self, region: &[Interval]) -> Interval {
        min_range(&self.pieces(region))
    }

    fn slope(&self, region: &[Interval], k: usize) -> Interval {
        let on = active(&self.pieces(region));
        let slopes = self
            .corners
            .iter()
            .zip(&on)
            .map(|(g, &a)| if a { g.slope(region, k) } else { Interval::ZERO });
        min_slope(&on, slopes)
    }

    fn curvature(&self, region: &[Interval], k: usize) -> Interval {
        let on = active(&self.pieces(region));
        let curv = self
            .corners
            .iter()
            .zip(&on)
            .map(|(g, &a)| if a { g.curvature(region, k) } else { Interval::ZERO });
        min_curvature(&on, curv)
    }

    fn derivatives(&self, region: &[Interval]) -> Vec<(Interval, Interval)> {
        let on = active(&self.pieces(region));
        let zero = vec![(Interval::ZERO, Interval::ZERO); self.dim()];
        let per: Vec<Vec<(Interval, Interval)>> = self
            .corners
            .iter()
            .zip(&on)
            .map(|(g, &a)| if a { g.derivatives(region) } else { zero.clone() })
            .collect();
        (0..self.dim())
            .map(|k| {
                (
                    min_slope(&on, per.iter().map(|p| p[k].0)),
                    min_curvature(&on, per.iter().map(|p| p[k].1)),
                )
            })
            .collect()
    }

    fn mass_fraction(&self) -> MassFraction {
        self.mass
    }

    fn scales(&self) -> Vec<f64> {
        self.mid.scales()
    }

    fn proposal(&self) -> Sampler {
        Sampler::Gaussian(self.mid.clone())
    }

    fn base_member(&self) -> Option<Sampler> {
        Some(Sampler::Gaussian(self.mid.clone()))
    }
}
