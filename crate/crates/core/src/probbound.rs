//! Certified lower bounds on the probability mass of a box, and uncertified
//! estimates used only to rank boxes.
//!
//! For a box `B` with volume `V` and a density bound `f`:
//!
//! * basic: `V * min_B f`;
//! * monotone along `x_k` when `df/dx_k >= m >= 0` on `B`:
//!   `V * (min f on the face x_k = l_k  +  m (h_k - l_k) / 2)`, mirrored at
//!   the face `x_k = h_k` for decreasing `f`;
//! * convex along `x_k` when `d2f/dx_k2 <= 0` on `B`:
//!   `V * (min f on x_k = l_k  +  min f on x_k = h_k) / 2`.
//!
//! All three are evaluated in outward-rounded interval arithmetic and the
//! lower endpoint is kept.

use serde::{Deserialize, Serialize};

use crate::density::{DensityBound, Sign};
use crate::interval::{box_volume, Interval, Rounding};

const O: Rounding = Rounding::Outward;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    Increasing,
    Decreasing,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BoundMethod {
    Basic,
    Monotone { var: usize, direction: Direction },
    Convex { var: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbBoundResult {
    pub lower: f64,
    pub method: BoundMethod,
    /// `lower` minus the basic bound.
    pub gain: f64,
}

fn with_face(region: &[Interval], k: usize, at: f64) -> Vec<Interval> {
    let mut face = region.to_vec();
    face[k] = Interval::point(at);
    face
}

fn face_min(d: &dyn DensityBound, region: &[Interval], k: usize, at: f64) -> Interval {
    Interval::point(d.min_lb(&with_face(region, k, at)))
}

fn finish(x: Interval) -> f64 {
    let lo = x.lo();
    if lo.is_nan() {
        0.0
    } else {
        lo.clamp(0.0, 1.0)
    }
}

/// Volume times the minimum of the bound.
pub fn prob_lower_basic(d: &dyn DensityBound, region: &[Interval]) -> f64 {
    finish(box_volume(region).mul(Interval::point(d.min_lb(region)), O))
}

/// The monotone bound along `k`, or `None` if the slope sign over the box
/// does not establish `direction`.
pub fn prob_lower_monotone(d: &dyn DensityBound, region: &[Interval], k: usize, direction: Direction) -> Option<f64> {
    monotone_with(d, region, k, direction, d.slope(region, k))
}

fn monotone_with(d: &dyn DensityBound, region: &[Interval], k: usize, direction: Direction, slope: Interval) -> Option<f64> {
    let (anchor, m) = match direction {
        Direction::Increasing if slope.lo() >= 0.0 => (region[k].lo(), slope.lo()),
        Direction::Decreasing if slope.hi() <= 0.0 => (region[k].hi(), -slope.hi()),
        _ => return None,
    };
    let half_w = region[k].width_enclosure().scale(0.5, O);
    let per_volume = face_min(d, region, k, anchor).add(Interval::point(m).mul(half_w, O), O);
    Some(finish(box_volume(region).mul(per_volume, O)))
}

/// The trapezoid bound along `k`, or `None` if the bound is not shown to
/// be concave along `k` over the box.
pub fn prob_lower_convex(d: &dyn DensityBound, region: &[Interval], k: usize) -> Option<f64> {
    convex_with(d, region, k, d.curvature(region, k))
}

fn convex_with(d: &dyn DensityBound, region: &[Interval], k: usize, curvature: Interval) -> Option<f64> {
    if curvature.hi() > 0.0 {
        return None;
    }
    let ends = face_min(d, region, k, region[k].lo()).add(face_min(d, region, k, region[k].hi()), O);
    Some(finish(box_volume(region).mul(ends.scale(0.5, O), O)))
}

/// The largest of the basic bound and every applicable single-variable
/// tightening. Ties keep the earlier candidate (basic first, then by
/// variable, monotone before convex).
pub fn prob_lower_best(d: &dyn DensityBound, region: &[Interval]) -> ProbBoundResult {
    let basic = prob_lower_basic(d, region);
    let mut best = (basic, BoundMethod::Basic);
    let mut consider = |value: Option<f64>, method: BoundMethod| {
        if let Some(v) = value {
            if v > best.0 {
                best = (v, method);
            }
        }
    };
    for (k, (slope, curvature)) in d.derivatives(region).into_iter().enumerate() {
        if region[k].width() <= 0.0 {
            continue;
        }
        let s = Sign::of(slope);
        for (ok, direction) in [(s.is_nonnegative(), Direction::Increasing), (s.is_nonpositive(), Direction::Decreasing)] {
            if ok {
                consider(
                    monotone_with(d, region, k, direction, slope),
                    BoundMethod::Monotone { var: k, direction },
                );
            }
        }
        consider(convex_with(d, region, k, curvature), BoundMethod::Convex { var: k });
    }
    ProbBoundResult {
        lower: best.0,
        method: best.1,
        gain: (best.0 - basic).max(0.0),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimateSource {
    Sampling,
    Cubature,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankEstimate {
    pub value: f64,
    pub source: EstimateSource,
}

/// Degree-3 cubature over a box: `2n` points at `c +- r h_k e_k` with
/// `r = sqrt(n/3)`, each weighted `V / 2n`. Exact for every polynomial of
/// total degree at most 3. For `n > 3` the points lie outside the box.
pub fn cubature_degree3(f: &dyn Fn(&[f64]) -> f64, region: &[Interval]) -> f64 {
    let n = region.len();
    let r = (n as f64 / 3.0).sqrt();
    let vol: f64 = region.iter().map(|iv| iv.hi() - iv.lo()).product();
    let center: Vec<f64> = region.iter().map(|iv| iv.mid()).collect();
    let mut x = center.clone();
    let mut sum = 0.0;
    for k in 0..n {
        let h = 0.5 * (region[k].hi() - region[k].lo());
        for s in [-1.0, 1.0] {
            x[k] = center[k] + s * r * h;
            sum += f(&x);
        }
        x[k] = center[k];
    }
    vol * sum / (2 * n) as f64
}

/// Share of `samples` inside the box when more than 1% of them are,
/// otherwise a degree-3 cubature of the bound. Never negative.
pub fn rank_estimate(d: &dyn DensityBound, region: &[Interval], samples: &[Vec<f64>]) -> RankEstimate {
    let inside = samples
        .iter()
        .filter(|p| p.iter().zip(region).all(|(x, iv)| iv.contains(*x)))
        .count();
    if !samples.is_empty() && inside * 100 > samples.len() {
        return RankEstimate {
            value: inside as f64 / samples.len() as f64,
            source: EstimateSource::Sampling,
        };
    }
    let v = cubature_degree3(&|x: &[f64]| d.value(x), region);
    RankEstimate {
        value: if v.is_finite() { v.max(0.0) } else { 0.0 },
        source: EstimateSource::Cubature,
    }
}

/// Estimate of the bound's integral over a box, for ranking marked boxes.
///
/// Sample counts estimate the proposal's mass rather than the bound's, and
/// their noise can put the estimate below a box's certified bound, which
/// would stop the box from ever being refined. The cubature estimates the
/// bound's own integral and its error shrinks quickly with the box.
pub fn marked_estimate(d: &dyn DensityBound, region: &[Interval]) -> f64 {
    let v = cubature_degree3(&|x: &[f64]| d.value(x), region);
    if v.is_finite() {
        v.max(0.0)
    } else {
        0.0
    }
}

/// Priority of a box: its estimate when unsure, the estimate minus the
/// certified bound when marked.
pub fn rank(marked: bool, estimate: f64, prob_lb: f64) -> f64 {
    if marked {
        (estimate - prob_lb).max(0.0)
    } else {
        estimate
    }
}
