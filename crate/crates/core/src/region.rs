//! Boxes of input space and the operations the search performs on them.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::density::DensityBound;
use crate::expr::{Criterion, Model, Truth};
use crate::interval::{propagate, BoundsStore, Contradiction, Interval, PropagationSettings};
use crate::probbound::BoundMethod;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Unsure,
    MarkedPass,
    MarkedFail,
}

impl Status {
    pub fn is_marked(self) -> bool {
        self != Status::Unsure
    }
}

impl From<Truth> for Status {
    fn from(t: Truth) -> Self {
        match t {
            Truth::True => Status::MarkedPass,
            Truth::False => Status::MarkedFail,
            Truth::Unknown => Status::Unsure,
        }
    }
}

/// A box of input space together with what the search knows about it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    /// Creation order; breaks ties between equal ranks.
    pub seq: u64,
    pub bounds: Vec<Interval>,
    pub status: Status,
    /// Whether behavior bounds have been computed for this box (or for an
    /// ancestor, in the case of marked boxes).
    pub bounded: bool,
    /// Certified probability lower bound; zero while unsure.
    pub prob_lb: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prob_method: Option<BoundMethod>,
    pub prob_estimate: f64,
    pub rank: f64,
    /// Node of the mark tree that holds this box's certificate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mark_node: Option<usize>,
}

impl Region {
    pub fn new(seq: u64, bounds: Vec<Interval>) -> Region {
        Region {
            seq,
            bounds,
            status: Status::Unsure,
            bounded: false,
            prob_lb: 0.0,
            prob_method: None,
            prob_estimate: 0.0,
            rank: 0.0,
            mark_node: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    /// Whether some variable can still be halved into two nonempty boxes.
    pub fn splittable(&self) -> bool {
        self.bounds.iter().any(|&iv| can_split(iv))
    }
}

fn can_split(iv: Interval) -> bool {
    let m = iv.mid();
    iv.lo() < m && m < iv.hi()
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum RegionError {
    #[error("variable {var} cannot be split further")]
    Unsplittable { var: usize },
    #[error("variable {var} is out of range for a {dim}-dimensional box")]
    NoSuchVariable { var: usize, dim: usize },
}

/// Propagates behavior bounds over the box and decides the criterion.
///
/// Returns the decision together with the propagated store, or the
/// contradiction if the box contains no consistent point.
pub fn classify(
    bounds: &[Interval],
    model: &Model,
    criterion: &Criterion,
    settings: &PropagationSettings,
) -> Result<(Status, BoundsStore), Contradiction> {
    let store = propagate(model, &BoundsStore::new(model, bounds), settings)?;
    let status = criterion.eval_interval(store.values(), settings.rounding).into();
    Ok((status, store))
}

/// How the split variable is picked.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SplitRule {
    /// Largest width relative to the density's scale for that variable.
    Width,
    /// Largest possible change of the density along the variable: the
    /// box width times the largest slope magnitude. Falls back to
    /// [`SplitRule::Width`] when all scores are equal.
    Slope,
}

/// Picks the variable to bisect. Only variables that can still be split
/// are considered; ties go to the lowest index.
pub fn choose_split_variable(region: &Region, density: &dyn DensityBound, rule: SplitRule) -> Option<usize> {
    let candidates: Vec<usize> = (0..region.dim()).filter(|&k| can_split(region.bounds[k])).collect();
    let argmax = |score: &dyn Fn(usize) -> f64| {
        let mut best: Option<(usize, f64)> = None;
        for &k in &candidates {
            let s = score(k);
            let s = if s.is_nan() { f64::INFINITY } else { s };
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((k, s));
            }
        }
        best
    };
    let scales = density.scales();
    let by_width = |k: usize| region.bounds[k].width() / scales[k];
    if rule == SplitRule::Slope {
        let change: Vec<f64> = density
            .derivatives(&region.bounds)
            .iter()
            .enumerate()
            .map(|(k, s)| s.0.lo().abs().max(s.0.hi().abs()) * region.bounds[k].width())
            .collect();
        if candidates.windows(2).any(|w| change[w[0]] != change[w[1]]) {
            return argmax(&|k| change[k]).map(|b| b.0);
        }
    }
    argmax(&by_width).map(|b| b.0)
}

/// Halves the box at the midpoint of `var`. Both children keep the
/// parent's status and bounded flag; their probability fields are reset.
pub fn bisect(region: &Region, var: usize) -> Result<(Region, Region), RegionError> {
    let iv = *region.bounds.get(var).ok_or(RegionError::NoSuchVariable {
        var,
        dim: region.dim(),
    })?;
    if !can_split(iv) {
        return Err(RegionError::Unsplittable { var });
    }
    let m = iv.mid();
    let child = |part: Interval| {
        let mut c = region.clone();
        c.bounds[var] = part;
        c.prob_lb = 0.0;
        c.prob_method = None;
        c.prob_estimate = 0.0;
        c.rank = 0.0;
        c.mark_node = None;
        c
    };
    Ok((child(Interval::new(iv.lo(), m)), child(Interval::new(m, iv.hi()))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::GaussianLowerBound;

    const PVR: &str = "\
input PAP in [1.0, 88.0]
input LAP in [1.0, 88.0]
input CO in [1.0, 100]
PVR = (PAP - LAP)/CO in [0, inf]
criterion: PVR <= 1.62
";

    #[test]
    fn full_box_is_unsure_and_bounded_exactly() {
        let m = Model::parse(PVR).unwrap();
        let (status, store) = classify(
            m.input_ranges(),
            &m,
            m.criterion().unwrap(),
            &PropagationSettings::default(),
        )
        .unwrap();
        assert_eq!(status, Status::Unsure);
        assert_eq!(store.get(m.index_of("PVR").unwrap()), Interval::new(0.0, 87.0));
    }

    #[test]
    fn small_box_near_the_mean_passes() {
        let m = Model::parse(PVR).unwrap();
        let b = [Interval::new(20.75, 25.47), Interval::new(15.95, 17.32), Interval::new(6.41, 7.19)];
        let (status, _) = classify(&b, &m, m.criterion().unwrap(), &PropagationSettings::default()).unwrap();
        assert_eq!(status, Status::MarkedPass);
    }

    #[test]
    fn bisect_halves_one_variable() {
        let r = Region::new(0, vec![Interval::new(0.0, 4.0), Interval::new(1.0, 2.0)]);
        let (a, b) = bisect(&r, 0).unwrap();
        assert_eq!(a.bounds, vec![Interval::new(0.0, 2.0), Interval::new(1.0, 2.0)]);
        assert_eq!(b.bounds, vec![Interval::new(2.0, 4.0), Interval::new(1.0, 2.0)]);
        let tiny = Region::new(0, vec![Interval::new(1.0, 1.0f64.next_up())]);
        assert_eq!(bisect(&tiny, 0), Err(RegionError::Unsplittable { var: 0 }));
        assert!(!tiny.splittable());
    }

    #[test]
    fn width_rule_normalizes_by_scale() {
        let g = GaussianLowerBound::new(vec![0.0, 0.0], vec![1.0, 10.0], None).unwrap();
        let r = Region::new(0, vec![Interval::new(0.0, 2.0), Interval::new(0.0, 10.0)]);
        assert_eq!(choose_split_variable(&r, &g, SplitRule::Width), Some(0));
    }

    #[test]
    fn slope_rule_prefers_steep_direction() {
        let g = GaussianLowerBound::new(vec![0.0, 0.0], vec![1.0, 10.0], None).unwrap();
        let r = Region::new(0, vec![Interval::new(0.5, 1.0), Interval::new(0.5, 4.0)]);
        assert_eq!(choose_split_variable(&r, &g, SplitRule::Slope), Some(0));
    }
}
