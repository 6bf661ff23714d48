//! Enclosures for pointwise minima of smooth pieces.

use crate::interval::Interval;

/// Range of `min_i p_i` given the range of each piece.
pub(crate) fn min_range(ranges: &[Interval]) -> Interval {
    let lo = ranges.iter().map(|r| r.lo()).fold(f64::INFINITY, f64::min);
    let hi = ranges.iter().map(|r| r.hi()).fold(f64::INFINITY, f64::min);
    Interval::new(lo, hi)
}

/// Pieces that can attain the minimum somewhere in the box.
pub(crate) fn active(ranges: &[Interval]) -> Vec<bool> {
    let cut = ranges.iter().map(|r| r.hi()).fold(f64::INFINITY, f64::min);
    ranges.iter().map(|r| r.lo() <= cut).collect()
}

/// Difference-quotient enclosure of the minimum: the hull over active pieces.
pub(crate) fn min_slope(active: &[bool], slopes: impl Iterator<Item = Interval>) -> Interval {
    let mut acc: Option<Interval> = None;
    for (on, s) in active.iter().zip(slopes) {
        if *on {
            acc = Some(match acc {
                Some(a) => a.hull(s),
                None => s,
            });
        }
    }
    acc.unwrap_or(Interval::ZERO)
}

/// With a single active piece the minimum is that piece. Otherwise only
/// concavity survives: a minimum of concave functions is concave.
pub(crate) fn min_curvature(active: &[bool], curvatures: impl Iterator<Item = Interval>) -> Interval {
    let picked: Vec<Interval> = active
        .iter()
        .zip(curvatures)
        .filter_map(|(on, c)| on.then_some(c))
        .collect();
    match picked.len() {
        0 => Interval::ZERO,
        1 => picked[0],
        _ => {
            let hi = picked.iter().map(|c| c.hi()).fold(f64::NEG_INFINITY, f64::max);
            Interval::new(f64::NEG_INFINITY, hi)
        }
    }
}
