use crate::interval::{Interval, Rounding};

use super::sample::Sampler;
use super::{Density, DensityBound, DensityError, MassFraction};

const O: Rounding = Rounding::Outward;

/// Slack allowed when checking that a mixture's mass does not exceed one.
pub const MASS_TOLERANCE: f64 = 1e-9;

/// `sum_i s_i f_i` for nonnegative scales `s_i`.
#[derive(Clone, Debug)]
pub struct MixtureLowerBound {
    parts: Vec<(f64, Density)>,
}

impl MixtureLowerBound {
    pub fn new(parts: Vec<(f64, Density)>) -> Result<Self, DensityError> {
        let first = parts
            .first()
            .ok_or_else(|| DensityError::BadParameter("a mixture needs at least one component".into()))?;
        let n = first.1.dim();
        for (s, d) in &parts {
            if !(s.is_finite() && *s >= 0.0) {
                return Err(DensityError::BadParameter(format!("mixture scale {s} must be nonnegative")));
            }
            if d.dim() != n {
                return Err(DensityError::DimensionMismatch {
                    expected: n,
                    found: d.dim(),
                });
            }
        }
        let m = MixtureLowerBound { parts };
        let mass = m.mass_fraction().value;
        if mass > 1.0 + MASS_TOLERANCE {
            return Err(DensityError::MassTooLarge(mass));
        }
        Ok(m)
    }

    pub fn parts(&self) -> &[(f64, Density)] {
        &self.parts
    }

    fn combine(&self, f: impl Fn(&Density) -> Interval) -> Interval {
        self.parts
            .iter()
            .fold(Interval::ZERO, |acc, (s, d)| acc.add(f(d).scale(*s, O), O))
    }

    /// Sampling weight of each component: its share of the mass.
    fn weights(&self) -> Vec<f64> {
        let w: Vec<f64> = self.parts.iter().map(|(s, d)| s * d.mass_fraction().value).collect();
        if w.iter().sum::<f64>() > 0.0 {
            w
        } else {
            vec![1.0; self.parts.len()]
        }
    }
}

impl DensityBound for MixtureLowerBound {
    fn dim(&self) -> usize {
        self.parts[0].1.dim()
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.parts.iter().map(|(s, d)| s * d.value(x)).sum()
    }

    fn range(&self, region: &[Interval]) -> Interval {
        self.combine(|d| d.range(region))
    }

    fn slope(&self, region: &[Interval], k: usize) -> Interval {
        self.combine(|d| d.slope(region, k))
    }

    fn curvature(&self, region: &[Interval], k: usize) -> Interval {
        self.combine(|d| d.curvature(region, k))
    }

    fn derivatives(&self, region: &[Interval]) -> Vec<(Interval, Interval)> {
        let mut acc = vec![(Interval::ZERO, Interval::ZERO); self.dim()];
        for (s, d) in &self.parts {
            for (a, (ds, dc)) in acc.iter_mut().zip(d.derivatives(region)) {
                a.0 = a.0.add(ds.scale(*s, O), O);
                a.1 = a.1.add(dc.scale(*s, O), O);
            }
        }
        acc
    }

    fn mass_fraction(&self) -> MassFraction {
        let mut value = 0.0;
        let mut estimated = false;
        for (s, d) in &self.parts {
            let m = d.mass_fraction();
            value += s * m.value;
            estimated |= m.estimated;
        }
        MassFraction { value, estimated }
    }

    fn scales(&self) -> Vec<f64> {
        let w = self.weights();
        let total: f64 = w.iter().sum();
        let n = self.dim();
        (0..n)
            .map(|k| {
                let var: f64 = self
                    .parts
                    .iter()
                    .zip(&w)
                    .map(|((_, d), wi)| wi / total * d.scales()[k].powi(2))
                    .sum();
                var.sqrt()
            })
            .collect()
    }

    fn proposal(&self) -> Sampler {
        let w = self.weights();
        Sampler::mixture(
            self.parts
                .iter()
                .zip(w)
                .filter(|(_, wi)| *wi > 0.0)
                .map(|((_, d), wi)| (wi, d.proposal()))
                .collect(),
        )
    }

    /// `sum_i (s_i / S) p_i` with `S = sum_i s_i`, where `p_i` are the
    /// components' base members. It lies above the mixture only when
    /// `S <= 1`, so larger scale sums have no base member.
    fn base_member(&self) -> Option<Sampler> {
        let total: f64 = self.parts.iter().map(|(s, _)| s).sum();
        if total <= 0.0 || total > 1.0 + MASS_TOLERANCE {
            return None;
        }
        let mut out = Vec::with_capacity(self.parts.len());
        for (s, d) in &self.parts {
            if *s > 0.0 {
                out.push((*s, d.base_member()?));
            }
        }
        Some(Sampler::mixture(out))
    }
}
