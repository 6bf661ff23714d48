//! Lower bounds on input joint densities.
//!
//! A [`DensityBound`] is a nonnegative function `f` with `f(x) <= p(x)` for
//! the (unknown) true density `p`. Besides point values it answers the
//! region queries the probability bounds need: an enclosure of `f` over a
//! box, enclosures of the first and second partial derivatives, and the
//! total mass of `f`.
//!
//! The slope and curvature enclosures of piecewise models (pointwise minima
//! of smooth pieces) are generalized: the slope enclosure bounds difference
//! quotients along the axis, and a curvature enclosure with `hi <= 0` means
//! `f` is concave along that axis throughout the box.

mod gaussian;
mod integrate;
mod mixture;
mod piecewise;
mod sample;
mod spec;
mod symbolic;

pub use gaussian::{CappedGaussianLowerBound, GaussianLowerBound, ParameterEnvelopeLowerBound};
pub use integrate::{integrate_adaptive, AdaptiveOptions, Integral};
pub use mixture::MixtureLowerBound;
pub use sample::Sampler;
pub use spec::{DensitySpec, MixtureComponentSpec};
pub use symbolic::ExpressionLowerBound;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interval::Interval;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DensityError {
    #[error("covariance matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("invalid correlation matrix: {0}")]
    BadCorrelation(String),
    #[error("invalid parameter: {0}")]
    BadParameter(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("mixture mass {0} exceeds 1")]
    MassTooLarge(f64),
    #[error("sample count must be at least 1")]
    EmptySample,
    #[error("this density has no samplable base member")]
    NoBaseMember,
    #[error("{0}")]
    Expression(String),
}

/// Sign of a derivative over a whole region.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sign {
    Positive,
    Negative,
    Nonnegative,
    Nonpositive,
    Unknown,
}

impl Sign {
    /// The strongest sign statement the enclosure supports.
    pub fn of(e: Interval) -> Sign {
        if e.lo() > 0.0 {
            Sign::Positive
        } else if e.hi() < 0.0 {
            Sign::Negative
        } else if e.lo() >= 0.0 {
            Sign::Nonnegative
        } else if e.hi() <= 0.0 {
            Sign::Nonpositive
        } else {
            Sign::Unknown
        }
    }

    pub fn is_nonnegative(self) -> bool {
        matches!(self, Sign::Positive | Sign::Nonnegative)
    }

    pub fn is_nonpositive(self) -> bool {
        matches!(self, Sign::Negative | Sign::Nonpositive)
    }
}

/// Total integral of a density bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MassFraction {
    pub value: f64,
    /// True when `value` comes from numeric integration.
    pub estimated: bool,
}

pub trait DensityBound: Send + Sync {
    fn dim(&self) -> usize;

    /// The bound's value at a point.
    fn value(&self, x: &[f64]) -> f64;

    /// Enclosure of the bound's values over a box.
    fn range(&self, region: &[Interval]) -> Interval;

    /// Enclosure of the partial derivative along `k` over a box.
    fn slope(&self, region: &[Interval], k: usize) -> Interval;

    /// Enclosure of the second partial derivative along `k` over a box.
    fn curvature(&self, region: &[Interval], k: usize) -> Interval;

    /// Slope and curvature enclosures for every variable, in one pass.
    fn derivatives(&self, region: &[Interval]) -> Vec<(Interval, Interval)> {
        (0..self.dim())
            .map(|k| (self.slope(region, k), self.curvature(region, k)))
            .collect()
    }

    fn mass_fraction(&self) -> MassFraction;

    /// Per-variable spread used to normalize widths when choosing splits.
    fn scales(&self) -> Vec<f64>;

    /// A distribution resembling the bound, used for ranking samples.
    fn proposal(&self) -> Sampler;

    /// A true density that this bound lies under, if one is samplable.
    fn base_member(&self) -> Option<Sampler>;

    /// Guaranteed lower bound on the bound's values over a box.
    fn min_lb(&self, region: &[Interval]) -> f64 {
        self.range(region).lo().max(0.0)
    }

    fn derivative_sign(&self, region: &[Interval], k: usize, order: u8) -> Sign {
        match order {
            1 => Sign::of(self.slope(region, k)),
            2 => Sign::of(self.curvature(region, k)),
            _ => Sign::Unknown,
        }
    }

    /// `count` seeded draws from [`DensityBound::proposal`].
    fn sample_resembling(&self, count: usize, seed: u64) -> Result<Vec<Vec<f64>>, DensityError> {
        if count == 0 {
            return Err(DensityError::EmptySample);
        }
        Ok(self.proposal().sample(count, seed))
    }
}

/// Any of the supported density bounds.
#[derive(Clone, Debug)]
pub enum Density {
    Gaussian(GaussianLowerBound),
    Capped(CappedGaussianLowerBound),
    Envelope(ParameterEnvelopeLowerBound),
    Mixture(MixtureLowerBound),
    Expression(ExpressionLowerBound),
}

macro_rules! delegate {
    ($self:ident, $d:ident => $e:expr) => {
        match $self {
            Density::Gaussian($d) => $e,
            Density::Capped($d) => $e,
            Density::Envelope($d) => $e,
            Density::Mixture($d) => $e,
            Density::Expression($d) => $e,
        }
    };
}

impl DensityBound for Density {
    fn dim(&self) -> usize {
        delegate!(self, d => d.dim())
    }
    fn value(&self, x: &[f64]) -> f64 {
        delegate!(self, d => d.value(x))
    }
    fn range(&self, region: &[Interval]) -> Interval {
        delegate!(self, d => d.range(region))
    }
    fn slope(&self, region: &[Interval], k: usize) -> Interval {
        delegate!(self, d => d.slope(region, k))
    }
    fn curvature(&self, region: &[Interval], k: usize) -> Interval {
        delegate!(self, d => d.curvature(region, k))
    }
    fn derivatives(&self, region: &[Interval]) -> Vec<(Interval, Interval)> {
        delegate!(self, d => d.derivatives(region))
    }
    fn mass_fraction(&self) -> MassFraction {
        delegate!(self, d => d.mass_fraction())
    }
    fn scales(&self) -> Vec<f64> {
        delegate!(self, d => d.scales())
    }
    fn proposal(&self) -> Sampler {
        delegate!(self, d => d.proposal())
    }
    fn base_member(&self) -> Option<Sampler> {
        delegate!(self, d => d.base_member())
    }
}

impl From<GaussianLowerBound> for Density {
    fn from(d: GaussianLowerBound) -> Self {
        Density::Gaussian(d)
    }
}

impl From<CappedGaussianLowerBound> for Density {
    fn from(d: CappedGaussianLowerBound) -> Self {
        Density::Capped(d)
    }
}

impl From<ParameterEnvelopeLowerBound> for Density {
    fn from(d: ParameterEnvelopeLowerBound) -> Self {
        Density::Envelope(d)
    }
}

impl From<MixtureLowerBound> for Density {
    fn from(d: MixtureLowerBound) -> Self {
        Density::Mixture(d)
    }
}

impl From<ExpressionLowerBound> for Density {
    fn from(d: ExpressionLowerBound) -> Self {
        Density::Expression(d)
    }
}
