//! Serializable description of a density bound, as it appears in configs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::expr::parse_expression;
use crate::interval::Interval;

use super::{
    CappedGaussianLowerBound, Density, DensityError, ExpressionLowerBound, GaussianLowerBound, MixtureLowerBound,
    ParameterEnvelopeLowerBound,
};

/// Vectors and matrices are in input-variable order; maps are keyed by
/// input-variable name.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DensitySpec {
    Gaussian {
        means: Vec<f64>,
        std_devs: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        correlation: Option<Vec<Vec<f64>>>,
    },
    CappedGaussian {
        means: Vec<f64>,
        std_devs: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        correlation: Option<Vec<Vec<f64>>>,
        /// Defaults to the height of the matching joint uniform density.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cap: Option<f64>,
    },
    GaussianEnvelope {
        means: Vec<f64>,
        std_devs: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        correlation: Option<Vec<Vec<f64>>>,
        /// Variables whose mean may lie anywhere in the given interval.
        mean_ranges: BTreeMap<String, Interval>,
    },
    Mixture {
        components: Vec<MixtureComponentSpec>,
    },
    /// `max(expr, 0)` on a support box, zero outside.
    Expression {
        expr: String,
        /// Defaults to the declared input ranges.
        #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
        support: BTreeMap<String, Interval>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureComponentSpec {
    pub scale: f64,
    pub density: DensitySpec,
}

fn check_dim(expected: usize, found: usize) -> Result<(), DensityError> {
    if expected == found {
        Ok(())
    } else {
        Err(DensityError::DimensionMismatch { expected, found })
    }
}

fn index_of(names: &[String], key: &str) -> Result<usize, DensityError> {
    names
        .iter()
        .position(|n| n == key)
        .ok_or_else(|| DensityError::BadParameter(format!("`{key}` is not an input variable")))
}

impl DensitySpec {
    /// Builds the density for a model with the given inputs.
    pub fn build(&self, inputs: &[String], declared: &[Interval]) -> Result<Density, DensityError> {
        let n = inputs.len();
        let gaussian = |means: &Vec<f64>, sd: &Vec<f64>, corr: &Option<Vec<Vec<f64>>>| {
            check_dim(n, means.len())?;
            GaussianLowerBound::new(means.clone(), sd.clone(), corr.clone())
        };
        Ok(match self {
            DensitySpec::Gaussian {
                means,
                std_devs,
                correlation,
            } => Density::Gaussian(gaussian(means, std_devs, correlation)?),
            DensitySpec::CappedGaussian {
                means,
                std_devs,
                correlation,
                cap,
            } => Density::Capped(CappedGaussianLowerBound::new(gaussian(means, std_devs, correlation)?, *cap)?),
            DensitySpec::GaussianEnvelope {
                means,
                std_devs,
                correlation,
                mean_ranges,
            } => {
                let g = gaussian(means, std_devs, correlation)?;
                let mut ranges: Vec<Interval> = means.iter().map(|&m| Interval::point(m)).collect();
                for (name, r) in mean_ranges {
                    ranges[index_of(inputs, name)?] = *r;
                }
                Density::Envelope(ParameterEnvelopeLowerBound::new(&g, ranges)?)
            }
            DensitySpec::Mixture { components } => {
                let parts = components
                    .iter()
                    .map(|c| Ok((c.scale, c.density.build(inputs, declared)?)))
                    .collect::<Result<Vec<_>, DensityError>>()?;
                Density::Mixture(MixtureLowerBound::new(parts)?)
            }
            DensitySpec::Expression { expr, support } => {
                check_dim(n, declared.len())?;
                let e = parse_expression(expr, inputs).map_err(|e| DensityError::Expression(e.to_string()))?;
                let mut sup = declared.to_vec();
                for (name, r) in support {
                    sup[index_of(inputs, name)?] = *r;
                }
                Density::Expression(ExpressionLowerBound::new(e, sup)?)
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::DensityBound;

    #[test]
    fn toml_envelope() {
        let src = r#"
type = "gaussian-envelope"
means = [0.0, 1.0]
std_devs = [1.0, 2.0]
correlation = [[1.0, 0.3], [0.3, 1.0]]
mean_ranges = { y = [0.5, 1.5] }
"#;
        let spec: DensitySpec = toml::from_str(src).unwrap();
        let names = vec!["x".to_string(), "y".to_string()];
        let d = spec.build(&names, &[Interval::new(-5.0, 5.0); 2]).unwrap();
        match &d {
            Density::Envelope(e) => assert_eq!(e.corners().len(), 2),
            other => panic!("{other:?}"),
        }
        assert!(d.mass_fraction().estimated);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let src = "type = \"gaussian\"\nmeans = [0.0]\nstd_devs = [1.0]\nstdev = 3";
        assert!(toml::from_str::<DensitySpec>(src).is_err());
    }

    #[test]
    fn dimension_mismatch() {
        let spec = DensitySpec::Gaussian {
            means: vec![0.0],
            std_devs: vec![1.0],
            correlation: None,
        };
        let names = vec!["x".to_string(), "y".to_string()];
        assert!(matches!(
            spec.build(&names, &[Interval::new(0.0, 1.0); 2]),
            Err(DensityError::DimensionMismatch { .. })
        ));
    }
}
