//! Problem files: a model, a density bound, optional starting boxes, a stop
//! rule and engine settings, in TOML.
//!
//! ```toml
//! criterion = "PVR > 2.0"        # optional, overrides the model's line
//!
//! [model]
//! text = """
//! input PAP in [1.0, 88.0]
//! ...
//! """                             # or: file = "pvr.model"
//!
//! [density]
//! type = "gaussian"
//! means = [23.94, 15.29, 6.49]
//! std_devs = [3.38, 3.08, 1.20]
//!
//! [[regions]]                     # optional; unnamed inputs keep
//! PAP = [1.0, 40.0]               # their declared range
//!
//! [stop]
//! max_iterations = 100000
//! max_seconds = 60.0
//! target_gap = 0.01
//!
//! [engine]
//! seed = 1
//! threads = 1
//! samples = 1000
//!
//! [engine.propagation]
//! abs_tol = 1e-9
//! rel_tol = 1e-7
//! rounding = "outward"
//! max_revisions = 10000
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::density::{DensityError, DensitySpec};
use crate::engine::{EngineError, EngineSettings, Problem, StopSpec};
use crate::expr::{Model, ParseError};
use crate::interval::Interval;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Toml(#[from] toml::de::Error),
    #[error("model: {0}")]
    Model(#[from] ParseError),
    #[error("density: {0}")]
    Density(#[from] DensityError),
    #[error("{0}")]
    Engine(#[from] EngineError),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSource {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    /// Relative to the config file's directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub criterion: Option<String>,
    pub model: ModelSource,
    pub density: DensitySpec,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub regions: Vec<BTreeMap<String, Interval>>,
    #[serde(default)]
    pub stop: StopSpec,
    #[serde(default)]
    pub engine: EngineSettings,
}

const BUNDLED: &[(&str, &str)] = &[
    ("pvr-gaussian", include_str!("../configs/pvr-gaussian.toml")),
    ("pvr-capped", include_str!("../configs/pvr-capped.toml")),
    ("pvr-envelope", include_str!("../configs/pvr-envelope.toml")),
    ("normal-1d", include_str!("../configs/normal-1d.toml")),
];

/// Names of the configs compiled into the crate.
pub fn bundled_names() -> impl Iterator<Item = &'static str> {
    BUNDLED.iter().map(|b| b.0)
}

/// A config compiled into the crate, by name.
pub fn bundled(name: &str) -> Option<ProblemConfig> {
    let text = BUNDLED.iter().find(|b| b.0 == name)?.1;
    Some(ProblemConfig::from_toml(text, None).expect("bundled configs are valid"))
}

impl ProblemConfig {
    /// Parses a config. A model `file` is read relative to `base_dir` and
    /// inlined, so the result no longer depends on the file system.
    pub fn from_toml(text: &str, base_dir: Option<&Path>) -> Result<ProblemConfig, ConfigError> {
        let mut c: ProblemConfig = toml::from_str(text)?;
        match (&c.model.text, &c.model.file) {
            (Some(_), None) => {}
            (None, Some(f)) => {
                let path = base_dir.map(|d| d.join(f)).unwrap_or_else(|| f.clone());
                let text = std::fs::read_to_string(&path).map_err(|source| ConfigError::Io { path, source })?;
                c.model = ModelSource {
                    text: Some(text),
                    file: None,
                };
            }
            _ => return Err(ConfigError::Invalid("[model] needs exactly one of `text` and `file`".into())),
        }
        Ok(c)
    }

    /// Reads a config file, or a bundled config if `path` names one and no
    /// such file exists.
    pub fn load(path: &Path) -> Result<ProblemConfig, ConfigError> {
        match std::fs::read_to_string(path) {
            Ok(text) => Self::from_toml(&text, path.parent()),
            Err(source) => match path.to_str().and_then(bundled) {
                Some(c) => Ok(c),
                None => Err(ConfigError::Io {
                    path: path.to_path_buf(),
                    source,
                }),
            },
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configs serialize")
    }

    pub fn model_text(&self) -> &str {
        self.model.text.as_deref().unwrap_or("")
    }

    pub fn build(&self) -> Result<Problem, ConfigError> {
        let model = Model::parse(self.model_text())?;
        let density = self.density.build(model.input_names(), model.input_ranges())?;
        let regions = if self.regions.is_empty() {
            None
        } else {
            let mut out = Vec::with_capacity(self.regions.len());
            for (i, spec) in self.regions.iter().enumerate() {
                let mut b = model.input_ranges().to_vec();
                for (name, iv) in spec {
                    let k = model
                        .input_names()
                        .iter()
                        .position(|n| n == name)
                        .ok_or_else(|| ConfigError::Invalid(format!("region {i}: `{name}` is not an input")))?;
                    b[k] = *iv;
                }
                out.push(b);
            }
            Some(out)
        };
        Ok(Problem::new(model, self.criterion.as_deref(), density, regions)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::DensityBound;

    #[test]
    fn bundled_configs_build() {
        for name in bundled_names() {
            let c = bundled(name).unwrap();
            let p = c.build().unwrap();
            assert_eq!(p.density().dim(), p.model().n_inputs(), "{name}");
        }
    }

    #[test]
    fn round_trips_through_toml() {
        let c = bundled("pvr-envelope").unwrap();
        let again = ProblemConfig::from_toml(&c.to_toml(), None).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn region_overrides() {
        let mut c = bundled("pvr-gaussian").unwrap();
        c.regions = vec![BTreeMap::from([("CO".to_string(), Interval::new(1.0, 6.0))])];
        let p = c.build().unwrap();
        assert_eq!(p.initial_regions()[0][2], Interval::new(1.0, 6.0));
        assert_eq!(p.initial_regions()[0][0], Interval::new(1.0, 88.0));
        c.regions = vec![BTreeMap::from([("Q".to_string(), Interval::new(1.0, 6.0))])];
        assert!(matches!(c.build(), Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn parse_errors_carry_positions() {
        let e = ProblemConfig::from_toml("[model]\ntext = 3\n", None).unwrap_err();
        assert!(e.to_string().contains("line"), "{e}");
        let mut c = bundled("normal-1d").unwrap();
        c.model.text = Some("input X in [0, 1]\ny = X +\n".into());
        let e = c.build().unwrap_err();
        assert!(e.to_string().contains('2'), "{e}");
    }
}
