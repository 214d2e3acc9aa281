//! Experiment configuration: a JSON file whose fields can each be
//! overridden from the command line.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::algebra::StratifiedAlgebra;
use crate::control::{NormDocument, NormSpec};
use crate::error::{Error, Result};
use crate::escape::sample_unit_covectors;
use crate::group::Covector;

pub const DEFAULT_STEP: f64 = 0.01;

/// `"euclidean"` or a full norm document.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NormField {
    Name(String),
    Document(NormDocument),
}

impl NormField {
    pub fn into_norm(self) -> Result<NormSpec> {
        match self {
            NormField::Name(s) => s.parse(),
            NormField::Document(d) => NormSpec::try_from(d),
        }
    }
}

/// Explicit co-vectors, or a request for `count` seeded samples on the
/// `N(λ) = 1` sphere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CovectorSource {
    List(Vec<Vec<f64>>),
    Sample {
        count: usize,
        #[serde(default)]
        seed: Option<u64>,
    },
}

/// The file form; every field is optional so that flags can fill gaps.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub algebra: Option<String>,
    #[serde(default)]
    pub norm: Option<NormField>,
    #[serde(default)]
    pub covectors: Option<CovectorSource>,
    #[serde(default, rename = "T")]
    pub horizon: Option<f64>,
    #[serde(default)]
    pub h: Option<f64>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

impl ConfigFile {
    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("config: {e}")))
    }

    /// Reads a config file. A relative algebra path is taken relative to the
    /// file's directory when it is not a built-in name.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::from_json_str(&std::fs::read_to_string(path)?)?;
        if let (Some(src), Some(dir)) = (&cfg.algebra, path.parent()) {
            let rel = dir.join(src);
            if StratifiedAlgebra::builtin(src).is_err() && !Path::new(src).exists() && rel.exists() {
                cfg.algebra = Some(rel.to_string_lossy().into_owned());
            }
        }
        Ok(cfg)
    }

    /// Fields set in `flags` win.
    pub fn merged(self, flags: ConfigFile) -> ConfigFile {
        ConfigFile {
            algebra: flags.algebra.or(self.algebra),
            norm: flags.norm.or(self.norm),
            covectors: match (flags.covectors, self.covectors) {
                // `--seed` alone completes a sampling spec from the file.
                (Some(CovectorSource::Sample { count, seed: None }), Some(CovectorSource::Sample { seed, .. })) => {
                    Some(CovectorSource::Sample { count, seed })
                }
                (f, s) => f.or(s),
            },
            horizon: flags.horizon.or(self.horizon),
            h: flags.h.or(self.h),
            out_dir: flags.out_dir.or(self.out_dir),
        }
    }
}

/// A validated experiment.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub algebra: StratifiedAlgebra,
    pub norm: NormSpec,
    pub covectors: Vec<Covector>,
    /// `(count, seed)` when the co-vectors were sampled.
    pub sampling: Option<(usize, u64)>,
    pub horizon: f64,
    pub step: f64,
    pub out_dir: PathBuf,
}

impl ExperimentConfig {
    /// Checks `T > 0`, `h > 0`, co-vector dimensions and that sampling is
    /// seeded. `default_horizon` applies when neither file nor flags set `T`.
    pub fn resolve(file: ConfigFile, default_horizon: f64) -> Result<Self> {
        let source = file.algebra.ok_or_else(|| {
            Error::InvalidInput("no algebra given (use --algebra or the config 'algebra' field)".into())
        })?;
        let algebra = StratifiedAlgebra::resolve(&source)?;
        let norm = match file.norm {
            Some(n) => n.into_norm()?,
            None => NormSpec::Euclidean,
        };
        if let NormSpec::Polyhedral(p) = &norm {
            if p.dim() != algebra.rank() {
                return Err(Error::Dimension {
                    expected: algebra.rank(),
                    got: p.dim(),
                });
            }
        }
        let horizon = file.horizon.unwrap_or(default_horizon);
        let step = file.h.unwrap_or(DEFAULT_STEP);
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidInput(format!("T must be positive, got {horizon}")));
        }
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::InvalidInput(format!("h must be positive, got {step}")));
        }
        let n = algebra.dim();
        let (covectors, sampling) = match file.covectors {
            None => return Err(Error::InvalidInput("no co-vectors given".into())),
            Some(CovectorSource::List(list)) => {
                let mut out = Vec::with_capacity(list.len());
                for v in list {
                    crate::error::check_dim(n, v.len())?;
                    if v.iter().any(|x| !x.is_finite()) {
                        return Err(Error::InvalidInput("co-vector entries must be finite".into()));
                    }
                    out.push(Covector(v));
                }
                (out, None)
            }
            Some(CovectorSource::Sample { seed: None, .. }) => {
                return Err(Error::InvalidInput(
                    "sampling co-vectors requires a seed (--seed)".into(),
                ))
            }
            Some(CovectorSource::Sample {
                count,
                seed: Some(seed),
            }) => (sample_unit_covectors(n, count, seed), Some((count, seed))),
        };
        if covectors.is_empty() {
            return Err(Error::InvalidInput("co-vector list is empty".into()));
        }
        Ok(ExperimentConfig {
            algebra,
            norm,
            covectors,
            sampling,
            horizon,
            step,
            out_dir: file.out_dir.unwrap_or_else(|| PathBuf::from(".")),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_both_covector_forms() {
        let a = ConfigFile::from_json_str(
            r#"{"algebra":"heisenberg","norm":"l1","covectors":[[0,1,6.5]],"T":2,"h":0.001,"out_dir":"out"}"#,
        )
        .unwrap();
        assert_eq!(a.covectors, Some(CovectorSource::List(vec![vec![0.0, 1.0, 6.5]])));
        let cfg = ExperimentConfig::resolve(a, 1.0).unwrap();
        assert_eq!(cfg.norm, NormSpec::L1);
        assert_eq!((cfg.horizon, cfg.step), (2.0, 0.001));
        assert_eq!(cfg.out_dir, PathBuf::from("out"));

        let b = ConfigFile::from_json_str(r#"{"algebra":"filiform3","covectors":{"count":4,"seed":9}}"#).unwrap();
        let cfg = ExperimentConfig::resolve(b, 100.0).unwrap();
        assert_eq!(cfg.covectors, sample_unit_covectors(4, 4, 9));
        assert_eq!(cfg.sampling, Some((4, 9)));
        assert_eq!(cfg.horizon, 100.0);
        assert_eq!(cfg.norm, NormSpec::Euclidean);
    }

    #[test]
    fn polyhedral_norm_document() {
        let f = ConfigFile::from_json_str(
            r#"{"algebra":"heisenberg","covectors":[[1,0,0]],
                "norm":{"kind":"polyhedral","facets":[[1,0],[-1,0],[0,1],[0,-1]]}}"#,
        )
        .unwrap();
        let cfg = ExperimentConfig::resolve(f, 1.0).unwrap();
        assert!(matches!(cfg.norm, NormSpec::Polyhedral(_)));
    }

    #[test]
    fn sampling_without_seed_is_rejected() {
        let f = ConfigFile::from_json_str(r#"{"algebra":"heisenberg","covectors":{"count":3}}"#).unwrap();
        assert!(ExperimentConfig::resolve(f.clone(), 1.0).is_err());
        let flags = ConfigFile {
            covectors: Some(CovectorSource::Sample {
                count: 3,
                seed: Some(5),
            }),
            ..Default::default()
        };
        assert!(ExperimentConfig::resolve(f.merged(flags), 1.0).is_ok());
    }

    #[test]
    fn flags_override_file() {
        let f =
            ConfigFile::from_json_str(r#"{"algebra":"heisenberg","covectors":{"count":3,"seed":1},"T":5}"#).unwrap();
        let flags = ConfigFile {
            horizon: Some(7.0),
            covectors: Some(CovectorSource::Sample { count: 6, seed: None }),
            ..Default::default()
        };
        let cfg = ExperimentConfig::resolve(f.merged(flags), 1.0).unwrap();
        assert_eq!(cfg.horizon, 7.0);
        assert_eq!(cfg.sampling, Some((6, 1)));
    }

    #[test]
    fn rejects_bad_values() {
        for text in [
            r#"{"algebra":"heisenberg","covectors":[[1,0,0]],"T":0}"#,
            r#"{"algebra":"heisenberg","covectors":[[1,0,0]],"h":-1}"#,
            r#"{"algebra":"heisenberg","covectors":[[1,0]]}"#,
            r#"{"algebra":"heisenberg","covectors":[]}"#,
            r#"{"algebra":"nope","covectors":[[1,0,0]]}"#,
            r#"{"covectors":[[1,0,0]]}"#,
        ] {
            let f = ConfigFile::from_json_str(text).unwrap();
            assert!(ExperimentConfig::resolve(f, 1.0).is_err(), "{text}");
        }
        assert!(ConfigFile::from_json_str(r#"{"algebra":"heisenberg","bogus":1}"#).is_err());
    }
}
