//! JSON experiment configuration. Every field has a default, unknown keys are
//! rejected, and command-line flags override the parsed values.

use std::path::PathBuf;

use btgd::diagnostics::{sample_ball, SaddleMcConfig};
use btgd::functions::NamedObjective;
use btgd::minibatch::LeastSquaresSpec;
use btgd::registry::{FunctionConfig, OptimizerConfig};
use btgd::{CriticalKind, FinderSearch, LineSearchConfig, MbtOptions, Point, RescaleMode, StopRule};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Where a run starts: an explicit point, or a seeded uniform draw from a ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum StartSpec {
    Point(Vec<f64>),
    Ball {
        #[serde(default)]
        center: Option<Vec<f64>>,
        radius: f64,
    },
}

impl Default for StartSpec {
    fn default() -> Self {
        StartSpec::Ball { center: None, radius: 1.0 }
    }
}

impl StartSpec {
    pub fn resolve(&self, dim: usize, seed: u64) -> Result<Point, CliError> {
        let check = |v: &[f64], what: &str| {
            if v.len() == dim {
                Point::new(v.to_vec()).map_err(CliError::from)
            } else {
                Err(CliError::Config(format!("{what} has {} coordinates, the function needs {dim}", v.len())))
            }
        };
        match self {
            StartSpec::Point(v) => check(v, "z0"),
            StartSpec::Ball { center, radius } => {
                if !(*radius > 0.0 && radius.is_finite()) {
                    return Err(CliError::Config("z0 ball radius must be positive".into()));
                }
                let c = match center {
                    Some(c) => check(c, "z0 ball center")?,
                    None => Point::zeros(dim),
                };
                Ok(sample_ball(&c, *radius, &mut ChaCha8Rng::seed_from_u64(seed)))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FinderConfig {
    pub batch_size: usize,
    pub n_batches: usize,
    pub mode: RescaleMode,
    pub search: FinderSearch,
    pub line_search: LineSearchConfig,
    /// Point the batch searches are anchored at; the origin by default.
    pub at: Option<Vec<f64>>,
}

impl Default for FinderConfig {
    fn default() -> Self {
        Self {
            batch_size: 10,
            n_batches: btgd::minibatch::DEFAULT_FINDER_BATCHES,
            mode: RescaleMode::Sqrt,
            search: FinderSearch::TwoWay,
            line_search: MbtOptions::default_line_search(),
            at: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SaddleConfig {
    /// The saddle; defaults to the function's first listed generalized saddle.
    pub point: Option<Vec<f64>>,
    pub eps: f64,
    pub n_samples: usize,
    pub burn_in: usize,
    pub exclusion_ratio: f64,
    pub line_search: LineSearchConfig,
}

impl Default for SaddleConfig {
    fn default() -> Self {
        let mc = SaddleMcConfig::default();
        Self {
            point: None,
            eps: mc.eps,
            n_samples: mc.n_samples,
            burn_in: mc.burn_in,
            exclusion_ratio: mc.exclusion_ratio,
            line_search: LineSearchConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub deltas: Vec<f64>,
    pub batch_sizes: Vec<usize>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { deltas: vec![1e-6, 1e-3, 1.0, 1e3], batch_sizes: vec![5, 10, 25, 50] }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub function: Option<FunctionConfig>,
    pub optimizer: Option<OptimizerConfig>,
    /// Schemes for `compare`.
    pub optimizers: Vec<OptimizerConfig>,
    pub z0: StartSpec,
    pub stop: StopRule,
    pub seed: u64,
    pub out: Option<PathBuf>,
    /// Least-squares problem for `lr-finder` and `stability-sweep`.
    pub problem: LeastSquaresSpec,
    pub finder: FinderConfig,
    pub saddle: SaddleConfig,
    pub sweep: SweepConfig,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("malformed config: {e}")))
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("btgd-out"))
    }

    pub fn objective(&self, fallback: &str) -> Result<(FunctionConfig, NamedObjective), CliError> {
        let cfg = match &self.function {
            Some(f) => f.clone(),
            None => FunctionConfig::from_name(fallback)?,
        };
        let obj = cfg.build()?;
        Ok((cfg, obj))
    }

    pub fn objective_required(&self) -> Result<(FunctionConfig, NamedObjective), CliError> {
        let cfg = self
            .function
            .clone()
            .ok_or_else(|| CliError::Config(format!("no function given; expected one of {}", FunctionConfig::NAMES.join(", "))))?;
        let obj = cfg.build()?;
        Ok((cfg, obj))
    }

    pub fn saddle_point(&self, obj: &NamedObjective) -> Result<Point, CliError> {
        match &self.saddle.point {
            Some(v) => StartSpec::Point(v.clone()).resolve(obj.dim(), 0),
            None => Ok(obj
                .known_critical_points
                .iter()
                .find(|(_, kind)| *kind == CriticalKind::GeneralizedSaddle)
                .map(|(x, _)| x.clone())
                .unwrap_or_else(|| Point::zeros(obj.dim()))),
        }
    }

    pub fn saddle_mc(&self) -> SaddleMcConfig {
        SaddleMcConfig {
            eps: self.saddle.eps,
            n_samples: self.saddle.n_samples,
            seed: self.seed,
            burn_in: self.saddle.burn_in,
            exclusion_ratio: self.saddle.exclusion_ratio,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_takes_defaults() {
        let cfg = ExperimentConfig::from_json("{}").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.sweep.batch_sizes, vec![5, 10, 25, 50]);
        assert_eq!(cfg.finder.line_search.alpha, 1e-4);
    }

    #[test]
    fn nested_unknown_fields_are_rejected() {
        assert!(ExperimentConfig::from_json(r#"{"finder": {"batch": 3}}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"z0": {"ball": {"radius": 1, "centre": [0]}}}"#).is_err());
    }

    #[test]
    fn ball_start_is_seeded_and_inside_the_ball() {
        let spec = StartSpec::Ball { center: Some(vec![1.0, -1.0]), radius: 0.5 };
        let a = spec.resolve(2, 9).unwrap();
        assert_eq!(a, spec.resolve(2, 9).unwrap());
        assert_ne!(a, spec.resolve(2, 10).unwrap());
        assert!(a.distance(&Point::new(vec![1.0, -1.0]).unwrap()) <= 0.5);
    }

    #[test]
    fn start_dimension_is_checked() {
        assert!(matches!(StartSpec::Point(vec![1.0]).resolve(2, 0), Err(CliError::Config(_))));
        assert!(matches!(StartSpec::Ball { center: None, radius: 0.0 }.resolve(2, 0), Err(CliError::Config(_))));
    }

    #[test]
    fn saddle_defaults_to_the_listed_saddle() {
        let cfg = ExperimentConfig::default();
        let (_, obj) = cfg.objective("saddle").unwrap();
        assert_eq!(cfg.saddle_point(&obj).unwrap(), Point::zeros(2));
    }
}
