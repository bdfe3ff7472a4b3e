//! Name-addressable objectives and optimizers with serde configurations,
//! used by the experiment runner and the Python bindings.

use serde::{Deserialize, Serialize};

use crate::config::{LineSearchConfig, StopRule};
use crate::error::{invalid, Result};
use crate::field::{Point, ScalarField};
use crate::functions::{self, NamedObjective};
use crate::linalg::SymMatrix;
use crate::optimizers::{self, DirectionBounds, DirectionOracle, MomentumState, Schedule};
use crate::trajectory::Trajectory;

fn half() -> f64 {
    0.5
}

fn tenth() -> f64 {
    0.1
}

fn minus_three() -> f64 {
    -3.0
}

fn identity2() -> Vec<Vec<f64>> {
    vec![vec![1.0, 0.0], vec![0.0, 1.0]]
}

/// An objective from the corpus with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum FunctionConfig {
    MexicanHat,
    Holder {
        #[serde(default = "half")]
        gamma: f64,
    },
    SmoothedAbs {
        #[serde(default = "tenth")]
        eps0: f64,
    },
    Cubic,
    PerturbedCubic {
        #[serde(default = "minus_three")]
        a: f64,
    },
    /// ½xᵀQx for a symmetric Q given by rows.
    Quadratic {
        #[serde(default = "identity2")]
        matrix: Vec<Vec<f64>>,
    },
    Saddle,
    Rosenbrock,
}

impl FunctionConfig {
    pub const NAMES: [&'static str; 8] =
        ["mexican_hat", "holder", "smoothed_abs", "cubic", "perturbed_cubic", "quadratic", "saddle", "rosenbrock"];

    /// The named objective with its default parameters.
    pub fn from_name(name: &str) -> Result<Self> {
        Ok(match name {
            "mexican_hat" => Self::MexicanHat,
            "holder" => Self::Holder { gamma: half() },
            "smoothed_abs" => Self::SmoothedAbs { eps0: tenth() },
            "cubic" => Self::Cubic,
            "perturbed_cubic" => Self::PerturbedCubic { a: minus_three() },
            "quadratic" => Self::Quadratic { matrix: identity2() },
            "saddle" => Self::Saddle,
            "rosenbrock" => Self::Rosenbrock,
            _ => return Err(invalid(format!("unknown function `{name}`; expected one of {}", Self::NAMES.join(", ")))),
        })
    }

    pub fn build(&self) -> Result<NamedObjective> {
        match self {
            Self::MexicanHat => Ok(functions::mexican_hat()),
            Self::Holder { gamma } => functions::holder(*gamma),
            Self::SmoothedAbs { eps0 } => functions::smoothed_abs(*eps0),
            Self::Cubic => Ok(functions::cubic()),
            Self::PerturbedCubic { a } => functions::perturbed_cubic(*a),
            Self::Quadratic { matrix } => Ok(functions::quadratic_form(&SymMatrix::from_rows(matrix)?)),
            Self::Saddle => Ok(functions::canonical_saddle()),
            Self::Rosenbrock => Ok(functions::rosenbrock()),
        }
    }
}

/// An iteration scheme with its hyper-parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum OptimizerConfig {
    StandardGd {
        #[serde(default = "tenth")]
        delta: f64,
    },
    ScheduledGd {
        schedule: Schedule,
        #[serde(default)]
        verify_armijo: Option<f64>,
    },
    BacktrackingGd {
        #[serde(default)]
        line_search: LineSearchConfig,
    },
    TwoWayGd {
        #[serde(default)]
        line_search: LineSearchConfig,
    },
    InexactGd {
        #[serde(default)]
        line_search: LineSearchConfig,
        #[serde(default)]
        oracle: DirectionOracle,
    },
    Mmt {
        #[serde(default = "default_gamma")]
        gamma: f64,
        #[serde(default = "tenth")]
        delta: f64,
        #[serde(default)]
        v_init: Option<Vec<f64>>,
    },
    Nag {
        #[serde(default = "default_gamma")]
        gamma: f64,
        #[serde(default = "tenth")]
        delta: f64,
        #[serde(default)]
        v_init: Option<Vec<f64>>,
    },
    BacktrackingMmt {
        #[serde(default = "default_gamma")]
        gamma0: f64,
        #[serde(default)]
        line_search: LineSearchConfig,
        #[serde(default)]
        bounds: DirectionBounds,
        #[serde(default)]
        v_init: Option<Vec<f64>>,
    },
    BacktrackingNag {
        #[serde(default = "default_gamma")]
        gamma0: f64,
        #[serde(default)]
        line_search: LineSearchConfig,
        #[serde(default)]
        bounds: DirectionBounds,
        #[serde(default)]
        v_init: Option<Vec<f64>>,
    },
    SimplifiedBmmt {
        #[serde(default = "default_gamma")]
        gamma: f64,
        #[serde(default)]
        line_search: LineSearchConfig,
        #[serde(default)]
        v_init: Option<Vec<f64>>,
    },
    SimplifiedBnag {
        #[serde(default = "default_gamma")]
        gamma: f64,
        #[serde(default)]
        line_search: LineSearchConfig,
        #[serde(default)]
        v_init: Option<Vec<f64>>,
    },
}

fn default_gamma() -> f64 {
    0.9
}

fn memory(v_init: &Option<Vec<f64>>, dim: usize) -> Result<Point> {
    match v_init {
        Some(v) => Point::new(v.clone()),
        None => Ok(Point::zeros(dim)),
    }
}

impl OptimizerConfig {
    pub const NAMES: [&'static str; 11] = [
        "standard_gd",
        "scheduled_gd",
        "backtracking_gd",
        "two_way_gd",
        "inexact_gd",
        "mmt",
        "nag",
        "backtracking_mmt",
        "backtracking_nag",
        "simplified_bmmt",
        "simplified_bnag",
    ];

    /// The named scheme with default hyper-parameters
    /// (scheduled GD defaults to the Robbins–Monro rate 1/(n+1)).
    pub fn from_name(name: &str) -> Result<Self> {
        let line_search = LineSearchConfig::default();
        Ok(match name {
            "standard_gd" => Self::StandardGd { delta: tenth() },
            "scheduled_gd" => Self::ScheduledGd { schedule: Schedule::RobbinsMonro { c: 1.0 }, verify_armijo: None },
            "backtracking_gd" => Self::BacktrackingGd { line_search },
            "two_way_gd" => Self::TwoWayGd { line_search },
            "inexact_gd" => Self::InexactGd { line_search, oracle: DirectionOracle::default() },
            "mmt" => Self::Mmt { gamma: default_gamma(), delta: tenth(), v_init: None },
            "nag" => Self::Nag { gamma: default_gamma(), delta: tenth(), v_init: None },
            "backtracking_mmt" => Self::BacktrackingMmt {
                gamma0: default_gamma(),
                line_search,
                bounds: DirectionBounds::default(),
                v_init: None,
            },
            "backtracking_nag" => Self::BacktrackingNag {
                gamma0: default_gamma(),
                line_search,
                bounds: DirectionBounds::default(),
                v_init: None,
            },
            "simplified_bmmt" => Self::SimplifiedBmmt { gamma: default_gamma(), line_search, v_init: None },
            "simplified_bnag" => Self::SimplifiedBnag { gamma: default_gamma(), line_search, v_init: None },
            _ => return Err(invalid(format!("unknown optimizer `{name}`; expected one of {}", Self::NAMES.join(", ")))),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::StandardGd { .. } => "standard_gd",
            Self::ScheduledGd { .. } => "scheduled_gd",
            Self::BacktrackingGd { .. } => "backtracking_gd",
            Self::TwoWayGd { .. } => "two_way_gd",
            Self::InexactGd { .. } => "inexact_gd",
            Self::Mmt { .. } => "mmt",
            Self::Nag { .. } => "nag",
            Self::BacktrackingMmt { .. } => "backtracking_mmt",
            Self::BacktrackingNag { .. } => "backtracking_nag",
            Self::SimplifiedBmmt { .. } => "simplified_bmmt",
            Self::SimplifiedBnag { .. } => "simplified_bnag",
        }
    }

    /// Whether every committed step of this scheme passed an Armijo test along
    /// the direction it actually moved in (so f never increases).
    pub fn is_armijo_based(&self) -> bool {
        matches!(
            self,
            Self::BacktrackingGd { .. }
                | Self::TwoWayGd { .. }
                | Self::InexactGd { .. }
                | Self::BacktrackingMmt { .. }
                | Self::BacktrackingNag { .. }
        )
    }

    pub fn run(&self, f: &ScalarField, z0: &Point, stop: &StopRule) -> Result<Trajectory> {
        let dim = z0.dim();
        match self {
            Self::StandardGd { delta } => optimizers::run_standard_gd(f, z0, *delta, stop),
            Self::ScheduledGd { schedule, verify_armijo } => {
                optimizers::run_scheduled_gd(f, z0, schedule, stop, *verify_armijo)
            }
            Self::BacktrackingGd { line_search } => optimizers::run_backtracking_gd(f, z0, line_search, stop),
            Self::TwoWayGd { line_search } => optimizers::run_two_way_gd(f, z0, line_search, stop),
            Self::InexactGd { line_search, oracle } => {
                optimizers::run_inexact_backtracking_gd(f, z0, oracle, line_search, stop)
            }
            Self::Mmt { gamma, delta, v_init } => {
                optimizers::run_mmt(f, z0, &memory(v_init, dim)?, *gamma, *delta, stop)
            }
            Self::Nag { gamma, delta, v_init } => {
                optimizers::run_nag(f, z0, &memory(v_init, dim)?, *gamma, *delta, stop)
            }
            Self::BacktrackingMmt { gamma0, line_search, bounds, v_init } => {
                let state = MomentumState::new(memory(v_init, dim)?, *gamma0, line_search.delta0)?;
                optimizers::run_backtracking_mmt(f, z0, &state, bounds, line_search, stop)
            }
            Self::BacktrackingNag { gamma0, line_search, bounds, v_init } => {
                let state = MomentumState::new(memory(v_init, dim)?, *gamma0, line_search.delta0)?;
                optimizers::run_backtracking_nag(f, z0, &state, bounds, line_search, stop)
            }
            Self::SimplifiedBmmt { gamma, line_search, v_init } => {
                optimizers::run_simplified_bmmt(f, z0, &memory(v_init, dim)?, *gamma, line_search, stop)
            }
            Self::SimplifiedBnag { gamma, line_search, v_init } => {
                optimizers::run_simplified_bnag(f, z0, &memory(v_init, dim)?, *gamma, line_search, stop)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_name_resolves_and_round_trips() {
        for name in FunctionConfig::NAMES {
            let cfg = FunctionConfig::from_name(name).unwrap();
            assert_eq!(cfg.build().unwrap().name, name);
            let json = serde_json::to_string(&cfg).unwrap();
            assert_eq!(serde_json::from_str::<FunctionConfig>(&json).unwrap(), cfg);
        }
        for name in OptimizerConfig::NAMES {
            let cfg = OptimizerConfig::from_name(name).unwrap();
            assert_eq!(cfg.name(), name);
            let json = serde_json::to_string(&cfg).unwrap();
            assert_eq!(serde_json::from_str::<OptimizerConfig>(&json).unwrap(), cfg);
        }
        assert!(FunctionConfig::from_name("nope").is_err());
        assert!(OptimizerConfig::from_name("nope").is_err());
    }

    #[test]
    fn sparse_json_fills_defaults() {
        let f: FunctionConfig = serde_json::from_str(r#"{"name": "holder"}"#).unwrap();
        assert_eq!(f, FunctionConfig::Holder { gamma: 0.5 });
        let o: OptimizerConfig =
            serde_json::from_str(r#"{"name": "backtracking_gd", "line_search": {"delta0": 2.0}}"#).unwrap();
        let OptimizerConfig::BacktrackingGd { line_search } = o else { panic!() };
        assert_eq!((line_search.delta0, line_search.alpha), (2.0, 0.5));
    }
}
