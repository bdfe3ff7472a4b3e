//! Backtracking gradient descent and its relatives.
//!
//! The crate provides Armijo backtracking line searches, the GD family built on
//! them (standard, scheduled, Backtracking, Two-way, Inexact, momentum and
//! Nesterov variants), a corpus of adversarial test objectives, mini-batch
//! learning-rate finding, and diagnostics for critical points, step-size
//! stabilization and saddle escape.
//!
//! ```
//! use btgd::{run_backtracking_gd, LineSearchConfig, Point, ScalarField, StopRule, Termination};
//!
//! let f = ScalarField::new(1, |x| x[0] * x[0]).with_gradient(|x| vec![2.0 * x[0]]);
//! let z0 = Point::new(vec![1.0]).unwrap();
//! let traj = run_backtracking_gd(&f, &z0, &LineSearchConfig::default(), &StopRule::default()).unwrap();
//! assert_eq!(traj.termination, Termination::Converged);
//! assert_eq!(traj.final_point()[0], 0.0);
//! ```

// `!(x > 0.0)` is used on purpose so that NaN parameters are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod config;
pub mod diagnostics;
pub mod error;
pub mod field;
pub mod functions;
pub mod linalg;
pub mod linesearch;
pub mod minibatch;
pub mod optimizers;
pub mod registry;
pub mod trajectory;

pub use config::{LineSearchConfig, StopRule};
pub use diagnostics::{
    classify, classify_critical_point, convergence_report, detect_stabilization, projective_dist,
    saddle_basin_fraction, saddle_basin_report, ConvergenceReport, PROJECTIVE_LIPSCHITZ, CriticalKind, CriticalPointClass,
    SaddleMcConfig, SaddleMcReport, StabilizationReport,
};
pub use error::{Error, Result};
pub use field::{fd_gradient, fd_hessian, Point, ScalarField};
pub use functions::NamedObjective;
pub use linalg::SymMatrix;
pub use linesearch::{backtrack, backtrack_direction, two_way_backtrack, wolfe_holds, LineSearchResult};
pub use minibatch::{
    lr_finder, lr_finder_with, make_least_squares_problem, run_mbt_gd, run_mbt_mmt, run_mbt_nag, stability_sweep,
    BatchSampler, FinderSearch, LrFinderReport, MbtOptions, MiniBatchProblem, RescaleMode,
};
pub use optimizers::*;
pub use trajectory::{DirectionCheck, IterateRecord, Termination, Trajectory};
