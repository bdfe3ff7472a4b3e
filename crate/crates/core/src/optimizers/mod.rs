//! Iteration schemes: standard and scheduled GD, Backtracking, Two-way and
//! Inexact Backtracking GD, and standard or backtracking MMT/NAG.
//!
//! Every scheme records the iterate zₙ together with the step size chosen
//! there, then either stops (convergence, budget, divergence, stall) or
//! commits the step. A run of `max_iters` steps therefore holds
//! `max_iters + 1` records.

mod direction;
mod gd;
mod momentum;

pub use direction::{DirectionBounds, DirectionOracle};
pub use gd::{
    run_backtracking_gd, run_inexact_backtracking_gd, run_objective_sequence,
    run_scheduled_gd, run_standard_gd, run_two_way_gd,
};
pub use momentum::{
    run_backtracking_mmt, run_backtracking_nag, run_mmt, run_nag, run_simplified_bmmt,
    run_simplified_bnag, MomentumState,
};

use serde::{Deserialize, Serialize};

use crate::config::StopRule;
use crate::error::{check_dim, invalid, Error, Result};
use crate::field::{Point, ScalarField};
use crate::trajectory::{Recorder, Termination, Trajectory};

/// Learning-rate sequence for scheduled GD.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Schedule {
    Constant { delta: f64 },
    /// δₙ taken from the list; the run ends with MaxIters once it is exhausted.
    Explicit { rates: Vec<f64> },
    /// δₙ = c / (n + 1).
    RobbinsMonro { c: f64 },
}

impl Schedule {
    pub fn rate(&self, n: usize) -> Option<f64> {
        match self {
            Schedule::Constant { delta } => Some(*delta),
            Schedule::Explicit { rates } => rates.get(n).copied(),
            Schedule::RobbinsMonro { c } => Some(c / (n as f64 + 1.0)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |d: f64| d > 0.0 && d.is_finite();
        match self {
            Schedule::Constant { delta } if !ok(*delta) => {
                Err(invalid("constant learning rate must be positive"))
            }
            Schedule::RobbinsMonro { c } if !ok(*c) => {
                Err(invalid("Robbins-Monro constant must be positive"))
            }
            Schedule::Explicit { rates } if rates.is_empty() => {
                Err(invalid("explicit schedule must list at least one rate"))
            }
            Schedule::Explicit { rates } if !rates.iter().all(|&d| ok(d)) => {
                Err(invalid("every scheduled learning rate must be positive"))
            }
            _ => Ok(()),
        }
    }
}

/// The current iterate as seen by a step rule.
pub(crate) struct Iterate<'a> {
    pub n: usize,
    pub z: &'a Point,
    pub fx: f64,
    pub g: &'a Point,
    pub grad_norm: f64,
}

pub(crate) struct StepPlan {
    pub next: Point,
    /// Objective value at `next` if the rule already evaluated it.
    pub next_value: Option<f64>,
    pub step_size: f64,
    pub backtracks: usize,
    /// Objective evaluations spent choosing the step.
    pub evals: usize,
    pub converged: bool,
}

pub(crate) enum Plan {
    Step(StepPlan),
    /// The rule has no further step (an explicit schedule ran out).
    Exhausted,
}

pub(crate) fn finite_value(f: &ScalarField, z: &Point) -> Option<f64> {
    f.raw_value(z.coords()).ok()
}

/// Runs `rule` from `z0` under `stop`. `objective(n)` is the field used at step n.
pub(crate) fn drive<'a, O, R>(
    objective: O,
    z0: &Point,
    stop: &StopRule,
    mut rule: R,
) -> Result<Trajectory>
where
    O: Fn(usize) -> &'a ScalarField,
    R: FnMut(&mut Recorder, &ScalarField, Iterate<'_>) -> Result<Plan>,
{
    stop.validate()?;
    check_dim(objective(0).dim(), z0.dim())?;
    let mut rec = Recorder::new();
    let mut z = z0.clone();
    let mut fx = objective(0).value(&z)?;
    rec.add_evals(1);
    let mut n = 0;

    loop {
        let f = objective(n);
        let g = match f.gradient(&z) {
            Ok(g) => g,
            Err(Error::NonFiniteEvaluation { .. }) if n > 0 => {
                return Ok(rec.finish(Termination::Diverged, true));
            }
            Err(e) => return Err(e),
        };
        let grad_norm = g.norm();
        if z.norm() > stop.divergence_radius {
            rec.push(&z, fx, grad_norm, 0.0, 0);
            return Ok(rec.finish(Termination::Diverged, false));
        }

        let it = Iterate { n, z: &z, fx, g: &g, grad_norm };
        let plan = match rule(&mut rec, f, it) {
            Ok(Plan::Step(plan)) => plan,
            Ok(Plan::Exhausted) => {
                rec.push(&z, fx, grad_norm, 0.0, 0);
                return Ok(rec.finish(Termination::MaxIters, false));
            }
            Err(Error::StalledLineSearch { halvings }) => {
                rec.add_evals(halvings + 1);
                rec.push(&z, fx, grad_norm, 0.0, halvings);
                rec.notes.push(format!("step {n}: line search stalled after {halvings} shrinkages"));
                return Ok(rec.finish(Termination::Stalled, false));
            }
            Err(Error::DirectionStalled { shrinks }) => {
                rec.push(&z, fx, grad_norm, 0.0, 0);
                rec.notes.push(format!(
                    "step {n}: direction condition unmet after {shrinks} momentum shrinkages"
                ));
                return Ok(rec.finish(Termination::Stalled, false));
            }
            Err(Error::NonFiniteEvaluation { context }) => {
                rec.push(&z, fx, grad_norm, 0.0, 0);
                rec.notes.push(format!("step {n}: non-finite {context}"));
                return Ok(rec.finish(Termination::Diverged, true));
            }
            Err(e) => return Err(e),
        };

        rec.add_evals(plan.evals);
        rec.push(&z, fx, grad_norm, plan.step_size, plan.backtracks);
        if plan.converged {
            return Ok(rec.finish(Termination::Converged, false));
        }
        if n == stop.max_iters {
            return Ok(rec.finish(Termination::MaxIters, false));
        }
        if !plan.next.is_finite() {
            return Ok(rec.finish(Termination::Diverged, true));
        }
        let next_value = match plan.next_value {
            Some(v) if std::ptr::eq(objective(n + 1), f) => Some(v),
            _ => {
                rec.add_evals(1);
                finite_value(objective(n + 1), &plan.next)
            }
        };
        match next_value {
            Some(v) if v.is_finite() => fx = v,
            _ => return Ok(rec.finish(Termination::Diverged, true)),
        }
        z = plan.next;
        n += 1;
    }
}
