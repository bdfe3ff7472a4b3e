use serde::{Deserialize, Serialize};

use crate::config::{LineSearchConfig, StopRule};
use crate::error::{check_dim, invalid, Error, Result};
use crate::field::{Point, ScalarField};
use crate::linesearch::{search, Growth, Probe};
use crate::trajectory::Trajectory;

use super::{drive, DirectionBounds, Plan, StepPlan};

/// Initial memory vector v₋₁ with the starting momentum γ₀ and rate δ₀.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentumState {
    pub v_prev: Point,
    pub gamma0: f64,
    pub delta0: f64,
}

impl MomentumState {
    pub fn new(v_prev: Point, gamma0: f64, delta0: f64) -> Result<Self> {
        let s = Self { v_prev, gamma0, delta0 };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        check_gamma(self.gamma0)?;
        if !(self.delta0 > 0.0 && self.delta0.is_finite()) {
            return Err(invalid(format!("delta0 must be positive, got {}", self.delta0)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    Momentum,
    Nesterov,
}

// γ = 0 is accepted: it is the documented reduction to plain GD.
fn check_gamma(gamma: f64) -> Result<()> {
    if gamma >= 0.0 && gamma.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("momentum gamma must be nonnegative, got {gamma}")))
    }
}

/// Gradient term of the recurrence: ∇f(z) for MMT, ∇f(z − γv) for NAG.
fn gradient_term(kind: Kind, f: &ScalarField, z: &Point, g: &Point, gamma: f64, v_prev: &Point) -> Result<Point> {
    match kind {
        Kind::Momentum => Ok(g.clone()),
        Kind::Nesterov => f.gradient(&z.step(gamma, v_prev)),
    }
}

fn run_standard(
    kind: Kind,
    f: &ScalarField,
    z0: &Point,
    v_init: &Point,
    gamma: f64,
    delta: f64,
    stop: &StopRule,
) -> Result<Trajectory> {
    check_gamma(gamma)?;
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(invalid(format!("learning rate must be positive, got {delta}")));
    }
    check_dim(z0.dim(), v_init.dim())?;
    let mut v_prev = v_init.clone();
    drive(|_| f, z0, stop, |_, f, it| {
        let term = gradient_term(kind, f, it.z, it.g, gamma, &v_prev)?;
        let v = v_prev.combine(gamma, delta, &term);
        let converged = delta * it.grad_norm < stop.eps && gamma * v_prev.norm() < stop.eps;
        let plan = StepPlan {
            next: it.z.step(1.0, &v),
            next_value: None,
            step_size: delta,
            backtracks: 0,
            evals: 0,
            converged,
        };
        v_prev = v;
        Ok(Plan::Step(plan))
    })
}

/// Heavy-ball momentum: vₙ = γvₙ₋₁ + δ∇f(zₙ), zₙ₊₁ = zₙ − vₙ.
pub fn run_mmt(f: &ScalarField, z0: &Point, v_init: &Point, gamma: f64, delta: f64, stop: &StopRule) -> Result<Trajectory> {
    run_standard(Kind::Momentum, f, z0, v_init, gamma, delta, stop)
}

/// Nesterov: vₙ = γvₙ₋₁ + δ∇f(zₙ − γvₙ₋₁), zₙ₊₁ = zₙ − vₙ.
pub fn run_nag(f: &ScalarField, z0: &Point, v_init: &Point, gamma: f64, delta: f64, stop: &StopRule) -> Result<Trajectory> {
    run_standard(Kind::Nesterov, f, z0, v_init, gamma, delta, stop)
}

fn run_backtracking(
    kind: Kind,
    f: &ScalarField,
    z0: &Point,
    state: &MomentumState,
    bounds: &DirectionBounds,
    cfg: &LineSearchConfig,
    stop: &StopRule,
) -> Result<Trajectory> {
    state.validate()?;
    bounds.validate()?;
    cfg.validate()?;
    check_dim(z0.dim(), state.v_prev.dim())?;
    let delta = state.delta0;
    let mut v_prev = state.v_prev.clone();

    drive(|_| f, z0, stop, |rec, f, it| {
        if it.grad_norm == 0.0 {
            return Ok(Plan::Step(StepPlan {
                next: it.z.clone(),
                next_value: Some(it.fx),
                step_size: delta,
                backtracks: 0,
                evals: 0,
                converged: true,
            }));
        }

        // Phase 1: shrink γ′ until v satisfies the sandwich and angle conditions.
        let mut gamma = state.gamma0;
        let mut shrinks = 0;
        let (v, mut check) = loop {
            let term = gradient_term(kind, f, it.z, it.g, gamma, &v_prev)?;
            let v = v_prev.combine(gamma, delta, &term);
            let check = bounds.check(it.n, it.g, &v, gamma);
            if check.sandwich_ok && check.angle_ok {
                break (v, check);
            }
            if shrinks == cfg.max_halvings {
                return Err(Error::DirectionStalled { shrinks });
            }
            gamma *= cfg.beta;
            shrinks += 1;
        };

        // Phase 2: Armijo backtracking on σ ∈ {1, β, β², …} along v.
        let slope = it.g.dot(&v);
        let r = search(&Probe { f, x: it.z, v: &v, fx: it.fx, slope }, 1.0, cfg, Growth::None)?;
        check.gamma = r.sigma * gamma;
        rec.direction_checks.push(check);

        let converged = r.sigma * delta * it.grad_norm < stop.eps && r.sigma * gamma * v_prev.norm() < stop.eps;
        let plan = StepPlan {
            next: it.z.step(r.sigma, &v),
            next_value: Some(r.value),
            step_size: r.sigma * delta,
            backtracks: r.shrinks,
            evals: r.trials,
            converged,
        };
        v_prev = v.scaled(r.sigma);
        Ok(Plan::Step(plan))
    })
}

/// Backtracking MMT: γ′ is shrunk until vₙ satisfies the inexact-direction
/// conditions, then σ ∈ {1, β, …} is backtracked for Armijo along vₙ. The
/// stored memory is σvₙ, i.e. γₙ = σγ′ and δₙ = σδ₀.
pub fn run_backtracking_mmt(
    f: &ScalarField,
    z0: &Point,
    state: &MomentumState,
    bounds: &DirectionBounds,
    cfg: &LineSearchConfig,
    stop: &StopRule,
) -> Result<Trajectory> {
    run_backtracking(Kind::Momentum, f, z0, state, bounds, cfg, stop)
}

/// Backtracking NAG: as [`run_backtracking_mmt`] with the gradient taken at zₙ − γ′vₙ₋₁.
pub fn run_backtracking_nag(
    f: &ScalarField,
    z0: &Point,
    state: &MomentumState,
    bounds: &DirectionBounds,
    cfg: &LineSearchConfig,
    stop: &StopRule,
) -> Result<Trajectory> {
    run_backtracking(Kind::Nesterov, f, z0, state, bounds, cfg, stop)
}

fn run_simplified(
    kind: Kind,
    f: &ScalarField,
    z0: &Point,
    v_init: &Point,
    gamma: f64,
    cfg: &LineSearchConfig,
    stop: &StopRule,
) -> Result<Trajectory> {
    check_gamma(gamma)?;
    cfg.validate()?;
    check_dim(z0.dim(), v_init.dim())?;
    let mut v_prev = v_init.clone();
    drive(|_| f, z0, stop, |_, f, it| {
        let probe = Probe { f, x: it.z, v: it.g, fx: it.fx, slope: it.grad_norm * it.grad_norm };
        let r = search(&probe, cfg.delta0, cfg, Growth::None)?;
        let term = gradient_term(kind, f, it.z, it.g, gamma, &v_prev)?;
        let v = v_prev.combine(gamma, r.sigma, &term);
        let converged = r.sigma * it.grad_norm < stop.eps && gamma * v_prev.norm() < stop.eps;
        let plan = StepPlan {
            next: it.z.step(1.0, &v),
            next_value: None,
            step_size: r.sigma,
            backtracks: r.shrinks,
            evals: r.trials,
            converged,
        };
        v_prev = v;
        Ok(Plan::Step(plan))
    })
}

/// MMT with fixed γ and δₙ recomputed by backtracking at every iterate.
pub fn run_simplified_bmmt(
    f: &ScalarField,
    z0: &Point,
    v_init: &Point,
    gamma: f64,
    cfg: &LineSearchConfig,
    stop: &StopRule,
) -> Result<Trajectory> {
    run_simplified(Kind::Momentum, f, z0, v_init, gamma, cfg, stop)
}

/// NAG with fixed γ and δₙ recomputed by backtracking at every iterate.
pub fn run_simplified_bnag(
    f: &ScalarField,
    z0: &Point,
    v_init: &Point,
    gamma: f64,
    cfg: &LineSearchConfig,
    stop: &StopRule,
) -> Result<Trajectory> {
    run_simplified(Kind::Nesterov, f, z0, v_init, gamma, cfg, stop)
}
