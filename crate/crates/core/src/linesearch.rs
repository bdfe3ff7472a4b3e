//! Step-size selection: Armijo backtracking, two-way backtracking and the Wolfe predicate.
//!
//! Candidate steps are produced by repeated multiplication (or division) by β,
//! never by powering, so the grid {βⁿδ₀} is reproduced bit for bit.

use serde::{Deserialize, Serialize};

use crate::config::LineSearchConfig;
use crate::error::{check_dim, invalid, Error, Result};
use crate::field::{Point, ScalarField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SearchDirection {
    ShrunkOrKept,
    Grown,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchResult {
    /// Accepted step σ.
    pub sigma: f64,
    /// Armijo tests performed, each costing one objective evaluation.
    pub trials: usize,
    /// Number of β-shrinkages applied.
    pub shrinks: usize,
    pub direction: SearchDirection,
    /// f(x − σv) at the accepted σ.
    pub value: f64,
}

/// Armijo test along a fixed direction with f(x) and ⟨∇f(x), v⟩ precomputed.
pub(crate) struct Probe<'a> {
    pub f: &'a ScalarField,
    pub x: &'a Point,
    pub v: &'a Point,
    pub fx: f64,
    pub slope: f64,
}

impl Probe<'_> {
    /// Returns f(x − σv) when Armijo holds at σ. Non-finite trial values fail the test.
    fn accepts(&self, sigma: f64, alpha: f64, tol: f64) -> Option<f64> {
        let y = self.x.step(sigma, self.v);
        if !y.is_finite() {
            return None;
        }
        let fy = self.f.raw_value(y.coords()).ok()?;
        (fy - self.fx <= -alpha * sigma * self.slope + tol).then_some(fy)
    }
}

/// How far a search may grow once Armijo holds at its starting step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Growth {
    None,
    /// Grow while σ/β satisfies Armijo and does not exceed the cap.
    Capped(f64),
    /// Grow while σ/β satisfies Armijo, for at most `max_halvings` growth steps.
    Unbounded,
}

/// Shrinks from `start` until Armijo holds, then optionally grows.
pub(crate) fn search(
    probe: &Probe<'_>,
    start: f64,
    cfg: &LineSearchConfig,
    growth: Growth,
) -> Result<LineSearchResult> {
    let (alpha, beta, tol) = (cfg.alpha, cfg.beta, cfg.armijo_tol);
    let mut sigma = start;
    let mut trials = 1;
    let mut shrinks = 0;

    let mut value = loop {
        if let Some(fy) = probe.accepts(sigma, alpha, tol) {
            break fy;
        }
        if shrinks == cfg.max_halvings {
            return Err(Error::StalledLineSearch { halvings: shrinks });
        }
        sigma *= beta;
        shrinks += 1;
        trials += 1;
    };

    let mut direction = SearchDirection::ShrunkOrKept;
    if shrinks == 0 && growth != Growth::None {
        let mut grown = 0;
        loop {
            let mut candidate = sigma / beta;
            match growth {
                Growth::Capped(cap) => {
                    // Division by β need not invert the earlier multiplications exactly.
                    if (candidate - cap).abs() <= 4.0 * f64::EPSILON * cap {
                        candidate = cap;
                    }
                    if candidate > cap {
                        break;
                    }
                }
                Growth::Unbounded => {
                    if grown == cfg.max_halvings || !candidate.is_finite() {
                        break;
                    }
                }
                Growth::None => unreachable!(),
            }
            trials += 1;
            match probe.accepts(candidate, alpha, tol) {
                Some(fy) => {
                    sigma = candidate;
                    value = fy;
                    grown += 1;
                    direction = SearchDirection::Grown;
                }
                None => break,
            }
        }
    }

    Ok(LineSearchResult { sigma, trials, shrinks, direction, value })
}

fn validated(f: &ScalarField, x: &Point, cfg: &LineSearchConfig) -> Result<f64> {
    cfg.validate()?;
    check_dim(f.dim(), x.dim())?;
    f.value(x)
}

/// The largest σ in {δ₀, βδ₀, β²δ₀, …} satisfying Armijo along −∇f(x).
pub fn backtrack(f: &ScalarField, x: &Point, cfg: &LineSearchConfig) -> Result<LineSearchResult> {
    let fx = validated(f, x, cfg)?;
    let g = f.gradient(x)?;
    let slope = g.dot(&g);
    search(&Probe { f, x, v: &g, fx, slope }, cfg.delta0, cfg, Growth::None)
}

/// Backtracking along an arbitrary direction `v` with ⟨∇f(x), v⟩ ≥ 0.
pub fn backtrack_direction(
    f: &ScalarField,
    x: &Point,
    v: &Point,
    cfg: &LineSearchConfig,
) -> Result<LineSearchResult> {
    let fx = validated(f, x, cfg)?;
    check_dim(x.dim(), v.dim())?;
    let g = f.gradient(x)?;
    let slope = g.dot(v);
    if slope < 0.0 {
        return Err(Error::NonDescentDirection { slope });
    }
    search(&Probe { f, x, v, fx, slope }, cfg.delta0, cfg, Growth::None)
}

/// Two-way backtracking: start from `prev_sigma`, shrink while Armijo fails,
/// otherwise grow by 1/β while the larger step still satisfies Armijo and stays ≤ δ₀.
pub fn two_way_backtrack(
    f: &ScalarField,
    x: &Point,
    prev_sigma: f64,
    cfg: &LineSearchConfig,
) -> Result<LineSearchResult> {
    let fx = validated(f, x, cfg)?;
    if !(prev_sigma > 0.0 && prev_sigma <= cfg.delta0) {
        return Err(invalid(format!(
            "prev_sigma must lie in (0, delta0 = {}], got {prev_sigma}",
            cfg.delta0
        )));
    }
    let g = f.gradient(x)?;
    let slope = g.dot(&g);
    search(&Probe { f, x, v: &g, fx, slope }, prev_sigma, cfg, Growth::Capped(cfg.delta0))
}

/// Wolfe conditions for the step `x − σv`: (sufficient decrease, curvature).
pub fn wolfe_holds(
    f: &ScalarField,
    x: &Point,
    v: &Point,
    sigma: f64,
    c1: f64,
    c2: f64,
) -> Result<(bool, bool)> {
    if !(0.0 < c1 && c1 < c2 && c2 < 1.0) {
        return Err(invalid(format!("need 0 < c1 < c2 < 1, got c1 = {c1}, c2 = {c2}")));
    }
    if !(sigma > 0.0) {
        return Err(invalid("sigma must be positive"));
    }
    check_dim(f.dim(), x.dim())?;
    check_dim(x.dim(), v.dim())?;
    let g = f.gradient(x)?;
    let slope = g.dot(v);
    if !(slope > 0.0) {
        return Err(Error::NonDescentDirection { slope });
    }
    let y = x.step(sigma, v);
    let decrease = f.value(&y)? - f.value(x)? <= -c1 * sigma * slope;
    let curvature = f.gradient(&y)?.dot(v) <= c2 * slope;
    Ok((decrease, curvature))
}
