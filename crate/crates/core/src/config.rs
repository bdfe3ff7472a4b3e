use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Hyper-parameters of the step-size search: Armijo constant `alpha`,
/// shrink factor `beta` and the initial (and maximal) step `delta0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LineSearchConfig {
    pub alpha: f64,
    pub beta: f64,
    pub delta0: f64,
    /// Cap on the number of β-shrinkages before the search reports a stall.
    pub max_halvings: usize,
    /// Absolute slack added to the right-hand side of the Armijo test.
    pub armijo_tol: f64,
}

impl Default for LineSearchConfig {
    fn default() -> Self {
        Self { alpha: 0.5, beta: 0.5, delta0: 1.0, max_halvings: 100, armijo_tol: 0.0 }
    }
}

impl LineSearchConfig {
    pub fn new(alpha: f64, beta: f64, delta0: f64) -> Result<Self> {
        let cfg = Self { alpha, beta, delta0, ..Self::default() };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_max_halvings(mut self, max_halvings: usize) -> Self {
        self.max_halvings = max_halvings;
        self
    }

    pub fn with_armijo_tol(mut self, tol: f64) -> Self {
        self.armijo_tol = tol;
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_delta0(mut self, delta0: f64) -> Self {
        self.delta0 = delta0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(invalid(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(invalid(format!("beta must lie in (0, 1), got {}", self.beta)));
        }
        if !(self.delta0 > 0.0 && self.delta0.is_finite()) {
            return Err(invalid(format!("delta0 must be positive, got {}", self.delta0)));
        }
        if self.max_halvings == 0 {
            return Err(invalid("max_halvings must be at least 1"));
        }
        if !(self.armijo_tol >= 0.0 && self.armijo_tol.is_finite()) {
            return Err(invalid("armijo_tol must be a nonnegative finite number"));
        }
        Ok(())
    }
}

/// When to stop iterating: convergence on `δₙ·‖∇f(zₙ)‖ < eps`, an
/// iteration budget, and a radius beyond which the run counts as diverged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StopRule {
    pub eps: f64,
    pub max_iters: usize,
    pub divergence_radius: f64,
}

impl Default for StopRule {
    fn default() -> Self {
        Self { eps: 1e-10, max_iters: 10_000, divergence_radius: 1e12 }
    }
}

impl StopRule {
    pub fn new(eps: f64, max_iters: usize) -> Result<Self> {
        let rule = Self { eps, max_iters, ..Self::default() };
        rule.validate()?;
        Ok(rule)
    }

    pub fn with_divergence_radius(mut self, radius: f64) -> Self {
        self.divergence_radius = radius;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0) {
            return Err(invalid("stop eps must be positive"));
        }
        if self.max_iters == 0 {
            return Err(invalid("max_iters must be at least 1"));
        }
        if !(self.divergence_radius > 0.0) {
            return Err(invalid("divergence_radius must be positive"));
        }
        Ok(())
    }
}
