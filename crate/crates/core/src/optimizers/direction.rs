use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::field::Point;
use crate::trajectory::DirectionCheck;

const CHECK_RTOL: f64 = 1e-12;

/// Constants of the inexact-direction conditions
/// `a1‖∇f‖ ≤ ‖v‖ ≤ a2‖∇f‖` and `⟨∇f, v⟩ ≥ mu‖∇f‖‖v‖`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DirectionBounds {
    pub a1: f64,
    pub a2: f64,
    pub mu: f64,
}

impl Default for DirectionBounds {
    fn default() -> Self {
        Self { a1: 0.5, a2: 2.0, mu: 0.1 }
    }
}

impl DirectionBounds {
    pub fn new(a1: f64, a2: f64, mu: f64) -> Result<Self> {
        let b = Self { a1, a2, mu };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a1 > 0.0 && self.a1 <= 1.0) {
            return Err(invalid(format!("a1 must lie in (0, 1], got {}", self.a1)));
        }
        if !(self.a2 >= 1.0 && self.a2.is_finite()) {
            return Err(invalid(format!("a2 must be at least 1, got {}", self.a2)));
        }
        if !(self.mu > 0.0 && self.mu <= 1.0) {
            return Err(invalid(format!("mu must lie in (0, 1], got {}", self.mu)));
        }
        Ok(())
    }

    /// Evaluates both conditions for the pair (v, g) with a relative slack of 1e-12.
    /// `armijo_ok` is left true; callers overwrite it when they check Armijo.
    pub fn check(&self, index: usize, g: &Point, v: &Point, gamma: f64) -> DirectionCheck {
        let gn = g.norm();
        let vn = v.norm();
        let dot = g.dot(v);
        let sandwich_ok = self.a1 * gn * (1.0 - CHECK_RTOL) <= vn && vn <= self.a2 * gn * (1.0 + CHECK_RTOL);
        let angle_ok = dot >= (self.mu - CHECK_RTOL) * gn * vn;
        let cosine = if gn > 0.0 && vn > 0.0 { dot / (gn * vn) } else { 1.0 };
        DirectionCheck {
            index,
            grad_norm: gn,
            dir_norm: vn,
            cosine,
            sandwich_ok,
            angle_ok,
            armijo_ok: true,
            gamma,
        }
    }
}

/// Seeded generator of directions satisfying [`DirectionBounds`] by construction.
///
/// A draw picks a cosine c ∈ [mu, 1] and a scale s ∈ [a1, a2] uniformly, then
/// returns `v = s·(c·g + ‖g‖·√(1−c²)·w)` for a random unit vector w ⟂ g.
/// With `mu = a1 = a2 = 1` this is exactly `v = g`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct DirectionOracle {
    #[serde(flatten)]
    pub bounds: DirectionBounds,
    pub seed: u64,
}

impl DirectionOracle {
    pub fn new(a1: f64, a2: f64, mu: f64, seed: u64) -> Result<Self> {
        Ok(Self { bounds: DirectionBounds::new(a1, a2, mu)?, seed })
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }

    pub fn draw<R: Rng>(&self, g: &Point, rng: &mut R) -> Point {
        let m = g.dim();
        let gn = g.norm();
        if gn == 0.0 {
            return Point::zeros(m);
        }
        let uniform = |rng: &mut R, lo: f64, hi: f64| if lo < hi { rng.random_range(lo..=hi) } else { lo };
        let s = uniform(rng, self.bounds.a1, self.bounds.a2);
        let c = if m == 1 { 1.0 } else { uniform(rng, self.bounds.mu, 1.0) };
        if c == 1.0 {
            return g.scaled(s);
        }

        let w = loop {
            let raw: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
            let raw = Point::from_raw(raw);
            let along = raw.dot(g) / (gn * gn);
            let perp = raw.combine(1.0, -along, g);
            let pn = perp.norm();
            if pn > 1e-8 * raw.norm() {
                break perp.scaled(1.0 / pn);
            }
        };
        let tangential = s * gn * (1.0 - c * c).sqrt();
        g.combine(s * c, tangential, &w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_oracle_reproduces_the_gradient() {
        let oracle = DirectionOracle::new(1.0, 1.0, 1.0, 9).unwrap();
        let g = Point::new(vec![0.3, -1.7, 2.2]).unwrap();
        assert_eq!(oracle.draw(&g, &mut oracle.rng()), g);
    }

    #[test]
    fn zero_gradient_gives_zero_direction() {
        let oracle = DirectionOracle::new(0.5, 2.0, 0.5, 1).unwrap();
        assert!(oracle.draw(&Point::zeros(2), &mut oracle.rng()).is_zero());
    }

    #[test]
    fn rejects_bad_constants() {
        assert!(DirectionBounds::new(0.0, 2.0, 0.5).is_err());
        assert!(DirectionBounds::new(0.5, 0.9, 0.5).is_err());
        assert!(DirectionBounds::new(0.5, 2.0, 1.5).is_err());
    }

    proptest::proptest! {
        #[test]
        fn draws_satisfy_both_conditions(
            g in proptest::collection::vec(-5.0f64..5.0, 1..6),
            a1 in 0.05f64..1.0,
            extra in 0.0f64..3.0,
            mu in 0.05f64..1.0,
            seed in proptest::prelude::any::<u64>(),
        ) {
            let g = Point::new(g).unwrap();
            proptest::prop_assume!(g.norm() > 1e-6);
            let oracle = DirectionOracle::new(a1, 1.0 + extra, mu, seed).unwrap();
            let mut rng = oracle.rng();
            for i in 0..20 {
                let v = oracle.draw(&g, &mut rng);
                let check = oracle.bounds.check(i, &g, &v, 0.0);
                proptest::prop_assert!(check.sandwich_ok && check.angle_ok, "{check:?}");
            }
        }
    }
}
