//! Points, scalar objectives, finite-difference derivatives and the Armijo predicate.

use std::fmt;
use std::ops::Index;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Error, Result};
use crate::linalg::SymMatrix;

/// A point of ℝᵐ with finite coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Point(Vec<f64>);

impl Point {
    /// Rejects empty or non-finite coordinate lists.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(invalid("a point needs at least one coordinate"));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(invalid("point coordinates must be finite"));
        }
        Ok(Self(coords))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    /// Wraps raw coordinates produced by an iteration; callers check finiteness themselves.
    pub(crate) fn from_raw(coords: Vec<f64>) -> Self {
        Self(coords)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    pub fn dot(&self, other: &Point) -> f64 {
        dot(&self.0, &other.0)
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0.0)
    }

    pub fn distance(&self, other: &Point) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// `self − s·v`, computed coordinate-wise as `x_i − s * v_i`.
    pub fn step(&self, s: f64, v: &Point) -> Point {
        Point(self.0.iter().zip(&v.0).map(|(x, d)| x - s * d).collect())
    }

    /// `a·self + b·other`, coordinate-wise.
    pub fn combine(&self, a: f64, b: f64, other: &Point) -> Point {
        Point(self.0.iter().zip(&other.0).map(|(x, y)| a * x + b * y).collect())
    }

    pub fn scaled(&self, s: f64) -> Point {
        Point(self.0.iter().map(|x| s * x).collect())
    }

    pub fn sub(&self, other: &Point) -> Point {
        Point(self.0.iter().zip(&other.0).map(|(x, y)| x - y).collect())
    }
}

impl TryFrom<Vec<f64>> for Point {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Point::new(v)
    }
}

impl From<Point> for Vec<f64> {
    fn from(p: Point) -> Self {
        p.0
    }
}

impl Index<usize> for Point {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

type ValueFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type GradientFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;

/// A deterministic objective ℝᵐ → ℝ with an optional analytic gradient.
///
/// Without an analytic gradient, [`ScalarField::gradient`] falls back to
/// central differences with step [`default_fd_step`].
#[derive(Clone)]
pub struct ScalarField {
    dim: usize,
    value: Arc<ValueFn>,
    gradient: Option<Arc<GradientFn>>,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField")
            .field("dim", &self.dim)
            .field("analytic_gradient", &self.gradient.is_some())
            .finish()
    }
}

impl ScalarField {
    pub fn new(dim: usize, value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        assert!(dim >= 1, "objective dimension must be positive");
        Self { dim, value: Arc::new(value), gradient: None }
    }

    pub fn with_gradient(
        mut self,
        gradient: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        self.gradient = Some(Arc::new(gradient));
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn has_analytic_gradient(&self) -> bool {
        self.gradient.is_some()
    }

    pub fn value(&self, x: &Point) -> Result<f64> {
        check_dim(self.dim, x.dim())?;
        self.raw_value(x.coords())
    }

    pub(crate) fn raw_value(&self, x: &[f64]) -> Result<f64> {
        let v = (self.value)(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFiniteEvaluation { context: "objective value" })
        }
    }

    /// Analytic gradient when available, otherwise central differences.
    pub fn gradient(&self, x: &Point) -> Result<Point> {
        check_dim(self.dim, x.dim())?;
        match &self.gradient {
            Some(g) => {
                let out = g(x.coords());
                check_dim(self.dim, out.len())?;
                if out.iter().all(|c| c.is_finite()) {
                    Ok(Point(out))
                } else {
                    Err(Error::NonFiniteEvaluation { context: "analytic gradient" })
                }
            }
            None => fd_gradient(self, x, default_fd_step(x)),
        }
    }

    /// The same objective with its analytic gradient dropped.
    pub fn without_gradient(&self) -> Self {
        Self { dim: self.dim, value: Arc::clone(&self.value), gradient: None }
    }

    pub(crate) fn value_fn(&self) -> Arc<ValueFn> {
        Arc::clone(&self.value)
    }

    pub(crate) fn gradient_fn(&self) -> Option<Arc<GradientFn>> {
        self.gradient.clone()
    }
}

/// Default central-difference step: `max(1e-6, 1e-6·‖x‖)`.
pub fn default_fd_step(x: &Point) -> f64 {
    1e-6_f64.max(1e-6 * x.norm())
}

/// Default step for second differences: `max(1e-4, 1e-4·‖x‖)`.
pub fn default_hessian_step(x: &Point) -> f64 {
    1e-4_f64.max(1e-4 * x.norm())
}

/// Central-difference gradient, component i = (f(x + h·eᵢ) − f(x − h·eᵢ)) / (2h).
pub fn fd_gradient(f: &ScalarField, x: &Point, h: f64) -> Result<Point> {
    check_dim(f.dim(), x.dim())?;
    if !(h > 0.0 && h.is_finite()) {
        return Err(invalid("finite-difference step must be positive"));
    }
    let mut probe = x.coords().to_vec();
    let mut out = Vec::with_capacity(x.dim());
    for i in 0..x.dim() {
        let xi = probe[i];
        probe[i] = xi + h;
        let plus = f.raw_value(&probe)?;
        probe[i] = xi - h;
        let minus = f.raw_value(&probe)?;
        probe[i] = xi;
        out.push((plus - minus) / (2.0 * h));
    }
    Ok(Point(out))
}

/// Symmetric matrix of second central differences of `f` at `x`.
pub fn fd_hessian(f: &ScalarField, x: &Point, h: f64) -> Result<SymMatrix> {
    check_dim(f.dim(), x.dim())?;
    if !(h > 0.0 && h.is_finite()) {
        return Err(invalid("finite-difference step must be positive"));
    }
    let n = x.dim();
    let mut p = x.coords().to_vec();
    let f0 = f.raw_value(&p)?;
    let mut raw = vec![0.0; n * n];
    let h2 = h * h;

    for i in 0..n {
        let xi = p[i];
        p[i] = xi + h;
        let fp = f.raw_value(&p)?;
        p[i] = xi - h;
        let fm = f.raw_value(&p)?;
        p[i] = xi;
        raw[i * n + i] = (fp - 2.0 * f0 + fm) / h2;

        for j in (i + 1)..n {
            let xj = p[j];
            let mut corner = |si: f64, sj: f64| -> Result<f64> {
                p[i] = xi + si * h;
                p[j] = xj + sj * h;
                let v = f.raw_value(&p);
                p[i] = xi;
                p[j] = xj;
                v
            };
            let fpp = corner(1.0, 1.0)?;
            let fpm = corner(1.0, -1.0)?;
            let fmp = corner(-1.0, 1.0)?;
            let fmm = corner(-1.0, -1.0)?;
            let hij = (fpp - fpm - fmp + fmm) / (4.0 * h2);
            raw[i * n + j] = hij;
            raw[j * n + i] = hij;
        }
    }
    Ok(SymMatrix::symmetrized(n, raw))
}

/// Armijo's sufficient-decrease test for the step `y = x − σ·v`:
/// `f(x − σv) − f(x) ≤ −α·σ·⟨∇f(x), v⟩`.
pub fn armijo_holds(f: &ScalarField, x: &Point, v: &Point, sigma: f64, alpha: f64) -> Result<bool> {
    armijo_holds_within(f, x, v, sigma, alpha, 0.0)
}

/// [`armijo_holds`] with an absolute slack `tol` added to the right-hand side.
pub fn armijo_holds_within(
    f: &ScalarField,
    x: &Point,
    v: &Point,
    sigma: f64,
    alpha: f64,
    tol: f64,
) -> Result<bool> {
    Ok(armijo_gap(f, x, v, sigma, alpha)? <= tol)
}

/// `f(x − σv) − f(x) + α·σ·⟨∇f(x), v⟩`; Armijo holds exactly when this is ≤ 0.
pub fn armijo_gap(f: &ScalarField, x: &Point, v: &Point, sigma: f64, alpha: f64) -> Result<f64> {
    check_dim(f.dim(), x.dim())?;
    check_dim(x.dim(), v.dim())?;
    if !(sigma > 0.0) {
        return Err(invalid("sigma must be positive"));
    }
    let g = f.gradient(x)?;
    let fx = f.value(x)?;
    let fy = f.value(&x.step(sigma, v))?;
    Ok(fy - fx + alpha * sigma * g.dot(v))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> ScalarField {
        ScalarField::new(1, |x| x[0] * x[0]).with_gradient(|x| vec![2.0 * x[0]])
    }

    fn p(v: &[f64]) -> Point {
        Point::new(v.to_vec()).unwrap()
    }

    #[test]
    fn point_rejects_non_finite_and_empty() {
        assert!(Point::new(vec![]).is_err());
        assert!(Point::new(vec![1.0, f64::NAN]).is_err());
        assert!(Point::new(vec![f64::INFINITY]).is_err());
        assert!(serde_json::from_str::<Point>("[]").is_err());
        assert_eq!(serde_json::from_str::<Point>("[1.5,2]").unwrap(), p(&[1.5, 2.0]));
    }

    #[test]
    fn fd_gradient_of_constant_is_zero() {
        let f = ScalarField::new(3, |_| 4.2);
        let g = fd_gradient(&f, &p(&[1.0, -2.0, 0.5]), 1e-6).unwrap();
        assert!(g.is_zero());
    }

    #[test]
    fn fd_gradient_matches_analytic_derivatives() {
        let f = ScalarField::new(1, |x| x[0] * x[0]);
        let g = fd_gradient(&f, &p(&[3.0]), 1e-6).unwrap();
        assert!((g[0] - 6.0).abs() < 1e-6);

        let saddle = ScalarField::new(2, |x| x[0] * x[0] - x[1] * x[1]);
        let g = fd_gradient(&saddle, &p(&[1.0, 2.0]), 1e-6).unwrap();
        assert!((g[0] - 2.0).abs() < 1e-6);
        assert!((g[1] + 4.0).abs() < 1e-6);
    }

    #[test]
    fn fd_gradient_rejects_bad_input() {
        let f = ScalarField::new(1, |x| x[0].ln());
        assert!(matches!(
            fd_gradient(&f, &p(&[0.0]), 1e-6),
            Err(Error::NonFiniteEvaluation { .. })
        ));
        assert!(fd_gradient(&f, &p(&[1.0]), 0.0).is_err());
        assert!(matches!(
            fd_gradient(&f, &p(&[1.0, 2.0]), 1e-6),
            Err(Error::DimensionMismatch { expected: 1, got: 2 })
        ));
    }

    #[test]
    fn fd_hessian_examples() {
        let half_sq = ScalarField::new(1, |x| 0.5 * x[0] * x[0]);
        let h = fd_hessian(&half_sq, &p(&[0.0]), 1e-4).unwrap();
        assert!((h.get(0, 0) - 1.0).abs() < 1e-4);

        let saddle = ScalarField::new(2, |x| x[0] * x[0] - x[1] * x[1]);
        let h = fd_hessian(&saddle, &p(&[0.0, 0.0]), 1e-4).unwrap();
        assert!((h.get(0, 0) - 2.0).abs() < 1e-4);
        assert!((h.get(1, 1) + 2.0).abs() < 1e-4);
        assert!(h.get(0, 1).abs() < 1e-4);

        let linear = ScalarField::new(3, |x| 2.0 * x[0] - 3.0 * x[1] + 0.5 * x[2]);
        let h = fd_hessian(&linear, &p(&[1.0, 2.0, 3.0]), 1e-4).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!(h.get(i, j).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn fd_hessian_mixed_partial() {
        // f = x·y² has ∂²f/∂x∂y = 2y.
        let f = ScalarField::new(2, |x| x[0] * x[1] * x[1]);
        let h = fd_hessian(&f, &p(&[0.7, 1.5]), 1e-4).unwrap();
        assert!((h.get(0, 1) - 3.0).abs() < 1e-4);
        assert!((h.get(1, 1) - 1.4).abs() < 1e-4);
        assert!(h.is_symmetric());
    }

    #[test]
    fn armijo_at_critical_point() {
        let f = square();
        assert!(armijo_holds(&f, &p(&[0.0]), &p(&[0.0]), 1.0, 0.5).unwrap());
    }

    #[test]
    fn armijo_on_square_switches_at_one_half() {
        // (1−2σ)² − 1 ≤ −2σ ⇔ σ ≤ 1/2 at x = 1, v = f'(1) = 2, α = 1/2.
        let f = square();
        let x = p(&[1.0]);
        let v = p(&[2.0]);
        assert!(!armijo_holds(&f, &x, &v, 1.0, 0.5).unwrap());
        assert!(armijo_holds(&f, &x, &v, 0.5, 0.5).unwrap());
    }

    #[test]
    fn armijo_on_cubic_is_tight_at_the_quadratic_root() {
        // 6t² − 6t + 1 = 0 gives equality in Armijo for x³ at x = 1 with α = 1/2.
        let f = ScalarField::new(1, |x| x[0].powi(3)).with_gradient(|x| vec![3.0 * x[0] * x[0]]);
        let sigma = (3.0 + 3f64.sqrt()) / 6.0;
        let gap = armijo_gap(&f, &p(&[1.0]), &p(&[3.0]), sigma, 0.5).unwrap();
        assert!(gap.abs() < 1e-12, "gap = {gap}");
        assert!(armijo_holds_within(&f, &p(&[1.0]), &p(&[3.0]), sigma, 0.5, 1e-12).unwrap());
    }

    proptest::proptest! {
        #[test]
        fn armijo_is_monotone_in_alpha(
            x in -3.0f64..3.0,
            sigma in 1e-3f64..2.0,
            alpha in 0.01f64..0.99,
            shrink in 0.01f64..1.0,
        ) {
            let f = ScalarField::new(1, |x| x[0].powi(4) - 2.0 * x[0] * x[0] + 0.3 * x[0])
                .with_gradient(|x| vec![4.0 * x[0].powi(3) - 4.0 * x[0] + 0.3]);
            let xp = p(&[x]);
            let v = f.gradient(&xp).unwrap();
            if armijo_holds(&f, &xp, &v, sigma, alpha).unwrap() {
                proptest::prop_assert!(armijo_holds(&f, &xp, &v, sigma, alpha * shrink).unwrap());
            }
        }

        #[test]
        fn fd_hessian_is_exactly_symmetric(
            a in -2.0f64..2.0,
            b in -2.0f64..2.0,
            c in -2.0f64..2.0,
        ) {
            let f = ScalarField::new(3, |x| (x[0] * x[1]).sin() + x[2].exp() * x[0] + x[1].powi(3));
            let h = fd_hessian(&f, &p(&[a, b, c]), 1e-4).unwrap();
            proptest::prop_assert!(h.is_symmetric());
        }
    }
}
