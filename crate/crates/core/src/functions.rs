//! Test objectives: the Mexican hat, Hölder and smoothed-|x| counterexamples,
//! cubic, quadratic forms, Rosenbrock, and two ways of deriving new objectives.

use std::f64::consts::E;

use crate::diagnostics::CriticalKind;
use crate::error::{check_dim, invalid, Result};
use crate::field::{dot, Point, ScalarField};
use crate::linalg::{jacobi_eigenvalues, SymMatrix};

#[derive(Debug, Clone)]
pub struct NamedObjective {
    pub name: String,
    pub field: ScalarField,
    /// Critical points known in closed form, with their type.
    pub known_critical_points: Vec<(Point, CriticalKind)>,
    pub description: String,
}

impl NamedObjective {
    fn new(name: &str, field: ScalarField, description: &str) -> Self {
        Self {
            name: name.to_string(),
            field,
            known_critical_points: Vec::new(),
            description: description.to_string(),
        }
    }

    pub fn with_critical_point(mut self, point: Point, kind: CriticalKind) -> Self {
        self.known_critical_points.push((point, kind));
        self
    }

    pub fn dim(&self) -> usize {
        self.field.dim()
    }
}

fn pt(coords: &[f64]) -> Point {
    Point::from_raw(coords.to_vec())
}

/// Mexican hat value at Cartesian (x, y). The angular term
/// sin(θ − φ) is expanded as sinθ·cosφ − cosθ·sinφ with sinθ = y/r and
/// cosθ = x/r, so no branch cut of atan2 is ever crossed.
pub fn mexican_hat_value(x: f64, y: f64) -> f64 {
    let r2 = x * x + y * y;
    if r2 >= 1.0 {
        return 0.0;
    }
    let s = 1.0 - r2;
    let phi = 1.0 / s;
    let damp = (-phi).exp();
    if r2 == 0.0 {
        return damp;
    }
    let r = r2.sqrt();
    let r4 = r2 * r2;
    let weight = 4.0 * r4 / (4.0 * r4 + s.powi(4));
    let sin_diff = (y / r) * phi.cos() - (x / r) * phi.sin();
    (1.0 - weight * sin_diff) * damp
}

/// The Mexican hat on ℝ², zero outside the unit disk; gradient by finite differences.
pub fn mexican_hat() -> NamedObjective {
    let field = ScalarField::new(2, |z| mexican_hat_value(z[0], z[1]));
    NamedObjective::new(
        "mexican_hat",
        field,
        "[1 - 4r^4/(4r^4 + (1-r^2)^4) sin(theta - 1/(1-r^2))] exp(-1/(1-r^2)) on the unit disk, 0 outside",
    )
    .with_critical_point(pt(&[0.0, 0.0]), CriticalKind::GeneralizedSaddle)
}

/// f(x) = |x|^{1+γ}: C¹ with a γ-Hölder but not Lipschitz derivative at 0.
pub fn holder(gamma: f64) -> Result<NamedObjective> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(invalid(format!("holder exponent must lie in (0, 1), got {gamma}")));
    }
    let p = 1.0 + gamma;
    let field = ScalarField::new(1, move |x| x[0].abs().powf(p))
        .with_gradient(move |x| {
            let v = x[0];
            if v == 0.0 {
                vec![0.0]
            } else {
                vec![p * v.signum() * v.abs().powf(gamma)]
            }
        });
    Ok(NamedObjective::new("holder", field, "|x|^(1+gamma)")
        .with_critical_point(pt(&[0.0]), CriticalKind::Minimum))
}

/// |x| outside (−ε₀, ε₀), joined inside by the C¹ cap x²/(2ε₀) + ε₀/2.
pub fn smoothed_abs(eps0: f64) -> Result<NamedObjective> {
    if !(eps0 > 0.0 && eps0.is_finite()) {
        return Err(invalid(format!("eps0 must be positive, got {eps0}")));
    }
    let field = ScalarField::new(1, move |x| {
        let v = x[0];
        if v.abs() >= eps0 {
            v.abs()
        } else {
            v * v / (2.0 * eps0) + eps0 / 2.0
        }
    })
    .with_gradient(move |x| {
        let v = x[0];
        vec![if v.abs() >= eps0 { v.signum() } else { v / eps0 }]
    });
    Ok(NamedObjective::new("smoothed_abs", field, "|x| with a quadratic cap on (-eps0, eps0)")
        .with_critical_point(pt(&[0.0]), CriticalKind::Minimum))
}

pub fn cubic() -> NamedObjective {
    let field = ScalarField::new(1, |x| x[0] * x[0] * x[0]).with_gradient(|x| vec![3.0 * x[0] * x[0]]);
    NamedObjective::new("cubic", field, "x^3").with_critical_point(pt(&[0.0]), CriticalKind::Degenerate)
}

/// f(z) = ½ zᵀQz with ∇f = Qz.
pub fn quadratic_form(q: &SymMatrix) -> NamedObjective {
    let n = q.dim();
    let eig = jacobi_eigenvalues(q);
    let scale = eig.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let tol = 1e-12 * scale;
    let kind = if eig.iter().any(|&l| l < -tol) {
        CriticalKind::GeneralizedSaddle
    } else if eig.iter().all(|&l| l > tol) {
        CriticalKind::Minimum
    } else {
        CriticalKind::Degenerate
    };
    let (qv, qg) = (q.clone(), q.clone());
    let field = ScalarField::new(n, move |z| 0.5 * dot(z, &qv.mul_vec(z))).with_gradient(move |z| qg.mul_vec(z));
    NamedObjective::new("quadratic", field, "0.5 z^T Q z").with_critical_point(Point::zeros(n), kind)
}

pub fn rosenbrock() -> NamedObjective {
    let field = ScalarField::new(2, |z| {
        let (x, y) = (z[0], z[1]);
        (1.0 - x).powi(2) + 100.0 * (y - x * x).powi(2)
    })
    .with_gradient(|z| {
        let (x, y) = (z[0], z[1]);
        vec![-2.0 * (1.0 - x) - 400.0 * x * (y - x * x), 200.0 * (y - x * x)]
    });
    NamedObjective::new("rosenbrock", field, "(1-x)^2 + 100(y-x^2)^2")
        .with_critical_point(pt(&[1.0, 1.0]), CriticalKind::Minimum)
}

/// Maps (x, ∇base(x)) to the derived objective's gradient.
type GradientMap = Box<dyn Fn(&[f64], Vec<f64>) -> Vec<f64> + Send + Sync>;

fn derived(base: &NamedObjective, name: String, description: String, value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static, gradient: Option<GradientMap>) -> NamedObjective {
    let mut field = ScalarField::new(base.dim(), value);
    if let (Some(bg), Some(extra)) = (base.field.gradient_fn(), gradient) {
        field = field.with_gradient(move |x| extra(x, bg(x)));
    }
    NamedObjective { name, field, known_critical_points: Vec::new(), description }
}

/// g(x) = f(x) + λ‖x‖², gradient ∇f(x) + 2λx.
pub fn l2_regularize(base: &NamedObjective, lambda: f64) -> Result<NamedObjective> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(invalid(format!("lambda must be positive, got {lambda}")));
    }
    let bv = base.field.value_fn();
    Ok(derived(
        base,
        format!("{}+l2", base.name),
        format!("{} + {lambda}·|x|^2", base.description),
        move |x| bv(x) + lambda * dot(x, x),
        Some(Box::new(move |x, g| g.iter().zip(x).map(|(gi, xi)| gi + 2.0 * lambda * xi).collect())),
    ))
}

/// f(x) = g(x) + ⟨a, x⟩, gradient ∇g(x) + a.
pub fn linear_perturb(base: &NamedObjective, a: &Point) -> Result<NamedObjective> {
    check_dim(base.dim(), a.dim())?;
    let bv = base.field.value_fn();
    let (av, ag) = (a.coords().to_vec(), a.coords().to_vec());
    Ok(derived(
        base,
        format!("{}+linear", base.name),
        format!("{} + <a, x>", base.description),
        move |x| bv(x) + dot(&av, x),
        Some(Box::new(move |_, g| g.iter().zip(&ag).map(|(gi, ai)| gi + ai).collect())),
    ))
}

/// x³ + a·x; for a < 0 its critical points are ±√(−a/3), a minimum and a maximum.
pub fn perturbed_cubic(a: f64) -> Result<NamedObjective> {
    let mut obj = linear_perturb(&cubic(), &Point::new(vec![a])?)?;
    obj.name = "perturbed_cubic".to_string();
    if a < 0.0 {
        let c = (-a / 3.0).sqrt();
        obj = obj
            .with_critical_point(pt(&[c]), CriticalKind::Minimum)
            .with_critical_point(pt(&[-c]), CriticalKind::GeneralizedSaddle);
    }
    Ok(obj)
}

/// The saddle ½(x² − y²), i.e. `quadratic_form(diag(1, −1))`.
pub fn canonical_saddle() -> NamedObjective {
    let mut obj = quadratic_form(&SymMatrix::diag(&[1.0, -1.0]));
    obj.name = "saddle".to_string();
    obj
}

/// Upper bound of |mexican_hat| on the plane.
pub const MEXICAN_HAT_BOUND: f64 = 2.0 / E;
