//! Critical-point classification, projective distance, step-size
//! stabilization, saddle-escape Monte Carlo and end-of-run summaries.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{LineSearchConfig, StopRule};
use crate::error::{check_dim, invalid, Error, Result};
use crate::field::{default_hessian_step, fd_hessian, Point, ScalarField};
use crate::linalg::jacobi_eigenvalues;
use crate::optimizers::run_backtracking_gd;
use crate::trajectory::{Termination, Trajectory};

pub const DEFAULT_GRAD_TOL: f64 = 1e-6;
pub const DEFAULT_EIG_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CriticalKind {
    Minimum,
    /// At least one negative Hessian eigenvalue (includes local maxima).
    GeneralizedSaddle,
    Degenerate,
    NotCritical,
}

impl fmt::Display for CriticalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CriticalKind::Minimum => "Minimum",
            CriticalKind::GeneralizedSaddle => "GeneralizedSaddle",
            CriticalKind::Degenerate => "Degenerate",
            CriticalKind::NotCritical => "NotCritical",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalPointClass {
    pub kind: CriticalKind,
    /// Hessian eigenvalues in ascending order; empty for `NotCritical`.
    pub eigenvalues: Vec<f64>,
    pub grad_norm: f64,
}

/// Classifies `x` by ‖∇f(x)‖ and, when that is at most `grad_tol`, by the
/// eigenvalues of the finite-difference Hessian. Eigenvalues within
/// `eig_tol·max(1, max|λ|)` of zero count as zero.
pub fn classify_critical_point(f: &ScalarField, x: &Point, grad_tol: f64, eig_tol: f64) -> Result<CriticalPointClass> {
    if !(grad_tol > 0.0 && eig_tol > 0.0) {
        return Err(invalid("classification tolerances must be positive"));
    }
    let grad_norm = f.gradient(x)?.norm();
    if grad_norm > grad_tol {
        return Ok(CriticalPointClass { kind: CriticalKind::NotCritical, eigenvalues: Vec::new(), grad_norm });
    }
    let hessian = fd_hessian(f, x, default_hessian_step(x))?;
    let eigenvalues = jacobi_eigenvalues(&hessian);
    let scale = eigenvalues.iter().fold(1.0f64, |m, l| m.max(l.abs()));
    let tol = eig_tol * scale;
    let kind = if eigenvalues.iter().any(|&l| l < -tol) {
        CriticalKind::GeneralizedSaddle
    } else if eigenvalues.iter().all(|&l| l > tol) {
        CriticalKind::Minimum
    } else {
        CriticalKind::Degenerate
    };
    Ok(CriticalPointClass { kind, eigenvalues, grad_norm })
}

pub fn classify(f: &ScalarField, x: &Point) -> Result<CriticalPointClass> {
    classify_critical_point(f, x, DEFAULT_GRAD_TOL, DEFAULT_EIG_TOL)
}

/// Lipschitz constant of [`projective_dist`] with respect to the Euclidean norm.
pub const PROJECTIVE_LIPSCHITZ: f64 = 1.0;

/// Angle between the lines through (1, x) and (1, y):
/// arccos(|1 + ⟨x,y⟩| / (√(1+‖x‖²)·√(1+‖y‖²))), in [0, π/2].
///
/// Evaluated as 2·atan2(‖û − v̂‖, ‖û + v̂‖) on the unit lifts, which is exact at
/// x = y where the arccos form loses half the significant digits.
pub fn projective_dist(x: &Point, y: &Point) -> Result<f64> {
    check_dim(x.dim(), y.dim())?;
    let lift = |p: &Point| {
        let n = (1.0 + p.dot(p)).sqrt();
        std::iter::once(1.0 / n).chain(p.coords().iter().map(move |c| c / n)).collect::<Vec<_>>()
    };
    let u = lift(x);
    let mut v = lift(y);
    if crate::field::dot(&u, &v) < 0.0 {
        v.iter_mut().for_each(|c| *c = -*c);
    }
    let (mut diff, mut sum) = (0.0, 0.0);
    for (a, b) in u.iter().zip(&v) {
        diff += (a - b) * (a - b);
        sum += (a + b) * (a + b);
    }
    Ok(2.0 * diff.sqrt().atan2(sum.sqrt()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilizationReport {
    /// Distinct committed step sizes, in order of first appearance.
    pub distinct_sigmas: Vec<f64>,
    /// Length of the final run of identical step sizes.
    pub tail_constant_length: usize,
    pub stabilized: bool,
    /// Tail length that had to be constant: max(50, ⌈10% of the steps⌉).
    pub window: usize,
    /// Set when the run has fewer committed steps than `window`.
    pub short_run: bool,
}

/// Whether the committed step sizes end in a constant tail of length
/// max(50, ⌈10%⌉ of the steps). Runs shorter than that window count as
/// stabilized when all their steps agree; runs without a committed step do not.
pub fn detect_stabilization(traj: &Trajectory) -> StabilizationReport {
    let steps = traj.committed_steps();
    let window = 50usize.max(steps.len().div_ceil(10));

    let mut distinct_sigmas: Vec<f64> = Vec::new();
    for &s in &steps {
        if !distinct_sigmas.iter().any(|d| d.to_bits() == s.to_bits()) {
            distinct_sigmas.push(s);
        }
    }
    let tail_constant_length = match steps.last() {
        Some(last) => steps.iter().rev().take_while(|s| s.to_bits() == last.to_bits()).count(),
        None => 0,
    };
    let short_run = steps.len() < window;
    let stabilized = if steps.is_empty() {
        false
    } else if short_run {
        tail_constant_length == steps.len()
    } else {
        tail_constant_length >= window
    };
    StabilizationReport { distinct_sigmas, tail_constant_length, stabilized, window, short_run }
}

/// Monte Carlo settings for [`saddle_basin_fraction`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SaddleMcConfig {
    /// Radius of the ball B(saddle, eps) the starts are drawn from.
    pub eps: f64,
    pub n_samples: usize,
    pub seed: u64,
    /// Records with index below this are ignored by the escape test.
    pub burn_in: usize,
    /// A run is captured when it comes within `exclusion_ratio·eps` of the saddle.
    pub exclusion_ratio: f64,
}

impl Default for SaddleMcConfig {
    fn default() -> Self {
        Self { eps: 0.1, n_samples: 1000, seed: 1, burn_in: 10, exclusion_ratio: 0.01 }
    }
}

impl SaddleMcConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(invalid("sampling radius eps must be positive"));
        }
        if self.n_samples == 0 {
            return Err(invalid("n_samples must be at least 1"));
        }
        if !(self.exclusion_ratio > 0.0 && self.exclusion_ratio.is_finite()) {
            return Err(invalid("exclusion_ratio must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaddleSample {
    pub index: usize,
    pub start: Point,
    pub escaped: bool,
    /// Smallest distance to the saddle among the records the escape test looks at.
    pub min_distance: f64,
    pub termination: Termination,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaddleMcReport {
    pub fraction: f64,
    pub samples: Vec<SaddleSample>,
}

/// Uniform point of the ball B(center, radius), from a seeded generator.
pub fn sample_ball<R: Rng>(center: &Point, radius: f64, rng: &mut R) -> Point {
    let m = center.dim();
    let dir = loop {
        let g: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
        let n = crate::field::norm(&g);
        if n > 0.0 {
            break Point::from_raw(g.into_iter().map(|c| c / n).collect());
        }
    };
    let u: f64 = rng.random();
    let r = radius * u.powf(1.0 / m as f64);
    center.combine(1.0, r, &dir)
}

fn run_sample(
    f: &ScalarField,
    saddle: &Point,
    mc: &SaddleMcConfig,
    cfg: &LineSearchConfig,
    stop: &StopRule,
    index: usize,
) -> Result<SaddleSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(mc.seed.wrapping_add(index as u64));
    let start = sample_ball(saddle, mc.eps, &mut rng);
    let traj = run_backtracking_gd(f, &start, cfg, stop)?;
    let last = traj.len() - 1;
    let watched = traj
        .records
        .iter()
        .filter(|r| r.index >= mc.burn_in || (r.index == last && traj.termination == Termination::Converged));
    let min_distance = watched.map(|r| r.point.distance(saddle)).fold(f64::INFINITY, f64::min);
    Ok(SaddleSample {
        index,
        start,
        escaped: !(min_distance < mc.exclusion_ratio * mc.eps),
        min_distance,
        termination: traj.termination,
        iterations: traj.iterations(),
    })
}

/// Runs Backtracking GD from `n_samples` uniform starts in B(saddle, eps) and
/// reports the fraction that never returns to within `exclusion_ratio·eps`
/// of the saddle after the burn-in. Sample i uses seed `seed + i`.
pub fn saddle_basin_report(
    f: &ScalarField,
    saddle: &Point,
    mc: &SaddleMcConfig,
    cfg: &LineSearchConfig,
    stop: &StopRule,
) -> Result<SaddleMcReport> {
    mc.validate()?;
    cfg.validate()?;
    stop.validate()?;
    check_dim(f.dim(), saddle.dim())?;
    let class = classify(f, saddle)?;
    if class.kind != CriticalKind::GeneralizedSaddle {
        return Err(Error::NotASaddle(class.kind.to_string()));
    }
    let samples = (0..mc.n_samples)
        .into_par_iter()
        .map(|i| run_sample(f, saddle, mc, cfg, stop, i))
        .collect::<Result<Vec<_>>>()?;
    let escaped = samples.iter().filter(|s| s.escaped).count();
    Ok(SaddleMcReport { fraction: escaped as f64 / mc.n_samples as f64, samples })
}

pub fn saddle_basin_fraction(
    f: &ScalarField,
    saddle: &Point,
    mc: &SaddleMcConfig,
    cfg: &LineSearchConfig,
    stop: &StopRule,
) -> Result<f64> {
    Ok(saddle_basin_report(f, saddle, mc, cfg, stop)?.fraction)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub termination: Termination,
    pub iterations: usize,
    /// ‖z_last − z_prev‖.
    pub last_step_norm: f64,
    pub last_grad_norm: f64,
    pub limit_estimate: Point,
    pub limit_class: CriticalPointClass,
}

pub fn convergence_report(traj: &Trajectory, f: &ScalarField) -> Result<ConvergenceReport> {
    if traj.is_empty() {
        return Err(invalid("trajectory has no records"));
    }
    let limit = traj.final_point().clone();
    let limit_class = classify(f, &limit)?;
    Ok(ConvergenceReport {
        termination: traj.termination,
        iterations: traj.iterations(),
        last_step_norm: traj.last_step_norm(),
        last_grad_norm: f.gradient(&limit)?.norm(),
        limit_estimate: limit,
        limit_class,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::{canonical_saddle, cubic, holder, quadratic_form};
    use crate::linalg::SymMatrix;
    use crate::optimizers::run_standard_gd;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn p(v: &[f64]) -> Point {
        Point::new(v.to_vec()).unwrap()
    }

    fn arccos_form(x: &Point, y: &Point) -> f64 {
        let num = (1.0 + x.dot(y)).abs();
        let den = (1.0 + x.dot(x)).sqrt() * (1.0 + y.dot(y)).sqrt();
        (num / den).clamp(0.0, 1.0).acos()
    }

    #[test]
    fn classification_examples() {
        let s = classify(&canonical_saddle().field, &p(&[0.0, 0.0])).unwrap();
        assert_eq!(s.kind, CriticalKind::GeneralizedSaddle);
        assert!((s.eigenvalues[0] + 1.0).abs() < 1e-4 && (s.eigenvalues[1] - 1.0).abs() < 1e-4);

        let half = quadratic_form(&SymMatrix::diag(&[1.0]));
        let m = classify(&half.field, &p(&[0.0])).unwrap();
        assert_eq!(m.kind, CriticalKind::Minimum);

        assert_eq!(classify(&cubic().field, &p(&[0.0])).unwrap().kind, CriticalKind::Degenerate);
        assert_eq!(classify(&cubic().field, &p(&[1.0])).unwrap().kind, CriticalKind::NotCritical);
    }

    #[test]
    fn projective_distance_examples() {
        assert_eq!(projective_dist(&p(&[0.3, -2.0]), &p(&[0.3, -2.0])).unwrap(), 0.0);
        assert!((projective_dist(&p(&[1.0]), &p(&[-1.0])).unwrap() - FRAC_PI_2).abs() < 1e-15);
        assert!((projective_dist(&p(&[0.0]), &p(&[1.0])).unwrap() - FRAC_PI_4).abs() < 1e-15);
        assert!(projective_dist(&p(&[0.0]), &p(&[1.0, 2.0])).is_err());
    }

    #[test]
    fn stabilization_short_and_long_runs() {
        let sq = quadratic_form(&SymMatrix::diag(&[2.0]));
        let t = run_backtracking_gd(&sq.field, &p(&[1.0]), &LineSearchConfig::default(), &StopRule::default()).unwrap();
        let r = detect_stabilization(&t);
        assert!(r.short_run && r.stabilized);

        let h = holder(0.5).unwrap();
        let stop = StopRule::new(1e-300, 500).unwrap();
        let t = run_backtracking_gd(&h.field, &p(&[1.0]), &LineSearchConfig::default(), &stop).unwrap();
        assert!(!detect_stabilization(&t).stabilized);
    }

    #[test]
    fn saddle_precondition() {
        let bowl = quadratic_form(&SymMatrix::diag(&[2.0, 2.0]));
        let err = saddle_basin_fraction(&bowl.field, &p(&[0.0, 0.0]), &SaddleMcConfig::default(), &LineSearchConfig::default(), &StopRule::default())
            .unwrap_err();
        assert!(matches!(err, Error::NotASaddle(_)));
    }

    #[test]
    fn saddle_fraction_is_deterministic() {
        let f = canonical_saddle().field;
        let mc = SaddleMcConfig { n_samples: 50, ..SaddleMcConfig::default() };
        let a = saddle_basin_report(&f, &p(&[0.0, 0.0]), &mc, &LineSearchConfig::default(), &StopRule::default()).unwrap();
        let b = saddle_basin_report(&f, &p(&[0.0, 0.0]), &mc, &LineSearchConfig::default(), &StopRule::default()).unwrap();
        assert_eq!(a, b);
        assert!(a.fraction >= 0.99);
    }

    #[test]
    fn oscillating_run_report() {
        let f = crate::functions::smoothed_abs(0.1).unwrap().field;
        let t = run_standard_gd(&f, &p(&[0.5]), 1.0, &StopRule::new(1e-8, 100).unwrap()).unwrap();
        let r = convergence_report(&t, &f).unwrap();
        assert_eq!(r.last_step_norm, 1.0);
        assert_eq!(r.last_grad_norm, 1.0);
        assert_eq!(r.limit_class.kind, CriticalKind::NotCritical);
    }

    proptest::proptest! {
        #[test]
        fn projective_distance_properties(
            x in proptest::collection::vec(-10.0f64..10.0, 3),
            y in proptest::collection::vec(-10.0f64..10.0, 3),
        ) {
            let (x, y) = (p(&x), p(&y));
            let d = projective_dist(&x, &y).unwrap();
            proptest::prop_assert_eq!(d, projective_dist(&y, &x).unwrap());
            proptest::prop_assert!((0.0..=FRAC_PI_2).contains(&d));
            proptest::prop_assert!((d - arccos_form(&x, &y)).abs() < 1e-7);
            proptest::prop_assert!(d <= PROJECTIVE_LIPSCHITZ * x.distance(&y) * (1.0 + 1e-12));
        }
    }
}
