use crate::config::{LineSearchConfig, StopRule};
use crate::error::{check_dim, invalid, Error, Result};
use crate::field::{Point, ScalarField};
use crate::linesearch::{search, Growth, Probe};
use crate::trajectory::Trajectory;

use super::{drive, finite_value, DirectionOracle, Plan, Schedule, StepPlan};

fn check_rate(delta: f64) -> Result<()> {
    if delta > 0.0 && delta.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("learning rate must be positive, got {delta}")))
    }
}

/// Standard GD with a fixed learning rate: zₙ₊₁ = zₙ − δ∇f(zₙ).
pub fn run_standard_gd(f: &ScalarField, z0: &Point, delta: f64, stop: &StopRule) -> Result<Trajectory> {
    check_rate(delta)?;
    drive(|_| f, z0, stop, |_, _, it| {
        Ok(Plan::Step(StepPlan {
            next: it.z.step(delta, it.g),
            next_value: None,
            step_size: delta,
            backtracks: 0,
            evals: 0,
            converged: delta * it.grad_norm < stop.eps,
        }))
    })
}

/// GD with a prescribed learning-rate sequence. When `verify_armijo = Some(α)`,
/// every committed step is checked against f(zₙ₊₁) − f(zₙ) ≤ −α·δₙ‖∇f(zₙ)‖²
/// and failing step indices are collected in `armijo_violations`.
pub fn run_scheduled_gd(
    f: &ScalarField,
    z0: &Point,
    schedule: &Schedule,
    stop: &StopRule,
    verify_armijo: Option<f64>,
) -> Result<Trajectory> {
    schedule.validate()?;
    if let Some(alpha) = verify_armijo {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(invalid(format!("Armijo alpha must lie in (0, 1), got {alpha}")));
        }
    }
    drive(|_| f, z0, stop, |rec, f, it| {
        let Some(delta) = schedule.rate(it.n) else {
            return Ok(Plan::Exhausted);
        };
        let next = it.z.step(delta, it.g);
        let converged = delta * it.grad_norm < stop.eps;
        let mut plan = StepPlan {
            next,
            next_value: None,
            step_size: delta,
            backtracks: 0,
            evals: 0,
            converged,
        };
        let committed = !converged && it.n < stop.max_iters;
        if let (Some(alpha), true) = (verify_armijo, committed) {
            let fy = finite_value(f, &plan.next).unwrap_or(f64::INFINITY);
            plan.evals = 1;
            plan.next_value = Some(fy);
            if !(fy - it.fx <= -alpha * delta * it.grad_norm * it.grad_norm) {
                rec.armijo_violations.push(it.n);
            }
        }
        Ok(Plan::Step(plan))
    })
}

fn gradient_step(it: &super::Iterate<'_>, f: &ScalarField, start: f64, cfg: &LineSearchConfig, growth: Growth, eps: f64) -> Result<(StepPlan, f64)> {
    let probe = Probe { f, x: it.z, v: it.g, fx: it.fx, slope: it.grad_norm * it.grad_norm };
    let r = search(&probe, start, cfg, growth)?;
    let plan = StepPlan {
        next: it.z.step(r.sigma, it.g),
        next_value: Some(r.value),
        step_size: r.sigma,
        backtracks: r.shrinks,
        evals: r.trials,
        converged: r.sigma * it.grad_norm < eps,
    };
    Ok((plan, r.sigma))
}

/// Backtracking GD (Armijo's rule): δₙ is the largest βᵏδ₀ satisfying Armijo at zₙ.
pub fn run_backtracking_gd(
    f: &ScalarField,
    z0: &Point,
    cfg: &LineSearchConfig,
    stop: &StopRule,
) -> Result<Trajectory> {
    cfg.validate()?;
    drive(|_| f, z0, stop, |_, f, it| {
        let (plan, _) = gradient_step(&it, f, cfg.delta0, cfg, Growth::None, stop.eps)?;
        Ok(Plan::Step(plan))
    })
}

/// Two-way Backtracking GD: the search at step n starts from δₙ₋₁ and may grow back up to δ₀.
pub fn run_two_way_gd(
    f: &ScalarField,
    z0: &Point,
    cfg: &LineSearchConfig,
    stop: &StopRule,
) -> Result<Trajectory> {
    cfg.validate()?;
    let mut prev = cfg.delta0;
    drive(|_| f, z0, stop, |_, f, it| {
        let (plan, sigma) = gradient_step(&it, f, prev, cfg, Growth::Capped(cfg.delta0), stop.eps)?;
        prev = sigma;
        Ok(Plan::Step(plan))
    })
}

/// Inexact Backtracking GD: step along an oracle direction vₙ, backtracking from δ₀.
/// Each (vₙ, ∇f(zₙ)) pair is checked and recorded in `direction_checks`.
pub fn run_inexact_backtracking_gd(
    f: &ScalarField,
    z0: &Point,
    oracle: &DirectionOracle,
    cfg: &LineSearchConfig,
    stop: &StopRule,
) -> Result<Trajectory> {
    cfg.validate()?;
    oracle.bounds.validate()?;
    let mut rng = oracle.rng();
    drive(|_| f, z0, stop, |rec, f, it| {
        let v = oracle.draw(it.g, &mut rng);
        let slope = it.g.dot(&v);
        if slope < 0.0 {
            return Err(Error::NonDescentDirection { slope });
        }
        let check = oracle.bounds.check(it.n, it.g, &v, 0.0);
        rec.direction_checks.push(check);
        let r = search(&Probe { f, x: it.z, v: &v, fx: it.fx, slope }, cfg.delta0, cfg, Growth::None)?;
        Ok(Plan::Step(StepPlan {
            next: it.z.step(r.sigma, &v),
            next_value: Some(r.value),
            step_size: r.sigma,
            backtracks: r.shrinks,
            evals: r.trials,
            converged: r.sigma * it.grad_norm < stop.eps,
        }))
    })
}

/// Backtracking GD on a sequence of objectives: step n uses `fields[n]`,
/// with the last field repeated once the list is exhausted.
pub fn run_objective_sequence(
    fields: &[ScalarField],
    z0: &Point,
    cfg: &LineSearchConfig,
    stop: &StopRule,
) -> Result<Trajectory> {
    cfg.validate()?;
    let Some(first) = fields.first() else {
        return Err(invalid("objective sequence must be nonempty"));
    };
    for f in fields {
        check_dim(first.dim(), f.dim())?;
    }
    let at = |n: usize| &fields[n.min(fields.len() - 1)];
    drive(at, z0, stop, |_, f, it| {
        let (plan, _) = gradient_step(&it, f, cfg.delta0, cfg, Growth::None, stop.eps)?;
        Ok(Plan::Step(plan))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::Termination;

    fn p(v: &[f64]) -> Point {
        Point::new(v.to_vec()).unwrap()
    }

    fn half_square() -> ScalarField {
        ScalarField::new(1, |x| 0.5 * x[0] * x[0]).with_gradient(|x| vec![x[0]])
    }

    fn square() -> ScalarField {
        ScalarField::new(1, |x| x[0] * x[0]).with_gradient(|x| vec![2.0 * x[0]])
    }

    fn bowl() -> ScalarField {
        ScalarField::new(2, |x| x[0] * x[0] + x[1] * x[1]).with_gradient(|x| vec![2.0 * x[0], 2.0 * x[1]])
    }

    fn cfg() -> LineSearchConfig {
        LineSearchConfig::default()
    }

    #[test]
    fn standard_gd_hits_the_minimum_of_half_square() {
        let t = run_standard_gd(&half_square(), &p(&[1.0]), 1.0, &StopRule::default()).unwrap();
        assert_eq!(t.termination, Termination::Converged);
        assert_eq!(t.len(), 2);
        assert_eq!(t.records[1].point[0], 0.0);
    }

    #[test]
    fn critical_start_converges_at_iteration_zero() {
        let t = run_standard_gd(&half_square(), &p(&[0.0]), 0.3, &StopRule::default()).unwrap();
        assert_eq!((t.len(), t.termination), (1, Termination::Converged));
        let t = run_backtracking_gd(&square(), &p(&[0.0]), &cfg(), &StopRule::default()).unwrap();
        assert_eq!((t.len(), t.termination), (1, Termination::Converged));
    }

    #[test]
    fn max_iters_yields_one_more_record() {
        let stop = StopRule::new(1e-300, 7).unwrap();
        let t = run_standard_gd(&half_square(), &p(&[1.0]), 0.1, &stop).unwrap();
        assert_eq!((t.len(), t.termination), (8, Termination::MaxIters));
    }

    #[test]
    fn divergence_is_detected() {
        let stop = StopRule::default().with_divergence_radius(1e3);
        let t = run_standard_gd(&half_square(), &p(&[1.0]), 3.0, &stop).unwrap();
        assert_eq!(t.termination, Termination::Diverged);
        assert!(t.final_point().norm() > 1e3);
        assert!(!t.non_finite);
    }

    #[test]
    fn non_finite_values_end_the_run_with_a_flag() {
        let f = ScalarField::new(1, |x| if x[0] < 0.0 { f64::NAN } else { x[0] * x[0] })
            .with_gradient(|x| vec![2.0 * x[0]]);
        let t = run_standard_gd(&f, &p(&[1.0]), 1.0, &StopRule::default()).unwrap();
        assert_eq!(t.termination, Termination::Diverged);
        assert!(t.non_finite);
        assert_eq!(t.len(), 1);
    }

    #[test]
    fn backtracking_square_converges_in_one_step() {
        let t = run_backtracking_gd(&square(), &p(&[1.0]), &cfg(), &StopRule::default()).unwrap();
        assert_eq!(t.termination, Termination::Converged);
        assert_eq!(t.len(), 2);
        assert_eq!(t.records[0].step_size, 0.5);
        assert_eq!(t.records[1].point[0], 0.0);
        // f(z0) plus two Armijo trials at z0 and one at z1.
        assert_eq!(t.total_func_evals(), 4);
    }

    #[test]
    fn two_way_equals_backtracking_on_square() {
        let a = run_backtracking_gd(&square(), &p(&[1.0]), &cfg(), &StopRule::default()).unwrap();
        let b = run_two_way_gd(&square(), &p(&[1.0]), &cfg(), &StopRule::default()).unwrap();
        assert_eq!(a.points().collect::<Vec<_>>(), b.points().collect::<Vec<_>>());
    }

    #[test]
    fn scheduled_constant_matches_standard() {
        let stop = StopRule::new(1e-12, 50).unwrap();
        let a = run_standard_gd(&square(), &p(&[0.8]), 0.2, &stop).unwrap();
        let b = run_scheduled_gd(&square(), &p(&[0.8]), &Schedule::Constant { delta: 0.2 }, &stop, None).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn robbins_monro_on_half_square() {
        let t = run_scheduled_gd(&half_square(), &p(&[1.0]), &Schedule::RobbinsMonro { c: 1.0 }, &StopRule::default(), None)
            .unwrap();
        assert_eq!(t.termination, Termination::Converged);
        assert_eq!(t.records[1].point[0], 0.0);
    }

    #[test]
    fn summable_schedule_stops_away_from_the_minimum() {
        let mut rates = vec![0.01];
        for _ in 1..200 {
            rates.push(rates.last().unwrap() * 0.5);
        }
        let t = run_scheduled_gd(&square(), &p(&[1.0]), &Schedule::Explicit { rates }, &StopRule::default(), Some(0.5))
            .unwrap();
        assert!(t.armijo_violations.is_empty());
        assert!(t.final_point()[0] > 0.9);
        // Oracle: z∞ = Π(1 − 2δₙ) by direct product.
        let mut z = 1.0;
        let mut d = 0.01;
        for _ in 0..t.iterations() {
            z *= 1.0 - 2.0 * d;
            d *= 0.5;
        }
        assert!((t.final_point()[0] - z).abs() < 1e-12);
    }

    #[test]
    fn explicit_schedule_exhaustion_is_max_iters() {
        let t = run_scheduled_gd(&square(), &p(&[1.0]), &Schedule::Explicit { rates: vec![0.1, 0.1] }, &StopRule::default(), None)
            .unwrap();
        assert_eq!((t.len(), t.termination), (3, Termination::MaxIters));
    }

    #[test]
    fn armijo_violations_are_recorded() {
        let t = run_scheduled_gd(&square(), &p(&[1.0]), &Schedule::Constant { delta: 0.9 }, &StopRule::new(1e-10, 3).unwrap(), Some(0.5))
            .unwrap();
        assert_eq!(t.armijo_violations, vec![0, 1, 2]);
    }

    #[test]
    fn unit_oracle_reproduces_backtracking() {
        let f = ScalarField::new(2, |x| (x[0] - 1.0).powi(2) + 3.0 * x[1].powi(4) + x[0] * x[1])
            .with_gradient(|x| vec![2.0 * (x[0] - 1.0) + x[1], 12.0 * x[1].powi(3) + x[0]]);
        let z0 = p(&[2.0, -1.0]);
        let stop = StopRule::new(1e-10, 500).unwrap();
        let a = run_backtracking_gd(&f, &z0, &cfg(), &stop).unwrap();
        let oracle = DirectionOracle::new(1.0, 1.0, 1.0, 5).unwrap();
        let b = run_inexact_backtracking_gd(&f, &z0, &oracle, &cfg(), &stop).unwrap();
        assert_eq!(a.records, b.records);
    }

    #[test]
    fn inexact_bowl_converges_with_valid_directions() {
        let oracle = DirectionOracle::new(0.5, 2.0, 0.9, 42).unwrap();
        let t = run_inexact_backtracking_gd(&bowl(), &p(&[1.0, 1.0]), &oracle, &cfg(), &StopRule::default()).unwrap();
        assert_eq!(t.termination, Termination::Converged);
        assert!(t.final_point().norm() < 1e-6);
        assert_eq!(t.direction_checks.len(), t.len());
        assert!(t.direction_checks.iter().all(|c| c.sandwich_ok && c.angle_ok));
    }

    #[test]
    fn objective_sequence_with_identical_fields_is_backtracking() {
        let z0 = p(&[1.3]);
        let a = run_backtracking_gd(&square(), &z0, &cfg(), &StopRule::default()).unwrap();
        let b = run_objective_sequence(&[square()], &z0, &cfg(), &StopRule::default()).unwrap();
        assert_eq!(a.points().collect::<Vec<_>>(), b.points().collect::<Vec<_>>());
        assert!(run_objective_sequence(&[], &z0, &cfg(), &StopRule::default()).is_err());
    }

    #[test]
    fn perturbed_sequence_settles_at_zero() {
        let fields: Vec<ScalarField> = (1..=200)
            .map(|n| {
                let c = 1.0 / n as f64;
                ScalarField::new(1, move |x| 0.5 * x[0] * x[0] + c * x[0]).with_gradient(move |x| vec![x[0] + c])
            })
            .chain(std::iter::once(half_square()))
            .collect();
        let t = run_objective_sequence(&fields, &p(&[1.0]), &cfg(), &StopRule::new(1e-12, 10_000).unwrap()).unwrap();
        assert!(t.final_point()[0].abs() < 1e-3);
    }
}
