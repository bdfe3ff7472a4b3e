//! Finite-sum objectives, seeded mini-batching, the averaged backtracking
//! learning-rate finder and the MBT-GD/MMT/NAG training loops.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{LineSearchConfig, StopRule};
use crate::error::{check_dim, invalid, Error, Result};
use crate::field::{dot, Point, ScalarField};
use crate::linesearch::{search, Growth, Probe};
use crate::trajectory::{Recorder, Termination, Trajectory};

pub use crate::optimizers::run_objective_sequence;

/// F(κ) = (1/N) Σᵢ fᵢ(κ) over components sharing one dimension.
#[derive(Debug, Clone)]
pub struct MiniBatchProblem {
    components: Arc<Vec<ScalarField>>,
    dim: usize,
    truth: Option<Point>,
}

impl MiniBatchProblem {
    pub fn new(components: Vec<ScalarField>) -> Result<Self> {
        let Some(first) = components.first() else {
            return Err(invalid("a mini-batch problem needs at least one component"));
        };
        let dim = first.dim();
        for c in &components {
            check_dim(dim, c.dim())?;
        }
        Ok(Self { components: Arc::new(components), dim, truth: None })
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.components
    }

    /// The planted minimizer κ* of a synthetic problem.
    pub fn truth(&self) -> Option<&Point> {
        self.truth.as_ref()
    }

    /// Mean of the components listed in `indices`, as a standalone objective.
    pub fn batch_objective(&self, indices: &[usize]) -> Result<ScalarField> {
        if indices.is_empty() {
            return Err(invalid("a batch must contain at least one component"));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.len()) {
            return Err(invalid(format!("component index {bad} out of range")));
        }
        let idx: Arc<Vec<usize>> = Arc::new(indices.to_vec());
        let scale = 1.0 / idx.len() as f64;
        let (comps, ids) = (Arc::clone(&self.components), Arc::clone(&idx));
        let mut field = ScalarField::new(self.dim, move |x| {
            ids.iter().map(|&i| comps[i].raw_value(x).unwrap_or(f64::NAN)).sum::<f64>() * scale
        });
        let grads: Option<Vec<_>> = idx.iter().map(|&i| self.components[i].gradient_fn()).collect();
        if let Some(grads) = grads {
            let dim = self.dim;
            field = field.with_gradient(move |x| {
                let mut acc = vec![0.0; dim];
                for g in &grads {
                    for (a, gi) in acc.iter_mut().zip(g(x)) {
                        *a += gi;
                    }
                }
                acc.iter_mut().for_each(|a| *a *= scale);
                acc
            });
        }
        Ok(field)
    }

    pub fn full_objective(&self) -> ScalarField {
        let all: Vec<usize> = (0..self.len()).collect();
        self.batch_objective(&all).expect("the full index set is a valid batch")
    }
}

/// Parameters of a synthetic least-squares problem
/// fᵢ(κ) = ½(⟨xᵢ, κ⟩ − yᵢ)² with yᵢ = ⟨xᵢ, κ*⟩ + noise·ξᵢ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LeastSquaresSpec {
    pub n_samples: usize,
    pub dimension: usize,
    pub noise: f64,
    pub seed: u64,
}

impl Default for LeastSquaresSpec {
    fn default() -> Self {
        Self { n_samples: 100, dimension: 2, noise: 0.0, seed: 7 }
    }
}

impl LeastSquaresSpec {
    pub fn build(&self) -> Result<MiniBatchProblem> {
        make_least_squares_problem(self.n_samples, self.dimension, self.noise, self.seed)
    }
}

/// Features xᵢ, the planted κ* and the noise ξᵢ are standard normal draws
/// from a ChaCha8 stream seeded with `seed`.
pub fn make_least_squares_problem(n_samples: usize, dimension: usize, noise: f64, seed: u64) -> Result<MiniBatchProblem> {
    if n_samples == 0 || dimension == 0 {
        return Err(invalid("n_samples and dimension must be positive"));
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(invalid("noise must be a nonnegative number"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = || -> f64 { rng.sample(StandardNormal) };
    let truth: Vec<f64> = (0..dimension).map(|_| normal()).collect();
    let mut components = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let x: Vec<f64> = (0..dimension).map(|_| normal()).collect();
        let y = dot(&x, &truth) + noise * normal();
        let (xv, xg) = (x.clone(), x);
        let f = ScalarField::new(dimension, move |k| {
            let r = dot(&xv, k) - y;
            0.5 * r * r
        })
        .with_gradient(move |k| {
            let r = dot(&xg, k) - y;
            xg.iter().map(|xi| r * xi).collect()
        });
        components.push(f);
    }
    let mut problem = MiniBatchProblem::new(components)?;
    problem.truth = Some(Point::from_raw(truth));
    Ok(problem)
}

/// Shuffle-and-partition batching: each epoch is a fresh permutation of the
/// component indices cut into consecutive batches of size k (the last may be smaller).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchSampler {
    pub n: usize,
    pub k: usize,
    pub seed: u64,
}

impl BatchSampler {
    pub fn new(n: usize, k: usize, seed: u64) -> Result<Self> {
        if !(1..=n).contains(&k) {
            return Err(invalid(format!("batch size must lie in [1, {n}], got {k}")));
        }
        Ok(Self { n, k, seed })
    }

    pub fn batches_per_epoch(&self) -> usize {
        self.n.div_ceil(self.k)
    }

    /// Epoch `e` draws its permutation from stream `e` of the seeded generator.
    pub fn epoch_batches(&self, epoch: u64) -> Vec<Vec<usize>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(epoch);
        let mut perm: Vec<usize> = (0..self.n).collect();
        perm.shuffle(&mut rng);
        perm.chunks(self.k).map(<[usize]>::to_vec).collect()
    }

    /// The first `count` batches of the epoch sequence starting at `epoch`.
    pub fn batches_from(&self, epoch: u64, count: usize) -> Vec<Vec<usize>> {
        let mut out = Vec::with_capacity(count);
        let mut e = epoch;
        while out.len() < count {
            out.extend(self.epoch_batches(e).into_iter().take(count - out.len()));
            e += 1;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RescaleMode {
    Linear,
    Sqrt,
    None,
}

impl RescaleMode {
    pub fn apply(self, sigma: f64, rho: f64) -> f64 {
        match self {
            RescaleMode::Linear => sigma * rho,
            RescaleMode::Sqrt => sigma * rho.sqrt(),
            RescaleMode::None => sigma,
        }
    }
}

/// Per-batch search used by the learning-rate finder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinderSearch {
    /// Plain backtracking from δ₀; the result never exceeds δ₀.
    Backtrack,
    /// Backtracking from δ₀ when Armijo fails there, otherwise growth by 1/β
    /// while Armijo holds (at most `max_halvings` growth steps).
    TwoWay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrFinderReport {
    pub per_batch_sigmas: Vec<f64>,
    /// Indices of batches whose search stalled; they are excluded from the mean.
    pub stalled_batches: Vec<usize>,
    pub mean_sigma: f64,
    /// k / N.
    pub rho: f64,
    pub rescaled_sigma: f64,
    pub mode: RescaleMode,
    pub search: FinderSearch,
    /// Objective evaluations spent across all batches.
    pub evaluations: usize,
}

fn batch_sigma(problem: &MiniBatchProblem, batch: &[usize], at: &Point, cfg: &LineSearchConfig, kind: FinderSearch) -> Result<(f64, usize)> {
    let f = problem.batch_objective(batch)?;
    let fx = f.value(at)?;
    let g = f.gradient(at)?;
    let slope = g.dot(&g);
    let growth = match kind {
        FinderSearch::TwoWay if slope > 0.0 => Growth::Unbounded,
        _ => Growth::None,
    };
    let r = search(&Probe { f: &f, x: at, v: &g, fx, slope }, cfg.delta0, cfg, growth)?;
    Ok((r.sigma, r.trials + 1))
}

#[allow(clippy::too_many_arguments)]
fn find_lr(
    problem: &MiniBatchProblem,
    sampler: &BatchSampler,
    cfg: &LineSearchConfig,
    n_batches: usize,
    at: &Point,
    mode: RescaleMode,
    kind: FinderSearch,
    start_epoch: u64,
) -> Result<LrFinderReport> {
    cfg.validate()?;
    check_dim(problem.dim(), at.dim())?;
    if n_batches == 0 {
        return Err(invalid("n_batches must be at least 1"));
    }
    if sampler.n != problem.len() {
        return Err(invalid(format!("sampler covers {} components, problem has {}", sampler.n, problem.len())));
    }
    let batches = sampler.batches_from(start_epoch, n_batches);
    let outcomes: Vec<Result<(f64, usize)>> =
        batches.par_iter().map(|b| batch_sigma(problem, b, at, cfg, kind)).collect();

    let mut per_batch_sigmas = Vec::new();
    let mut stalled_batches = Vec::new();
    let mut evaluations = 0;
    for (i, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok((sigma, evals)) => {
                per_batch_sigmas.push(sigma);
                evaluations += evals;
            }
            Err(Error::StalledLineSearch { halvings }) => {
                stalled_batches.push(i);
                evaluations += halvings + 2;
            }
            Err(e) => return Err(e),
        }
    }
    if per_batch_sigmas.is_empty() {
        return Err(Error::LrFinderFailed { batches: n_batches });
    }
    let mean_sigma = per_batch_sigmas.iter().sum::<f64>() / per_batch_sigmas.len() as f64;
    let rho = sampler.k as f64 / sampler.n as f64;
    Ok(LrFinderReport {
        per_batch_sigmas,
        stalled_batches,
        mean_sigma,
        rho,
        rescaled_sigma: mode.apply(mean_sigma, rho),
        mode,
        search: kind,
        evaluations,
    })
}

pub const DEFAULT_FINDER_BATCHES: usize = 20;

/// Runs the two-way finder search on each of the first `n_batches` batches at
/// the fixed point `at` and averages the accepted steps.
pub fn lr_finder(
    problem: &MiniBatchProblem,
    sampler: &BatchSampler,
    cfg: &LineSearchConfig,
    n_batches: usize,
    at: &Point,
    mode: RescaleMode,
) -> Result<LrFinderReport> {
    find_lr(problem, sampler, cfg, n_batches, at, mode, FinderSearch::TwoWay, 0)
}

/// [`lr_finder`] with an explicit per-batch search.
pub fn lr_finder_with(
    problem: &MiniBatchProblem,
    sampler: &BatchSampler,
    cfg: &LineSearchConfig,
    n_batches: usize,
    at: &Point,
    mode: RescaleMode,
    search: FinderSearch,
) -> Result<LrFinderReport> {
    find_lr(problem, sampler, cfg, n_batches, at, mode, search, 0)
}

/// Rescaled mean σ for every (batch size, starting δ₀) pair: rows follow
/// `batch_sizes`, columns follow `deltas`. All searches start at `at`.
#[allow(clippy::too_many_arguments)]
pub fn stability_sweep(
    problem: &MiniBatchProblem,
    seed: u64,
    batch_sizes: &[usize],
    deltas: &[f64],
    cfg: &LineSearchConfig,
    n_batches: usize,
    at: &Point,
    mode: RescaleMode,
    search: FinderSearch,
) -> Result<Vec<Vec<f64>>> {
    batch_sizes
        .iter()
        .map(|&k| {
            let sampler = BatchSampler::new(problem.len(), k, seed)?;
            deltas
                .iter()
                .map(|&d| {
                    let report = find_lr(problem, &sampler, &cfg.with_delta0(d), n_batches, at, mode, search, 0)?;
                    Ok(report.rescaled_sigma)
                })
                .collect()
        })
        .collect()
}

/// Flags stagnation once the epoch-end loss has failed to improve on the best
/// value seen for `window` consecutive epochs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StuckDetector {
    pub window: usize,
    pub best_loss_seen: f64,
    stale: usize,
}

impl StuckDetector {
    pub fn new(window: usize) -> Self {
        Self { window: window.max(1), best_loss_seen: f64::INFINITY, stale: 0 }
    }

    /// Feeds one epoch-end loss; returns true when the detector fires.
    pub fn observe(&mut self, loss: f64) -> bool {
        if loss < self.best_loss_seen {
            self.best_loss_seen = loss;
            self.stale = 0;
            return false;
        }
        self.stale += 1;
        if self.stale >= self.window {
            self.stale = 0;
            true
        } else {
            false
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MbtOptions {
    pub epochs: usize,
    /// Momentum for MBT-MMT/NAG (ignored by MBT-GD).
    pub gamma: f64,
    pub n_batches: usize,
    pub mode: RescaleMode,
    pub search: FinderSearch,
    pub stuck_window: usize,
    /// MBT-GD only: rerun the finder at the start of every epoch.
    pub refresh_each_epoch: bool,
}

impl Default for MbtOptions {
    fn default() -> Self {
        Self {
            epochs: 200,
            gamma: 0.9,
            n_batches: DEFAULT_FINDER_BATCHES,
            mode: RescaleMode::Sqrt,
            search: FinderSearch::TwoWay,
            stuck_window: 5,
            refresh_each_epoch: false,
        }
    }
}

impl MbtOptions {
    /// Line-search settings for the finder: α = 10⁻⁴, β = 0.5, δ₀ = 1.
    pub fn default_line_search() -> LineSearchConfig {
        LineSearchConfig::default().with_alpha(1e-4)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum MbtKind {
    Gd,
    Momentum,
    Nesterov,
}

fn run_mbt(
    kind: MbtKind,
    problem: &MiniBatchProblem,
    sampler: &BatchSampler,
    z0: &Point,
    cfg: &LineSearchConfig,
    stop: &StopRule,
    opts: &MbtOptions,
) -> Result<Trajectory> {
    cfg.validate()?;
    stop.validate()?;
    check_dim(problem.dim(), z0.dim())?;
    if opts.epochs == 0 {
        return Err(invalid("epochs must be at least 1"));
    }
    if !(opts.gamma >= 0.0 && opts.gamma.is_finite()) {
        return Err(invalid("momentum gamma must be nonnegative"));
    }
    let full = problem.full_objective();
    let batches: Vec<Vec<ScalarField>> = (0..opts.epochs as u64)
        .map(|e| sampler.epoch_batches(e).iter().map(|b| problem.batch_objective(b)).collect())
        .collect::<Result<_>>()?;

    let mut cfg = *cfg;
    let mut gamma = if kind == MbtKind::Gd { 0.0 } else { opts.gamma };
    let refresh = kind != MbtKind::Gd || opts.refresh_each_epoch;
    let mut rec = Recorder::new();
    let mut stuck = StuckDetector::new(opts.stuck_window);

    let mut z = z0.clone();
    let mut v = Point::zeros(problem.dim());
    let finder = |cfg: &LineSearchConfig, at: &Point, epoch: u64| {
        find_lr(problem, sampler, cfg, opts.n_batches, at, opts.mode, opts.search, epoch)
    };
    let first = finder(&cfg, &z, 0)?;
    rec.add_evals(first.evaluations);
    let mut lr = first.rescaled_sigma;

    let mut loss = full.value(&z)?;
    rec.add_evals(1);
    stuck.observe(loss);

    for epoch in 0..opts.epochs {
        if epoch > 0 && refresh {
            let report = finder(&cfg, &z, epoch as u64)?;
            rec.add_evals(report.evaluations);
            lr = report.rescaled_sigma;
        }
        let grad_norm = full.gradient(&z)?.norm();
        rec.push(&z, loss, grad_norm, lr, 0);
        if lr * grad_norm < stop.eps {
            return Ok(rec.finish(Termination::Converged, false));
        }
        if z.norm() > stop.divergence_radius {
            return Ok(rec.finish(Termination::Diverged, false));
        }

        for f in &batches[epoch] {
            let g = match kind {
                MbtKind::Nesterov => f.gradient(&z.step(gamma, &v)),
                _ => f.gradient(&z),
            };
            let Ok(g) = g else {
                return Ok(rec.finish(Termination::Diverged, true));
            };
            v = v.combine(gamma, lr, &g);
            z = z.step(1.0, &v);
        }
        if !z.is_finite() {
            return Ok(rec.finish(Termination::Diverged, true));
        }
        loss = match full.value(&z) {
            Ok(l) => l,
            Err(_) => return Ok(rec.finish(Termination::Diverged, true)),
        };
        rec.add_evals(1);

        if stuck.observe(loss) {
            cfg.alpha = 0.5;
            if gamma != 0.0 {
                gamma = 0.0;
                v = Point::zeros(problem.dim());
            }
            let report = finder(&cfg, &z, epoch as u64 + 1)?;
            rec.add_evals(report.evaluations);
            lr = report.rescaled_sigma;
            rec.notes.push(format!(
                "epoch {}: loss stalled for {} epochs; alpha = 0.5, momentum off, lr = {lr}",
                epoch + 1,
                stuck.window
            ));
        }
    }
    let grad_norm = full.gradient(&z)?.norm();
    rec.push(&z, loss, grad_norm, lr, 0);
    let termination = if lr * grad_norm < stop.eps { Termination::Converged } else { Termination::MaxIters };
    Ok(rec.finish(termination, false))
}

/// MBT-GD: one averaged learning rate from the finder at `z0` (Sqrt rescaling by
/// default), fixed-rate mini-batch steps, and a finder rerun with α = 0.5 when
/// the stuck detector fires. One record per epoch boundary.
pub fn run_mbt_gd(
    problem: &MiniBatchProblem,
    sampler: &BatchSampler,
    z0: &Point,
    cfg: &LineSearchConfig,
    stop: &StopRule,
    opts: &MbtOptions,
) -> Result<Trajectory> {
    run_mbt(MbtKind::Gd, problem, sampler, z0, cfg, stop, opts)
}

/// MBT-MMT: the finder reruns at every epoch start and steps use heavy-ball
/// momentum γ; the stuck detector switches to α = 0.5 and γ = 0 for good.
pub fn run_mbt_mmt(
    problem: &MiniBatchProblem,
    sampler: &BatchSampler,
    z0: &Point,
    cfg: &LineSearchConfig,
    stop: &StopRule,
    opts: &MbtOptions,
) -> Result<Trajectory> {
    run_mbt(MbtKind::Momentum, problem, sampler, z0, cfg, stop, opts)
}

/// MBT-NAG: as [`run_mbt_mmt`] with Nesterov look-ahead gradients.
pub fn run_mbt_nag(
    problem: &MiniBatchProblem,
    sampler: &BatchSampler,
    z0: &Point,
    cfg: &LineSearchConfig,
    stop: &StopRule,
    opts: &MbtOptions,
) -> Result<Trajectory> {
    run_mbt(MbtKind::Nesterov, problem, sampler, z0, cfg, stop, opts)
}
