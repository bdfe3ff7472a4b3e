//! The five subcommands. Every input is validated and every computation that
//! can fail on configuration grounds runs before the first file is written.

use std::fs;
use std::path::{Path, PathBuf};

use btgd::diagnostics::SaddleMcReport;
use btgd::minibatch::LeastSquaresSpec;
use btgd::registry::{FunctionConfig, OptimizerConfig};
use btgd::trajectory::fmt_float;
use btgd::{
    convergence_report, detect_stabilization, lr_finder_with, saddle_basin_report, stability_sweep, BatchSampler,
    ConvergenceReport, LrFinderReport, Point, StabilizationReport, StopRule, Termination, Trajectory,
};
use serde::Serialize;

use crate::{CliError, ExperimentConfig, StartSpec};

pub const TRAJECTORY_CSV: &str = "trajectory.csv";
pub const SUMMARY_JSON: &str = "summary.json";
pub const COMPARE_CSV: &str = "compare.csv";
pub const LR_FINDER_JSON: &str = "lr_finder.json";
pub const SADDLE_CSV: &str = "saddle_mc.csv";
pub const SADDLE_JSON: &str = "saddle_mc.json";
pub const SWEEP_CSV: &str = "stability_sweep.csv";
pub const SWEEP_JSON: &str = "stability_sweep.json";

/// Output directory, created on first write.
struct Out {
    dir: PathBuf,
}

impl Out {
    fn new(cfg: &ExperimentConfig) -> Self {
        Self { dir: cfg.out_dir() }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn write(&self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        fs::create_dir_all(&self.dir).map_err(|e| CliError::Io(self.dir.clone(), e))?;
        let path = self.path(name);
        fs::write(&path, bytes).map_err(|e| CliError::Io(path.clone(), e))?;
        Ok(path)
    }

    fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let mut text = serde_json::to_string_pretty(value).expect("summary types serialize");
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    fn csv(&self, name: &str, header: &[String], rows: &[Vec<String>]) -> Result<PathBuf, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header).expect("in-memory csv");
        for row in rows {
            w.write_record(row).expect("in-memory csv");
        }
        let bytes = w.into_inner().expect("in-memory csv");
        self.write(name, &bytes)
    }
}

fn validate_stop(stop: &StopRule) -> Result<(), CliError> {
    stop.validate().map_err(CliError::from)
}

#[derive(Debug, Serialize)]
pub struct RunSummary {
    pub function: FunctionConfig,
    pub optimizer: OptimizerConfig,
    pub seed: u64,
    pub z0: Point,
    pub stop: StopRule,
    pub termination: Termination,
    pub non_finite: bool,
    pub records: usize,
    pub total_func_evals: usize,
    pub armijo_violations: Vec<usize>,
    pub notes: Vec<String>,
    pub convergence: Option<ConvergenceReport>,
    pub stabilization: StabilizationReport,
}

#[derive(Debug, Serialize)]
struct FailureSummary<'a> {
    command: &'a str,
    seed: u64,
    error: String,
}

fn fail<T>(out: &Out, command: &str, seed: u64, err: CliError, file: &str) -> Result<T, CliError> {
    if let CliError::Numerical(msg) = &err {
        out.json(file, &FailureSummary { command, seed, error: msg.clone() })?;
    }
    Err(err)
}

/// Flags a trajectory that ended on a non-finite value as a numerical failure.
fn check_finite(traj: &Trajectory) -> Result<(), CliError> {
    if traj.non_finite {
        Err(CliError::Numerical(format!("run hit a non-finite value after {} records", traj.len())))
    } else {
        Ok(())
    }
}

pub fn run(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>, CliError> {
    let (fcfg, obj) = cfg.objective_required()?;
    let ocfg = cfg.optimizer.clone().unwrap_or(OptimizerConfig::from_name("backtracking_gd")?);
    let z0 = cfg.z0.resolve(obj.dim(), cfg.seed)?;
    validate_stop(&cfg.stop)?;
    let out = Out::new(cfg);

    let traj = match ocfg.run(&obj.field, &z0, &cfg.stop) {
        Ok(t) => t,
        Err(e) => return fail(&out, "run", cfg.seed, e.into(), SUMMARY_JSON),
    };
    let convergence = if traj.non_finite { None } else { convergence_report(&traj, &obj.field).ok() };
    let summary = RunSummary {
        function: fcfg,
        optimizer: ocfg,
        seed: cfg.seed,
        z0,
        stop: cfg.stop,
        termination: traj.termination,
        non_finite: traj.non_finite,
        records: traj.len(),
        total_func_evals: traj.total_func_evals(),
        armijo_violations: traj.armijo_violations.clone(),
        notes: traj.notes.clone(),
        convergence,
        stabilization: detect_stabilization(&traj),
    };
    let paths = vec![
        out.write(TRAJECTORY_CSV, traj.to_csv_string().as_bytes())?,
        out.json(SUMMARY_JSON, &summary)?,
    ];
    check_finite(&traj)?;
    Ok(paths)
}

pub fn compare_header() -> Vec<String> {
    ["optimizer", "termination", "final_value", "grad_norm", "iterations", "func_evals"].map(String::from).to_vec()
}

pub fn compare(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>, CliError> {
    let (_, obj) = cfg.objective_required()?;
    if cfg.optimizers.len() < 2 {
        return Err(CliError::Config(format!("compare needs at least 2 optimizers, got {}", cfg.optimizers.len())));
    }
    let z0 = cfg.z0.resolve(obj.dim(), cfg.seed)?;
    validate_stop(&cfg.stop)?;

    let mut results = Vec::with_capacity(cfg.optimizers.len());
    for ocfg in &cfg.optimizers {
        match ocfg.run(&obj.field, &z0, &cfg.stop) {
            Ok(t) => results.push((ocfg.name(), Ok(t))),
            Err(e) => match CliError::from(e) {
                CliError::Config(m) => return Err(CliError::Config(format!("{}: {m}", ocfg.name()))),
                other => results.push((ocfg.name(), Err(other))),
            },
        }
    }

    let mut failure = None;
    let rows: Vec<Vec<String>> = results
        .iter()
        .map(|(name, r)| match r {
            Ok(t) => {
                if failure.is_none() {
                    failure = check_finite(t).err().map(|e| format!("{name}: {e}"));
                }
                let last = t.last();
                vec![
                    name.to_string(),
                    t.termination.to_string(),
                    fmt_float(last.value),
                    fmt_float(last.grad_norm),
                    t.iterations().to_string(),
                    t.total_func_evals().to_string(),
                ]
            }
            Err(e) => {
                failure.get_or_insert_with(|| format!("{name}: {e}"));
                vec![name.to_string(), "Error".into(), String::new(), String::new(), String::new(), String::new()]
            }
        })
        .collect();
    let path = Out::new(cfg).csv(COMPARE_CSV, &compare_header(), &rows)?;
    match failure {
        Some(msg) => Err(CliError::Numerical(msg)),
        None => Ok(vec![path]),
    }
}

#[derive(Debug, Serialize)]
pub struct LrFinderSummary {
    pub problem: LeastSquaresSpec,
    pub batch_size: usize,
    pub seed: u64,
    pub at: Point,
    /// Population variance of the per-batch σ.
    pub batch_variance: f64,
    pub report: LrFinderReport,
}

fn finder_anchor(cfg: &ExperimentConfig, dim: usize) -> Result<Point, CliError> {
    match &cfg.finder.at {
        Some(v) => StartSpec::Point(v.clone()).resolve(dim, cfg.seed),
        None => Ok(Point::zeros(dim)),
    }
}

pub fn variance(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / xs.len() as f64
}

pub fn lr_finder(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>, CliError> {
    let problem = cfg.problem.build()?;
    let f = &cfg.finder;
    let sampler = BatchSampler::new(problem.len(), f.batch_size, cfg.seed)?;
    let at = finder_anchor(cfg, problem.dim())?;
    f.line_search.validate()?;
    let out = Out::new(cfg);

    let report = match lr_finder_with(&problem, &sampler, &f.line_search, f.n_batches, &at, f.mode, f.search) {
        Ok(r) => r,
        Err(e) => return fail(&out, "lr-finder", cfg.seed, e.into(), LR_FINDER_JSON),
    };
    let summary = LrFinderSummary {
        problem: cfg.problem,
        batch_size: f.batch_size,
        seed: cfg.seed,
        at,
        batch_variance: variance(&report.per_batch_sigmas),
        report,
    };
    Ok(vec![out.json(LR_FINDER_JSON, &summary)?])
}

#[derive(Debug, Serialize)]
pub struct SaddleSummary {
    pub function: FunctionConfig,
    pub saddle: Point,
    pub eps: f64,
    pub n_samples: usize,
    pub seed: u64,
    pub burn_in: usize,
    pub exclusion_ratio: f64,
    pub escaped: usize,
    pub fraction: f64,
}

pub fn saddle_header(dim: usize) -> Vec<String> {
    let mut h = vec!["index".to_string()];
    h.extend((0..dim).map(|i| format!("start_{i}")));
    h.extend(["escaped", "min_distance", "termination", "iterations"].map(String::from));
    h
}

fn saddle_rows(report: &SaddleMcReport) -> Vec<Vec<String>> {
    report
        .samples
        .iter()
        .map(|s| {
            let mut row = vec![s.index.to_string()];
            row.extend(s.start.coords().iter().map(|c| fmt_float(*c)));
            row.push(s.escaped.to_string());
            row.push(fmt_float(s.min_distance));
            row.push(s.termination.to_string());
            row.push(s.iterations.to_string());
            row
        })
        .collect()
}

pub fn saddle_mc(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>, CliError> {
    let (fcfg, obj) = cfg.objective("saddle")?;
    let saddle = cfg.saddle_point(&obj)?;
    let mc = cfg.saddle_mc();
    mc.validate()?;
    cfg.saddle.line_search.validate()?;
    validate_stop(&cfg.stop)?;
    let out = Out::new(cfg);

    let report = match saddle_basin_report(&obj.field, &saddle, &mc, &cfg.saddle.line_search, &cfg.stop) {
        Ok(r) => r,
        Err(e) => return fail(&out, "saddle-mc", cfg.seed, e.into(), SADDLE_JSON),
    };
    let summary = SaddleSummary {
        function: fcfg,
        saddle: saddle.clone(),
        eps: mc.eps,
        n_samples: mc.n_samples,
        seed: mc.seed,
        burn_in: mc.burn_in,
        exclusion_ratio: mc.exclusion_ratio,
        escaped: report.samples.iter().filter(|s| s.escaped).count(),
        fraction: report.fraction,
    };
    Ok(vec![out.csv(SADDLE_CSV, &saddle_header(saddle.dim()), &saddle_rows(&report))?, out.json(SADDLE_JSON, &summary)?])
}

#[derive(Debug, Serialize)]
pub struct SweepSummary {
    pub problem: LeastSquaresSpec,
    pub seed: u64,
    pub batch_sizes: Vec<usize>,
    pub deltas: Vec<f64>,
    /// Rescaled mean σ; rows follow `batch_sizes`, columns follow `deltas`.
    pub rescaled_sigma: Vec<Vec<f64>>,
    /// max/min within each row.
    pub row_ratios: Vec<f64>,
}

pub fn sweep_header(deltas: &[f64]) -> Vec<String> {
    let mut h = vec!["batch_size".to_string()];
    h.extend(deltas.iter().map(|d| format!("delta0={d:?}")));
    h
}

pub fn stability_sweep_cmd(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>, CliError> {
    let s = &cfg.sweep;
    if s.deltas.is_empty() || s.batch_sizes.is_empty() {
        return Err(CliError::Config("sweep needs at least one delta and one batch size".into()));
    }
    let problem = cfg.problem.build()?;
    let at = finder_anchor(cfg, problem.dim())?;
    let f = &cfg.finder;
    for &k in &s.batch_sizes {
        BatchSampler::new(problem.len(), k, cfg.seed)?;
    }
    for &d in &s.deltas {
        f.line_search.with_delta0(d).validate()?;
    }
    let out = Out::new(cfg);

    let matrix =
        match stability_sweep(&problem, cfg.seed, &s.batch_sizes, &s.deltas, &f.line_search, f.n_batches, &at, f.mode, f.search)
        {
            Ok(m) => m,
            Err(e) => return fail(&out, "stability-sweep", cfg.seed, e.into(), SWEEP_JSON),
        };
    let rows: Vec<Vec<String>> = s
        .batch_sizes
        .iter()
        .zip(&matrix)
        .map(|(k, row)| std::iter::once(k.to_string()).chain(row.iter().map(|&v| fmt_float(v))).collect())
        .collect();
    let row_ratios = matrix
        .iter()
        .map(|row| {
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let min = row.iter().cloned().fold(f64::INFINITY, f64::min);
            max / min
        })
        .collect();
    let summary = SweepSummary {
        problem: cfg.problem,
        seed: cfg.seed,
        batch_sizes: s.batch_sizes.clone(),
        deltas: s.deltas.clone(),
        rescaled_sigma: matrix,
        row_ratios,
    };
    Ok(vec![out.csv(SWEEP_CSV, &sweep_header(&s.deltas), &rows)?, out.json(SWEEP_JSON, &summary)?])
}

/// Reads and parses a config file; a missing path means all defaults.
pub fn load_config(path: Option<&Path>) -> Result<ExperimentConfig, CliError> {
    match path {
        None => Ok(ExperimentConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            ExperimentConfig::from_json(&text)
        }
    }
}
