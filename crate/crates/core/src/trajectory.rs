//! Iterate records, run termination and CSV serialization of trajectories.

use std::fmt;
use std::io;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::field::Point;

/// Shortest text that parses back to exactly `x`, switching to exponent
/// notation for very small or large magnitudes.
pub fn fmt_float(x: f64) -> String {
    format!("{x:?}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Termination {
    Converged,
    MaxIters,
    Diverged,
    Stalled,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Termination::Converged => "Converged",
            Termination::MaxIters => "MaxIters",
            Termination::Diverged => "Diverged",
            Termination::Stalled => "Stalled",
        };
        f.write_str(s)
    }
}

/// State at one iterate. `step_size` is the δₙ chosen at this point; the
/// step is committed for every record except the last one of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct IterateRecord {
    pub index: usize,
    pub point: Point,
    pub value: f64,
    pub grad_norm: f64,
    pub step_size: f64,
    pub backtrack_count: usize,
    /// Cumulative objective-value evaluations (gradient evaluations excluded).
    pub func_evals: usize,
}

/// Per-step check of the inexact-direction conditions:
/// `A₁‖∇f‖ ≤ ‖v‖ ≤ A₂‖∇f‖` and `⟨∇f, v⟩ ≥ μ‖∇f‖‖v‖`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionCheck {
    pub index: usize,
    pub grad_norm: f64,
    pub dir_norm: f64,
    pub cosine: f64,
    pub sandwich_ok: bool,
    pub angle_ok: bool,
    pub armijo_ok: bool,
    /// Momentum coefficient γₙ actually used (0 for non-momentum schemes).
    pub gamma: f64,
}

impl DirectionCheck {
    pub fn all_ok(&self) -> bool {
        self.sandwich_ok && self.angle_ok && self.armijo_ok
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub records: Vec<IterateRecord>,
    pub termination: Termination,
    /// Set when the run stopped on a non-finite value.
    pub non_finite: bool,
    /// Step indices whose Armijo verification failed (scheduled GD only).
    pub armijo_violations: Vec<usize>,
    pub direction_checks: Vec<DirectionCheck>,
    pub notes: Vec<String>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> &IterateRecord {
        self.records.last().expect("trajectories are never empty")
    }

    pub fn final_point(&self) -> &Point {
        &self.last().point
    }

    pub fn dim(&self) -> usize {
        self.records[0].point.dim()
    }

    pub fn points(&self) -> impl Iterator<Item = &Point> {
        self.records.iter().map(|r| &r.point)
    }

    pub fn values(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.value).collect()
    }

    /// Step sizes of the committed steps (every record but the last).
    pub fn committed_steps(&self) -> Vec<f64> {
        let n = self.records.len().saturating_sub(1);
        self.records[..n].iter().map(|r| r.step_size).collect()
    }

    pub fn total_func_evals(&self) -> usize {
        self.last().func_evals
    }

    /// Number of committed steps.
    pub fn iterations(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    /// ‖z_last − z_prev‖, or 0 for a single-record trajectory.
    pub fn last_step_norm(&self) -> f64 {
        match self.records.len() {
            0 | 1 => 0.0,
            n => self.records[n - 1].point.distance(&self.records[n - 2].point),
        }
    }

    pub fn is_nonincreasing(&self) -> bool {
        self.records.windows(2).all(|w| w[1].value <= w[0].value)
    }

    pub fn csv_header(dim: usize) -> Vec<String> {
        let mut h = vec!["index".to_string()];
        h.extend((0..dim).map(|i| format!("x{i}")));
        h.extend(
            ["value", "grad_norm", "step_size", "backtrack_count", "func_evals"]
                .iter()
                .map(|s| s.to_string()),
        );
        h
    }

    /// Writes `index, x0…, value, grad_norm, step_size, backtrack_count, func_evals`
    /// with shortest round-trip float formatting.
    pub fn write_csv<W: io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| invalid(format!("csv write failed: {e}"));
        w.write_record(Self::csv_header(self.dim())).map_err(csv_err)?;
        for r in &self.records {
            let mut row = vec![r.index.to_string()];
            row.extend(r.point.coords().iter().map(|&c| fmt_float(c)));
            row.push(fmt_float(r.value));
            row.push(fmt_float(r.grad_norm));
            row.push(fmt_float(r.step_size));
            row.push(r.backtrack_count.to_string());
            row.push(r.func_evals.to_string());
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush().map_err(|e| invalid(format!("csv flush failed: {e}")))?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("csv output is UTF-8")
    }

    /// Parses records written by [`Trajectory::write_csv`].
    pub fn records_from_csv<R: io::Read>(input: R) -> Result<Vec<IterateRecord>> {
        let mut rdr = csv::Reader::from_reader(input);
        let headers = rdr.headers().map_err(|e| invalid(e.to_string()))?.clone();
        let dim = headers.len().checked_sub(6).filter(|d| *d > 0).ok_or_else(|| invalid("csv has too few columns"))?;
        let mut out = Vec::new();
        for row in rdr.records() {
            let row = row.map_err(|e| invalid(e.to_string()))?;
            let num = |i: usize| -> Result<f64> {
                row[i].parse::<f64>().map_err(|e| invalid(format!("column {i}: {e}")))
            };
            let int = |i: usize| -> Result<usize> {
                row[i].parse::<usize>().map_err(|e| invalid(format!("column {i}: {e}")))
            };
            let coords = (1..=dim).map(num).collect::<Result<Vec<_>>>()?;
            out.push(IterateRecord {
                index: int(0)?,
                point: Point::new(coords)?,
                value: num(dim + 1)?,
                grad_norm: num(dim + 2)?,
                step_size: num(dim + 3)?,
                backtrack_count: int(dim + 4)?,
                func_evals: int(dim + 5)?,
            });
        }
        Ok(out)
    }
}

/// Accumulates records with consecutive indices and cumulative evaluation counts.
#[derive(Debug, Default)]
pub(crate) struct Recorder {
    records: Vec<IterateRecord>,
    func_evals: usize,
    pub(crate) direction_checks: Vec<DirectionCheck>,
    pub(crate) armijo_violations: Vec<usize>,
    pub(crate) notes: Vec<String>,
}

impl Recorder {
    pub(crate) fn new() -> Self {
        Self::default()
    }

    pub(crate) fn add_evals(&mut self, n: usize) {
        self.func_evals += n;
    }

    pub(crate) fn push(
        &mut self,
        point: &Point,
        value: f64,
        grad_norm: f64,
        step_size: f64,
        backtrack_count: usize,
    ) {
        self.records.push(IterateRecord {
            index: self.records.len(),
            point: point.clone(),
            value,
            grad_norm,
            step_size,
            backtrack_count,
            func_evals: self.func_evals,
        });
    }

    pub(crate) fn finish(self, termination: Termination, non_finite: bool) -> Trajectory {
        Trajectory {
            records: self.records,
            termination,
            non_finite,
            armijo_violations: self.armijo_violations,
            direction_checks: self.direction_checks,
            notes: self.notes,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Trajectory {
        let mut rec = Recorder::new();
        rec.add_evals(1);
        rec.push(&Point::new(vec![1.0, -0.1]).unwrap(), 2.5, 3.0, 0.5, 1, );
        rec.add_evals(2);
        rec.push(&Point::new(vec![1e-300, 0.1 + 0.2]).unwrap(), 1.0 / 3.0, 0.0, 1.0, 0);
        rec.finish(Termination::Converged, false)
    }

    #[test]
    fn recorder_indices_and_evals() {
        let t = sample();
        assert_eq!(t.records[0].index, 0);
        assert_eq!(t.records[1].index, 1);
        assert_eq!(t.records[0].func_evals, 1);
        assert_eq!(t.records[1].func_evals, 3);
        assert_eq!(t.committed_steps(), vec![0.5]);
        assert_eq!(t.iterations(), 1);
    }

    #[test]
    fn csv_round_trip_is_lossless() {
        let t = sample();
        let text = t.to_csv_string();
        assert!(text.starts_with("index,x0,x1,value,grad_norm,step_size,backtrack_count,func_evals\n"));
        let back = Trajectory::records_from_csv(text.as_bytes()).unwrap();
        assert_eq!(back, t.records);
    }
}
