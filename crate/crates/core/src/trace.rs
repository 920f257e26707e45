use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iter: usize,
    pub primal_objective: f64,
    pub elapsed_seconds: f64,
}

/// Per-iteration primal objective and wall time of a solver run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTrace {
    pub records: Vec<TraceRecord>,
    /// Whether the relative-change stopping rule fired (as opposed to the
    /// iteration cap).
    pub converged: bool,
}

impl ConvergenceTrace {
    pub fn push(&mut self, iter: usize, primal_objective: f64, started: Instant) {
        self.records.push(TraceRecord {
            iter,
            primal_objective,
            elapsed_seconds: started.elapsed().as_secs_f64(),
        });
    }

    pub fn last_objective(&self) -> Option<f64> {
        self.records.last().map(|r| r.primal_objective)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "iter,primal_objective,elapsed_seconds")?;
        for r in &self.records {
            writeln!(
                w,
                "{},{:.17e},{:.6}",
                r.iter, r.primal_objective, r.elapsed_seconds
            )?;
        }
        w.flush()
    }
}

/// `|prev - cur| / max(|prev|, tiny)`.
pub(crate) fn relative_change(prev: f64, cur: f64) -> f64 {
    (prev - cur).abs() / prev.abs().max(f64::MIN_POSITIVE)
}
