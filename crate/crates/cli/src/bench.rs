use std::io::Write;
use std::time::Instant;

use anyhow::Result;
use prefcomp::altsvm::train_altsvm;
use serde::Serialize;

use crate::output;
use crate::{config, BenchArgs, UsageError, GIT_DESCRIBE};

pub const TABLE: &str = "scaling.csv";
pub const SUMMARY: &str = "scaling.json";

#[derive(Serialize)]
struct Row {
    workers: usize,
    seconds: f64,
    speedup: f64,
    iterations: usize,
    converged: bool,
    final_objective: f64,
    /// Relative difference from the first worker count's final objective.
    objective_gap: f64,
}

#[derive(Serialize)]
struct Summary<'a> {
    git: &'static str,
    hardware_threads: usize,
    m: usize,
    rows: &'a [Row],
}

pub fn run(args: BenchArgs) -> Result<()> {
    if args.worker_counts.is_empty() || args.worker_counts.contains(&0) {
        return Err(UsageError("worker counts must be positive".into()).into());
    }
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    let max = args.worker_counts.iter().copied().max().unwrap_or(1);
    if max > threads {
        log::warn!(
            "benchmarking {max} workers on {threads} hardware threads; speedups will be flat"
        );
    }
    let data = output::load_comparisons(&args.data)?;
    let mut rows: Vec<Row> = Vec::new();
    for &workers in &args.worker_counts {
        let config = args.solver.altsvm(workers)?;
        let started = Instant::now();
        let (_, trace) = train_altsvm(&data, &config)?;
        let seconds = started.elapsed().as_secs_f64();
        let final_objective = trace.last_objective().unwrap_or(f64::NAN);
        let (base_seconds, base_objective) = rows.first().map_or((seconds, final_objective), |r| {
            (r.seconds, r.final_objective)
        });
        let row = Row {
            workers,
            seconds,
            speedup: base_seconds / seconds,
            iterations: trace.len().saturating_sub(1),
            converged: trace.converged,
            final_objective,
            objective_gap: (final_objective - base_objective).abs() / base_objective.abs(),
        };
        log::info!(
            "{workers} workers: {seconds:.2}s, speedup {:.2}, objective {final_objective:.6e}",
            row.speedup
        );
        rows.push(row);
    }

    output::create_dir(&args.out)?;
    let mut w = output::create(&args.out.join(TABLE))?;
    writeln!(
        w,
        "workers,seconds,speedup,iterations,converged,final_objective,objective_gap"
    )?;
    for r in &rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.workers,
            r.seconds,
            r.speedup,
            r.iterations,
            r.converged,
            r.final_objective,
            r.objective_gap
        )?;
    }
    w.flush()?;
    output::write_json(
        &args.out.join(SUMMARY),
        &Summary {
            git: GIT_DESCRIBE,
            hardware_threads: threads,
            m: data.len(),
            rows: &rows,
        },
    )?;
    config::write_resolved(&args.out, "bench", &args)
}
