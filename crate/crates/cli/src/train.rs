use std::io::Write;
use std::time::Instant;

use anyhow::{Context, Result};
use prefcomp::altsvm::{train_altsvm, train_global};
use prefcomp::format::write_factors;
use prefcomp::sgd::{powers_of_tenth, sweep_sgd, train_sgd, SgdConfig};
use prefcomp::{ConvergenceTrace, FactorPair};
use serde::Serialize;

use crate::output::{self, FACTORS};
use crate::{config, resolve_workers, Algorithm, TrainArgs, UsageError, GIT_DESCRIBE};

pub const TRACE: &str = "trace.csv";
pub const SUMMARY: &str = "summary.json";

#[derive(Serialize)]
struct SweepPoint {
    alpha0: f64,
    beta0: f64,
    /// `None` when the run diverged.
    final_objective: Option<f64>,
}

#[derive(Serialize)]
struct Summary {
    git: &'static str,
    algorithm: Algorithm,
    d1: usize,
    d2: usize,
    m: usize,
    rank: usize,
    lambda: f64,
    iterations: usize,
    converged: bool,
    final_objective: f64,
    seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    sgd_step: Option<(f64, f64)>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    sweep: Vec<SweepPoint>,
}

pub fn run(mut args: TrainArgs) -> Result<()> {
    args.workers = Some(resolve_workers(args.workers)?);
    let workers = args.workers.unwrap_or(1);
    let data = output::load_comparisons(&args.data)?;
    log::info!(
        "{} comparisons over {} users and {} items",
        data.len(),
        data.d1(),
        data.d2()
    );
    let started = Instant::now();
    let mut sgd_step = None;
    let mut sweep = Vec::new();
    let (factors, trace): (FactorPair, ConvergenceTrace) = match args.algorithm {
        Algorithm::Altsvm => train_altsvm(&data, &args.solver.altsvm(workers)?)?,
        Algorithm::Global => train_global(&data, &args.solver.altsvm(workers)?)?,
        Algorithm::Sgd => {
            let base = SgdConfig {
                rank: args.solver.rank,
                lambda: args.solver.lambda,
                loss: args.solver.loss()?,
                alpha0: args.alpha0,
                beta0: args.beta0,
                epochs: args.epochs,
                seed: args.solver.seed,
            };
            base.validate()?;
            match args.sweep {
                Some(0) => {
                    return Err(UsageError("sweep needs at least one step size".into()).into())
                }
                Some(n) => {
                    let grid = powers_of_tenth(n);
                    let result = sweep_sgd(&data, &base, &grid, &grid)?;
                    log::info!(
                        "best step size alpha0 = {}, beta0 = {}",
                        result.best.alpha0,
                        result.best.beta0
                    );
                    sgd_step = Some((result.best.alpha0, result.best.beta0));
                    sweep = result
                        .grid
                        .iter()
                        .map(|&(alpha0, beta0, final_objective)| SweepPoint {
                            alpha0,
                            beta0,
                            final_objective,
                        })
                        .collect();
                    (result.factors, result.trace)
                }
                None => {
                    sgd_step = Some((base.alpha0, base.beta0));
                    train_sgd(&data, &base)?
                }
            }
        }
    };
    let seconds = started.elapsed().as_secs_f64();

    output::create_dir(&args.out)?;
    let path = args.out.join(FACTORS);
    let mut w = output::create(&path)?;
    write_factors(&mut w, &factors).with_context(|| format!("writing {}", path.display()))?;
    w.flush()?;
    let mut w = output::create(&args.out.join(TRACE))?;
    trace.write_csv(&mut w)?;
    w.flush()?;
    let summary = Summary {
        git: GIT_DESCRIBE,
        algorithm: args.algorithm,
        d1: data.d1(),
        d2: data.d2(),
        m: data.len(),
        rank: args.solver.rank,
        lambda: args.solver.lambda,
        iterations: trace.len().saturating_sub(1),
        converged: trace.converged,
        final_objective: trace.last_objective().unwrap_or(f64::NAN),
        seconds,
        sgd_step,
        sweep,
    };
    output::write_json(&args.out.join(SUMMARY), &summary)?;
    config::write_resolved(&args.out, "train", &args)
}
