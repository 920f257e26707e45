use std::collections::BTreeMap;
use std::io::Write;

use anyhow::Result;
use prefcomp::theory::{
    excess_risk_scaling_experiment, m_norm_experiment, MNormParams, PenaltySchedule, PowerFit,
    RiskScalingParams, ScalingReport,
};
use serde::Serialize;

use crate::output;
use crate::{config, ExperimentArgs, ExperimentKind, UsageError, GIT_DESCRIBE};

pub const CSV: &str = "report.csv";
pub const REPORT: &str = "report.json";
pub const SUMMARY: &str = "summary.json";
pub const PLOT: &str = "plot.gp";

#[derive(Serialize)]
struct Summary<'a> {
    git: &'static str,
    experiment: &'a str,
    fits: BTreeMap<&'a str, Option<&'a PowerFit>>,
}

fn parse_penalty(s: &str) -> Result<PenaltySchedule> {
    let bad = || {
        UsageError(format!(
            "penalty must be noise-matched:C or fixed:LAMBDA, got {s:?}"
        ))
    };
    let (kind, value) = s.split_once(':').ok_or_else(bad)?;
    let value: f64 = value.parse().map_err(|_| bad())?;
    match kind {
        "noise-matched" => Ok(PenaltySchedule::NoiseMatched { c: value }),
        "fixed" => Ok(PenaltySchedule::Fixed { lambda: value }),
        _ => Err(bad().into()),
    }
}

fn penalty_string(p: &PenaltySchedule) -> String {
    match p {
        PenaltySchedule::NoiseMatched { c } => format!("noise-matched:{c}"),
        PenaltySchedule::Fixed { lambda } => format!("fixed:{lambda}"),
    }
}

fn risk_scaling(args: &mut ExperimentArgs) -> Result<ScalingReport> {
    let d = RiskScalingParams::default();
    let params = RiskScalingParams {
        d1: *args.d1.get_or_insert(d.d1),
        d2: *args.d2.get_or_insert(d.d2),
        rank: *args.rank.get_or_insert(d.rank),
        fit_rank: args.fit_rank,
        penalty: match &args.penalty {
            Some(p) => parse_penalty(p)?,
            None => d.penalty,
        },
        m_grid: args.m_grid.get_or_insert(d.m_grid).clone(),
        trials: *args.trials.get_or_insert(d.trials),
        seed: *args.seed.get_or_insert(d.seed),
        max_outer_iters: *args.max_iters.get_or_insert(d.max_outer_iters),
        tolerance: *args.tolerance.get_or_insert(d.tolerance),
    };
    args.penalty = Some(penalty_string(&params.penalty));
    Ok(excess_risk_scaling_experiment(&params)?)
}

fn m_norm(args: &mut ExperimentArgs) -> Result<ScalingReport> {
    let d = MNormParams::default();
    let params = MNormParams {
        d_grid: args.d_grid.get_or_insert(d.d_grid).clone(),
        p_fixed: *args.p_fixed.get_or_insert(d.p_fixed),
        p_grid: args.p_grid.get_or_insert(d.p_grid).clone(),
        d_fixed: *args.d_fixed.get_or_insert(d.d_fixed),
        trials: *args.trials.get_or_insert(d.trials),
        seed: *args.seed.get_or_insert(d.seed),
    };
    Ok(m_norm_experiment(&params)?)
}

pub fn run(mut args: ExperimentArgs) -> Result<()> {
    let report = match args.kind {
        ExperimentKind::RiskScaling => risk_scaling(&mut args)?,
        ExperimentKind::MNorm => m_norm(&mut args)?,
    };
    for s in &report.series {
        match &s.fit {
            Some(fit) => log::info!("{}: exponent {:.3}", s.name, fit.exponent),
            None => log::info!("{}: no power fit (fewer than two positive points)", s.name),
        }
    }
    output::create_dir(&args.out)?;
    let mut w = output::create(&args.out.join(CSV))?;
    report.write_csv(&mut w)?;
    w.flush()?;
    let mut w = output::create(&args.out.join(REPORT))?;
    report.write_json(&mut w)?;
    w.flush()?;
    std::fs::write(args.out.join(PLOT), report.gnuplot_script(CSV))?;
    let summary = Summary {
        git: GIT_DESCRIBE,
        experiment: &report.experiment,
        fits: report
            .series
            .iter()
            .map(|s| (s.name.as_str(), s.fit.as_ref()))
            .collect(),
    };
    output::write_json(&args.out.join(SUMMARY), &summary)?;
    config::write_resolved(&args.out, "experiment", &args)
}
