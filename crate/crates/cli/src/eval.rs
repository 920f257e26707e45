use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{Context, Result};
use prefcomp::eval::{
    mean_metric_over_users, ndcg_per_user, pairwise_accuracy, pairwise_accuracy_per_user,
    precision_per_user,
};
use prefcomp::ingest::RatingsTable;
use prefcomp::ingest::{parse_ratings_with_ids, ratings_to_comparisons, IdMaps, RatingFormat};
use prefcomp::{ComparisonSet, FactorPair};
use serde::Serialize;

use crate::output::{self, TEST_RATINGS, TRAIN_RATINGS};
use crate::{config, EvalArgs, UsageError, GIT_DESCRIBE};

pub const REPORT: &str = "report.json";
pub const PER_USER: &str = "per_user.csv";

#[derive(Debug, Clone, PartialEq)]
enum Metric {
    Pairwise,
    PairwiseRestricted,
    Ndcg(usize),
    Precision(usize),
}

impl Metric {
    fn parse(s: &str) -> Result<Self> {
        let bad = || UsageError(format!("unknown metric {s:?}"));
        let at = |prefix: &str| -> Option<Result<usize>> {
            s.strip_prefix(prefix).map(|k| match k.parse::<usize>() {
                Ok(k) if k > 0 => Ok(k),
                _ => Err(bad().into()),
            })
        };
        match s.trim() {
            "pairwise" => Ok(Metric::Pairwise),
            "pairwise-restricted" => Ok(Metric::PairwiseRestricted),
            _ => {
                if let Some(k) = at("ndcg@") {
                    Ok(Metric::Ndcg(k?))
                } else if let Some(k) = at("precision@") {
                    Ok(Metric::Precision(k?))
                } else {
                    Err(bad().into())
                }
            }
        }
    }

    fn name(&self) -> String {
        match self {
            Metric::Pairwise => "pairwise".into(),
            Metric::PairwiseRestricted => "pairwise-restricted".into(),
            Metric::Ndcg(k) => format!("ndcg@{k}"),
            Metric::Precision(k) => format!("precision@{k}"),
        }
    }
}

#[derive(Serialize)]
struct MetricReport {
    /// Pairwise metrics: fraction of all test comparisons ordered correctly.
    /// Ranking metrics: mean over users.
    value: f64,
    users: usize,
    skipped: usize,
}

#[derive(Serialize)]
struct Report {
    git: &'static str,
    factors: PathBuf,
    d1: usize,
    d2: usize,
    rank: usize,
    metrics: BTreeMap<String, MetricReport>,
}

struct Inputs {
    ids: Option<Arc<IdMaps>>,
    test_ratings: Option<RatingsTable>,
    train_ratings: Option<RatingsTable>,
    test_comparisons: Option<ComparisonSet>,
}

fn read_ratings(path: &Path, ids: &Option<Arc<IdMaps>>) -> Result<RatingsTable> {
    let ids = ids.clone().ok_or_else(|| {
        UsageError(format!(
            "reading {} needs the ID maps (--ids or --data)",
            path.display()
        ))
    })?;
    parse_ratings_with_ids(output::open(path)?, RatingFormat::TabSeparated, ids)
        .with_context(|| format!("parsing {}", path.display()))
}

fn load_inputs(args: &EvalArgs) -> Result<Inputs> {
    let from_data = |name: &str| args.data.as_ref().map(|d| d.join(name));
    let ids = match args.ids.clone().or_else(|| args.data.clone()) {
        Some(dir) => Some(output::load_ids(&dir)?),
        None => None,
    };
    let test_path = args
        .test_ratings
        .clone()
        .or_else(|| from_data(TEST_RATINGS));
    let train_path = args
        .train_ratings
        .clone()
        .or_else(|| from_data(TRAIN_RATINGS));
    Ok(Inputs {
        test_ratings: test_path.map(|p| read_ratings(&p, &ids)).transpose()?,
        train_ratings: train_path
            .filter(|p| p.exists() || args.train_ratings.is_some())
            .map(|p| read_ratings(&p, &ids))
            .transpose()?,
        test_comparisons: args
            .test_comparisons
            .as_ref()
            .map(|p| output::load_comparisons(p))
            .transpose()?,
        ids,
    })
}

fn summary_of(values: &[Option<f64>]) -> Result<(f64, usize, usize)> {
    let s = mean_metric_over_users(values)?;
    Ok((s.mean, s.users, s.skipped))
}

pub fn run(args: EvalArgs) -> Result<()> {
    let metrics: Vec<Metric> = args
        .metrics
        .iter()
        .map(|m| Metric::parse(m))
        .collect::<Result<_>>()?;
    if metrics.is_empty() {
        return Err(UsageError("no metrics requested".into()).into());
    }
    let factors: FactorPair = output::load_factors(&args.factors)?;
    let inputs = load_inputs(&args)?;
    let test_comparisons = match (&inputs.test_ratings, &inputs.test_comparisons) {
        (Some(t), _) => Some(ratings_to_comparisons(t)),
        (None, Some(c)) => Some(c.clone()),
        (None, None) => None,
    };
    let need =
        |what: &str| UsageError(format!("{what} needs test data (--data or --test-ratings)"));

    let mut report = BTreeMap::new();
    let mut columns: Vec<(String, Vec<Option<f64>>)> = Vec::new();
    for metric in &metrics {
        let (value, users, skipped, per_user) = match metric {
            Metric::Pairwise | Metric::PairwiseRestricted => {
                let test = test_comparisons
                    .as_ref()
                    .ok_or_else(|| need("pairwise accuracy"))?;
                let gap = if *metric == Metric::Pairwise {
                    0.0
                } else {
                    args.min_gap
                };
                let value = pairwise_accuracy(&factors, test, gap)?;
                let per_user = pairwise_accuracy_per_user(&factors, test, gap)?;
                let (_, users, skipped) = summary_of(&per_user)?;
                (value, users, skipped, per_user)
            }
            Metric::Ndcg(k) => {
                let test = inputs.test_ratings.as_ref().ok_or_else(|| need("NDCG"))?;
                let per_user = ndcg_per_user(&factors, test, *k)?;
                let (value, users, skipped) = summary_of(&per_user)?;
                (value, users, skipped, per_user)
            }
            Metric::Precision(k) => {
                let test = inputs
                    .test_ratings
                    .as_ref()
                    .ok_or_else(|| need("precision"))?;
                let empty;
                let train = match &inputs.train_ratings {
                    Some(t) => t,
                    None => {
                        empty = test.with_entries(Vec::new())?;
                        &empty
                    }
                };
                let per_user: Vec<Option<f64>> = precision_per_user(&factors, train, test, &[*k])?
                    .into_iter()
                    .map(|v| v.map(|v| v[0]))
                    .collect();
                let (value, users, skipped) = summary_of(&per_user)?;
                (value, users, skipped, per_user)
            }
        };
        log::info!("{}: {value:.4} over {users} users", metric.name());
        report.insert(
            metric.name(),
            MetricReport {
                value,
                users,
                skipped,
            },
        );
        columns.push((metric.name(), per_user));
    }

    output::create_dir(&args.out)?;
    output::write_json(
        &args.out.join(REPORT),
        &Report {
            git: GIT_DESCRIBE,
            factors: args.factors.clone(),
            d1: factors.d1(),
            d2: factors.d2(),
            rank: factors.rank(),
            metrics: report,
        },
    )?;
    let mut w = output::create(&args.out.join(PER_USER))?;
    let header: Vec<&str> = columns.iter().map(|c| c.0.as_str()).collect();
    writeln!(w, "user,{}", header.join(","))?;
    for user in 0..factors.d1() {
        let id = inputs
            .ids
            .as_ref()
            .and_then(|ids| ids.users.raw(user as u32).map(str::to_owned))
            .unwrap_or_else(|| user.to_string());
        let cells: Vec<String> = columns
            .iter()
            .map(|c| {
                c.1.get(user)
                    .copied()
                    .flatten()
                    .map_or(String::new(), |v| v.to_string())
            })
            .collect();
        writeln!(w, "{id},{}", cells.join(","))?;
    }
    w.flush()?;
    config::write_resolved(&args.out, "eval", &args)
}
