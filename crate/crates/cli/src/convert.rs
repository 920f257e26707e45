use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use anyhow::{Context, Result};
use prefcomp::format::write_comparisons;
use prefcomp::ingest::{
    binarize, binary_comparisons, parse_ratings, ratings_to_comparisons, split, IdMaps,
    RatingFormat, RatingsTable, SplitMode, SplitSpec,
};
use prefcomp::ingest::{subsample_comparisons_largest_gap, subsample_comparisons_uniform};
use prefcomp::ComparisonSet;
use serde::Serialize;

use crate::output::{self, COMPARISONS, TEST_RATINGS, TRAIN_RATINGS};
use crate::{config, ConvertArgs, UsageError, GIT_DESCRIBE};

pub const STATS: &str = "stats.json";

#[derive(Serialize)]
struct CountSummary {
    min: usize,
    max: usize,
    mean: f64,
    /// comparisons per user -> number of users
    histogram: BTreeMap<usize, usize>,
}

#[derive(Serialize)]
struct Stats {
    git: &'static str,
    d1: usize,
    d2: usize,
    ratings: usize,
    train_ratings: usize,
    test_ratings: usize,
    m: usize,
    comparisons_per_user: CountSummary,
}

fn parse_split(s: &str, min_test: usize, seed: u64) -> Result<Option<SplitSpec>> {
    let bad = || {
        UsageError(format!(
            "split must be none, per-user:N or holdout:F, got {s:?}"
        ))
    };
    if s == "none" {
        return Ok(None);
    }
    let (kind, value) = s.split_once(':').ok_or_else(bad)?;
    match kind {
        "per-user" => {
            let n_train = value.parse().map_err(|_| bad())?;
            Ok(Some(SplitSpec {
                mode: SplitMode::PerUserTrainCount { n_train, min_test },
                seed,
            }))
        }
        "holdout" => Ok(Some(SplitSpec::holdout(
            value.parse().map_err(|_| bad())?,
            seed,
        ))),
        _ => Err(bad().into()),
    }
}

fn detect_format(args: &ConvertArgs) -> Result<RatingFormat> {
    if args.format != "auto" {
        return args
            .format
            .parse()
            .map_err(|e: prefcomp::Error| UsageError(e.to_string()).into());
    }
    let mut first = String::new();
    let mut reader = output::open(&args.input)?;
    while first.trim().is_empty() {
        first.clear();
        if reader.read_line(&mut first)? == 0 {
            break;
        }
    }
    Ok(RatingFormat::detect(&first))
}

fn comparisons(args: &ConvertArgs, train: &RatingsTable) -> Result<ComparisonSet> {
    Ok(match (args.largest_gap, args.uniform, args.binarize) {
        (Some(n), _, _) => subsample_comparisons_largest_gap(train, n)?,
        (_, Some(n), _) => {
            subsample_comparisons_uniform(&ratings_to_comparisons(train), n, args.seed)?
        }
        (_, _, Some(c)) => binary_comparisons(train, c, args.seed)?,
        _ => ratings_to_comparisons(train),
    })
}

fn summarize(set: &ComparisonSet) -> CountSummary {
    let counts: Vec<usize> = (0..set.d1()).map(|i| set.user_count(i)).collect();
    let mut histogram = BTreeMap::new();
    for &c in &counts {
        *histogram.entry(c).or_insert(0) += 1;
    }
    CountSummary {
        min: counts.iter().copied().min().unwrap_or(0),
        max: counts.iter().copied().max().unwrap_or(0),
        mean: counts.iter().sum::<usize>() as f64 / counts.len().max(1) as f64,
        histogram,
    }
}

pub fn run(args: ConvertArgs) -> Result<()> {
    let split_spec = parse_split(&args.split, args.min_test, args.seed)?;
    let format = detect_format(&args)?;
    let table = parse_ratings(output::open(&args.input)?, format)
        .with_context(|| format!("parsing {}", args.input.display()))?;
    let ids: IdMaps = table
        .ids()
        .map(|ids| (**ids).clone())
        .context("parsed table has ID maps")?;
    let table = if args.binarize.is_some() {
        binarize(&table)
    } else {
        table
    };
    log::info!(
        "{}: {} users, {} items, {} ratings",
        args.input.display(),
        table.d1(),
        table.d2(),
        table.len()
    );
    let (train, test) = match &split_spec {
        Some(spec) => {
            let (train, test) = split(&table, spec)?;
            (train, Some(test))
        }
        None => (table.clone(), None),
    };
    let set = comparisons(&args, &train)?;
    log::info!("{} comparisons", set.len());

    output::create_dir(&args.out)?;
    let mut w = output::create(&args.out.join(COMPARISONS))?;
    write_comparisons(&mut w, &set)?;
    w.flush()?;
    output::write_ids(&args.out, &ids)?;
    if let Some(test) = &test {
        output::write_ratings(&args.out.join(TRAIN_RATINGS), &train, &ids)?;
        output::write_ratings(&args.out.join(TEST_RATINGS), test, &ids)?;
    }
    let stats = Stats {
        git: GIT_DESCRIBE,
        d1: table.d1(),
        d2: table.d2(),
        ratings: table.len(),
        train_ratings: train.len(),
        test_ratings: test.as_ref().map_or(0, |t| t.len()),
        m: set.len(),
        comparisons_per_user: summarize(&set),
    };
    output::write_json(&args.out.join(STATS), &stats)?;
    config::write_resolved(&args.out, "convert", &args)
}
