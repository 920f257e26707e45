use rand::seq::index;

use super::{user_rng, Rating, RatingsTable};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SplitMode {
    /// `round(fraction * n_i)` random ratings of each user go to test.
    HoldoutFraction { fraction: f64 },
    /// `n_train` random ratings per user for training, the rest for test;
    /// users with fewer than `n_train + min_test` ratings are dropped.
    PerUserTrainCount { n_train: usize, min_test: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub mode: SplitMode,
    pub seed: u64,
}

impl SplitSpec {
    pub fn per_user(n_train: usize, seed: u64) -> Self {
        Self {
            mode: SplitMode::PerUserTrainCount {
                n_train,
                min_test: 10,
            },
            seed,
        }
    }

    pub fn holdout(fraction: f64, seed: u64) -> Self {
        Self {
            mode: SplitMode::HoldoutFraction { fraction },
            seed,
        }
    }
}

pub fn split(table: &RatingsTable, spec: &SplitSpec) -> Result<(RatingsTable, RatingsTable)> {
    match spec.mode {
        SplitMode::HoldoutFraction { fraction } => split_holdout(table, fraction, spec.seed),
        SplitMode::PerUserTrainCount { n_train, min_test } => {
            split_per_user(table, n_train, min_test, spec.seed)
        }
    }
}

/// Per-user train/test split with exactly `n_train` training ratings.
pub fn split_per_user(
    table: &RatingsTable,
    n_train: usize,
    min_test: usize,
    seed: u64,
) -> Result<(RatingsTable, RatingsTable)> {
    if n_train == 0 || min_test == 0 {
        return Err(Error::InvalidConfig(
            "n_train and min_test must be positive".into(),
        ));
    }
    let threshold = n_train + min_test;
    partition(
        table,
        seed,
        |n| (n >= threshold).then_some(n_train),
        || {
            format!(
                "no user has at least {threshold} ratings (N = {n_train}, min_test = {min_test})"
            )
        },
    )
}

/// Per-user holdout of `round(fraction * n_i)` ratings.
pub fn split_holdout(
    table: &RatingsTable,
    fraction: f64,
    seed: u64,
) -> Result<(RatingsTable, RatingsTable)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "holdout fraction {fraction} must be in (0, 1)"
        )));
    }
    partition(
        table,
        seed,
        |n| Some(n - (fraction * n as f64).round() as usize),
        || "ratings table is empty".to_string(),
    )
}

// `train_size(n)` returns how many of a user's n ratings to train on, or
// None to drop the user.
fn partition(
    table: &RatingsTable,
    seed: u64,
    train_size: impl Fn(usize) -> Option<usize>,
    empty_message: impl Fn() -> String,
) -> Result<(RatingsTable, RatingsTable)> {
    let mut train: Vec<Rating> = Vec::new();
    let mut test: Vec<Rating> = Vec::new();
    for user in 0..table.d1() {
        let row = table.user_entries(user);
        let Some(n_train) = train_size(row.len()) else {
            continue;
        };
        let mut in_train = vec![false; row.len()];
        let mut rng = user_rng(seed, user);
        for p in index::sample(&mut rng, row.len(), n_train.min(row.len())) {
            in_train[p] = true;
        }
        for (entry, keep) in row.iter().zip(in_train) {
            if keep {
                train.push(*entry);
            } else {
                test.push(*entry);
            }
        }
    }
    if train.is_empty() && test.is_empty() {
        return Err(Error::EmptyInput(empty_message()));
    }
    Ok((table.with_entries(train)?, table.with_entries(test)?))
}
