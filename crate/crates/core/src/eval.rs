//! Ranking metrics: pairwise accuracy, NDCG@K and Precision@K.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::RatingsTable;
use crate::model::{check_dims, margin_unchecked, ComparisonSet, FactorPair};

/// A user's candidate items in predicted order: descending score, ties by
/// ascending item index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankedList {
    pub user: u32,
    pub items: Vec<u32>,
}

impl RankedList {
    pub fn from_scores(user: u32, candidates: &[u32], score: impl Fn(u32) -> f64) -> Self {
        let mut scored: Vec<(f64, u32)> = candidates.iter().map(|&j| (score(j), j)).collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        Self {
            user,
            items: scored.into_iter().map(|(_, j)| j).collect(),
        }
    }

    pub fn from_factors(factors: &FactorPair, user: u32, candidates: &[u32]) -> Self {
        Self::from_scores(user, candidates, |j| {
            factors.score(user as usize, j as usize)
        })
    }
}

/// Fraction of test comparisons whose preferred item scores strictly
/// higher, restricted to comparisons with rating gap at least `min_gap`.
pub fn pairwise_accuracy(factors: &FactorPair, test: &ComparisonSet, min_gap: f64) -> Result<f64> {
    check_dims(factors, test)?;
    let (hits, total) = pairwise_counts(factors, test, min_gap, 0..test.len())?;
    if total == 0 {
        return Err(Error::UndefinedMetric(format!(
            "no test comparisons with rating gap >= {min_gap}"
        )));
    }
    Ok(hits as f64 / total as f64)
}

/// Per-user pairwise accuracy; `None` for users without eligible comparisons.
pub fn pairwise_accuracy_per_user(
    factors: &FactorPair,
    test: &ComparisonSet,
    min_gap: f64,
) -> Result<Vec<Option<f64>>> {
    check_dims(factors, test)?;
    if min_gap > 0.0 && test.gaps().is_none() {
        return Err(missing_gaps());
    }
    (0..test.d1())
        .into_par_iter()
        .map(|i| {
            let positions = test.user_positions(i).iter().map(|&p| p as usize);
            let (hits, total) = pairwise_counts(factors, test, min_gap, positions)?;
            Ok((total > 0).then(|| hits as f64 / total as f64))
        })
        .collect()
}

fn missing_gaps() -> Error {
    Error::InvalidConfig(
        "a positive minimum rating gap needs comparisons derived from ratings".into(),
    )
}

fn pairwise_counts(
    factors: &FactorPair,
    test: &ComparisonSet,
    min_gap: f64,
    positions: impl Iterator<Item = usize>,
) -> Result<(usize, usize)> {
    let gaps = match (min_gap > 0.0, test.gaps()) {
        (false, _) => None,
        (true, Some(g)) => Some(g),
        (true, None) => return Err(missing_gaps()),
    };
    let (mut hits, mut total) = (0, 0);
    for p in positions {
        if gaps.is_some_and(|g| g[p] < min_gap) {
            continue;
        }
        total += 1;
        if margin_unchecked(factors, &test.triples()[p]) > 0.0 {
            hits += 1;
        }
    }
    Ok((hits, total))
}

fn dcg(gains: impl Iterator<Item = f64>, k: usize) -> f64 {
    gains
        .take(k)
        .enumerate()
        .map(|(pos, g)| g / ((pos + 2) as f64).log2())
        .sum()
}

fn gain(rating: f64) -> f64 {
    rating.exp2() - 1.0
}

/// `DCG@K(predicted) / DCG@K(ideal)` with gain `2^rating - 1` and discount
/// `log2(position + 1)`. The ideal order sorts the list's own gains.
pub fn ndcg_at_k(predicted: &RankedList, true_ratings: &RatingsTable, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidConfig("K must be at least 1".into()));
    }
    let user = predicted.user as usize;
    let gains: Vec<f64> = predicted
        .items
        .iter()
        .map(|&j| true_ratings.rating(user, j).map_or(0.0, gain))
        .collect();
    let mut ideal = gains.clone();
    ideal.sort_by(|a, b| b.total_cmp(a));
    let best = dcg(ideal.into_iter(), k);
    if best <= 0.0 {
        return Err(Error::UndefinedMetric(format!(
            "user {user} has zero ideal DCG"
        )));
    }
    Ok(dcg(gains.into_iter(), k) / best)
}

/// `(1/K) * #relevant among the first K items`; absent ratings count 0.
pub fn precision_at_k(
    predicted: &RankedList,
    binary_ratings: &RatingsTable,
    k: usize,
) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidConfig("K must be at least 1".into()));
    }
    let user = predicted.user as usize;
    let relevant: f64 = predicted
        .items
        .iter()
        .take(k)
        .map(|&j| binary_ratings.rating(user, j).unwrap_or(0.0))
        .sum();
    Ok(relevant / k as f64)
}

/// Mean over users with a defined value, plus how many were skipped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub users: usize,
    pub skipped: usize,
}

pub fn mean_metric_over_users(values: &[Option<f64>]) -> Result<MetricSummary> {
    let defined: Vec<f64> = values.iter().flatten().copied().collect();
    if defined.is_empty() {
        return Err(Error::UndefinedMetric("every user was skipped".into()));
    }
    Ok(MetricSummary {
        mean: defined.iter().sum::<f64>() / defined.len() as f64,
        users: defined.len(),
        skipped: values.len() - defined.len(),
    })
}

fn check_table(factors: &FactorPair, table: &RatingsTable, what: &str) -> Result<()> {
    if table.d1() != factors.d1() || table.d2() != factors.d2() {
        return Err(Error::DimensionMismatch(format!(
            "{what} covers {}x{} but factors are {}x{}",
            table.d1(),
            table.d2(),
            factors.d1(),
            factors.d2()
        )));
    }
    Ok(())
}

/// NDCG@K per user, ranking each user's test items. Users without test
/// items or with zero ideal DCG get `None`.
pub fn ndcg_per_user(
    factors: &FactorPair,
    test: &RatingsTable,
    k: usize,
) -> Result<Vec<Option<f64>>> {
    check_table(factors, test, "test ratings")?;
    if k == 0 {
        return Err(Error::InvalidConfig("K must be at least 1".into()));
    }
    let values: Vec<Option<f64>> = (0..test.d1())
        .into_par_iter()
        .map(|i| {
            let candidates: Vec<u32> = test.user_entries(i).iter().map(|e| e.item).collect();
            if candidates.is_empty() {
                return None;
            }
            ndcg_at_k(
                &RankedList::from_factors(factors, i as u32, &candidates),
                test,
                k,
            )
            .ok()
        })
        .collect();
    let zero_ideal = (0..test.d1())
        .filter(|&i| !test.user_entries(i).is_empty() && values[i].is_none())
        .count();
    if zero_ideal > 0 {
        log::warn!("{zero_ideal} users have zero ideal DCG and are excluded from NDCG");
    }
    Ok(values)
}

/// Precision@K for every K in `ks`, per user, ranking all items the user
/// did not rate in `train`. Users without test items get `None`.
pub fn precision_per_user(
    factors: &FactorPair,
    train: &RatingsTable,
    test: &RatingsTable,
    ks: &[usize],
) -> Result<Vec<Option<Vec<f64>>>> {
    check_table(factors, train, "training ratings")?;
    check_table(factors, test, "test ratings")?;
    if ks.contains(&0) {
        return Err(Error::InvalidConfig("K must be at least 1".into()));
    }
    let max_k = ks.iter().copied().max().unwrap_or(0);
    Ok((0..test.d1())
        .into_par_iter()
        .map(|i| {
            if test.user_entries(i).is_empty() {
                return None;
            }
            let list = top_k_unrated(factors, train, i, max_k);
            Some(
                ks.iter()
                    .map(|&k| precision_at_k(&list, test, k).expect("k >= 1"))
                    .collect(),
            )
        })
        .collect())
}

// First `k` items of the ranked list over items absent from the user's
// training row; a partial selection keeps this cheap for large catalogs.
fn top_k_unrated(factors: &FactorPair, train: &RatingsTable, user: usize, k: usize) -> RankedList {
    let mut rated = train.user_entries(user).iter().map(|e| e.item).peekable();
    let mut scored: Vec<(f64, u32)> = Vec::with_capacity(factors.d2());
    for j in 0..factors.d2() as u32 {
        if rated.peek() == Some(&j) {
            rated.next();
            continue;
        }
        scored.push((factors.score(user, j as usize), j));
    }
    let order = |a: &(f64, u32), b: &(f64, u32)| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1));
    if k < scored.len() {
        scored.select_nth_unstable_by(k, order);
        scored.truncate(k);
    }
    scored.sort_by(order);
    RankedList {
        user: user as u32,
        items: scored.into_iter().map(|(_, j)| j).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Rating;
    use crate::model::ComparisonTriple;
    use ndarray::array;

    fn ratings(d2: usize, row: &[(u32, f64)]) -> RatingsTable {
        let entries = row
            .iter()
            .map(|&(item, rating)| Rating {
                user: 0,
                item,
                rating,
                timestamp: None,
            })
            .collect();
        RatingsTable::new(1, d2, entries).unwrap()
    }

    #[test]
    fn ranked_list_tie_rule() {
        let list = RankedList::from_scores(0, &[3, 1, 2, 0], |j| if j >= 2 { 1.0 } else { 0.5 });
        assert_eq!(list.items, vec![2, 3, 0, 1]);
    }

    #[test]
    fn hand_ndcg_example() {
        // A:5, B:3, C:1 in order (B, A, C), K = 2
        let table = ratings(3, &[(0, 5.0), (1, 3.0), (2, 1.0)]);
        let list = RankedList {
            user: 0,
            items: vec![1, 0, 2],
        };
        let v = ndcg_at_k(&list, &table, 2).unwrap();
        let want = (7.0 + 31.0 / 3f64.log2()) / (31.0 + 7.0 / 3f64.log2());
        assert!((v - want).abs() < 1e-12);
        assert!((v - 0.74989).abs() < 1e-4);
        let ideal = RankedList {
            user: 0,
            items: vec![0, 1, 2],
        };
        assert_eq!(ndcg_at_k(&ideal, &table, 2).unwrap(), 1.0);
        assert_eq!(
            ndcg_at_k(&list, &table, 10).unwrap(),
            ndcg_at_k(&list, &table, 3).unwrap()
        );
    }

    #[test]
    fn zero_ideal_dcg_is_undefined() {
        let table = ratings(2, &[(0, 0.0), (1, 0.0)]);
        let list = RankedList {
            user: 0,
            items: vec![0, 1],
        };
        assert!(matches!(
            ndcg_at_k(&list, &table, 2),
            Err(Error::UndefinedMetric(_))
        ));
    }

    #[test]
    fn precision_counts() {
        let table = ratings(12, &[(0, 1.0), (4, 1.0), (9, 1.0)]);
        let list = RankedList {
            user: 0,
            items: (0..12).collect(),
        };
        assert!((precision_at_k(&list, &table, 10).unwrap() - 0.3).abs() < 1e-15);
        assert_eq!(precision_at_k(&list, &table, 1).unwrap(), 1.0);
        assert!(precision_at_k(&list, &table, 0).is_err());
        let none = ratings(12, &[]);
        assert_eq!(precision_at_k(&list, &none, 5).unwrap(), 0.0);
    }

    #[test]
    fn pairwise_tie_convention_and_gap_filter() {
        let test = ComparisonSet::new(
            1,
            3,
            vec![
                ComparisonTriple::new(0, 0, 1),
                ComparisonTriple::new(0, 2, 1),
            ],
        )
        .unwrap()
        .with_gaps(vec![1.0, 2.0])
        .unwrap();
        let zero = FactorPair::zeros(1, 3, 2);
        assert_eq!(pairwise_accuracy(&zero, &test, 0.0).unwrap(), 0.0);
        let f = FactorPair::new(array![[1.0]], array![[3.0], [2.0], [1.0]]).unwrap();
        assert_eq!(pairwise_accuracy(&f, &test, 0.0).unwrap(), 0.5);
        assert_eq!(pairwise_accuracy(&f, &test, 2.0).unwrap(), 0.0);
        assert!(matches!(
            pairwise_accuracy(&f, &test, 5.0),
            Err(Error::UndefinedMetric(_))
        ));
        assert_eq!(
            pairwise_accuracy_per_user(&f, &test, 0.0).unwrap(),
            vec![Some(0.5)]
        );
    }

    #[test]
    fn mean_skips_undefined() {
        let s = mean_metric_over_users(&[Some(0.2), None, Some(0.4)]).unwrap();
        assert!((s.mean - 0.3).abs() < 1e-15);
        assert_eq!((s.users, s.skipped), (2, 1));
        assert_eq!(mean_metric_over_users(&[Some(0.7)]).unwrap().mean, 0.7);
        assert!(mean_metric_over_users(&[None]).is_err());
    }

    #[test]
    fn precision_universe_excludes_training_items() {
        // item 0 scores highest but is a training item
        let f = FactorPair::new(array![[1.0]], array![[9.0], [3.0], [2.0], [1.0]]).unwrap();
        let train = ratings(4, &[(0, 1.0)]);
        let test = ratings(4, &[(2, 1.0)]);
        let p = precision_per_user(&f, &train, &test, &[1, 2]).unwrap();
        assert_eq!(p, vec![Some(vec![0.0, 0.5])]);
    }
}
