use rand::seq::index;
use rayon::prelude::*;

use super::{user_rng, Rating, RatingsTable};
use crate::error::{Error, Result};
use crate::model::{ComparisonSet, ComparisonTriple};

/// One comparison per strictly ordered pair of a user's ratings; ties emit
/// nothing. Each triple carries its rating gap.
pub fn ratings_to_comparisons(table: &RatingsTable) -> ComparisonSet {
    let per_user: Vec<Vec<(ComparisonTriple, f64)>> = (0..table.d1())
        .into_par_iter()
        .map(|user| user_pairs(user as u32, table.user_entries(user)))
        .collect();
    assemble(table, per_user)
}

fn user_pairs(user: u32, row: &[Rating]) -> Vec<(ComparisonTriple, f64)> {
    let mut out = Vec::new();
    for (a, ra) in row.iter().enumerate() {
        for rb in &row[a + 1..] {
            if ra.rating > rb.rating {
                out.push((
                    ComparisonTriple::new(user, ra.item, rb.item),
                    ra.rating - rb.rating,
                ));
            } else if rb.rating > ra.rating {
                out.push((
                    ComparisonTriple::new(user, rb.item, ra.item),
                    rb.rating - ra.rating,
                ));
            }
        }
    }
    out
}

fn assemble(table: &RatingsTable, per_user: Vec<Vec<(ComparisonTriple, f64)>>) -> ComparisonSet {
    let total = per_user.iter().map(Vec::len).sum();
    let mut triples = Vec::with_capacity(total);
    let mut gaps = Vec::with_capacity(total);
    for (t, g) in per_user.into_iter().flatten() {
        triples.push(t);
        gaps.push(g);
    }
    ComparisonSet::new(table.d1(), table.d2(), triples)
        .and_then(|s| s.with_gaps(gaps))
        .expect("triples derived from a valid table are valid")
}

/// Number of strictly ordered rating pairs, by direct enumeration of every
/// `(user, item, item)` combination. Quadratic in `d2`; for small tables.
pub fn brute_force_comparison_count(table: &RatingsTable) -> usize {
    let mut count = 0;
    for user in 0..table.d1() {
        for j in 0..table.d2() as u32 {
            for k in 0..table.d2() as u32 {
                if let (Some(a), Some(b)) = (table.rating(user, j), table.rating(user, k)) {
                    if a > b {
                        count += 1;
                    }
                }
            }
        }
    }
    count
}

/// Keeps each user's `per_user` comparisons with the largest rating gap,
/// breaking gap ties by `(preferred, other)` in lexicographic order.
pub fn subsample_comparisons_largest_gap(
    table: &RatingsTable,
    per_user: usize,
) -> Result<ComparisonSet> {
    if per_user == 0 {
        return Err(Error::InvalidConfig(
            "per-user comparison budget must be at least 1".into(),
        ));
    }
    let per_user_sets: Vec<_> = (0..table.d1())
        .into_par_iter()
        .map(|user| {
            let mut pairs = user_pairs(user as u32, table.user_entries(user));
            pairs.sort_by(|(ta, ga), (tb, gb)| {
                gb.total_cmp(ga)
                    .then(ta.preferred.cmp(&tb.preferred))
                    .then(ta.other.cmp(&tb.other))
            });
            pairs.truncate(per_user);
            pairs
        })
        .collect();
    Ok(assemble(table, per_user_sets))
}

/// Uniform per-user subsample without replacement. Surviving comparisons
/// keep their original relative order.
pub fn subsample_comparisons_uniform(
    comparisons: &ComparisonSet,
    per_user: usize,
    seed: u64,
) -> Result<ComparisonSet> {
    if per_user == 0 {
        return Err(Error::InvalidConfig(
            "per-user comparison budget must be at least 1".into(),
        ));
    }
    let mut keep = vec![false; comparisons.len()];
    for user in 0..comparisons.d1() {
        let positions = comparisons.user_positions(user);
        if positions.len() <= per_user {
            for &p in positions {
                keep[p as usize] = true;
            }
        } else {
            let mut rng = user_rng(seed, user);
            for idx in index::sample(&mut rng, positions.len(), per_user) {
                keep[positions[idx] as usize] = true;
            }
        }
    }
    let triples: Vec<_> = comparisons
        .triples()
        .iter()
        .zip(&keep)
        .filter_map(|(t, &k)| k.then_some(*t))
        .collect();
    let set = ComparisonSet::new(comparisons.d1(), comparisons.d2(), triples)?;
    match comparisons.gaps() {
        Some(gaps) => set.with_gaps(
            gaps.iter()
                .zip(&keep)
                .filter_map(|(g, &k)| k.then_some(*g))
                .collect(),
        ),
        None => Ok(set),
    }
}

/// Every present rating becomes 1 (relevant); absent pairs stay absent.
pub fn binarize(table: &RatingsTable) -> RatingsTable {
    let entries = table
        .entries()
        .iter()
        .map(|e| Rating { rating: 1.0, ..*e })
        .collect();
    table
        .with_entries(entries)
        .expect("same entries, same universe")
}

/// For each user, `per_user` distinct (relevant, irrelevant) pairs drawn
/// uniformly without replacement; relevant means rated. Users without
/// relevant or without irrelevant items contribute nothing.
pub fn binary_comparisons(
    table: &RatingsTable,
    per_user: usize,
    seed: u64,
) -> Result<ComparisonSet> {
    if per_user == 0 {
        return Err(Error::InvalidConfig(
            "per-user comparison budget must be at least 1".into(),
        ));
    }
    let d2 = table.d2();
    let per_user_sets: Vec<Vec<(ComparisonTriple, f64)>> = (0..table.d1())
        .into_par_iter()
        .map(|user| {
            let row = table.user_entries(user);
            if row.is_empty() || row.len() == d2 {
                return Vec::new();
            }
            let relevant: Vec<u32> = row.iter().map(|e| e.item).collect();
            let mut irrelevant = Vec::with_capacity(d2 - relevant.len());
            let mut next = relevant.iter().peekable();
            for item in 0..d2 as u32 {
                if next.peek() == Some(&&item) {
                    next.next();
                } else {
                    irrelevant.push(item);
                }
            }
            let total = relevant.len() * irrelevant.len();
            let mut rng = user_rng(seed, user);
            let mut picks = index::sample(&mut rng, total, per_user.min(total)).into_vec();
            picks.sort_unstable();
            picks
                .into_iter()
                .map(|p| {
                    let j = relevant[p / irrelevant.len()];
                    let k = irrelevant[p % irrelevant.len()];
                    (ComparisonTriple::new(user as u32, j, k), 1.0)
                })
                .collect()
        })
        .collect();
    let skipped = (0..table.d1())
        .filter(|&u| {
            let n = table.user_entries(u).len();
            n == 0 || n == d2
        })
        .count();
    if skipped > 0 {
        log::warn!(
            "{skipped} users have no relevant or no irrelevant items and contribute no comparisons"
        );
    }
    Ok(assemble(table, per_user_sets))
}
