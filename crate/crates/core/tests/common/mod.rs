//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use prefcomp::ingest::{Rating, RatingsTable};
use prefcomp::{ComparisonSet, ComparisonTriple, FactorPair, Label, LossKind};
use rand::Rng;

/// Random comparisons over a `d1 x d2` universe, `j != k`, random labels.
pub fn random_comparisons<R: Rng>(rng: &mut R, d1: usize, d2: usize, m: usize) -> ComparisonSet {
    assert!(d2 >= 2);
    let triples = (0..m)
        .map(|_| {
            let i = rng.random_range(0..d1) as u32;
            let j = rng.random_range(0..d2) as u32;
            let k = (j + rng.random_range(1..d2 as u32)) % d2 as u32;
            let label = if rng.random::<bool>() {
                Label::Agrees
            } else {
                Label::Disagrees
            };
            ComparisonTriple::with_label(i, j, k, label)
        })
        .collect();
    ComparisonSet::new(d1, d2, triples).unwrap()
}

/// A small random instance inside `d1, d2 <= 20`, `m <= 500`.
pub fn small_instance<R: Rng>(rng: &mut R) -> ComparisonSet {
    let d1 = rng.random_range(1..=20);
    let d2 = rng.random_range(2..=20);
    let m = rng.random_range(1..=500);
    random_comparisons(rng, d1, d2, m)
}

pub fn gaussian_factors<R: Rng>(
    rng: &mut R,
    d1: usize,
    d2: usize,
    r: usize,
    scale: f64,
) -> FactorPair {
    FactorPair::gaussian(d1, d2, r, scale, rng)
}

/// Ratings with values in `1..=levels` on a random subset of cells.
pub fn random_table<R: Rng>(
    rng: &mut R,
    d1: usize,
    d2: usize,
    density: f64,
    levels: u32,
) -> RatingsTable {
    let mut entries = Vec::new();
    for user in 0..d1 as u32 {
        for item in 0..d2 as u32 {
            if rng.random::<f64>() < density {
                entries.push(Rating {
                    user,
                    item,
                    rating: rng.random_range(1..=levels) as f64,
                    timestamp: None,
                });
            }
        }
    }
    RatingsTable::new(d1, d2, entries).unwrap()
}

/// Every `(user, preferred, other, gap)` with a strictly higher rating on
/// `preferred`, by a double loop over the user's ratings. Sorted.
pub fn brute_force_comparisons(table: &RatingsTable) -> Vec<(u32, u32, u32, f64)> {
    let mut out = Vec::new();
    for a in table.entries() {
        for b in table.entries() {
            if a.user == b.user && a.rating > b.rating {
                out.push((a.user, a.item, b.item, a.rating - b.rating));
            }
        }
    }
    out.sort_by(|x, y| x.partial_cmp(y).unwrap());
    out
}

pub fn comparisons_as_tuples(set: &ComparisonSet) -> Vec<(u32, u32, u32, f64)> {
    let gaps = set.gaps().expect("gaps attached");
    let mut out: Vec<_> = set
        .triples()
        .iter()
        .zip(gaps)
        .map(|(t, &g)| {
            assert_eq!(t.label, Label::Agrees);
            (t.user, t.preferred, t.other, g)
        })
        .collect();
    out.sort_by(|x, y| x.partial_cmp(y).unwrap());
    out
}

/// Conjugate evaluated at `-t` for `t = lambda * dual`, written out per loss.
pub fn conjugate_at_neg(loss: LossKind, t: f64) -> f64 {
    match loss {
        LossKind::L2Hinge => -t + t * t / 4.0,
        LossKind::Logistic | LossKind::LogisticMle => {
            let xlx = |x: f64| if x == 0.0 { 0.0 } else { x * x.ln() };
            xlx(t) + xlx(1.0 - t)
        }
    }
}

/// `d/d delta [(1/lambda) L*(-lambda (dual + delta))]`.
fn conjugate_slope(loss: LossKind, dual: f64, delta: f64, lambda: f64) -> f64 {
    let t = lambda * (dual + delta);
    match loss {
        LossKind::L2Hinge => -1.0 + t / 2.0,
        LossKind::Logistic | LossKind::LogisticMle => (t / (1.0 - t)).ln(),
    }
}

/// Minimizes a convex scalar function given its derivative by bisection on
/// `[lo, hi]`, returning `lo` when the derivative is already non-negative there.
pub fn bisect_argmin(slope: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    if slope(lo) >= 0.0 {
        return lo;
    }
    while slope(hi) < 0.0 && hi.is_finite() {
        hi = lo + 2.0 * (hi - lo);
    }
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if slope(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

fn feasible_interval(loss: LossKind, dual: f64, lambda: f64) -> (f64, f64) {
    match loss {
        // unbounded above; bisect_argmin grows the bracket
        LossKind::L2Hinge => (-dual, 1.0 - dual),
        // the slope is -inf at the lower end and +inf at the upper end
        LossKind::Logistic | LossKind::LogisticMle => (-dual, 1.0 / lambda - dual),
    }
}

/// Oracle minimizer of `1/2 |u + delta g|^2 + (1/lambda) L*(-lambda (alpha + delta))`.
pub fn user_step_oracle(loss: LossKind, u: &[f64], g: &[f64], alpha: f64, lambda: f64) -> f64 {
    let slope = |d: f64| {
        let quad: f64 = u.iter().zip(g).map(|(a, b)| (a + d * b) * b).sum();
        quad + conjugate_slope(loss, alpha, d, lambda)
    };
    let (lo, hi) = feasible_interval(loss, alpha, lambda);
    bisect_argmin(slope, lo, hi)
}

/// Oracle minimizer of
/// `1/2 (|v_j + delta y u|^2 + |v_k - delta y u|^2) + (1/lambda) L*(-lambda (beta + delta))`.
pub fn item_step_oracle(
    loss: LossKind,
    v_j: &[f64],
    v_k: &[f64],
    u: &[f64],
    y: f64,
    beta: f64,
    lambda: f64,
) -> f64 {
    let slope = |d: f64| {
        let mut s = 0.0;
        for c in 0..u.len() {
            s += (v_j[c] + d * y * u[c]) * y * u[c];
            s -= (v_k[c] - d * y * u[c]) * y * u[c];
        }
        s + conjugate_slope(loss, beta, d, lambda)
    };
    let (lo, hi) = feasible_interval(loss, beta, lambda);
    bisect_argmin(slope, lo, hi)
}

/// User-block dual objective summed over users, from `alpha` and `V` only.
pub fn user_dual_oracle(
    data: &ComparisonSet,
    factors: &FactorPair,
    alpha: &[f64],
    loss: LossKind,
    lambda: f64,
) -> f64 {
    let r = factors.rank();
    let mut rows = vec![vec![0.0; r]; data.d1()];
    let mut conj = 0.0;
    for (t, &a) in data.triples().iter().zip(alpha) {
        let y = t.label.sign();
        for c in 0..r {
            rows[t.user as usize][c] +=
                a * y * (factors.item(t.preferred as usize)[c] - factors.item(t.other as usize)[c]);
        }
        conj += conjugate_at_neg(loss, lambda * a) / lambda;
    }
    0.5 * rows.iter().flatten().map(|x| x * x).sum::<f64>() + conj
}

/// Item-block dual objective, from `beta` and `U` only.
pub fn item_dual_oracle(
    data: &ComparisonSet,
    factors: &FactorPair,
    beta: &[f64],
    loss: LossKind,
    lambda: f64,
) -> f64 {
    let r = factors.rank();
    let mut rows = vec![vec![0.0; r]; data.d2()];
    let mut conj = 0.0;
    for (t, &b) in data.triples().iter().zip(beta) {
        let y = t.label.sign();
        let u = factors.user(t.user as usize);
        for c in 0..r {
            rows[t.preferred as usize][c] += b * y * u[c];
            rows[t.other as usize][c] -= b * y * u[c];
        }
        conj += conjugate_at_neg(loss, lambda * b) / lambda;
    }
    0.5 * rows.iter().flatten().map(|x| x * x).sum::<f64>() + conj
}

/// Naive primal objective by a single loop over the triples.
pub fn primal_oracle(
    data: &ComparisonSet,
    factors: &FactorPair,
    loss: LossKind,
    lambda: f64,
) -> f64 {
    let mut total = 0.0;
    for t in data.triples() {
        let u = factors.user(t.user as usize);
        let (vj, vk) = (
            factors.item(t.preferred as usize),
            factors.item(t.other as usize),
        );
        let z: f64 = t.label.sign() * (0..u.len()).map(|c| u[c] * (vj[c] - vk[c])).sum::<f64>();
        total += match loss {
            LossKind::L2Hinge => (1.0 - z).max(0.0).powi(2),
            _ => (1.0 + (-z).exp()).ln(),
        };
    }
    let norms: f64 = factors
        .users()
        .iter()
        .chain(factors.items().iter())
        .map(|x| x * x)
        .sum();
    total + 0.5 * lambda * norms
}

/// All permutations of `0..n` (Heap's algorithm).
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn heap(k: usize, a: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k <= 1 {
            out.push(a.clone());
            return;
        }
        for i in 0..k {
            heap(k - 1, a, out);
            if k.is_multiple_of(2) {
                a.swap(i, k - 1);
            } else {
                a.swap(0, k - 1);
            }
        }
    }
    let mut a: Vec<usize> = (0..n).collect();
    let mut out = Vec::new();
    heap(n, &mut a, &mut out);
    out
}

/// DCG@K of ratings listed in ranked order.
pub fn dcg_oracle(ranked: &[f64], k: usize) -> f64 {
    ranked
        .iter()
        .take(k)
        .enumerate()
        .map(|(pos, &r)| (2f64.powf(r) - 1.0) / ((pos + 2) as f64).log2())
        .sum()
}

/// NDCG@K with the ideal DCG found by trying every ordering.
pub fn ndcg_brute_force(ranked: &[f64], k: usize) -> Option<f64> {
    let best = permutations(ranked.len())
        .into_iter()
        .map(|p| dcg_oracle(&p.iter().map(|&i| ranked[i]).collect::<Vec<_>>(), k))
        .fold(0.0, f64::max);
    (best > 0.0).then(|| dcg_oracle(ranked, k) / best)
}

/// Ranks `0..n` by descending score, ties by ascending index.
pub fn argsort_desc(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
    idx
}

/// Rank-2 BTL task on 30 users x 30 items: Gaussian true factors with
/// standard deviation 1.73, 4000 training and 20000 test comparisons.
/// Returns `(true factors, train, test)`.
pub fn btl_task(seed: u64) -> (FactorPair, ComparisonSet, ComparisonSet) {
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let n = Normal::new(0.0, 1.73).unwrap();
    let u = ndarray::Array2::from_shape_fn((30, 2), |_| n.sample(&mut rng));
    let v = ndarray::Array2::from_shape_fn((30, 2), |_| n.sample(&mut rng));
    let star = FactorPair::new(u, v).unwrap();
    let x = star.to_dense();
    let train = prefcomp::theory::sample_btl_with_replacement(&x, 4000, seed ^ 2).unwrap();
    let test = prefcomp::theory::sample_btl_with_replacement(&x, 20000, seed ^ 3).unwrap();
    (star, train, test)
}
