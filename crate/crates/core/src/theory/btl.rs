//! Bradley-Terry-Luce comparison model and samplers.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};

use crate::error::{Error, Result};
use crate::loss::sigmoid;
use crate::model::{ComparisonSet, ComparisonTriple, Label};

/// Inclusion probabilities `p_ijk` of the ordered triples with `j != k`.
#[derive(Debug, Clone, PartialEq)]
pub enum SamplingProbs {
    /// Every triple with the same probability.
    Uniform { p: f64 },
    /// One probability per `(i, j, k)`, laid out as `(i * d2 + j) * d2 + k`.
    /// Diagonal entries are ignored.
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone)]
pub struct BtlModel {
    true_scores: Array2<f64>,
    sampling: SamplingProbs,
}

impl BtlModel {
    pub fn new(true_scores: Array2<f64>, sampling: SamplingProbs) -> Result<Self> {
        let (d1, d2) = true_scores.dim();
        if d1 == 0 || d2 < 2 {
            return Err(Error::InvalidConfig(format!(
                "need d1 >= 1 and d2 >= 2, got {d1}x{d2}"
            )));
        }
        if true_scores.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidConfig("true scores must be finite".into()));
        }
        let valid = |p: f64| (0.0..=1.0).contains(&p);
        match &sampling {
            SamplingProbs::Uniform { p } if !valid(*p) => {
                return Err(Error::InvalidConfig(format!(
                    "sampling probability {p} outside [0, 1]"
                )));
            }
            SamplingProbs::Explicit(ps) => {
                if ps.len() != d1 * d2 * d2 {
                    return Err(Error::DimensionMismatch(format!(
                        "{} probabilities for {d1} x {d2} x {d2} triples",
                        ps.len()
                    )));
                }
                if let Some(p) = ps.iter().find(|p| !valid(**p)) {
                    return Err(Error::InvalidConfig(format!(
                        "sampling probability {p} outside [0, 1]"
                    )));
                }
            }
            _ => {}
        }
        Ok(Self {
            true_scores,
            sampling,
        })
    }

    /// Uniform sampling with `m` expected comparisons.
    pub fn with_budget(true_scores: Array2<f64>, m: f64) -> Result<Self> {
        let (d1, d2) = true_scores.dim();
        let triples = (d1 * d2 * d2.saturating_sub(1)) as f64;
        Self::new(true_scores, SamplingProbs::Uniform { p: m / triples })
    }

    pub fn d1(&self) -> usize {
        self.true_scores.nrows()
    }

    pub fn d2(&self) -> usize {
        self.true_scores.ncols()
    }

    pub fn true_scores(&self) -> &Array2<f64> {
        &self.true_scores
    }

    pub fn sampling(&self) -> &SamplingProbs {
        &self.sampling
    }

    pub fn prob(&self, i: usize, j: usize, k: usize) -> f64 {
        if j == k {
            return 0.0;
        }
        match &self.sampling {
            SamplingProbs::Uniform { p } => *p,
            SamplingProbs::Explicit(ps) => ps[(i * self.d2() + j) * self.d2() + k],
        }
    }

    /// `P(Y_ijk = +1)`, the probability that `j` is preferred to `k`.
    pub fn preference_probability(&self, i: usize, j: usize, k: usize) -> f64 {
        sigmoid(self.true_scores[[i, j]] - self.true_scores[[i, k]])
    }

    /// Expected number of observed comparisons.
    pub fn expected_m(&self) -> f64 {
        let (d1, d2) = (self.d1(), self.d2());
        match &self.sampling {
            SamplingProbs::Uniform { p } => p * (d1 * d2 * (d2 - 1)) as f64,
            SamplingProbs::Explicit(_) => self.row_budgets().iter().sum(),
        }
    }

    // sum_k p_ijk for every (i, j)
    fn row_budgets(&self) -> Vec<f64> {
        let (d1, d2) = (self.d1(), self.d2());
        (0..d1 * d2)
            .map(|ij| (0..d2).map(|k| self.prob(ij / d2, ij % d2, k)).sum())
            .collect()
    }

    /// Smallest `kappa` with `sum_k p_ijk <= kappa * m / (d1 d2)` for all
    /// `(i, j)`, where `m` is the expected sample size.
    pub fn kappa(&self) -> f64 {
        let m = self.expected_m();
        if m == 0.0 {
            return 0.0;
        }
        let per_pair = m / (self.d1() * self.d2()) as f64;
        self.row_budgets().into_iter().fold(0.0, f64::max) / per_pair
    }
}

/// Draws a BTL label for `(i, j, k)` and returns the canonical triple.
fn labelled<R: Rng>(
    model: &BtlModel,
    i: usize,
    j: usize,
    k: usize,
    rng: &mut R,
) -> ComparisonTriple {
    let label = if rng.random::<f64>() < model.preference_probability(i, j, k) {
        Label::Agrees
    } else {
        Label::Disagrees
    };
    ComparisonTriple::with_label(i as u32, j as u32, k as u32, label).canonical()
}

/// Each ordered triple `(i, j, k)`, `j != k`, enters independently with
/// probability `p_ijk` and receives an independent BTL label.
pub fn sample_btl(model: &BtlModel, seed: u64) -> Result<ComparisonSet> {
    let (d1, d2) = (model.d1(), model.d2());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut triples = Vec::new();
    match model.sampling() {
        SamplingProbs::Uniform { p } => {
            let per_user = d2 * (d2 - 1);
            let total = (d1 * per_user) as u64;
            let decode = |idx: u64| {
                let idx = idx as usize;
                let (i, rest) = (idx / per_user, idx % per_user);
                let (j, kk) = (rest / (d2 - 1), rest % (d2 - 1));
                (i, j, kk + usize::from(kk >= j))
            };
            if *p >= 1.0 {
                for idx in 0..total {
                    let (i, j, k) = decode(idx);
                    triples.push(labelled(model, i, j, k, &mut rng));
                }
            } else if *p > 0.0 {
                let skip = Geometric::new(*p).expect("p in (0, 1)");
                let mut idx = skip.sample(&mut rng);
                while idx < total {
                    let (i, j, k) = decode(idx);
                    triples.push(labelled(model, i, j, k, &mut rng));
                    idx = idx.saturating_add(1).saturating_add(skip.sample(&mut rng));
                }
            }
        }
        SamplingProbs::Explicit(_) => {
            for i in 0..d1 {
                for j in 0..d2 {
                    for k in 0..d2 {
                        if j != k && rng.random::<f64>() < model.prob(i, j, k) {
                            triples.push(labelled(model, i, j, k, &mut rng));
                        }
                    }
                }
            }
        }
    }
    ComparisonSet::new(d1, d2, triples)
}

/// `m` triples drawn uniformly with replacement from all `(i, j, k)` with
/// `j != k`, each with an independent BTL label.
pub fn sample_btl_with_replacement(
    true_scores: &Array2<f64>,
    m: usize,
    seed: u64,
) -> Result<ComparisonSet> {
    let model = BtlModel::new(true_scores.clone(), SamplingProbs::Uniform { p: 0.0 })?;
    let (d1, d2) = true_scores.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let triples = (0..m)
        .map(|_| {
            let i = rng.random_range(0..d1);
            let j = rng.random_range(0..d2);
            let k = (j + rng.random_range(1..d2)) % d2;
            labelled(&model, i, j, k, &mut rng)
        })
        .collect();
    ComparisonSet::new(d1, d2, triples)
}

/// `X* = U* V*^T` with `U*`, `V*` entries drawn uniformly from
/// `{-c/sqrt(r), +c/sqrt(r)}`, so `|X*_ij| <= c^2`.
pub fn random_low_rank_scores<R: Rng + ?Sized>(
    d1: usize,
    d2: usize,
    rank: usize,
    c: f64,
    rng: &mut R,
) -> Array2<f64> {
    let a = c / (rank as f64).sqrt();
    let mut sign = |_| if rng.random::<bool>() { a } else { -a };
    let u = Array2::from_shape_fn((d1, rank), &mut sign);
    let v = Array2::from_shape_fn((d2, rank), &mut sign);
    u.dot(&v.t())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_model_has_fair_coin() {
        let x = Array2::zeros((4, 5));
        let data = sample_btl_with_replacement(&x, 100_000, 3).unwrap();
        // canonical triples keep (j, k) as preferred; count "lower index won"
        let wins = data
            .triples()
            .iter()
            .filter(|t| t.preferred < t.other)
            .count() as f64;
        let n = data.len() as f64;
        assert!((wins / n - 0.5).abs() < 3.0 * (0.25 / n).sqrt());
    }

    #[test]
    fn saturated_preference() {
        let x = Array2::from_shape_fn((3, 2), |(_, j)| if j == 0 { 10.0 } else { 0.0 });
        let data = sample_btl_with_replacement(&x, 20_000, 1).unwrap();
        let frac =
            data.triples().iter().filter(|t| t.preferred == 0).count() as f64 / data.len() as f64;
        assert!(frac >= 0.999);
    }

    #[test]
    fn uniform_sample_size_concentrates() {
        let x = Array2::zeros((10, 10));
        let model = BtlModel::with_budget(x, 300.0).unwrap();
        assert!((model.expected_m() - 300.0).abs() < 1e-9);
        assert!((model.kappa() - 1.0).abs() < 1e-12);
        for seed in 0..20 {
            let data = sample_btl(&model, seed).unwrap();
            assert!(data.is_canonical());
            assert!((data.len() as f64 - 300.0).abs() <= 4.0 * 300f64.sqrt());
        }
    }

    #[test]
    fn full_sampling_covers_every_triple_once() {
        let model =
            BtlModel::new(Array2::zeros((2, 3)), SamplingProbs::Uniform { p: 1.0 }).unwrap();
        let data = sample_btl(&model, 0).unwrap();
        assert_eq!(data.len(), 2 * 3 * 2);
        let mut keys: Vec<_> = data
            .triples()
            .iter()
            .map(|t| (t.user, t.preferred.min(t.other), t.preferred.max(t.other)))
            .collect();
        keys.sort();
        keys.dedup();
        assert_eq!(keys.len(), 2 * 3);
    }

    #[test]
    fn explicit_probabilities_and_kappa() {
        let (d1, d2) = (2, 3);
        let mut ps = vec![0.0; d1 * d2 * d2];
        ps[d2 + 2] = 1.0; // user 0, pair (1, 2)
        let model = BtlModel::new(Array2::zeros((d1, d2)), SamplingProbs::Explicit(ps)).unwrap();
        assert_eq!(model.expected_m(), 1.0);
        // that one entry carries all of m = 1; m / (d1 d2) = 1/6
        assert!((model.kappa() - 6.0).abs() < 1e-12);
        let data = sample_btl(&model, 4).unwrap();
        assert_eq!(data.len(), 1);
        assert!(BtlModel::new(
            Array2::zeros((d1, d2)),
            SamplingProbs::Explicit(vec![0.0; 3])
        )
        .is_err());
    }

    #[test]
    fn low_rank_scores_are_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = random_low_rank_scores(7, 9, 2, 1.0, &mut rng);
        assert_eq!(x.dim(), (7, 9));
        for &v in x.iter() {
            assert!([-1.0, 0.0, 1.0].iter().any(|w| (v - w).abs() < 1e-12));
        }
    }
}
