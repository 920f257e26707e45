//! Exact expected risk, KL divergence rate and the excess-risk scaling
//! experiment.

use ndarray::{Array2, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::btl::{random_low_rank_scores, sample_btl, sample_btl_with_replacement, BtlModel};
use super::report::{mean_and_stderr, power_fit, ScalingPoint, ScalingReport, ScalingSeries};
use crate::altsvm::{train_altsvm, AltSvmConfig};
use crate::error::{Error, Result};
use crate::loss::{sigmoid, softplus, LossKind};

fn check_shape(x: &ArrayView2<f64>, d1: usize, d2: usize) -> Result<()> {
    if x.dim() != (d1, d2) {
        return Err(Error::DimensionMismatch(format!(
            "score matrix is {:?}, model is {d1}x{d2}",
            x.dim()
        )));
    }
    Ok(())
}

/// `R(X) = 1/(d1 d2^2) sum_{i,j,k} E[L(Y_ijk (X_ij - X_ik))]` under the
/// model's true scores, by exact enumeration. The `j = k` terms contribute
/// `L(0)` each and are skipped when `include_diagonal` is false; the
/// normalization stays `1/(d1 d2^2)` either way.
pub fn expected_risk(
    x: ArrayView2<f64>,
    model: &BtlModel,
    loss: LossKind,
    include_diagonal: bool,
) -> Result<f64> {
    let (d1, d2) = (model.d1(), model.d2());
    check_shape(&x, d1, d2)?;
    let star = model.true_scores();
    let total: f64 = (0..d1)
        .into_par_iter()
        .map(|i| {
            let mut sum = 0.0;
            for j in 0..d2 {
                // (j, k) and (k, j) have mirrored deltas and coins, so the
                // unordered pair counts twice
                for k in j + 1..d2 {
                    let delta = x[[i, j]] - x[[i, k]];
                    let f = sigmoid(star[[i, j]] - star[[i, k]]);
                    sum += 2.0 * (f * loss.value(delta) + (1.0 - f) * loss.value(-delta));
                }
            }
            sum
        })
        .sum();
    let diagonal = if include_diagonal {
        (d1 * d2) as f64 * loss.value(0.0)
    } else {
        0.0
    };
    Ok((total + diagonal) / (d1 * d2 * d2) as f64)
}

/// `KL(Bern(sigmoid(a)) || Bern(sigmoid(b)))` computed in logit space.
pub fn bernoulli_kl_logits(a: f64, b: f64) -> f64 {
    let p = sigmoid(a);
    // log p = -softplus(-a), log(1 - p) = -softplus(a)
    let kl = p * (softplus(-b) - softplus(-a)) + (1.0 - p) * (softplus(b) - softplus(a));
    kl.max(0.0)
}

/// `1/(d1 d2^2) sum_{i, j != k} KL(P_{X*}(. | i,j,k) || P_{X_hat}(. | i,j,k))`.
pub fn kl_divergence_rate(x_hat: ArrayView2<f64>, x_star: ArrayView2<f64>) -> Result<f64> {
    if x_hat.dim() != x_star.dim() {
        return Err(Error::DimensionMismatch(format!(
            "estimate is {:?}, truth is {:?}",
            x_hat.dim(),
            x_star.dim()
        )));
    }
    let (d1, d2) = x_star.dim();
    let total: f64 = (0..d1)
        .into_par_iter()
        .map(|i| {
            let mut sum = 0.0;
            for j in 0..d2 {
                for k in j + 1..d2 {
                    sum += bernoulli_kl_logits(
                        x_star[[i, j]] - x_star[[i, k]],
                        x_hat[[i, j]] - x_hat[[i, k]],
                    );
                }
            }
            2.0 * sum
        })
        .sum();
    Ok(total / (d1 * d2 * d2) as f64)
}

/// How the regularization weight of the fit depends on the sample size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum PenaltySchedule {
    Fixed {
        lambda: f64,
    },
    /// `lambda = c * sqrt(m (d1 + d2) / (d1 d2))`, the order of the
    /// spectral norm of the loss gradient at the truth.
    NoiseMatched {
        c: f64,
    },
}

impl PenaltySchedule {
    pub fn lambda(&self, m: f64, d1: usize, d2: usize) -> f64 {
        match *self {
            PenaltySchedule::Fixed { lambda } => lambda,
            PenaltySchedule::NoiseMatched { c } => {
                c * (m * (d1 + d2) as f64 / (d1 * d2) as f64).sqrt()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RiskScalingParams {
    pub d1: usize,
    pub d2: usize,
    /// Rank of the true score matrix.
    pub rank: usize,
    /// Rank of the fitted factors; `None` uses `rank`.
    pub fit_rank: Option<usize>,
    pub penalty: PenaltySchedule,
    pub m_grid: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub max_outer_iters: usize,
    pub tolerance: f64,
}

impl Default for RiskScalingParams {
    fn default() -> Self {
        Self {
            d1: 40,
            d2: 40,
            rank: 2,
            fit_rank: None,
            penalty: PenaltySchedule::NoiseMatched { c: 1.0 },
            m_grid: vec![1000, 2000, 4000, 10000],
            trials: 20,
            seed: 0,
            max_outer_iters: 200,
            tolerance: 1e-6,
        }
    }
}

/// Excess risk `R(X_hat) - R(X*)` of one logistic-MLE fit on `m` expected
/// BTL comparisons.
pub fn excess_risk_trial(params: &RiskScalingParams, m: usize, trial_seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
    let x_star = random_low_rank_scores(params.d1, params.d2, params.rank, 1.0, &mut rng);
    let model = BtlModel::with_budget(x_star, m as f64)?;
    let data = sample_btl(&model, trial_seed ^ 0x5EED)?;
    let (fit, _) = train_altsvm(&data, &fit_config(params, m, trial_seed))?;
    let x_hat: Array2<f64> = fit.to_dense();
    let risk_hat = expected_risk(x_hat.view(), &model, LossKind::LogisticMle, true)?;
    let risk_star = expected_risk(
        model.true_scores().view(),
        &model,
        LossKind::LogisticMle,
        true,
    )?;
    Ok(risk_hat - risk_star)
}

/// KL rates of a fit and of the all-zero matrix against the truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KlTrial {
    pub fit: f64,
    pub zero: f64,
}

/// Fits a logistic MLE on `m` comparisons drawn with replacement and compares
/// its KL rate to that of predicting every pair as a coin flip.
pub fn kl_rate_trial(params: &RiskScalingParams, m: usize, trial_seed: u64) -> Result<KlTrial> {
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
    let x_star = random_low_rank_scores(params.d1, params.d2, params.rank, 1.0, &mut rng);
    let data = sample_btl_with_replacement(&x_star, m, trial_seed ^ 0x5EED)?;
    let (fit, _) = train_altsvm(&data, &fit_config(params, m, trial_seed))?;
    let x_hat = fit.to_dense();
    let zero = Array2::zeros(x_star.dim());
    Ok(KlTrial {
        fit: kl_divergence_rate(x_hat.view(), x_star.view())?,
        zero: kl_divergence_rate(zero.view(), x_star.view())?,
    })
}

fn fit_config(params: &RiskScalingParams, m: usize, seed: u64) -> AltSvmConfig {
    AltSvmConfig {
        rank: params.fit_rank.unwrap_or(params.rank),
        lambda: params.penalty.lambda(m as f64, params.d1, params.d2),
        loss: LossKind::LogisticMle,
        max_outer_iters: params.max_outer_iters,
        tolerance: params.tolerance,
        workers: 1,
        seed,
        ..AltSvmConfig::default()
    }
}

/// Mean excess risk per `m`, with a log-log power fit. Trial `t` at grid
/// point `g` is seeded from `(seed, g, t)`; results do not depend on the
/// number of threads.
pub fn excess_risk_scaling_experiment(params: &RiskScalingParams) -> Result<ScalingReport> {
    if params.trials == 0 || params.m_grid.is_empty() {
        return Err(Error::InvalidConfig(
            "need at least one trial and one grid point".into(),
        ));
    }
    let mut points = Vec::with_capacity(params.m_grid.len());
    for (g, &m) in params.m_grid.iter().enumerate() {
        let risks: Vec<f64> = (0..params.trials)
            .into_par_iter()
            .map(|t| excess_risk_trial(params, m, trial_seed(params.seed, g, t)))
            .collect::<Result<_>>()?;
        let (mean, stderr) = mean_and_stderr(&risks);
        log::info!("m = {m}: mean excess risk {mean:.5} (stderr {stderr:.5})");
        points.push(ScalingPoint {
            x: m as f64,
            mean,
            stderr,
            n: risks.len(),
        });
    }
    let fit = power_fit(&points);
    Ok(ScalingReport {
        experiment: "risk-scaling".into(),
        params: serde_json::to_value(params).expect("params serialize"),
        series: vec![ScalingSeries {
            name: "excess_risk_vs_m".into(),
            x_label: "m".into(),
            y_label: "excess risk".into(),
            points,
            fit,
        }],
    })
}

pub(crate) fn trial_seed(seed: u64, grid: usize, trial: usize) -> u64 {
    crate::altsvm::mix_seed(&[seed, grid as u64, trial as u64])
}
