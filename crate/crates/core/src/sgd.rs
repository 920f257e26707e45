//! Stochastic gradient baseline on the factored objective.
//!
//! Each sampled triple updates `u_i`, `v_j`, `v_k` simultaneously with the
//! regularizer split evenly over the comparisons a row takes part in
//! (`lambda/|Omega_i|` for users, `lambda/|Omega^(j)|` for items), so one
//! epoch applies the full penalty in expectation.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::LossKind;
use crate::model::{primal_objective, ComparisonSet, ComparisonTriple, FactorPair};
use crate::trace::ConvergenceTrace;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SgdConfig {
    pub rank: usize,
    pub lambda: f64,
    pub loss: LossKind,
    /// Step size numerator in `eta_t = alpha0 / (1 + beta0 t)`.
    pub alpha0: f64,
    pub beta0: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        Self {
            rank: 10,
            lambda: 1.0,
            loss: LossKind::L2Hinge,
            alpha0: 0.01,
            beta0: 0.001,
            epochs: 20,
            seed: 0,
        }
    }
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rank == 0 {
            return Err(Error::InvalidConfig("rank must be at least 1".into()));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "lambda must be non-negative, got {}",
                self.lambda
            )));
        }
        if !(self.alpha0 > 0.0 && self.alpha0.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "alpha0 must be positive, got {}",
                self.alpha0
            )));
        }
        if !(self.beta0 >= 0.0 && self.beta0.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "beta0 must be non-negative, got {}",
                self.beta0
            )));
        }
        Ok(())
    }

    pub fn step_size(&self, t: u64) -> f64 {
        self.alpha0 / (1.0 + self.beta0 * t as f64)
    }
}

/// One stochastic step on `triple`. All three rows are updated from their
/// pre-step values.
pub fn sgd_step(
    factors: &mut FactorPair,
    data: &ComparisonSet,
    triple: &ComparisonTriple,
    eta: f64,
    lambda: f64,
    loss: LossKind,
) -> Result<()> {
    let (i, j, k) = (
        triple.user as usize,
        triple.preferred as usize,
        triple.other as usize,
    );
    let counts = [data.user_count(i), data.item_count(j), data.item_count(k)];
    if counts.contains(&0) {
        return Err(Error::InvalidComparison(format!(
            "triple ({i}, {j}, {k}) has a row with no comparisons in the data"
        )));
    }
    let r = factors.rank();
    let y = triple.label.sign();
    let (users, items) = factors.slices_mut();
    let u_old: Vec<f64> = users[i * r..(i + 1) * r].to_vec();
    let vj_old: Vec<f64> = items[j * r..(j + 1) * r].to_vec();
    let vk_old: Vec<f64> = items[k * r..(k + 1) * r].to_vec();
    let z: f64 = y
        * (0..r)
            .map(|c| u_old[c] * (vj_old[c] - vk_old[c]))
            .sum::<f64>();
    let g = y * loss.derivative(z);
    let (ci, cj, ck) = (
        lambda / counts[0] as f64,
        lambda / counts[1] as f64,
        lambda / counts[2] as f64,
    );
    for c in 0..r {
        users[i * r + c] = u_old[c] - eta * (g * (vj_old[c] - vk_old[c]) + ci * u_old[c]);
        items[j * r + c] = vj_old[c] - eta * (g * u_old[c] + cj * vj_old[c]);
        items[k * r + c] = vk_old[c] - eta * (-g * u_old[c] + ck * vk_old[c]);
    }
    Ok(())
}

/// Runs `epochs * |Omega|` uniformly sampled steps from a Gaussian start
/// (`1/sqrt(r)` scale for both factors). The trace records the initial
/// objective and the objective after each epoch.
pub fn train_sgd(
    data: &ComparisonSet,
    config: &SgdConfig,
) -> Result<(FactorPair, ConvergenceTrace)> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyInput("no comparisons to train on".into()));
    }
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut factors = FactorPair::gaussian(
        data.d1(),
        data.d2(),
        config.rank,
        1.0 / (config.rank as f64).sqrt(),
        &mut rng,
    );
    let mut trace = ConvergenceTrace::default();
    let objective = |f: &FactorPair, epoch: usize| -> Result<f64> {
        let obj = primal_objective(f, data, config.loss, config.lambda)?;
        if !obj.is_finite() {
            return Err(Error::Divergence {
                context: format!(
                    "SGD epoch {epoch} with alpha0 = {}; try a smaller step size",
                    config.alpha0
                ),
                value: obj,
            });
        }
        Ok(obj)
    };
    trace.push(0, objective(&factors, 0)?, started);
    let m = data.len();
    let mut t: u64 = 0;
    for epoch in 1..=config.epochs {
        for _ in 0..m {
            let pos = rng.random_range(0..m);
            sgd_step(
                &mut factors,
                data,
                &data.triples()[pos],
                config.step_size(t),
                config.lambda,
                config.loss,
            )?;
            t += 1;
        }
        let obj = objective(&factors, epoch)?;
        log::info!("epoch {epoch}: primal objective {obj:.6e}");
        trace.push(epoch, obj, started);
    }
    Ok((factors, trace))
}

/// Outcome of [`sweep_sgd`]: the winning configuration and its fit.
#[derive(Debug, Clone)]
pub struct SgdSweep {
    pub best: SgdConfig,
    pub factors: FactorPair,
    pub trace: ConvergenceTrace,
    /// `(alpha0, beta0, final objective or None if diverged)` per grid point.
    pub grid: Vec<(f64, f64, Option<f64>)>,
}

/// Trains every `(alpha0, beta0)` combination and keeps the one with the
/// lowest final training objective. Diverging combinations are skipped.
pub fn sweep_sgd(
    data: &ComparisonSet,
    base: &SgdConfig,
    alphas: &[f64],
    betas: &[f64],
) -> Result<SgdSweep> {
    let mut best: Option<(f64, SgdConfig, FactorPair, ConvergenceTrace)> = None;
    let mut grid = Vec::new();
    for &alpha0 in alphas {
        for &beta0 in betas {
            let config = SgdConfig {
                alpha0,
                beta0,
                ..base.clone()
            };
            match train_sgd(data, &config) {
                Ok((factors, trace)) => {
                    let obj = trace
                        .last_objective()
                        .expect("trace has the initial record");
                    grid.push((alpha0, beta0, Some(obj)));
                    if best.as_ref().is_none_or(|(b, ..)| obj < *b) {
                        best = Some((obj, config, factors, trace));
                    }
                }
                Err(Error::Divergence { .. }) => {
                    log::warn!("SGD diverged at alpha0 = {alpha0}, beta0 = {beta0}");
                    grid.push((alpha0, beta0, None));
                }
                Err(e) => return Err(e),
            }
        }
    }
    let (_, best, factors, trace) = best.ok_or_else(|| Error::Divergence {
        context: "every step size in the SGD sweep".into(),
        value: f64::NAN,
    })?;
    Ok(SgdSweep {
        best,
        factors,
        trace,
        grid,
    })
}

/// `[1, 0.1, ..., 10^-(n-1)]`.
pub fn powers_of_tenth(n: usize) -> Vec<f64> {
    (0..n).map(|e| 10f64.powi(-(e as i32))).collect()
}
