//! AltSVM: alternating minimization over `V` and `U`, each block solved as
//! an SVM in its dual by stochastic coordinate descent.
//!
//! Every outer iteration rebuilds `V` from `beta`, runs an item pass,
//! rebuilds `U` from `alpha` and runs a user pass. Duals carry over between
//! iterations, so each pass warm-starts from the previous solution.

mod dual;
mod pass;

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use dual::{
    coordinate_delta, item_dual_objective, item_linkage_residual, item_step_delta,
    items_from_duals, rebuild_items, rebuild_users, user_dual_objective, user_linkage_residual,
    user_step_delta, users_from_duals,
};

use crate::error::{Error, Result};
use crate::loss::LossKind;
use crate::model::{primal_objective, ComparisonSet, FactorPair};
use crate::trace::{relative_change, ConvergenceTrace};
pub(crate) use pass::mix_seed;
use pass::{run_pass, step_at, Block};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AltSvmConfig {
    pub rank: usize,
    pub lambda: f64,
    pub loss: LossKind,
    /// Coordinate steps per pass, shared across workers. `None` means one
    /// expected epoch (`|Omega|` steps).
    pub inner_steps_per_pass: Option<usize>,
    pub max_outer_iters: usize,
    /// Stop when the relative change of the primal objective between outer
    /// iterations falls below this.
    pub tolerance: f64,
    pub workers: usize,
    pub seed: u64,
    /// Standard deviation of the initial `U`; `None` means `1/sqrt(rank)`.
    pub init_scale: Option<f64>,
}

impl Default for AltSvmConfig {
    fn default() -> Self {
        Self {
            rank: 10,
            lambda: 1.0,
            loss: LossKind::L2Hinge,
            inner_steps_per_pass: None,
            max_outer_iters: 50,
            tolerance: 1e-5,
            workers: 1,
            seed: 0,
            init_scale: None,
        }
    }
}

impl AltSvmConfig {
    pub fn new(rank: usize, lambda: f64) -> Self {
        Self {
            rank,
            lambda,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.rank == 0 {
            return bad("rank must be at least 1".into());
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be positive, got {}", self.lambda));
        }
        if self.inner_steps_per_pass == Some(0) {
            return bad("inner steps per pass must be positive".into());
        }
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return bad(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            ));
        }
        if self.workers == 0 {
            return bad("workers must be at least 1".into());
        }
        if let Some(s) = self.init_scale {
            if !(s > 0.0 && s.is_finite()) {
                return bad(format!("init scale must be positive, got {s}"));
            }
        }
        Ok(())
    }

    pub fn init_scale(&self) -> f64 {
        self.init_scale.unwrap_or(1.0 / (self.rank as f64).sqrt())
    }

    pub fn steps_per_pass(&self, data: &ComparisonSet) -> usize {
        self.inner_steps_per_pass.unwrap_or(data.len())
    }
}

/// Dual variables, one `alpha` (user block) and one `beta` (item block) per
/// comparison, all non-negative.
#[derive(Debug, Clone, PartialEq)]
pub struct DualState {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

impl DualState {
    pub fn zeros(m: usize) -> Self {
        Self {
            alpha: vec![0.0; m],
            beta: vec![0.0; m],
        }
    }

    pub fn is_feasible(&self, loss: LossKind, lambda: f64) -> bool {
        let hi = loss.dual_upper_bound();
        self.alpha
            .iter()
            .chain(&self.beta)
            .all(|&a| a >= 0.0 && lambda * a <= hi * (1.0 + 1e-12))
    }
}

const PASS_ITEMS: u64 = 1;
const PASS_USERS: u64 = 2;

/// One user pass with `V` fixed. The caller is responsible for the
/// pass-start rebuild of `U` from `alpha`.
pub fn run_user_pass(
    data: &ComparisonSet,
    factors: &mut FactorPair,
    duals: &mut DualState,
    config: &AltSvmConfig,
    iter: usize,
) {
    let seed = mix_seed(&[config.seed, iter as u64, PASS_USERS]);
    run_pass(
        Block::Users,
        data,
        factors,
        duals,
        config,
        config.steps_per_pass(data),
        seed,
    );
}

/// One item pass with `U` fixed. The caller is responsible for the
/// pass-start rebuild of `V` from `beta`.
pub fn run_item_pass(
    data: &ComparisonSet,
    factors: &mut FactorPair,
    duals: &mut DualState,
    config: &AltSvmConfig,
    iter: usize,
) {
    let seed = mix_seed(&[config.seed, iter as u64, PASS_ITEMS]);
    run_pass(
        Block::Items,
        data,
        factors,
        duals,
        config,
        config.steps_per_pass(data),
        seed,
    );
}

/// Coordinate step on `alpha[pos]`, updating `u_i` in place.
pub fn user_coordinate_step(
    data: &ComparisonSet,
    factors: &mut FactorPair,
    duals: &mut DualState,
    loss: LossKind,
    lambda: f64,
    pos: usize,
) {
    step_at(Block::Users, data, factors, duals, loss, lambda, pos);
}

/// Coordinate step on `beta[pos]`, updating `v_j` and `v_k` in place.
pub fn item_coordinate_step(
    data: &ComparisonSet,
    factors: &mut FactorPair,
    duals: &mut DualState,
    loss: LossKind,
    lambda: f64,
    pos: usize,
) {
    step_at(Block::Items, data, factors, duals, loss, lambda, pos);
}

fn check_inputs(data: &ComparisonSet, config: &AltSvmConfig) -> Result<()> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyInput("no comparisons to train on".into()));
    }
    Ok(())
}

fn record(
    trace: &mut ConvergenceTrace,
    iter: usize,
    objective: f64,
    started: Instant,
) -> Result<()> {
    if !objective.is_finite() {
        return Err(Error::Divergence {
            context: format!(
                "outer iteration {iter}; more inner steps per pass or a larger lambda may help"
            ),
            value: objective,
        });
    }
    trace.push(iter, objective, started);
    log::info!(
        "iter {iter}: primal objective {objective:.6e} ({:.2}s)",
        started.elapsed().as_secs_f64()
    );
    Ok(())
}

/// Fits `U` and `V` by alternating item and user passes. The trace holds
/// the initial objective (iteration 0) and one record per outer iteration.
pub fn train_altsvm(
    data: &ComparisonSet,
    config: &AltSvmConfig,
) -> Result<(FactorPair, ConvergenceTrace)> {
    check_inputs(data, config)?;
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut factors = FactorPair::gaussian(
        data.d1(),
        data.d2(),
        config.rank,
        config.init_scale(),
        &mut rng,
    );
    factors.item_slice_mut().fill(0.0);
    let mut duals = DualState::zeros(data.len());
    let mut trace = ConvergenceTrace::default();
    let mut prev = primal_objective(&factors, data, config.loss, config.lambda)?;
    record(&mut trace, 0, prev, started)?;
    for iter in 1..=config.max_outer_iters {
        rebuild_items(data, &mut factors, &duals.beta);
        run_item_pass(data, &mut factors, &mut duals, config, iter);
        rebuild_users(data, &mut factors, &duals.alpha);
        run_user_pass(data, &mut factors, &mut duals, config, iter);
        let obj = primal_objective(&factors, data, config.loss, config.lambda)?;
        record(&mut trace, iter, obj, started)?;
        if relative_change(prev, obj) < config.tolerance {
            trace.converged = true;
            break;
        }
        prev = obj;
    }
    Ok((factors, trace))
}

/// Global ranking baseline: every `u_i` is the all-ones vector and only
/// item passes run, so all users share one item ordering.
pub fn train_global(
    data: &ComparisonSet,
    config: &AltSvmConfig,
) -> Result<(FactorPair, ConvergenceTrace)> {
    check_inputs(data, config)?;
    let started = Instant::now();
    let mut factors = FactorPair::zeros(data.d1(), data.d2(), config.rank);
    factors.user_slice_mut().fill(1.0);
    let mut duals = DualState::zeros(data.len());
    let mut trace = ConvergenceTrace::default();
    let mut prev = primal_objective(&factors, data, config.loss, config.lambda)?;
    record(&mut trace, 0, prev, started)?;
    for iter in 1..=config.max_outer_iters {
        rebuild_items(data, &mut factors, &duals.beta);
        run_item_pass(data, &mut factors, &mut duals, config, iter);
        let obj = primal_objective(&factors, data, config.loss, config.lambda)?;
        record(&mut trace, iter, obj, started)?;
        if relative_change(prev, obj) < config.tolerance {
            trace.converged = true;
            break;
        }
        prev = obj;
    }
    Ok((factors, trace))
}
