//! Stochastic dual coordinate passes.
//!
//! With one worker the pass works on plain slices and is bitwise
//! deterministic. With several workers the written rows and duals are
//! shared as relaxed atomics and updated without locks: reads may be stale
//! or mix old and new entries of a row, which the algorithm tolerates.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{dual::coordinate_delta, AltSvmConfig, DualState};
use crate::loss::LossKind;
use crate::model::{ComparisonSet, FactorPair};

trait Store {
    fn load(&self, idx: usize) -> f64;
    fn store(&mut self, idx: usize, value: f64);
}

impl Store for &mut [f64] {
    #[inline]
    fn load(&self, idx: usize) -> f64 {
        self[idx]
    }

    #[inline]
    fn store(&mut self, idx: usize, value: f64) {
        self[idx] = value;
    }
}

#[derive(Clone, Copy)]
struct Shared<'a>(&'a [AtomicU64]);

impl Store for Shared<'_> {
    #[inline]
    fn load(&self, idx: usize) -> f64 {
        f64::from_bits(self.0[idx].load(Ordering::Relaxed))
    }

    #[inline]
    fn store(&mut self, idx: usize, value: f64) {
        self.0[idx].store(value.to_bits(), Ordering::Relaxed);
    }
}

fn to_atomic(xs: &[f64]) -> Vec<AtomicU64> {
    xs.iter().map(|x| AtomicU64::new(x.to_bits())).collect()
}

fn from_atomic(src: Vec<AtomicU64>, dst: &mut [f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d = f64::from_bits(s.into_inner());
    }
}

#[derive(Clone, Copy)]
pub(crate) enum Block {
    Users,
    Items,
}

/// Inputs a single coordinate step needs besides the mutable state.
struct StepCtx<'a> {
    data: &'a ComparisonSet,
    // the factor matrix that stays fixed during the pass
    fixed: &'a [f64],
    rank: usize,
    loss: LossKind,
    lambda: f64,
}

impl StepCtx<'_> {
    #[inline]
    fn user_step<R: Store, D: Store>(
        &self,
        pos: usize,
        users: &mut R,
        alpha: &mut D,
        g: &mut [f64],
    ) {
        let t = &self.data.triples()[pos];
        let r = self.rank;
        let y = t.label.sign();
        let (jo, ko, io) = (
            t.preferred as usize * r,
            t.other as usize * r,
            t.user as usize * r,
        );
        let (mut q, mut b) = (0.0, 0.0);
        for c in 0..r {
            g[c] = y * (self.fixed[jo + c] - self.fixed[ko + c]);
            q += g[c] * g[c];
            b += g[c] * users.load(io + c);
        }
        let a = alpha.load(pos);
        let delta = coordinate_delta(self.loss, q, b, a, self.lambda);
        if delta == 0.0 {
            return;
        }
        alpha.store(pos, a + delta);
        for c in 0..r {
            users.store(io + c, users.load(io + c) + delta * g[c]);
        }
    }

    #[inline]
    fn item_step<R: Store, D: Store>(&self, pos: usize, items: &mut R, beta: &mut D) {
        let t = &self.data.triples()[pos];
        let r = self.rank;
        let y = t.label.sign();
        let (jo, ko, io) = (
            t.preferred as usize * r,
            t.other as usize * r,
            t.user as usize * r,
        );
        let u = &self.fixed[io..io + r];
        let (mut q, mut b) = (0.0, 0.0);
        for c in 0..r {
            q += u[c] * u[c];
            b += u[c] * (items.load(jo + c) - items.load(ko + c));
        }
        let a = beta.load(pos);
        let delta = coordinate_delta(self.loss, 2.0 * q, y * b, a, self.lambda);
        if delta == 0.0 {
            return;
        }
        beta.store(pos, a + delta);
        let s = delta * y;
        for c in 0..r {
            items.store(jo + c, items.load(jo + c) + s * u[c]);
            items.store(ko + c, items.load(ko + c) - s * u[c]);
        }
    }

    fn run<R: Store, D: Store>(
        &self,
        block: Block,
        steps: usize,
        rng: &mut ChaCha8Rng,
        rows: &mut R,
        duals: &mut D,
    ) {
        let m = self.data.len();
        let mut g = vec![0.0; self.rank];
        for _ in 0..steps {
            let pos = rng.random_range(0..m);
            match block {
                Block::Users => self.user_step(pos, rows, duals, &mut g),
                Block::Items => self.item_step(pos, rows, duals),
            }
        }
    }
}

/// splitmix64 finalizer applied over the parts in order.
pub(crate) fn mix_seed(parts: &[u64]) -> u64 {
    let mut h = 0x9E37_79B9_7F4A_7C15u64;
    for &p in parts {
        let mut z = h ^ p.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        h = z ^ (z >> 31);
    }
    h
}

/// Runs `steps` sampled coordinate steps on one block. `U` stays fixed
/// during an item pass and `V` during a user pass.
pub(crate) fn run_pass(
    block: Block,
    data: &ComparisonSet,
    factors: &mut FactorPair,
    duals: &mut DualState,
    config: &AltSvmConfig,
    steps: usize,
    pass_seed: u64,
) {
    if steps == 0 || data.is_empty() {
        return;
    }
    let rank = factors.rank();
    let (users, items) = factors.slices_mut();
    let (rows, fixed, dual): (&mut [f64], &[f64], &mut [f64]) = match block {
        Block::Users => (users, items, &mut duals.alpha),
        Block::Items => (items, users, &mut duals.beta),
    };
    let ctx = StepCtx {
        data,
        fixed,
        rank,
        loss: config.loss,
        lambda: config.lambda,
    };
    let workers = config.workers.max(1);
    if workers == 1 {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[pass_seed, 0]));
        let (mut rows, mut dual) = (rows, dual);
        ctx.run(block, steps, &mut rng, &mut rows, &mut dual);
        return;
    }
    let shared_rows = to_atomic(rows);
    let shared_dual = to_atomic(dual);
    std::thread::scope(|scope| {
        for w in 0..workers {
            let share = steps / workers + usize::from(w < steps % workers);
            let ctx = &ctx;
            let mut rows = Shared(&shared_rows);
            let mut dual = Shared(&shared_dual);
            scope.spawn(move || {
                let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[pass_seed, w as u64]));
                ctx.run(block, share, &mut rng, &mut rows, &mut dual);
            });
        }
    });
    from_atomic(shared_rows, rows);
    from_atomic(shared_dual, dual);
}

/// Applies the single coordinate step for triple `pos` in the given block,
/// exactly as a one-worker pass would.
pub(crate) fn step_at(
    block: Block,
    data: &ComparisonSet,
    factors: &mut FactorPair,
    duals: &mut DualState,
    loss: LossKind,
    lambda: f64,
    pos: usize,
) {
    let rank = factors.rank();
    let (users, items) = factors.slices_mut();
    match block {
        Block::Users => {
            let ctx = StepCtx {
                data,
                fixed: items,
                rank,
                loss,
                lambda,
            };
            let (mut rows, mut dual) = (users, &mut duals.alpha[..]);
            ctx.user_step(pos, &mut rows, &mut dual, &mut vec![0.0; rank]);
        }
        Block::Items => {
            let ctx = StepCtx {
                data,
                fixed: users,
                rank,
                loss,
                lambda,
            };
            let (mut rows, mut dual) = (items, &mut duals.beta[..]);
            ctx.item_step(pos, &mut rows, &mut dual);
        }
    }
}
