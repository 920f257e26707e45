//! Single-coordinate dual steps, dual objectives and primal-dual linkage.
//!
//! Both block subproblems share one scalar step: with `q = |A_t|^2` (the
//! squared norm of the triple's feature direction) and `b` the current
//! margin, minimize over `delta`
//!
//! ```text
//! q/2 delta^2 + b delta + (1/lambda) L*(-lambda (a + delta)),   a + delta >= 0
//! ```
//!
//! For the user block `A_t = Y (v_j - v_k)`; for the item block `A_t`
//! places `Y u_i` on row `j` and `-Y u_i` on row `k`, so `q = 2 |u_i|^2`.

use rayon::prelude::*;

use crate::loss::{sigmoid, LossKind};
use crate::model::{dot, ComparisonSet, FactorPair};

const NEWTON_MAX_ITERS: usize = 100;
const NEWTON_TOL: f64 = 1e-10;

/// Exact minimizer of the scalar dual subproblem for curvature `q >= 0`,
/// current margin `b`, current dual value `dual >= 0`.
pub fn coordinate_delta(loss: LossKind, q: f64, b: f64, dual: f64, lambda: f64) -> f64 {
    match loss {
        LossKind::L2Hinge => ((1.0 - b - 0.5 * lambda * dual) / (q + 0.5 * lambda)).max(-dual),
        LossKind::Logistic | LossKind::LogisticMle => logistic_delta(q, b, dual, lambda),
    }
}

// Stationarity in t = lambda (a + delta) in (0, 1) reads
// q (t/lambda - a) + b + logit(t) = 0. Substituting t = sigmoid(s) gives a
// strictly increasing F(s) = q (sigmoid(s)/lambda - a) + b + s whose root
// lies in [q a - b - q/lambda, q a - b].
fn logistic_delta(q: f64, b: f64, dual: f64, lambda: f64) -> f64 {
    let f = |s: f64| q * (sigmoid(s) / lambda - dual) + b + s;
    let mut lo = q * dual - b - q / lambda;
    let mut hi = q * dual - b;
    if hi - lo <= 0.0 {
        return sigmoid(hi) / lambda - dual;
    }
    let t0 = lambda * dual;
    let mut s = if t0 > 0.0 && t0 < 1.0 {
        (t0 / (1.0 - t0)).ln().clamp(lo, hi)
    } else {
        0.5 * (lo + hi)
    };
    // Newton steps that leave the bracket or fail to halve the previous
    // step fall back to bisection; plain clamping can bounce between the ends.
    let mut prev_step = hi - lo;
    for _ in 0..NEWTON_MAX_ITERS {
        let fs = f(s);
        if fs.abs() <= NEWTON_TOL {
            break;
        }
        if fs > 0.0 {
            hi = s;
        } else {
            lo = s;
        }
        let sig = sigmoid(s);
        let slope = 1.0 + q * sig * (1.0 - sig) / lambda;
        let next = s - fs / slope;
        let next = if next > lo && next < hi && (2.0 * fs).abs() <= (prev_step * slope).abs() {
            next
        } else {
            0.5 * (lo + hi)
        };
        prev_step = (next - s).abs();
        s = next;
        if hi - lo <= NEWTON_TOL * (1.0 + s.abs()) {
            break;
        }
    }
    sigmoid(s) / lambda - dual
}

/// Step for one user-block coordinate: minimizes
/// `1/2 |u + delta g|^2 + (1/lambda) L*(-lambda (alpha + delta))`
/// with `g = Y (v_j - v_k)`.
pub fn user_step_delta(loss: LossKind, u: &[f64], g: &[f64], alpha: f64, lambda: f64) -> f64 {
    coordinate_delta(loss, dot(g, g), dot(g, u), alpha, lambda)
}

/// Step for one item-block coordinate: minimizes
/// `1/2 (|v_j + delta Y u|^2 + |v_k - delta Y u|^2) + (1/lambda) L*(-lambda (beta + delta))`.
pub fn item_step_delta(
    loss: LossKind,
    v_j: &[f64],
    v_k: &[f64],
    u: &[f64],
    y: f64,
    beta: f64,
    lambda: f64,
) -> f64 {
    let b: f64 = y * u
        .iter()
        .zip(v_j.iter().zip(v_k))
        .map(|(a, (p, o))| a * (p - o))
        .sum::<f64>();
    coordinate_delta(loss, 2.0 * dot(u, u), b, beta, lambda)
}

fn conjugate_term(loss: LossKind, duals: &[f64], lambda: f64) -> f64 {
    duals
        .iter()
        .map(|&a| loss.conjugate(-lambda * a))
        .sum::<f64>()
        / lambda
}

/// `U(alpha)`: row `i` is `sum_{t in Omega_i} alpha_t Y_t (v_j - v_k)`.
pub fn users_from_duals(data: &ComparisonSet, factors: &FactorPair, alpha: &[f64]) -> Vec<f64> {
    let r = factors.rank();
    let mut out = vec![0.0; data.d1() * r];
    out.par_chunks_mut(r.max(1))
        .enumerate()
        .for_each(|(i, row)| {
            for &p in data.user_positions(i) {
                let t = &data.triples()[p as usize];
                let w = alpha[p as usize] * t.label.sign();
                if w == 0.0 {
                    continue;
                }
                let vj = factors.item(t.preferred as usize);
                let vk = factors.item(t.other as usize);
                for c in 0..r {
                    row[c] += w * (vj[c] - vk[c]);
                }
            }
        });
    out
}

/// `V(beta)`: row `j` collects `+beta Y u_i` where `j` is preferred and
/// `-beta Y u_i` where it is the other item.
pub fn items_from_duals(data: &ComparisonSet, factors: &FactorPair, beta: &[f64]) -> Vec<f64> {
    let r = factors.rank();
    let mut out = vec![0.0; data.d2() * r];
    out.par_chunks_mut(r.max(1))
        .enumerate()
        .for_each(|(j, row)| {
            for &p in data.item_positions(j) {
                let t = &data.triples()[p as usize];
                let mut w = beta[p as usize] * t.label.sign();
                if w == 0.0 {
                    continue;
                }
                if t.other as usize == j {
                    w = -w;
                }
                let u = factors.user(t.user as usize);
                for c in 0..r {
                    row[c] += w * u[c];
                }
            }
        });
    out
}

/// Overwrites `U` with `U(alpha)` for the current `V`.
pub fn rebuild_users(data: &ComparisonSet, factors: &mut FactorPair, alpha: &[f64]) {
    let rebuilt = users_from_duals(data, factors, alpha);
    factors.user_slice_mut().copy_from_slice(&rebuilt);
}

/// Overwrites `V` with `V(beta)` for the current `U`.
pub fn rebuild_items(data: &ComparisonSet, factors: &mut FactorPair, beta: &[f64]) {
    let rebuilt = items_from_duals(data, factors, beta);
    factors.item_slice_mut().copy_from_slice(&rebuilt);
}

/// User-block dual objective for fixed `V`, evaluated from `alpha` alone:
/// `sum_i 1/2 |U(alpha)_i|^2 + (1/lambda) sum_t L*(-lambda alpha_t)`.
pub fn user_dual_objective(
    data: &ComparisonSet,
    factors: &FactorPair,
    alpha: &[f64],
    loss: LossKind,
    lambda: f64,
) -> f64 {
    let u = users_from_duals(data, factors, alpha);
    0.5 * dot(&u, &u) + conjugate_term(loss, alpha, lambda)
}

/// Item-block dual objective for fixed `U`:
/// `1/2 |V(beta)|_F^2 + (1/lambda) sum_t L*(-lambda beta_t)`.
pub fn item_dual_objective(
    data: &ComparisonSet,
    factors: &FactorPair,
    beta: &[f64],
    loss: LossKind,
    lambda: f64,
) -> f64 {
    let v = items_from_duals(data, factors, beta);
    0.5 * dot(&v, &v) + conjugate_term(loss, beta, lambda)
}

/// `max_i |u_i - U(alpha)_i| / (1 + |u_i|)`.
pub fn user_linkage_residual(data: &ComparisonSet, factors: &FactorPair, alpha: &[f64]) -> f64 {
    let rebuilt = users_from_duals(data, factors, alpha);
    max_row_residual(
        factors.users().as_slice().expect("standard layout"),
        &rebuilt,
        factors.rank(),
    )
}

/// `max_j |v_j - V(beta)_j| / (1 + |v_j|)`.
pub fn item_linkage_residual(data: &ComparisonSet, factors: &FactorPair, beta: &[f64]) -> f64 {
    let rebuilt = items_from_duals(data, factors, beta);
    max_row_residual(
        factors.items().as_slice().expect("standard layout"),
        &rebuilt,
        factors.rank(),
    )
}

fn max_row_residual(current: &[f64], rebuilt: &[f64], r: usize) -> f64 {
    current
        .chunks(r)
        .zip(rebuilt.chunks(r))
        .map(|(a, b)| {
            let diff: f64 = a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt();
            diff / (1.0 + dot(a, a).sqrt())
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ComparisonTriple;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    // Minimizer of a smooth convex function on [lo, hi] by bisection on the
    // sign of a symmetric difference quotient.
    fn convex_argmin(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
        let slope = |x: f64| {
            let h = 1e-7 * (1.0 + x.abs());
            f(x + h) - f(x - h)
        };
        if slope(lo + 1e-7 * (1.0 + lo.abs())) >= 0.0 {
            return lo;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if slope(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    fn user_subproblem(
        loss: LossKind,
        u: &[f64],
        g: &[f64],
        alpha: f64,
        lambda: f64,
    ) -> impl Fn(f64) -> f64 {
        let u = u.to_vec();
        let g = g.to_vec();
        move |d: f64| {
            let quad: f64 = u.iter().zip(&g).map(|(a, b)| (a + d * b).powi(2)).sum();
            0.5 * quad + loss.conjugate(-lambda * (alpha + d)) / lambda
        }
    }

    #[test]
    fn zero_direction_gives_two_over_lambda() {
        for lambda in [0.1, 1.0, 3.0] {
            let d = user_step_delta(LossKind::L2Hinge, &[0.3, -1.0], &[0.0, 0.0], 0.0, lambda);
            assert!((d - 2.0 / lambda).abs() < 1e-12);
            let d = item_step_delta(LossKind::L2Hinge, &[1.0], &[2.0], &[0.0], 1.0, 0.0, lambda);
            assert!((d - 2.0 / lambda).abs() < 1e-12);
        }
    }

    #[test]
    fn fixed_point_and_clamp() {
        // gradient zero at delta = 0: g.u + lambda alpha / 2 = 1
        let d = user_step_delta(LossKind::L2Hinge, &[0.5, 0.0], &[1.0, 0.0], 1.0, 1.0);
        assert!(d.abs() < 1e-15);
        // margin 3 >= 1 with beta = 0 stays inactive
        let d = item_step_delta(LossKind::L2Hinge, &[3.0], &[0.0], &[1.0], 1.0, 0.0, 0.5);
        assert_eq!(d, 0.0);
    }

    #[test]
    fn closed_form_matches_bisection_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..1000 {
            let u: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let g: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let (alpha, lambda) = (0.7, 1.5);
            let d = user_step_delta(LossKind::L2Hinge, &u, &g, alpha, lambda);
            let oracle = convex_argmin(
                user_subproblem(LossKind::L2Hinge, &u, &g, alpha, lambda),
                -alpha,
                50.0,
            );
            assert!((d - oracle).abs() < 1e-8, "{d} vs {oracle}");
        }
    }

    #[test]
    fn logistic_step_matches_bisection_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let r = rng.random_range(1..5);
            let u: Vec<f64> = (0..r).map(|_| rng.random_range(-2.0..2.0)).collect();
            let g: Vec<f64> = (0..r).map(|_| rng.random_range(-2.0..2.0)).collect();
            let lambda = rng.random_range(0.2..4.0);
            let alpha = rng.random_range(0.0..1.0) / lambda;
            let d = user_step_delta(LossKind::Logistic, &u, &g, alpha, lambda);
            let f = user_subproblem(LossKind::Logistic, &u, &g, alpha, lambda);
            let oracle = convex_argmin(&f, -alpha, 1.0 / lambda - alpha);
            assert!(alpha + d >= 0.0 && lambda * (alpha + d) <= 1.0);
            assert!(f(d) <= f(oracle) + 1e-12, "delta {d} oracle {oracle}");
            assert!((d - oracle).abs() < 1e-8, "delta {d} oracle {oracle}");
        }
    }

    #[test]
    fn logistic_step_without_curvature() {
        // q = 0: root s = -b, so lambda (alpha + delta) = sigmoid(-b)
        let d = user_step_delta(LossKind::Logistic, &[1.0], &[0.0], 0.0, 2.0);
        assert!((2.0 * d - 0.5).abs() < 1e-15);
    }

    #[test]
    fn linkage_of_rebuilt_factors_is_exact() {
        let data = ComparisonSet::new(
            2,
            3,
            vec![
                ComparisonTriple::new(0, 0, 1),
                ComparisonTriple::new(1, 2, 0),
                ComparisonTriple::new(0, 2, 1),
            ],
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut f = FactorPair::gaussian(2, 3, 2, 1.0, &mut rng);
        let alpha = [0.5, 1.0, 0.25];
        let beta = [0.1, 0.2, 0.3];
        rebuild_users(&data, &mut f, &alpha);
        assert_eq!(user_linkage_residual(&data, &f, &alpha), 0.0);
        // u_0 = 0.5 (v0 - v1) + 0.25 (v2 - v1)
        for c in 0..2 {
            let want = 0.5 * (f.item(0)[c] - f.item(1)[c]) + 0.25 * (f.item(2)[c] - f.item(1)[c]);
            assert!((f.user(0)[c] - want).abs() < 1e-15);
        }
        rebuild_items(&data, &mut f, &beta);
        assert_eq!(item_linkage_residual(&data, &f, &beta), 0.0);
        // v_1 = -0.1 u_0 - 0.3 u_0
        for c in 0..2 {
            assert!((f.item(1)[c] + 0.4 * f.user(0)[c]).abs() < 1e-15);
        }
        let obj = item_dual_objective(&data, &f, &beta, LossKind::L2Hinge, 1.0);
        let conj: f64 = beta.iter().map(|b| -b + b * b / 4.0).sum();
        let v_sq: f64 = f.items().iter().map(|x| x * x).sum();
        assert!((obj - (0.5 * v_sq + conj)).abs() < 1e-12);
    }
}
