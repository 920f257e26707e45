//! Margin losses and their Fenchel conjugates.
//!
//! Every loss here is convex and non-increasing in the margin
//! `z = Y * (X_ij - X_ik)`. The conjugates are only finite on a subset of
//! `s <= 0`; outside that set [`LossKind::conjugate`] returns `+inf`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    /// `max(0, 1 - z)^2`
    #[default]
    L2Hinge,
    /// `log(1 + exp(-z))`
    Logistic,
    /// `log(1 + exp(z)) - z`, the negative BTL log-likelihood. Numerically
    /// the same function as [`LossKind::Logistic`].
    LogisticMle,
}

impl LossKind {
    pub fn value(self, z: f64) -> f64 {
        match self {
            LossKind::L2Hinge => {
                let slack = (1.0 - z).max(0.0);
                slack * slack
            }
            LossKind::Logistic | LossKind::LogisticMle => softplus(-z),
        }
    }

    /// Derivative (or the right subgradient at the L2-hinge kink, which is 0).
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            LossKind::L2Hinge => -2.0 * (1.0 - z).max(0.0),
            LossKind::Logistic | LossKind::LogisticMle => -sigmoid(-z),
        }
    }

    /// `sup_x { s*x - L(x) }`; `+inf` where the supremum is unbounded.
    pub fn conjugate(self, s: f64) -> f64 {
        match self {
            LossKind::L2Hinge => {
                if s > 0.0 {
                    f64::INFINITY
                } else {
                    s + s * s / 4.0
                }
            }
            LossKind::Logistic | LossKind::LogisticMle => {
                let a = -s;
                if !(0.0..=1.0).contains(&a) {
                    f64::INFINITY
                } else {
                    xlogx(a) + xlogx(1.0 - a)
                }
            }
        }
    }

    /// Upper end of the feasible interval for `-s` (so for `lambda * alpha`).
    pub fn dual_upper_bound(self) -> f64 {
        match self {
            LossKind::L2Hinge => f64::INFINITY,
            LossKind::Logistic | LossKind::LogisticMle => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LossKind::L2Hinge => "l2-hinge",
            LossKind::Logistic => "logistic",
            LossKind::LogisticMle => "logistic-mle",
        }
    }
}

impl std::str::FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "l2-hinge" | "l2hinge" | "hinge" => Ok(LossKind::L2Hinge),
            "logistic" => Ok(LossKind::Logistic),
            "logistic-mle" | "logisticmle" | "mle" => Ok(LossKind::LogisticMle),
            other => Err(Error::InvalidConfig(format!("unknown loss {other:?}"))),
        }
    }
}

impl std::fmt::Display for LossKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Conjugate of the L2 hinge on its feasible ray, `s + s^2/4` for `s <= 0`.
pub fn conjugate_l2hinge(s: f64) -> Result<f64> {
    if s > 0.0 || s.is_nan() {
        return Err(Error::DualInfeasible(s));
    }
    Ok(s + s * s / 4.0)
}

/// `log(1 + exp(x))` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Logistic function `exp(x) / (1 + exp(x))`.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn xlogx(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}
