//! Synthetic checks of the statistical behaviour: BTL sampling, exact risk
//! and KL rates, the excess-risk scaling law and the spectral norm of the
//! random sign matrix behind the generalization bound.

mod btl;
mod mnorm;
mod report;
mod risk;

pub use btl::{
    random_low_rank_scores, sample_btl, sample_btl_with_replacement, BtlModel, SamplingProbs,
};
pub use mnorm::{
    m_norm_experiment, m_norm_point, sign_matrix, sign_matrix_norms, spectral_norm, MNormParams,
    SignMatrixExperiment,
};
pub use report::{
    mean_and_stderr, power_fit, PowerFit, ScalingPoint, ScalingReport, ScalingSeries,
};
pub use risk::{
    bernoulli_kl_logits, excess_risk_scaling_experiment, excess_risk_trial, expected_risk,
    kl_divergence_rate, kl_rate_trial, KlTrial, PenaltySchedule, RiskScalingParams,
};
