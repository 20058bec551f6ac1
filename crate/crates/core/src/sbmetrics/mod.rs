//! Sensitivity, ratio, accuracy-contribution and complexity measures.

mod accuracy;
mod complexity;
mod path_logits;
mod report;
mod sensitivity;

pub use accuracy::{acc_contribution, argmax, contributions_from_prefix, delta_acc, AccuracyContributions};
pub use complexity::{
    central_difference, complexity_1d, derivative_profile, make_perturbation, taylor_bound, DerivativeProfile,
    Function1d, Perturbation, Polynomial, ProfileOptions, Sine, TaylorBound, DEFAULT_D_MAX, DEFAULT_GRID, DEFAULT_TOL,
};
pub use path_logits::{PathLogits, FULL_PATH};
pub use report::{BandSensitivity, DecayRatios, Modulation, RunSummary, SensitivityReport, SensitivitySummary};
pub use sensitivity::{
    band_sensitivity, decay_ratio, mean_over_pairs, pair_sensitivity, pair_sensitivity_for, sb_ratio, total_variation,
    tv_sensitivity, SensitivityEstimate, DISTANCE_TOLERANCE, RATIO_TOLERANCE,
};
