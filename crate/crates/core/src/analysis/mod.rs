//! Bounds, Monte-Carlo estimation, security predicates and the chi-square
//! concentration machinery.

mod bounds;
mod chi2;
mod concentration;
mod estimate;
mod predicates;

pub use bounds::{fact1_bounds, per_user_domain_holds, solvability_bound_per_user, solvability_bound_shared};
pub use chi2::{chi2_cdf, chi2_sf, ln_gamma, regularized_gamma_p, regularized_gamma_q};
pub use concentration::{
    approximation_probability, approximation_probability_with_dof, tail_bound, tail_bound_with_dof, z_value,
    DofMode, TailBound,
};
pub use estimate::{
    canonical_per_user, cond_draws, draw_trials, estimate_expected_cond, estimate_fading_cond, mean_and_stderr,
    paired_canonical_draws, trial_seed, CondEstimate, Fading, OperatorSpec,
};
pub use predicates::{
    check_inverse_secure, check_inverse_solvable, check_meshed_security, check_per_user_security,
    check_shared_security, check_tbc, check_vic7, MeshedReport, SecurityReport, SecurityRow, SolvabilityReport,
    SolvabilityRow, STDERR_MARGIN,
};
