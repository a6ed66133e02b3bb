//! How close a single received vector is to the average update.
//!
//! For the per-user model every received coordinate is Gaussian with
//! variance `z = (1/M^2) sum_m ||g_m^sp||^2 + sigma_gamma^2`, so
//! `||y - E y||^2 / z` is chi-square. The probability that
//! `||y - E y||^2 / d >= eps` is then `1 - F(d eps / z)` and is bounded by
//! `exp(-beta k)` with `mu = (eps / z - 1) / 4`, `beta = min(mu, mu^2)`,
//! where `k` is the number of chi-square degrees of freedom.
//!
//! The received vector has `s` coordinates, not `d`. [`DofMode::PaperD`]
//! uses `k = d` as the formula is usually stated; [`DofMode::PhysicalS`]
//! uses `k = s`, which is what a simulation of the model produces. The
//! normalization by `d` is the same in both modes.

use crate::error::{Error, Result};
use crate::models::GradientSet;

use super::chi2::chi2_sf;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DofMode {
    PaperD,
    PhysicalS,
}

impl DofMode {
    pub fn dof(self, d: usize, s: usize) -> usize {
        match self {
            DofMode::PaperD => d,
            DofMode::PhysicalS => s,
        }
    }
}

/// Per-coordinate variance of the received signal around its mean.
///
/// Returns a domain error when `z = 0` (no signal and no noise).
pub fn z_value(grads: &GradientSet, users: usize, sigma_gamma: f64) -> Result<f64> {
    let sp = grads.sparsified()?;
    if sp.len() != users {
        return Err(Error::parameter(format!("gradient set has {} users, M = {users}", sp.len())));
    }
    let energy: f64 = sp.iter().map(|g| g.iter().map(|x| x * x).sum::<f64>()).sum();
    let m = users as f64;
    let z = energy / (m * m) + sigma_gamma * sigma_gamma;
    if !(z > 0.0) {
        return Err(Error::domain("degenerate z = 0: zero gradients and no noise"));
    }
    Ok(z)
}

fn check_inputs(d: usize, epsilon: f64, z: f64) -> Result<()> {
    if d == 0 {
        return Err(Error::parameter("d must be positive"));
    }
    if !(z > 0.0) || !z.is_finite() {
        return Err(Error::domain(format!("z must be positive, got {z}")));
    }
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::parameter(format!("epsilon must be positive, got {epsilon}")));
    }
    Ok(())
}

/// `P(||y - E y||^2 / d >= eps) = 1 - F_{chi2_d}(d eps / z)`.
pub fn approximation_probability(d: usize, epsilon: f64, z: f64) -> Result<f64> {
    approximation_probability_with_dof(d, d, epsilon, z)
}

/// As [`approximation_probability`] with `dof` degrees of freedom in place
/// of `d` inside the chi-square CDF.
pub fn approximation_probability_with_dof(d: usize, dof: usize, epsilon: f64, z: f64) -> Result<f64> {
    check_inputs(d, epsilon, z)?;
    chi2_sf(dof, d as f64 * epsilon / z)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TailBound {
    pub d: usize,
    /// Degrees of freedom used for `exact_prob` and `exp_bound`.
    pub dof: usize,
    pub epsilon: f64,
    pub z: f64,
    pub mu: f64,
    pub beta: f64,
    pub exact_prob: f64,
    pub exp_bound: f64,
}

pub fn tail_bound(d: usize, epsilon: f64, z: f64) -> Result<TailBound> {
    tail_bound_with_dof(d, d, epsilon, z)
}

/// Exact tail probability alongside `exp(-beta * dof)`.
///
/// Requires `eps > z`; below that the exponential bound is vacuous.
pub fn tail_bound_with_dof(d: usize, dof: usize, epsilon: f64, z: f64) -> Result<TailBound> {
    check_inputs(d, epsilon, z)?;
    if epsilon <= z {
        return Err(Error::domain(format!(
            "exponential bound needs epsilon > z, got epsilon = {epsilon}, z = {z}"
        )));
    }
    let mu = (epsilon / z - 1.0) / 4.0;
    let beta = mu.min(mu * mu);
    Ok(TailBound {
        d,
        dof,
        epsilon,
        z,
        mu,
        beta,
        exact_prob: approximation_probability_with_dof(d, dof, epsilon, z)?,
        exp_bound: (-beta * dof as f64).exp(),
    })
}
