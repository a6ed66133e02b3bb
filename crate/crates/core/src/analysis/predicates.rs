//! Grid-restricted checks of inverse solvability and inverse security.
//!
//! Expectations are replaced by sample means, and every inequality carries
//! a margin of three standard errors. Claims quantified over all `M` are
//! only ever evaluated on a finite grid.

use crate::error::{Error, Result};
use crate::linalg::Conditioning;
use crate::models::{ModelKind, SystemParams};

use super::estimate::{
    cond_draws, estimate_expected_cond, mean_and_stderr, paired_canonical_draws, CondEstimate, Fading, OperatorSpec,
};

/// Margin, in standard errors, applied to every statistical inequality.
pub const STDERR_MARGIN: f64 = 3.0;

#[derive(Clone, Debug, PartialEq)]
pub struct SolvabilityRow {
    pub users: usize,
    pub estimate: CondEstimate,
    pub bound: f64,
    pub satisfied: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolvabilityReport {
    pub kind: ModelKind,
    pub rows: Vec<SolvabilityRow>,
}

impl SolvabilityReport {
    pub fn all_satisfied(&self) -> bool {
        self.rows.iter().all(|r| r.satisfied)
    }
}

/// Compares each estimate against `bound(M)`.
pub fn check_inverse_solvable<F>(kind: ModelKind, estimates: &[(usize, CondEstimate)], bound: F) -> Result<SolvabilityReport>
where
    F: Fn(usize) -> Result<f64>,
{
    if estimates.is_empty() {
        return Err(Error::parameter("solvability check needs a non-empty M grid"));
    }
    let rows = estimates
        .iter()
        .map(|(users, est)| {
            let bound = bound(*users)?;
            Ok(SolvabilityRow {
                users: *users,
                satisfied: est.mean <= bound + STDERR_MARGIN * est.stderr,
                estimate: est.clone(),
                bound,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SolvabilityReport { kind, rows })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SecurityRow {
    pub users: usize,
    pub legit: CondEstimate,
    pub eaves: CondEstimate,
    /// Mean of `eaves - legit`; for paired designs this is the mean of the
    /// per-trial differences.
    pub diff_mean: f64,
    /// Standard error of the difference: the paired-difference standard
    /// error when draws are paired, otherwise `sqrt(se_l^2 + se_e^2)`.
    pub diff_stderr: f64,
    pub secure: bool,
}

impl SecurityRow {
    fn new(users: usize, legit: CondEstimate, eaves: CondEstimate, diff_mean: f64, diff_stderr: f64) -> Self {
        Self {
            users,
            secure: diff_mean > STDERR_MARGIN * diff_stderr,
            legit,
            eaves,
            diff_mean,
            diff_stderr,
        }
    }

    fn unpaired(users: usize, legit: CondEstimate, eaves: CondEstimate) -> Self {
        let diff = eaves.mean - legit.mean;
        let se = legit.stderr.hypot(eaves.stderr);
        Self::new(users, legit, eaves, diff, se)
    }

    /// Builds a row from per-trial pairs. Trials where either side is rank
    /// deficient are dropped from the difference.
    pub fn paired(users: usize, pairs: &[(Conditioning, Conditioning)], master_seed: u64) -> Result<Self> {
        let legit_draws: Vec<_> = pairs.iter().map(|p| p.0).collect();
        let eaves_draws: Vec<_> = pairs.iter().map(|p| p.1).collect();
        let legit = CondEstimate::from_draws(&legit_draws, master_seed)?;
        let eaves = CondEstimate::from_draws(&eaves_draws, master_seed)?;
        let diffs: Vec<f64> = pairs
            .iter()
            .filter_map(|(l, e)| Some(e.finite()? - l.finite()?))
            .collect();
        if diffs.len() < 2 {
            return Err(Error::Estimation("fewer than two finite paired draws".into()));
        }
        let (mean, se) = mean_and_stderr(&diffs);
        Ok(Self::new(users, legit, eaves, mean, se))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SecurityReport {
    pub rows: Vec<SecurityRow>,
}

impl SecurityReport {
    pub fn all_secure(&self) -> bool {
        self.rows.iter().all(|r| r.secure)
    }
}

/// Compares independent legitimate and eavesdropper estimates on the same
/// grid.
pub fn check_inverse_secure(legit: &[(usize, CondEstimate)], eaves: &[(usize, CondEstimate)]) -> Result<SecurityReport> {
    if legit.is_empty() || legit.len() != eaves.len() || legit.iter().zip(eaves).any(|(l, e)| l.0 != e.0) {
        return Err(Error::parameter("legitimate and eavesdropper estimates must share the same M grid"));
    }
    let rows = legit
        .iter()
        .zip(eaves)
        .map(|((m, l), (_, e))| SecurityRow::unpaired(*m, l.clone(), e.clone()))
        .collect();
    Ok(SecurityReport { rows })
}

/// The sufficient condition for the shared-compression model:
/// `E[cond(H_1, ..., H_M)] > (max sqrt(a) / min sqrt(a)) * E[cond(A)]^2`,
/// evaluated on sample means.
pub fn check_vic7(alphas: &[f64], mean_cond_a: f64, mean_cond_h: f64) -> Result<bool> {
    if alphas.is_empty() || alphas.iter().any(|a| !(*a > 0.0)) {
        return Err(Error::parameter("power coefficients must be non-empty and positive"));
    }
    let roots = alphas.iter().map(|a| a.sqrt());
    let hi = roots.clone().fold(f64::MIN, f64::max);
    let lo = roots.fold(f64::MAX, f64::min);
    Ok(mean_cond_h > hi / lo * mean_cond_a * mean_cond_a)
}

/// Paired Monte-Carlo comparison of `E[cond(H_m (C_m + I))]` against
/// `E[cond(C_m + I)]` for each `M` on the grid. Power coefficients do not
/// enter.
pub fn check_tbc(
    d: usize,
    s: usize,
    grid: &[usize],
    fading: Fading,
    trials: usize,
    master_seed: u64,
) -> Result<SecurityReport> {
    if grid.is_empty() {
        return Err(Error::parameter("security check needs a non-empty M grid"));
    }
    if trials < 2 {
        return Err(Error::parameter(format!("need at least 2 trials, got {trials}")));
    }
    let rows = grid
        .iter()
        .map(|&m| {
            let pairs = paired_canonical_draws(d, s, m, fading, trials, master_seed)?;
            SecurityRow::paired(m, &pairs, master_seed)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SecurityReport { rows })
}

/// Security check for the shared-compression model: legitimate and
/// eavesdropper operators drawn from the same trial seeds, so they share
/// `A`.
pub fn check_shared_security(
    params: &SystemParams,
    grid: &[usize],
    fading: Fading,
    trials: usize,
    master_seed: u64,
) -> Result<SecurityReport> {
    check_paired_security(ModelKind::SharedA, ModelKind::EavesSharedA, params, grid, fading, trials, master_seed)
}

/// Like [`check_tbc`] but through the full operator builders, power
/// coefficients included.
pub fn check_per_user_security(
    params: &SystemParams,
    grid: &[usize],
    fading: Fading,
    trials: usize,
    master_seed: u64,
) -> Result<SecurityReport> {
    check_paired_security(ModelKind::PerUserB, ModelKind::EavesPerUserB, params, grid, fading, trials, master_seed)
}

fn check_paired_security(
    legit_kind: ModelKind,
    eaves_kind: ModelKind,
    params: &SystemParams,
    grid: &[usize],
    fading: Fading,
    trials: usize,
    master_seed: u64,
) -> Result<SecurityReport> {
    if grid.is_empty() {
        return Err(Error::parameter("security check needs a non-empty M grid"));
    }
    let rows = grid
        .iter()
        .map(|&m| {
            let p = params.with_users(m)?;
            let legit = cond_draws(&OperatorSpec::new(legit_kind, p.clone()), trials, master_seed)?;
            let eaves = cond_draws(&OperatorSpec::new(eaves_kind, p).with_fading(fading), trials, master_seed)?;
            let pairs: Vec<_> = legit.into_iter().zip(eaves).collect();
            SecurityRow::paired(m, &pairs, master_seed)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SecurityReport { rows })
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeshedReport {
    pub m_star: usize,
    /// Estimates for `M = 1..=m_star`.
    pub estimates: Vec<(usize, CondEstimate)>,
    /// Estimate at `M = m_star + 1`.
    pub reference: CondEstimate,
    pub holds: bool,
}

/// Checks `E[cond(L_M)] > E[cond(L_{M*+1})]` for every `M` in `1..=M*`.
///
/// Each side is an independent estimate and the margin uses
/// `sqrt(se_M^2 + se_ref^2)`.
pub fn check_meshed_security(
    kind: ModelKind,
    params: &SystemParams,
    m_star: usize,
    trials: usize,
    master_seed: u64,
) -> Result<MeshedReport> {
    if m_star == 0 {
        return Err(Error::parameter("M* must be at least 1"));
    }
    let estimate_at = |m: usize| -> Result<CondEstimate> {
        let spec = OperatorSpec::new(kind, params.with_users(m)?);
        estimate_expected_cond(&spec, trials, master_seed)
    };
    let reference = estimate_at(m_star + 1)?;
    let estimates = (1..=m_star)
        .map(|m| Ok((m, estimate_at(m)?)))
        .collect::<Result<Vec<_>>>()?;
    let holds = estimates
        .iter()
        .all(|(_, e)| e.mean - reference.mean > STDERR_MARGIN * e.stderr.hypot(reference.stderr));
    Ok(MeshedReport {
        m_star,
        estimates,
        reference,
        holds,
    })
}
