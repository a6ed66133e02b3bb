//! Monte-Carlo estimates of expected condition numbers.
//!
//! Trial `t` always draws from the seed `[t]` under the master seed, so a
//! trial's operator does not depend on how trials are scheduled. Draws are
//! computed in parallel, collected in trial order and reduced sequentially,
//! which keeps every estimate bit-identical to a single-threaded run.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{condition_number, hconcat, Conditioning, Matrix, SeedSpec};
use crate::models::{
    build_eaves_per_user, build_eaves_shared, build_per_user, build_shared, canonical_block, fading_stream,
    sample_gaussian_fading, FadingSet, LinearOperator, ModelKind, SystemParams,
};
use crate::linalg::sample_gaussian;

/// How eavesdropper mismatch matrices are drawn.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fading {
    Identity,
    Gaussian,
}

/// Everything needed to draw one operator per trial.
#[derive(Clone, Debug)]
pub struct OperatorSpec {
    pub kind: ModelKind,
    pub params: SystemParams,
    /// Ignored for the legitimate kinds.
    pub fading: Fading,
}

impl OperatorSpec {
    pub fn new(kind: ModelKind, params: SystemParams) -> Self {
        Self {
            kind,
            params,
            fading: Fading::Gaussian,
        }
    }

    pub fn with_fading(mut self, fading: Fading) -> Self {
        self.fading = fading;
        self
    }

    pub fn build(&self, trial: &SeedSpec) -> Result<LinearOperator> {
        let p = &self.params;
        let fading = || match self.fading {
            Fading::Identity => FadingSet::identity(p.users, p.s),
            Fading::Gaussian => sample_gaussian_fading(p, trial),
        };
        match self.kind {
            ModelKind::SharedA => build_shared(p, trial),
            ModelKind::PerUserB => build_per_user(p, trial),
            ModelKind::EavesSharedA => build_eaves_shared(p, &fading()?, trial),
            ModelKind::EavesPerUserB => build_eaves_per_user(p, &fading()?, trial),
        }
    }
}

pub fn trial_seed(master_seed: u64, trial: usize) -> SeedSpec {
    SeedSpec::with_path(master_seed, vec![trial as u64])
}

/// Sample mean and standard error of the condition number.
#[derive(Clone, Debug, PartialEq)]
pub struct CondEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub trials: usize,
    /// Rank-deficient draws, excluded from `mean` and `stderr`.
    pub infinite_count: usize,
    pub master_seed: u64,
}

impl CondEstimate {
    /// Reduces per-trial draws in order.
    pub fn from_draws(draws: &[Conditioning], master_seed: u64) -> Result<Self> {
        let finite: Vec<f64> = draws.iter().filter_map(|c| c.finite()).collect();
        if finite.len() < 2 {
            return Err(Error::Estimation(format!(
                "{} of {} draws were rank deficient; need at least two finite draws",
                draws.len() - finite.len(),
                draws.len()
            )));
        }
        let (mean, stderr) = mean_and_stderr(&finite);
        Ok(Self {
            mean,
            stderr,
            trials: draws.len(),
            infinite_count: draws.len() - finite.len(),
            master_seed,
        })
    }
}

/// Sample mean and `sd / sqrt(n)` with the unbiased sample variance.
pub fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Runs `draw` for trials `0..trials` in parallel and returns the results
/// in trial order.
pub fn draw_trials<T, F>(trials: usize, master_seed: u64, draw: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&SeedSpec) -> Result<T> + Sync,
{
    (0..trials)
        .into_par_iter()
        .map(|t| draw(&trial_seed(master_seed, t)))
        .collect()
}

pub fn cond_draws(spec: &OperatorSpec, trials: usize, master_seed: u64) -> Result<Vec<Conditioning>> {
    spec.params.validate()?;
    draw_trials(trials, master_seed, |seed| condition_number(&spec.build(seed)?.matrix))
}

/// Monte-Carlo estimate of `E[cond(L_M)]` over `trials` independent draws.
pub fn estimate_expected_cond(spec: &OperatorSpec, trials: usize, master_seed: u64) -> Result<CondEstimate> {
    if trials < 2 {
        return Err(Error::parameter(format!("need at least 2 trials, got {trials}")));
    }
    CondEstimate::from_draws(&cond_draws(spec, trials, master_seed)?, master_seed)
}

/// The scaled per-user operator `(C_1 + I, ..., C_M + I)` for one trial.
pub fn canonical_per_user(s: usize, d: usize, users: usize, trial: &SeedSpec) -> Result<Vec<Matrix>> {
    (1..=users).map(|m| canonical_block(s, d, trial, m)).collect()
}

/// Paired draws of `cond(C_1 + I, ..., C_M + I)` and
/// `cond(H_1 (C_1 + I), ..., H_M (C_M + I))` sharing the same `C_m`.
pub fn paired_canonical_draws(
    d: usize,
    s: usize,
    users: usize,
    fading: Fading,
    trials: usize,
    master_seed: u64,
) -> Result<Vec<(Conditioning, Conditioning)>> {
    if users == 0 || s == 0 || s > d {
        return Err(Error::parameter(format!(
            "need M >= 1 and 1 <= s <= d, got M = {users}, s = {s}, d = {d}"
        )));
    }
    draw_trials(trials, master_seed, |trial| {
        let blocks = canonical_per_user(s, d, users, trial)?;
        let legit = condition_number(&hconcat(&blocks)?)?;
        let eaves = match fading {
            Fading::Identity => legit,
            Fading::Gaussian => {
                let faded = blocks
                    .iter()
                    .enumerate()
                    .map(|(idx, b)| {
                        let h = sample_gaussian(s, s, 0.0, 1.0, &fading_stream(trial, users, idx + 1))?;
                        h.matmul(b)
                    })
                    .collect::<Result<Vec<_>>>()?;
                condition_number(&hconcat(&faded)?)?
            }
        };
        Ok((legit, eaves))
    })
}

/// Estimate of `E[cond(H_1, ..., H_M)]` for Gaussian mismatch matrices.
pub fn estimate_fading_cond(params: &SystemParams, trials: usize, master_seed: u64) -> Result<CondEstimate> {
    params.validate()?;
    let draws = draw_trials(trials, master_seed, |trial| {
        let fading = sample_gaussian_fading(params, trial)?;
        condition_number(&hconcat(fading.matrices())?)
    })?;
    CondEstimate::from_draws(&draws, master_seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn needs_two_trials() {
        let spec = OperatorSpec::new(ModelKind::SharedA, SystemParams::new(20, 5, 2));
        assert!(matches!(estimate_expected_cond(&spec, 1, 0), Err(Error::Parameter(_))));
    }

    #[test]
    fn all_rank_deficient_is_an_error() {
        let draws = vec![
            Conditioning {
                value: f64::INFINITY,
                rank_deficient: true
            };
            5
        ];
        assert!(matches!(CondEstimate::from_draws(&draws, 0), Err(Error::Estimation(_))));
    }

    #[test]
    fn rank_deficient_draws_are_counted_and_excluded() {
        let inf = Conditioning {
            value: f64::INFINITY,
            rank_deficient: true,
        };
        let fin = |v| Conditioning {
            value: v,
            rank_deficient: false,
        };
        let est = CondEstimate::from_draws(&[fin(2.0), inf, fin(4.0)], 9).unwrap();
        assert_eq!(est.mean, 3.0);
        assert_eq!(est.infinite_count, 1);
        assert_eq!(est.trials, 3);
        assert!((est.stderr - (2.0f64 / 2.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn parallel_matches_sequential() {
        let spec = OperatorSpec::new(ModelKind::PerUserB, SystemParams::new(30, 6, 3));
        let par = cond_draws(&spec, 16, 4).unwrap();
        let seq: Vec<_> = (0..16)
            .map(|t| condition_number(&spec.build(&trial_seed(4, t)).unwrap().matrix).unwrap())
            .collect();
        assert_eq!(par, seq);
    }

    #[test]
    fn estimate_mean_at_least_one() {
        for kind in [ModelKind::SharedA, ModelKind::PerUserB, ModelKind::EavesSharedA, ModelKind::EavesPerUserB] {
            let spec = OperatorSpec::new(kind, SystemParams::new(30, 6, 2));
            let est = estimate_expected_cond(&spec, 10, 1).unwrap();
            assert!(est.mean >= 1.0);
            assert_eq!(est.infinite_count, 0);
        }
    }

    #[test]
    fn canonical_matches_scaled_per_user_conditioning() {
        let params = SystemParams::new(30, 6, 3).with_alphas(vec![0.3, 1.0, 8.0]);
        let seed = trial_seed(2, 0);
        let op = build_per_user(&params, &seed).unwrap();
        let canon = hconcat(&canonical_per_user(6, 30, 3, &seed).unwrap()).unwrap();
        let a = condition_number(&op.matrix).unwrap().value;
        let b = condition_number(&canon).unwrap().value;
        assert!((a - b).abs() <= 1e-8 * b);
    }

    #[test]
    fn identity_fading_pairs_are_equal() {
        let pairs = paired_canonical_draws(30, 6, 2, Fading::Identity, 5, 3).unwrap();
        assert!(pairs.iter().all(|(l, e)| l == e));
    }

    #[test]
    fn paired_eaves_matches_operator_builder() {
        let params = SystemParams::new(30, 6, 2);
        let pairs = paired_canonical_draws(30, 6, 2, Fading::Gaussian, 3, 5).unwrap();
        let spec = OperatorSpec::new(ModelKind::EavesPerUserB, params);
        for (t, (_, eaves)) in pairs.iter().enumerate() {
            let op = spec.build(&trial_seed(5, t)).unwrap();
            let c = condition_number(&op.matrix).unwrap().value;
            assert!((c - eaves.value).abs() <= 1e-8 * c);
        }
    }
}
