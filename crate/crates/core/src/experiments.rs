//! Scripted experiments: the condition-number sweep comparing legitimate
//! and eavesdropper operators, solvability sweeps against the closed-form
//! bounds, and the concentration experiment. Each has a CSV writer.

use std::io::Write;

use crate::analysis::{
    approximation_probability_with_dof, check_inverse_solvable, draw_trials, estimate_expected_cond,
    paired_canonical_draws, per_user_domain_holds, solvability_bound_per_user, solvability_bound_shared,
    tail_bound_with_dof, z_value, DofMode, Fading, OperatorSpec, SecurityRow, SolvabilityReport,
};
use crate::error::{Error, Result};
use crate::linalg::SeedSpec;
use crate::models::{build_per_user, mean_target, transmit, GradientSet, ModelKind, SystemParams};

/// Stream index, under the master seed, reserved for synthetic gradients.
/// Trial seeds use small indices, so the two never collide.
pub const GRADIENT_STREAM: u64 = u64::MAX;

pub const DEFAULT_GRID: [usize; 7] = [1, 2, 4, 8, 16, 32, 64];

#[derive(Clone, Debug)]
pub struct SweepSpec {
    pub d: usize,
    pub s: usize,
    /// Strictly increasing user counts.
    pub grid: Vec<usize>,
    pub trials: usize,
    pub master_seed: u64,
    /// Legitimate model to sweep (`SharedA` or `PerUserB`).
    pub model: ModelKind,
    pub fading: Fading,
    /// Either one constant power or one per user at every grid point.
    pub alphas: Vec<f64>,
}

impl SweepSpec {
    pub fn desk_scale(master_seed: u64) -> Self {
        Self {
            d: 100,
            s: 25,
            grid: DEFAULT_GRID.to_vec(),
            trials: 10,
            master_seed,
            model: ModelKind::PerUserB,
            fading: Fading::Gaussian,
            alphas: vec![1.0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::parameter("M grid must be non-empty"));
        }
        if self.grid[0] == 0 || self.grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::parameter(format!(
                "M grid must be positive and strictly increasing, got {:?}",
                self.grid
            )));
        }
        if self.trials < 2 {
            return Err(Error::parameter(format!("need at least 2 trials, got {}", self.trials)));
        }
        if self.model.is_eavesdropper() {
            return Err(Error::parameter("sweep model must be a legitimate model kind"));
        }
        self.params(self.grid[0])?.validate()
    }

    pub fn params(&self, users: usize) -> Result<SystemParams> {
        SystemParams::new(self.d, self.s, 1)
            .with_alphas(self.alphas.clone())
            .with_users(users)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub users: usize,
    pub legit_mean: f64,
    pub legit_stderr: f64,
    pub eaves_mean: f64,
    pub eaves_stderr: f64,
    /// Mean and standard error of the per-trial difference `eaves - legit`.
    pub diff_mean: f64,
    pub diff_stderr: f64,
}

impl From<&SecurityRow> for SweepRow {
    fn from(r: &SecurityRow) -> Self {
        Self {
            users: r.users,
            legit_mean: r.legit.mean,
            legit_stderr: r.legit.stderr,
            eaves_mean: r.eaves.mean,
            eaves_stderr: r.eaves.stderr,
            diff_mean: r.diff_mean,
            diff_stderr: r.diff_stderr,
        }
    }
}

/// Paired estimates of `cond(C_1 + I, ..., C_M + I)` and
/// `cond(H_1 (C_1 + I), ..., H_M (C_M + I))` at every grid point.
pub fn run_fig1(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    spec.grid
        .iter()
        .map(|&m| {
            let pairs = paired_canonical_draws(spec.d, spec.s, m, spec.fading, spec.trials, spec.master_seed)?;
            Ok(SweepRow::from(&SecurityRow::paired(m, &pairs, spec.master_seed)?))
        })
        .collect()
}

/// Estimates against the shared-model or per-user bound over the grid.
pub fn run_solvability_sweep(spec: &SweepSpec) -> Result<SolvabilityReport> {
    spec.validate()?;
    let bound: Box<dyn Fn(usize) -> Result<f64>> = match spec.model {
        ModelKind::SharedA => {
            let b = solvability_bound_shared(spec.d, spec.s)?;
            Box::new(move |_| Ok(b))
        }
        _ => {
            if !per_user_domain_holds(spec.d, spec.s) {
                return Err(Error::domain(format!(
                    "per-user bound needs (sqrt(d) - 1)^2 > s, got d = {}, s = {}",
                    spec.d, spec.s
                )));
            }
            let (d, s) = (spec.d, spec.s);
            Box::new(move |m| solvability_bound_per_user(d, s, m))
        }
    };
    let estimates = spec
        .grid
        .iter()
        .map(|&m| {
            let op = OperatorSpec::new(spec.model, spec.params(m)?);
            Ok((m, estimate_expected_cond(&op, spec.trials, spec.master_seed)?))
        })
        .collect::<Result<Vec<_>>>()?;
    check_inverse_solvable(spec.model, &estimates, bound)
}

/// Gradients used when none are supplied: i.i.d. standard normal, user `m`
/// drawn from `[GRADIENT_STREAM, m]`.
pub fn synthetic_gradients(users: usize, d: usize, master_seed: u64) -> Result<GradientSet> {
    GradientSet::synthetic(users, d, &SeedSpec::with_path(master_seed, vec![GRADIENT_STREAM]))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConcentrationRecord {
    pub users: usize,
    pub z: f64,
    pub epsilon: f64,
    pub dof: usize,
    pub transmissions: usize,
    /// Fraction of transmissions with `||y - E y||^2 / d >= epsilon`.
    pub empirical: f64,
    pub exact: f64,
    /// `exp(-beta * dof)`; absent when `epsilon <= z`.
    pub bound: Option<f64>,
}

fn prepared(params: &SystemParams, grads: Option<&GradientSet>, master_seed: u64) -> Result<GradientSet> {
    params.validate()?;
    let mut g = match grads {
        Some(g) => g.clone(),
        None => synthetic_gradients(params.users, params.d, master_seed)?,
    };
    if g.users() != params.users || g.dim() != params.d {
        return Err(Error::shape(format!(
            "gradients are {} users x {} entries, expected {} x {}",
            g.users(),
            g.dim(),
            params.users,
            params.d
        )));
    }
    g.sparsify(params.delta)?;
    Ok(g)
}

/// Repeated per-user transmissions with fixed gradients; transmission `t`
/// uses trial seed `[t]`. Returns `y - E y` restricted to the `s` received
/// coordinates, in transmission order.
fn residuals(
    params: &SystemParams,
    grads: &GradientSet,
    transmissions: usize,
    master_seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let target = mean_target(grads, params.users)?;
    draw_trials(transmissions, master_seed, |trial| {
        let op = build_per_user(params, trial)?;
        let y = transmit(&op, grads, params.sigma_gamma, trial)?;
        Ok(y.iter().zip(&target).map(|(yi, ti)| yi - ti).collect())
    })
}

/// Empirical frequency of large deviations next to the exact chi-square
/// probability and the exponential bound.
pub fn run_concentration(
    params: &SystemParams,
    grads: Option<&GradientSet>,
    epsilon: f64,
    transmissions: usize,
    master_seed: u64,
    dof_mode: DofMode,
) -> Result<ConcentrationRecord> {
    if !(epsilon > 0.0) {
        return Err(Error::parameter(format!("epsilon must be positive, got {epsilon}")));
    }
    if transmissions == 0 {
        return Err(Error::parameter("need at least one transmission"));
    }
    let grads = prepared(params, grads, master_seed)?;
    let z = z_value(&grads, params.users, params.sigma_gamma)?;
    let dof = dof_mode.dof(params.d, params.s);
    let exact = approximation_probability_with_dof(params.d, dof, epsilon, z)?;
    let bound = if epsilon > z {
        Some(tail_bound_with_dof(params.d, dof, epsilon, z)?.exp_bound)
    } else {
        None
    };

    let d = params.d as f64;
    let hits = residuals(params, &grads, transmissions, master_seed)?
        .iter()
        .filter(|r| r.iter().map(|x| x * x).sum::<f64>() / d >= epsilon)
        .count();
    Ok(ConcentrationRecord {
        users: params.users,
        z,
        epsilon,
        dof,
        transmissions,
        empirical: hits as f64 / transmissions as f64,
        exact,
        bound,
    })
}

/// Coordinate-wise sample mean of `y` over repeated per-user transmissions,
/// compared with the average update on the `s` received coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct UnbiasednessReport {
    pub target: Vec<f64>,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
}

impl UnbiasednessReport {
    /// Largest `|mean - target| / stderr` over the received coordinates.
    pub fn max_abs_z(&self) -> f64 {
        self.mean
            .iter()
            .zip(&self.target)
            .zip(&self.stderr)
            .map(|((m, t), se)| (m - t).abs() / se)
            .fold(0.0, f64::max)
    }
}

pub fn run_unbiasedness(
    params: &SystemParams,
    grads: Option<&GradientSet>,
    transmissions: usize,
    master_seed: u64,
) -> Result<UnbiasednessReport> {
    if transmissions < 2 {
        return Err(Error::parameter("need at least 2 transmissions"));
    }
    let grads = prepared(params, grads, master_seed)?;
    let target = mean_target(&grads, params.users)?;
    let res = residuals(params, &grads, transmissions, master_seed)?;
    let (mut mean, mut stderr) = (Vec::with_capacity(params.s), Vec::with_capacity(params.s));
    for i in 0..params.s {
        let col: Vec<f64> = res.iter().map(|r| r[i] + target[i]).collect();
        let (m, se) = crate::analysis::mean_and_stderr(&col);
        mean.push(m);
        stderr.push(se);
    }
    Ok(UnbiasednessReport {
        target: target[..params.s].to_vec(),
        mean,
        stderr,
    })
}

/// `%.9g`-style formatting: nine significant digits, trailing zeros
/// trimmed, scientific notation outside `1e-5 ..= 1e9`.
pub fn fmt_sig(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-5..9).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{mantissa}e{sign}{:02}", exp.abs());
    }
    let decimals = (8 - exp).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn write_fig1_csv<W: Write>(rows: &[SweepRow], mut out: W) -> Result<()> {
    writeln!(out, "M,legit_mean,legit_stderr,eaves_mean,eaves_stderr")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.users,
            fmt_sig(r.legit_mean),
            fmt_sig(r.legit_stderr),
            fmt_sig(r.eaves_mean),
            fmt_sig(r.eaves_stderr)
        )?;
    }
    Ok(())
}

pub fn write_solvability_csv<W: Write>(report: &SolvabilityReport, mut out: W) -> Result<()> {
    writeln!(out, "M,mean,stderr,bound,satisfied")?;
    for r in &report.rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.users,
            fmt_sig(r.estimate.mean),
            fmt_sig(r.estimate.stderr),
            fmt_sig(r.bound),
            r.satisfied
        )?;
    }
    Ok(())
}

/// The `bound` column is left empty where `epsilon <= z`.
pub fn write_concentration_csv<W: Write>(records: &[ConcentrationRecord], mut out: W) -> Result<()> {
    writeln!(out, "M,z,epsilon,empirical,exact,bound")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.users,
            fmt_sig(r.z),
            fmt_sig(r.epsilon),
            fmt_sig(r.empirical),
            fmt_sig(r.exact),
            r.bound.map(fmt_sig).unwrap_or_default()
        )?;
    }
    Ok(())
}
