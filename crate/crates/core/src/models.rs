//! Forward models `y = L_M(H(x)) + gamma` for over-the-air aggregation.
//!
//! Four operators are built here:
//!
//! * [`ModelKind::SharedA`]: every client compresses with the same Gaussian
//!   matrix `A`, so `L_M = (1/M)(sqrt(a_1) A, ..., sqrt(a_M) A)`.
//! * [`ModelKind::PerUserB`]: client `m` draws its own `B_m` with
//!   `sqrt(a_m) B_m = C_m + I_{s x d}`, `C_m` standard Gaussian, which makes
//!   the received signal unbiased for the average update.
//! * [`ModelKind::EavesSharedA`] and [`ModelKind::EavesPerUserB`]: the same
//!   two schemes seen through per-client `s x s` mismatch matrices `H_m`.
//!
//! # Stream layout
//!
//! Builders take a *trial* seed (typically `[trial]`) and derive children
//! from it. For `M` users, user `m` in `1..=M` compresses with stream
//! `[.., m]` (the shared matrix uses `[.., 1]`), receiver noise uses
//! `[.., M + 1]` and fading uses `[.., M + 2 + m]`. Legitimate and
//! eavesdropper operators built from the same trial seed therefore share
//! their compression matrices. Eavesdropper noise uses `[.., M + 1, 1]`.

use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::{add_rect_identity, hconcat, sample_gaussian, scale, Matrix, SeedSpec};

/// Dimensions and per-user constants of one aggregation round.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemParams {
    /// Length of each client's parameter vector.
    pub d: usize,
    /// Number of receiver endpoints.
    pub s: usize,
    /// Number of active users `M`.
    pub users: usize,
    /// Power scalings `a_m > 0`, one per user.
    pub alphas: Vec<f64>,
    pub sigma_gamma: f64,
    /// Sparsification threshold.
    pub delta: f64,
}

impl SystemParams {
    /// Unit powers, no noise, threshold 0.1.
    pub fn new(d: usize, s: usize, users: usize) -> Self {
        Self {
            d,
            s,
            users,
            alphas: vec![1.0; users],
            sigma_gamma: 0.0,
            delta: 0.1,
        }
    }

    pub fn with_alphas(mut self, alphas: Vec<f64>) -> Self {
        self.alphas = alphas;
        self
    }

    pub fn with_sigma_gamma(mut self, sigma_gamma: f64) -> Self {
        self.sigma_gamma = sigma_gamma;
        self
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    /// Same constants with a different user count. A constant power list
    /// is stretched to the new count; anything else must already match.
    pub fn with_users(&self, users: usize) -> Result<Self> {
        let alphas = if self.alphas.len() == users {
            self.alphas.clone()
        } else if !self.alphas.is_empty() && self.alphas.iter().all(|&a| a == self.alphas[0]) {
            vec![self.alphas[0]; users]
        } else {
            return Err(Error::parameter(format!(
                "{} power coefficients given but M = {users}",
                self.alphas.len()
            )));
        };
        Ok(Self {
            users,
            alphas,
            ..self.clone()
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.s == 0 || self.users == 0 {
            return Err(Error::parameter(format!(
                "d, s and M must be positive (d = {}, s = {}, M = {})",
                self.d, self.s, self.users
            )));
        }
        if self.s > self.users * self.d {
            return Err(Error::parameter(format!(
                "s = {} exceeds M*d = {}",
                self.s,
                self.users * self.d
            )));
        }
        if self.alphas.len() != self.users {
            return Err(Error::parameter(format!(
                "{} power coefficients for {} users",
                self.alphas.len(),
                self.users
            )));
        }
        if let Some(bad) = self.alphas.iter().find(|a| !(**a > 0.0) || !a.is_finite()) {
            return Err(Error::parameter(format!("power coefficients must be positive, got {bad}")));
        }
        if !(self.sigma_gamma >= 0.0) || !self.sigma_gamma.is_finite() {
            return Err(Error::parameter(format!(
                "noise standard deviation must be >= 0, got {}",
                self.sigma_gamma
            )));
        }
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            return Err(Error::parameter(format!(
                "sparsification threshold must be positive, got {}",
                self.delta
            )));
        }
        Ok(())
    }
}

/// Zeroes every entry with magnitude strictly below `delta`.
pub fn sparsify(g: &[f64], delta: f64) -> Result<Vec<f64>> {
    if !(delta > 0.0) {
        return Err(Error::parameter(format!("sparsification threshold must be positive, got {delta}")));
    }
    Ok(g.iter().map(|&x| if x.abs() < delta { 0.0 } else { x }).collect())
}

/// Per-user update vectors and their sparsified images.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientSet {
    vectors: Vec<Vec<f64>>,
    sparsified: Option<Vec<Vec<f64>>>,
}

impl GradientSet {
    pub fn new(vectors: Vec<Vec<f64>>) -> Result<Self> {
        let d = vectors
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::parameter("gradient set needs at least one user"))?;
        if d == 0 {
            return Err(Error::parameter("gradient vectors must be non-empty"));
        }
        if let Some(i) = vectors.iter().position(|v| v.len() != d) {
            return Err(Error::shape(format!(
                "user {} has {} entries, expected {d}",
                i + 1,
                vectors[i].len()
            )));
        }
        if vectors.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::parameter("gradient entries must be finite"));
        }
        Ok(Self {
            vectors,
            sparsified: None,
        })
    }

    /// I.i.d. standard normal entries. User `m` (1-based) draws from
    /// `seed.child(m)`, so a user's vector does not depend on `users`.
    pub fn synthetic(users: usize, d: usize, seed: &SeedSpec) -> Result<Self> {
        if users == 0 {
            return Err(Error::parameter("gradient set needs at least one user"));
        }
        let vectors = (1..=users as u64)
            .map(|m| sample_gaussian(1, d, 0.0, 1.0, &seed.child(m)).map(|row| row.to_row_major()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(vectors)
    }

    /// Reads one user per row. A header line is optional; when its first
    /// field is `user`, every data row carries a leading user label that is
    /// skipped.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(reader);
        let mut vectors = Vec::new();
        let mut skip_label = false;
        for (line, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| Error::parameter(format!("gradient CSV: {e}")))?;
            if record.iter().all(str::is_empty) {
                continue;
            }
            if line == 0 && record.iter().any(|f| f.parse::<f64>().is_err()) {
                skip_label = record.get(0).is_some_and(|f| f.eq_ignore_ascii_case("user"));
                continue;
            }
            let fields = record.iter().skip(usize::from(skip_label));
            let row = fields
                .map(|f| {
                    f.parse::<f64>()
                        .map_err(|_| Error::parameter(format!("gradient CSV line {}: bad number {f:?}", line + 1)))
                })
                .collect::<Result<Vec<_>>>()?;
            vectors.push(row);
        }
        Self::new(vectors)
    }

    pub fn from_csv_path(path: &Path) -> Result<Self> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }

    pub fn users(&self) -> usize {
        self.vectors.len()
    }

    pub fn dim(&self) -> usize {
        self.vectors[0].len()
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn sparsify(&mut self, delta: f64) -> Result<()> {
        let sparsified = self
            .vectors
            .iter()
            .map(|g| sparsify(g, delta))
            .collect::<Result<Vec<_>>>()?;
        self.sparsified = Some(sparsified);
        Ok(())
    }

    pub fn sparsified(&self) -> Result<&[Vec<f64>]> {
        self.sparsified
            .as_deref()
            .ok_or_else(|| Error::parameter("gradients have not been sparsified"))
    }

    /// `(g_1^sp, ..., g_M^sp)` as one vector of length `M * d`.
    pub fn stacked(&self) -> Result<Vec<f64>> {
        Ok(self.sparsified()?.concat())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModelKind {
    SharedA,
    PerUserB,
    EavesSharedA,
    EavesPerUserB,
}

impl ModelKind {
    pub fn is_eavesdropper(self) -> bool {
        matches!(self, ModelKind::EavesSharedA | ModelKind::EavesPerUserB)
    }
}

/// Which columns of the operator belong to a user and the scalar that was
/// applied to that user's block.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockMeta {
    pub user: usize,
    pub col_start: usize,
    pub width: usize,
    pub scale: f64,
}

/// A realized `s x (M d)` forward operator.
#[derive(Clone, Debug)]
pub struct LinearOperator {
    pub matrix: Matrix,
    pub kind: ModelKind,
    pub blocks: Vec<BlockMeta>,
}

impl LinearOperator {
    fn assemble(kind: ModelKind, params: &SystemParams, user_blocks: Vec<Matrix>) -> Result<Self> {
        let m = params.users as f64;
        let mut blocks = Vec::with_capacity(user_blocks.len());
        let mut scaled = Vec::with_capacity(user_blocks.len());
        for (idx, (block, alpha)) in user_blocks.iter().zip(&params.alphas).enumerate() {
            let c = alpha.sqrt() / m;
            blocks.push(BlockMeta {
                user: idx + 1,
                col_start: idx * params.d,
                width: params.d,
                scale: c,
            });
            scaled.push(scale(block, c));
        }
        Ok(Self {
            matrix: hconcat(&scaled)?,
            kind,
            blocks,
        })
    }

    pub fn users(&self) -> usize {
        self.blocks.len()
    }

    pub fn apply(&self, stacked: &[f64]) -> Result<Vec<f64>> {
        self.matrix.mul_vec(stacked)
    }
}

/// The per-user `s x s` mismatch matrices seen by an eavesdropper.
#[derive(Clone, Debug)]
pub struct FadingSet {
    matrices: Vec<Matrix>,
}

impl FadingSet {
    pub fn new(matrices: Vec<Matrix>) -> Result<Self> {
        let s = matrices
            .first()
            .map(Matrix::rows)
            .ok_or_else(|| Error::parameter("fading set needs at least one matrix"))?;
        if let Some(i) = matrices.iter().position(|h| h.shape() != (s, s)) {
            return Err(Error::shape(format!(
                "fading matrix {} is {:?}, expected {s}x{s}",
                i + 1,
                matrices[i].shape()
            )));
        }
        Ok(Self { matrices })
    }

    pub fn identity(users: usize, s: usize) -> Result<Self> {
        Self::new(vec![Matrix::identity(s)?; users])
    }

    pub fn matrices(&self) -> &[Matrix] {
        &self.matrices
    }

    fn check(&self, params: &SystemParams) -> Result<()> {
        if self.matrices.len() != params.users || self.matrices[0].rows() != params.s {
            return Err(Error::shape(format!(
                "fading set has {} matrices of size {}x{}, expected {} of size {}x{}",
                self.matrices.len(),
                self.matrices[0].rows(),
                self.matrices[0].rows(),
                params.users,
                params.s,
                params.s
            )));
        }
        Ok(())
    }
}

/// Stream of user `m`'s compression matrix (1-based `m`).
pub fn compression_stream(trial: &SeedSpec, user: usize) -> SeedSpec {
    trial.child(user as u64)
}

pub fn noise_stream(trial: &SeedSpec, users: usize) -> SeedSpec {
    trial.child(users as u64 + 1)
}

pub fn fading_stream(trial: &SeedSpec, users: usize, user: usize) -> SeedSpec {
    trial.child((users + 2 + user) as u64)
}

fn shared_matrix(params: &SystemParams, trial: &SeedSpec) -> Result<Matrix> {
    sample_gaussian(params.s, params.d, 0.0, 1.0, &compression_stream(trial, 1))
}

/// `C_m + I_{s x d}` for user `m`, i.e. the block `sqrt(a_m) B_m`.
pub fn canonical_block(s: usize, d: usize, trial: &SeedSpec, user: usize) -> Result<Matrix> {
    add_rect_identity(&sample_gaussian(s, d, 0.0, 1.0, &compression_stream(trial, user))?)
}

/// `B_m` with off-diagonal entries `N(0, 1/a_m)` and diagonal entries
/// `N(1/sqrt(a_m), 1/a_m)`.
fn per_user_matrices(params: &SystemParams, trial: &SeedSpec) -> Result<Vec<Matrix>> {
    params
        .alphas
        .iter()
        .enumerate()
        .map(|(idx, alpha)| Ok(scale(&canonical_block(params.s, params.d, trial, idx + 1)?, 1.0 / alpha.sqrt())))
        .collect()
}

pub fn build_shared(params: &SystemParams, trial: &SeedSpec) -> Result<LinearOperator> {
    params.validate()?;
    let a = shared_matrix(params, trial)?;
    LinearOperator::assemble(ModelKind::SharedA, params, vec![a; params.users])
}

pub fn build_per_user(params: &SystemParams, trial: &SeedSpec) -> Result<LinearOperator> {
    params.validate()?;
    if params.s > params.d {
        return Err(Error::parameter(format!(
            "per-user compression needs s <= d, got s = {}, d = {}",
            params.s, params.d
        )));
    }
    LinearOperator::assemble(ModelKind::PerUserB, params, per_user_matrices(params, trial)?)
}

pub fn build_eaves_shared(params: &SystemParams, fading: &FadingSet, trial: &SeedSpec) -> Result<LinearOperator> {
    params.validate()?;
    fading.check(params)?;
    let a = shared_matrix(params, trial)?;
    let blocks = fading
        .matrices
        .iter()
        .map(|h| h.matmul(&a))
        .collect::<Result<Vec<_>>>()?;
    LinearOperator::assemble(ModelKind::EavesSharedA, params, blocks)
}

pub fn build_eaves_per_user(params: &SystemParams, fading: &FadingSet, trial: &SeedSpec) -> Result<LinearOperator> {
    params.validate()?;
    fading.check(params)?;
    let blocks = fading
        .matrices
        .iter()
        .zip(per_user_matrices(params, trial)?)
        .map(|(h, b)| h.matmul(&b))
        .collect::<Result<Vec<_>>>()?;
    LinearOperator::assemble(ModelKind::EavesPerUserB, params, blocks)
}

pub fn sample_gaussian_fading(params: &SystemParams, trial: &SeedSpec) -> Result<FadingSet> {
    params.validate()?;
    let matrices = (1..=params.users)
        .map(|m| sample_gaussian(params.s, params.s, 0.0, 1.0, &fading_stream(trial, params.users, m)))
        .collect::<Result<Vec<_>>>()?;
    FadingSet::new(matrices)
}

/// Received signal `y = L x^sp + gamma`.
pub fn transmit(op: &LinearOperator, grads: &GradientSet, sigma_gamma: f64, trial: &SeedSpec) -> Result<Vec<f64>> {
    if grads.users() != op.users() || grads.users() * grads.dim() != op.matrix.cols() {
        return Err(Error::shape(format!(
            "operator expects {} users over {} columns, gradients have {} users of length {}",
            op.users(),
            op.matrix.cols(),
            grads.users(),
            grads.dim()
        )));
    }
    if !(sigma_gamma >= 0.0) || !sigma_gamma.is_finite() {
        return Err(Error::parameter(format!("noise standard deviation must be >= 0, got {sigma_gamma}")));
    }
    let mut y = op.apply(&grads.stacked()?)?;
    if sigma_gamma > 0.0 {
        let mut stream = noise_stream(trial, op.users());
        if op.kind.is_eavesdropper() {
            stream = stream.child(1);
        }
        let noise = sample_gaussian(1, y.len(), 0.0, sigma_gamma, &stream)?;
        for (yi, ni) in y.iter_mut().zip(noise.to_row_major()) {
            *yi += ni;
        }
    }
    Ok(y)
}

/// Average of the sparsified updates, the quantity the receiver wants.
pub fn mean_target(grads: &GradientSet, users: usize) -> Result<Vec<f64>> {
    let sp = grads.sparsified()?;
    if sp.len() != users {
        return Err(Error::parameter(format!("gradient set has {} users, M = {users}", sp.len())));
    }
    let mut mean = vec![0.0; grads.dim()];
    for g in sp {
        for (acc, x) in mean.iter_mut().zip(g) {
            *acc += x;
        }
    }
    let m = users as f64;
    mean.iter_mut().for_each(|x| *x /= m);
    Ok(mean)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::condition_number;

    fn seed() -> SeedSpec {
        SeedSpec::with_path(17, vec![0])
    }

    #[test]
    fn sparsify_cases() {
        assert_eq!(sparsify(&[0.5, -2.0, 0.1], 1.0).unwrap(), vec![0.0, -2.0, 0.0]);
        assert_eq!(sparsify(&[1.0, -1.0], 1.0).unwrap(), vec![1.0, -1.0]);
        assert_eq!(sparsify(&[0.0; 4], 0.3).unwrap(), vec![0.0; 4]);
        assert!(matches!(sparsify(&[1.0], 0.0), Err(Error::Parameter(_))));
        assert!(matches!(sparsify(&[1.0], -1.0), Err(Error::Parameter(_))));
    }

    #[test]
    fn params_validation() {
        assert!(SystemParams::new(100, 25, 4).validate().is_ok());
        assert!(SystemParams::new(0, 25, 4).validate().is_err());
        assert!(SystemParams::new(10, 25, 2).validate().is_err());
        assert!(SystemParams::new(10, 5, 2).with_alphas(vec![1.0]).validate().is_err());
        assert!(SystemParams::new(10, 5, 2).with_alphas(vec![1.0, 0.0]).validate().is_err());
        assert!(SystemParams::new(10, 5, 2).with_sigma_gamma(-1.0).validate().is_err());
        assert!(SystemParams::new(10, 5, 2).with_delta(0.0).validate().is_err());
        let p = SystemParams::new(10, 5, 2).with_alphas(vec![2.0, 2.0]);
        assert_eq!(p.with_users(5).unwrap().alphas, vec![2.0; 5]);
        let p = SystemParams::new(10, 5, 2).with_alphas(vec![1.0, 2.0]);
        assert!(p.with_users(3).is_err());
    }

    #[test]
    fn shared_single_user_is_a() {
        let p = SystemParams::new(12, 4, 1);
        let op = build_shared(&p, &seed()).unwrap();
        let a = sample_gaussian(4, 12, 0.0, 1.0, &seed().child(1)).unwrap();
        assert_eq!(op.matrix, a);
        assert_eq!(op.kind, ModelKind::SharedA);
    }

    #[test]
    fn shared_blocks_are_scaled_copies() {
        let p = SystemParams::new(8, 3, 3).with_alphas(vec![0.5, 1.0, 4.0]);
        let op = build_shared(&p, &seed()).unwrap();
        assert_eq!(op.matrix.shape(), (3, 24));
        let a = sample_gaussian(3, 8, 0.0, 1.0, &seed().child(1)).unwrap();
        for b in &op.blocks {
            let block = op.matrix.columns(b.col_start, b.width).unwrap();
            assert!(block.max_abs_diff(&scale(&a, b.scale)) < 1e-15);
            assert!((b.scale - p.alphas[b.user - 1].sqrt() / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn shared_apply_matches_sum() {
        let p = SystemParams::new(6, 3, 2).with_alphas(vec![0.25, 9.0]);
        let op = build_shared(&p, &seed()).unwrap();
        let mut g = GradientSet::synthetic(2, 6, &SeedSpec::new(99)).unwrap();
        g.sparsify(0.3).unwrap();
        let y = op.apply(&g.stacked().unwrap()).unwrap();
        let a = sample_gaussian(3, 6, 0.0, 1.0, &seed().child(1)).unwrap();
        let sp = g.sparsified().unwrap();
        let combo: Vec<f64> = (0..6).map(|j| (0.5 * sp[0][j] + 3.0 * sp[1][j]) / 2.0).collect();
        let expect = a.mul_vec(&combo).unwrap();
        for (u, v) in y.iter().zip(&expect) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn shared_cond_equals_cond_a() {
        let p = SystemParams::new(40, 10, 5).with_alphas(vec![0.1, 0.7, 1.3, 5.0, 22.0]);
        let op = build_shared(&p, &seed()).unwrap();
        let a = sample_gaussian(10, 40, 0.0, 1.0, &seed().child(1)).unwrap();
        let ca = condition_number(&a).unwrap().value;
        let co = condition_number(&op.matrix).unwrap().value;
        assert!((ca - co).abs() <= 1e-8 * ca);
    }

    #[test]
    fn per_user_single_unit_power_is_canonical() {
        let p = SystemParams::new(12, 4, 1);
        let op = build_per_user(&p, &seed()).unwrap();
        assert_eq!(op.matrix, canonical_block(4, 12, &seed(), 1).unwrap());
    }

    #[test]
    fn per_user_scaled_blocks_are_canonical() {
        let p = SystemParams::new(10, 4, 3).with_alphas(vec![0.2, 1.0, 3.0]);
        let op = build_per_user(&p, &seed()).unwrap();
        for b in &op.blocks {
            // undo 1/M only; the sqrt(a_m) and 1/sqrt(a_m) cancel up to rounding
            let block = scale(&op.matrix.columns(b.col_start, b.width).unwrap(), 3.0);
            let canon = canonical_block(4, 10, &seed(), b.user).unwrap();
            assert!(block.max_abs_diff(&canon) < 1e-12);
        }
    }

    #[test]
    fn per_user_rejects_s_above_d() {
        let p = SystemParams::new(4, 6, 2);
        assert!(build_per_user(&p, &seed()).is_err());
    }

    #[test]
    fn identity_fading_reduces_to_legitimate() {
        let p = SystemParams::new(10, 4, 3).with_alphas(vec![0.2, 1.0, 3.0]);
        let id = FadingSet::identity(3, 4).unwrap();
        let legit = build_shared(&p, &seed()).unwrap();
        let eaves = build_eaves_shared(&p, &id, &seed()).unwrap();
        assert_eq!(legit.matrix.to_row_major(), eaves.matrix.to_row_major());
        let legit = build_per_user(&p, &seed()).unwrap();
        let eaves = build_eaves_per_user(&p, &id, &seed()).unwrap();
        assert_eq!(legit.matrix.to_row_major(), eaves.matrix.to_row_major());
    }

    #[test]
    fn doubled_fading_on_single_user() {
        let p = SystemParams::new(10, 4, 1);
        let two = FadingSet::new(vec![scale(&Matrix::identity(4).unwrap(), 2.0)]).unwrap();
        let legit = build_shared(&p, &seed()).unwrap();
        let eaves = build_eaves_shared(&p, &two, &seed()).unwrap();
        assert_eq!(eaves.matrix, scale(&legit.matrix, 2.0));
        let cl = condition_number(&legit.matrix).unwrap().value;
        let ce = condition_number(&eaves.matrix).unwrap().value;
        assert!((cl - ce).abs() <= 1e-12 * cl);
    }

    #[test]
    fn fading_shape_is_checked() {
        let p = SystemParams::new(10, 4, 2);
        let wrong_count = FadingSet::identity(3, 4).unwrap();
        let wrong_size = FadingSet::identity(2, 5).unwrap();
        for f in [&wrong_count, &wrong_size] {
            assert!(matches!(build_eaves_shared(&p, f, &seed()), Err(Error::Shape(_))));
            assert!(matches!(build_eaves_per_user(&p, f, &seed()), Err(Error::Shape(_))));
        }
        let bad = FadingSet::new(vec![Matrix::zeros(3, 4).unwrap()]);
        assert!(matches!(bad, Err(Error::Shape(_))));
    }

    #[test]
    fn eaves_shared_factorizes() {
        // L'_E = P_M Q with P_M = (H_1 A, ..., H_M A), Q = diag(sqrt(a_m) I_d).
        let p = SystemParams::new(6, 3, 2).with_alphas(vec![0.5, 2.0]);
        let fading = sample_gaussian_fading(&p, &seed()).unwrap();
        let op = build_eaves_shared(&p, &fading, &seed()).unwrap();
        let a = sample_gaussian(3, 6, 0.0, 1.0, &seed().child(1)).unwrap();
        let pm = hconcat(&[
            fading.matrices()[0].matmul(&a).unwrap(),
            fading.matrices()[1].matmul(&a).unwrap(),
        ])
        .unwrap();
        let mut qdiag = vec![0.5f64.sqrt(); 6];
        qdiag.extend(vec![2.0f64.sqrt(); 6]);
        let q = Matrix::diagonal(&qdiag).unwrap();
        let expect = scale(&pm.matmul(&q).unwrap(), 0.5);
        assert!(op.matrix.max_abs_diff(&expect) < 1e-12);
    }

    #[test]
    fn fading_set_shape_and_determinism() {
        let p = SystemParams::new(10, 4, 3);
        let f1 = sample_gaussian_fading(&p, &seed()).unwrap();
        let f2 = sample_gaussian_fading(&p, &seed()).unwrap();
        assert_eq!(f1.matrices().len(), 3);
        for (a, b) in f1.matrices().iter().zip(f2.matrices()) {
            assert_eq!(a.shape(), (4, 4));
            assert_eq!(a, b);
        }
    }

    #[test]
    fn fading_entries_have_unit_variance() {
        let p = SystemParams::new(40, 20, 10);
        let f = sample_gaussian_fading(&p, &seed()).unwrap();
        let xs: Vec<f64> = f.matrices().iter().flat_map(Matrix::to_row_major).collect();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((var - 1.0).abs() < 4.0 * (2.0 / (n - 1.0)).sqrt(), "var = {var}");
    }

    #[test]
    fn transmit_noiseless_cases() {
        let p = SystemParams::new(8, 3, 1);
        let op = build_shared(&p, &seed()).unwrap();
        let mut g = GradientSet::synthetic(1, 8, &SeedSpec::new(5)).unwrap();
        g.sparsify(0.5).unwrap();
        let y = transmit(&op, &g, 0.0, &seed()).unwrap();
        let a = sample_gaussian(3, 8, 0.0, 1.0, &seed().child(1)).unwrap();
        assert_eq!(y, a.mul_vec(&g.sparsified().unwrap()[0]).unwrap());

        let mut z = GradientSet::new(vec![vec![0.0; 8]]).unwrap();
        z.sparsify(0.5).unwrap();
        assert_eq!(transmit(&op, &z, 0.0, &seed()).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn transmit_checks_shapes() {
        let p = SystemParams::new(8, 3, 2);
        let op = build_shared(&p, &seed()).unwrap();
        let mut g = GradientSet::synthetic(1, 8, &SeedSpec::new(5)).unwrap();
        g.sparsify(0.5).unwrap();
        assert!(matches!(transmit(&op, &g, 0.0, &seed()), Err(Error::Shape(_))));
        let raw = GradientSet::synthetic(2, 8, &SeedSpec::new(5)).unwrap();
        assert!(transmit(&op, &raw, 0.0, &seed()).is_err());
    }

    #[test]
    fn mean_target_cases() {
        let mut g = GradientSet::new(vec![vec![1.0, -3.0, 0.05]]).unwrap();
        g.sparsify(0.1).unwrap();
        assert_eq!(mean_target(&g, 1).unwrap(), vec![1.0, -3.0, 0.0]);
        let mut g = GradientSet::new(vec![vec![1.0, -3.0], vec![-1.0, 3.0]]).unwrap();
        g.sparsify(0.1).unwrap();
        assert_eq!(mean_target(&g, 2).unwrap(), vec![0.0, 0.0]);
        assert!(mean_target(&g, 3).is_err());
    }

    #[test]
    fn gradient_csv_variants() {
        let plain = "1.0,2.0,3.0\n-1,0,0.5\n";
        let g = GradientSet::from_csv_reader(plain.as_bytes()).unwrap();
        assert_eq!(g.vectors(), &[vec![1.0, 2.0, 3.0], vec![-1.0, 0.0, 0.5]]);

        let labelled = "user,g_1,g_2,g_3\n1,1.0,2.0,3.0\n2,-1,0,0.5\n";
        let g2 = GradientSet::from_csv_reader(labelled.as_bytes()).unwrap();
        assert_eq!(g2.vectors(), g.vectors());

        let header_only_g = "g_1,g_2\n1,2\n";
        let g3 = GradientSet::from_csv_reader(header_only_g.as_bytes()).unwrap();
        assert_eq!(g3.vectors(), &[vec![1.0, 2.0]]);

        assert!(GradientSet::from_csv_reader("1,2\n3\n".as_bytes()).is_err());
        assert!(GradientSet::from_csv_reader("1,x\n".as_bytes()).is_err());
        assert!(GradientSet::from_csv_reader("1,inf\n".as_bytes()).is_err());
        assert!(GradientSet::from_csv_reader("".as_bytes()).is_err());
    }

    #[test]
    fn synthetic_users_are_stable_across_counts() {
        let s = SeedSpec::new(3);
        let g2 = GradientSet::synthetic(2, 5, &s).unwrap();
        let g4 = GradientSet::synthetic(4, 5, &s).unwrap();
        assert_eq!(&g4.vectors()[..2], g2.vectors());
    }
}
