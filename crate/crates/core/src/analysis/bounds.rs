//! Closed-form bounds on expected condition numbers.

use crate::error::{Error, Result};

/// `(sqrt(d) + sqrt(s)) / (sqrt(d) - sqrt(s))`: bound for the shared
/// compression model, constant in the number of users.
pub fn solvability_bound_shared(d: usize, s: usize) -> Result<f64> {
    if s == 0 || d <= s {
        return Err(Error::domain(format!("shared-model bound needs d > s >= 1, got d = {d}, s = {s}")));
    }
    let (rd, rs) = ((d as f64).sqrt(), (s as f64).sqrt());
    Ok((rd + rs) / (rd - rs))
}

/// Whether `(sqrt(d) - 1)^2 > s`, the condition under which the per-user
/// bound is finite and decreasing for every `M >= 1`.
pub fn per_user_domain_holds(d: usize, s: usize) -> bool {
    // (sqrt(d) - 1)^2 > s  <=>  d + 1 - s > 2 sqrt(d); both sides are
    // compared exactly via integers: (d + 1 - s)^2 > 4d with d + 1 > s.
    if s == 0 || d < s {
        return false;
    }
    let lhs = (d + 1 - s) as u128;
    lhs * lhs > 4 * d as u128
}

/// `(sqrt(Md) + sqrt(s) + sqrt(M)) / (sqrt(Md) - sqrt(s) - sqrt(M))`: bound
/// for the per-user compression model.
pub fn solvability_bound_per_user(d: usize, s: usize, users: usize) -> Result<f64> {
    if users == 0 {
        return Err(Error::domain("per-user bound needs M >= 1"));
    }
    if !per_user_domain_holds(d, s) {
        return Err(Error::domain(format!(
            "per-user bound needs (sqrt(d) - 1)^2 > s, got d = {d}, s = {s}"
        )));
    }
    let m = users as f64;
    let md = (m * d as f64).sqrt();
    let rs = (s as f64).sqrt();
    let rm = m.sqrt();
    Ok((md + rs + rm) / (md - rs - rm))
}

/// `(sqrt(N) - sqrt(n), sqrt(N) + sqrt(n))`, the range of the expected
/// extreme singular values of a tall `N x n` standard Gaussian matrix.
pub fn fact1_bounds(tall_rows: usize, cols: usize) -> Result<(f64, f64)> {
    if cols == 0 || tall_rows < cols {
        return Err(Error::domain(format!(
            "extreme singular value bounds need N >= n >= 1, got N = {tall_rows}, n = {cols}"
        )));
    }
    let (rn, rc) = ((tall_rows as f64).sqrt(), (cols as f64).sqrt());
    Ok((rn - rc, rn + rc))
}
