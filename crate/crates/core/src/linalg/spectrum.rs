//! Singular values and condition numbers.

use nalgebra::SVD;

use super::matrix::Matrix;
use crate::error::{Error, Result};

/// Cap on implicit QR sweeps in the SVD. Dense Gaussian matrices of the
/// sizes used here converge in a few dozen.
const MAX_SVD_ITERATIONS: usize = 10_000;

/// The `min(rows, cols)` singular values, non-increasing.
#[derive(Clone, Debug, PartialEq)]
pub struct SingularSpectrum {
    values: Vec<f64>,
}

impl SingularSpectrum {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn largest(&self) -> f64 {
        self.values[0]
    }

    pub fn smallest(&self) -> f64 {
        *self.values.last().expect("spectrum is never empty")
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub fn singular_values(m: &Matrix) -> Result<SingularSpectrum> {
    if !m.is_finite() {
        return Err(Error::Computation("matrix has non-finite entries".into()));
    }
    let svd = SVD::try_new(m.as_inner().clone(), false, false, f64::EPSILON, MAX_SVD_ITERATIONS)
        .ok_or_else(|| {
            Error::Computation(format!(
                "SVD of {}x{} matrix did not converge in {MAX_SVD_ITERATIONS} iterations",
                m.rows(),
                m.cols()
            ))
        })?;
    let mut values: Vec<f64> = svd.singular_values.iter().map(|s| s.abs()).collect();
    values.sort_by(|a, b| b.total_cmp(a));
    Ok(SingularSpectrum { values })
}

/// Result of a condition-number evaluation.
///
/// `value` is `+inf` exactly when `rank_deficient` is set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Conditioning {
    pub value: f64,
    pub rank_deficient: bool,
}

impl Conditioning {
    pub fn finite(self) -> Option<f64> {
        (!self.rank_deficient).then_some(self.value)
    }
}

/// `sigma_max / sigma_min` of a wide or square matrix.
///
/// `sigma_min` counts as zero when it falls below
/// `max(rows, cols) * eps * sigma_max`.
pub fn condition_number(m: &Matrix) -> Result<Conditioning> {
    if m.rows() > m.cols() {
        return Err(Error::shape(format!(
            "condition number expects a wide or square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    let spectrum = singular_values(m)?;
    Ok(conditioning_of(&spectrum, m.rows().max(m.cols())))
}

pub(crate) fn conditioning_of(spectrum: &SingularSpectrum, max_dim: usize) -> Conditioning {
    let (hi, lo) = (spectrum.largest(), spectrum.smallest());
    let tol = max_dim as f64 * f64::EPSILON * hi;
    if hi == 0.0 || lo < tol {
        Conditioning {
            value: f64::INFINITY,
            rank_deficient: true,
        }
    } else {
        Conditioning {
            value: (hi / lo).max(1.0),
            rank_deficient: false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{hconcat, sample_gaussian, scale, SeedSpec};

    #[test]
    fn diagonal_spectrum() {
        let d = Matrix::diagonal(&[1.0, 3.0]).unwrap();
        let s = singular_values(&d).unwrap();
        assert!((s.values()[0] - 3.0).abs() < 1e-14);
        assert!((s.values()[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rect_identity_spectrum() {
        let m = Matrix::from_rows(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]).unwrap();
        let s = singular_values(&m).unwrap();
        assert_eq!(s.len(), 2);
        for v in s.values() {
            assert!((v - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn simple_condition_numbers() {
        let c = condition_number(&Matrix::identity(5).unwrap()).unwrap();
        assert_eq!(c.finite(), Some(1.0));
        let c = condition_number(&Matrix::diagonal(&[2.0, 1.0]).unwrap()).unwrap();
        assert!((c.value - 2.0).abs() < 1e-14);
    }

    #[test]
    fn tall_is_rejected() {
        let tall = Matrix::zeros(3, 2).unwrap();
        assert!(matches!(condition_number(&tall), Err(Error::Shape(_))));
    }

    #[test]
    fn rank_deficient_gives_sentinel() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![2.0, 4.0, 6.0]]).unwrap();
        let c = condition_number(&m).unwrap();
        assert!(c.rank_deficient);
        assert!(c.value.is_infinite());
        assert!(condition_number(&Matrix::zeros(2, 2).unwrap()).unwrap().rank_deficient);
    }

    #[test]
    fn wide_gaussian_is_full_rank() {
        let a = sample_gaussian(25, 100, 0.0, 1.0, &SeedSpec::new(5)).unwrap();
        let s = singular_values(&a).unwrap();
        assert!(s.smallest() > 0.0);
        assert!(condition_number(&a).unwrap().finite().is_some());
    }

    #[test]
    fn repeated_blocks_keep_conditioning() {
        let a = sample_gaussian(6, 10, 0.0, 1.0, &SeedSpec::new(8)).unwrap();
        let base = condition_number(&a).unwrap().value;
        let alphas = [0.3, 2.0, 7.5];
        let blocks: Vec<Matrix> = alphas.iter().map(|al: &f64| scale(&a, al.sqrt())).collect();
        let op = scale(&hconcat(&blocks).unwrap(), 1.0 / 3.0);
        let c = condition_number(&op).unwrap().value;
        assert!((c - base).abs() <= 1e-8 * base);
    }
}
