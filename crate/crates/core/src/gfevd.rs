//! Generalized forecast-error variance decomposition (order-invariant) and
//! row normalization.
//!
//! For horizon `H`, MA coefficients `Psi_h` and residual covariance `Sigma`,
//!
//! ```text
//! w_ij = s_jj^-1 * sum_h (e_i' Psi_h Sigma e_j)^2 / sum_h (e_i' Psi_h Sigma Psi_h' e_i)
//! ```
//!
//! where `s_jj` is `Sigma[j][j]` under [`SigmaConvention::Variance`] and its
//! square root under [`SigmaConvention::StdDev`]. Rows of the raw matrix do
//! not sum to one because shocks are correlated; [`normalize_rows`] fixes
//! that.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::var::{MaCoefficients, VarModel, ma_coefficients};

/// Eigenvalues of `Sigma` below `-PSD_TOLERANCE * max(|lambda|)` are an
/// error; those between that and zero are clipped.
pub const PSD_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FevdError {
    #[error("horizon must be at least 1")]
    ZeroHorizon,
    #[error("forecast error variance of variable {0} is not positive")]
    DegenerateVariance(usize),
    #[error("residual variance of variable {0} is not positive")]
    NonPositiveDiagonal(usize),
    #[error("sigma is not positive semi-definite (eigenvalue {0:e})")]
    NotPsd(f64),
    #[error("row {0} sums to zero")]
    ZeroRow(usize),
    #[error("{0}")]
    Shape(String),
}

pub type Result<T> = std::result::Result<T, FevdError>;

/// How `s_jj` in the decomposition is read off `Sigma`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SigmaConvention {
    /// `s_jj = Sigma[j][j]`, the generalized-impulse construction.
    #[default]
    Variance,
    /// `s_jj = sqrt(Sigma[j][j])`.
    StdDev,
}

impl fmt::Display for SigmaConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SigmaConvention::Variance => "variance",
            SigmaConvention::StdDev => "stddev",
        })
    }
}

impl FromStr for SigmaConvention {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "variance" | "var" => Ok(SigmaConvention::Variance),
            "stddev" | "sd" | "std" => Ok(SigmaConvention::StdDev),
            other => Err(format!("unknown sigma convention `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FevdMatrix {
    pub raw: DMatrix<f64>,
    pub normalized: DMatrix<f64>,
    pub horizon: usize,
    pub convention: SigmaConvention,
}

impl FevdMatrix {
    pub fn from_model(model: &VarModel, horizon: usize, convention: SigmaConvention) -> Result<Self> {
        if horizon == 0 {
            return Err(FevdError::ZeroHorizon);
        }
        let psi = ma_coefficients(model, horizon);
        Self::from_ma(&psi, &model.sigma, convention)
    }

    pub fn from_ma(psi: &MaCoefficients, sigma: &DMatrix<f64>, convention: SigmaConvention) -> Result<Self> {
        let raw = gfevd_raw(psi, sigma, convention)?;
        let normalized = normalize_rows(&raw)?;
        Ok(Self {
            raw,
            normalized,
            horizon: psi.horizon(),
            convention,
        })
    }
}

/// Check `Sigma` is PSD. Returns it untouched when no eigenvalue needs
/// clipping, otherwise the reconstruction with tiny negatives set to zero.
fn enforce_psd(sigma: &DMatrix<f64>) -> Result<Option<DMatrix<f64>>> {
    let eig = sigma.clone().symmetric_eigen();
    let scale = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = PSD_TOLERANCE * scale.max(f64::MIN_POSITIVE);
    let mut clipped = false;
    let mut values = eig.eigenvalues.clone();
    for v in values.iter_mut() {
        if *v < -tol {
            return Err(FevdError::NotPsd(*v));
        }
        if *v < 0.0 {
            *v = 0.0;
            clipped = true;
        }
    }
    if !clipped {
        return Ok(None);
    }
    let v = &eig.eigenvectors;
    let rebuilt = v * DMatrix::from_diagonal(&values) * v.transpose();
    Ok(Some((&rebuilt + rebuilt.transpose()) * 0.5))
}

/// Raw (unnormalized) decomposition matrix.
pub fn gfevd_raw(psi: &MaCoefficients, sigma: &DMatrix<f64>, convention: SigmaConvention) -> Result<DMatrix<f64>> {
    let h = psi.horizon();
    if h == 0 {
        return Err(FevdError::ZeroHorizon);
    }
    let n = sigma.nrows();
    if sigma.ncols() != n || psi.as_slice().iter().any(|m| m.shape() != (n, n)) {
        return Err(FevdError::Shape("MA coefficients and sigma disagree in dimension".into()));
    }
    if let Some(j) = (0..n).find(|&j| !(sigma[(j, j)] > 0.0)) {
        return Err(FevdError::NonPositiveDiagonal(j));
    }
    let owned;
    let sigma = match enforce_psd(sigma)? {
        Some(s) => {
            owned = s;
            &owned
        }
        None => sigma,
    };

    let mut num = DMatrix::<f64>::zeros(n, n);
    let mut den = vec![0.0; n];
    for psi_h in psi.as_slice() {
        let ps = psi_h * sigma;
        for i in 0..n {
            for j in 0..n {
                num[(i, j)] += ps[(i, j)] * ps[(i, j)];
            }
            // e_i' Psi Sigma Psi' e_i
            den[i] += ps.row(i).dot(&psi_h.row(i));
        }
    }
    let mut raw = DMatrix::zeros(n, n);
    for i in 0..n {
        if !(den[i] > 0.0) {
            return Err(FevdError::DegenerateVariance(i));
        }
        for j in 0..n {
            let s_jj = match convention {
                SigmaConvention::Variance => sigma[(j, j)],
                SigmaConvention::StdDev => sigma[(j, j)].sqrt(),
            };
            raw[(i, j)] = num[(i, j)] / s_jj / den[i];
        }
    }
    Ok(raw)
}

/// Divide each row by its sum.
pub fn normalize_rows(raw: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut out = raw.clone();
    for (i, mut row) in out.row_iter_mut().enumerate() {
        let sum: f64 = row.iter().sum();
        if !(sum > 0.0) {
            return Err(FevdError::ZeroRow(i));
        }
        row.unscale_mut(sum);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn white(sigma: DMatrix<f64>, h: usize) -> MaCoefficients {
        let n = sigma.nrows();
        let mut psi = vec![DMatrix::identity(n, n)];
        psi.extend((1..h).map(|_| DMatrix::zeros(n, n)));
        MaCoefficients(psi)
    }

    #[test]
    fn orthogonal_white_noise_is_identity() {
        for h in [1, 3, 10] {
            let raw = gfevd_raw(&white(DMatrix::identity(3, 3), h), &DMatrix::identity(3, 3), SigmaConvention::Variance)
                .unwrap();
            assert_eq!(raw, DMatrix::identity(3, 3));
        }
    }

    #[test]
    fn correlated_white_noise_by_hand() {
        // (e_i' S e_j)^2 / s_jj over e_i' S e_i = 0.25 off the diagonal
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        let raw = gfevd_raw(&white(s.clone(), 1), &s, SigmaConvention::Variance).unwrap();
        let expect = DMatrix::from_row_slice(2, 2, &[1.0, 0.25, 0.25, 1.0]);
        assert!((&raw - &expect).abs().max() < 1e-15);
        let norm = normalize_rows(&raw).unwrap();
        let expect = DMatrix::from_row_slice(2, 2, &[0.8, 0.2, 0.2, 0.8]);
        assert!((&norm - &expect).abs().max() < 1e-15);
    }

    #[test]
    fn stddev_convention_differs_off_unit_scale() {
        let s = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 9.0]);
        let psi = white(s.clone(), 1);
        let var = gfevd_raw(&psi, &s, SigmaConvention::Variance).unwrap();
        let sd = gfevd_raw(&psi, &s, SigmaConvention::StdDev).unwrap();
        // column j is scaled by sqrt(s_jj)
        assert!((sd[(0, 1)] / var[(0, 1)] - 3.0).abs() < 1e-12);
        assert!((sd[(1, 0)] / var[(1, 0)] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn diagonal_system_decouples() {
        let phi = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.5, -0.3, 0.8]));
        let s = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 2.0, 0.5]));
        let m = VarModel::from_parts(vec![phi], s).unwrap();
        for h in [1, 2, 10] {
            let f = FevdMatrix::from_model(&m, h, SigmaConvention::Variance).unwrap();
            for i in 0..3 {
                for j in 0..3 {
                    if i != j {
                        assert_eq!(f.raw[(i, j)], 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize_rows(&DMatrix::identity(3, 3)).unwrap(), DMatrix::identity(3, 3));
        let z = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(normalize_rows(&z), Err(FevdError::ZeroRow(1)));
    }

    #[test]
    fn rejects_indefinite_sigma() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(gfevd_raw(&white(s.clone(), 1), &s, SigmaConvention::Variance), Err(FevdError::NotPsd(_))));
        let s = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]);
        assert_eq!(
            gfevd_raw(&white(s.clone(), 1), &s, SigmaConvention::Variance),
            Err(FevdError::NonPositiveDiagonal(0))
        );
    }

    #[test]
    fn singular_psd_sigma_is_accepted() {
        // rank one, eigenvalues {2, 0}; rounding may push the zero slightly negative
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let raw = gfevd_raw(&white(s.clone(), 1), &s, SigmaConvention::Variance).unwrap();
        let norm = normalize_rows(&raw).unwrap();
        assert!((norm[(0, 1)] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn zero_horizon() {
        assert_eq!(
            gfevd_raw(&MaCoefficients(vec![]), &DMatrix::identity(2, 2), SigmaConvention::Variance),
            Err(FevdError::ZeroHorizon)
        );
    }
}
