//! Matrix factor model for daily covariance matrices:
//! `Sigma_x(t) = A Sigma_f(t) A' + Sigma_0` with orthonormal d x r loadings.
//!
//! The loadings are the leading eigenvectors of the scatter of the daily
//! matrices around their mean; the factor covariance series is the
//! projection `A' Sigma_x(t) A` and the residual matrix is what the mean
//! covariance leaves outside the loading subspace.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::linalg;
use crate::rcov::CovMatrixSeries;

#[derive(Debug, Error)]
pub enum FactorError {
    #[error("need at least {needed} days, got {got}")]
    InsufficientHistory { needed: usize, got: usize },
    #[error("factor rank {r} out of range 1..={d}")]
    BadRank { r: usize, d: usize },
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// Fitted factor model.
#[derive(Debug, Clone)]
pub struct FactorModelFit {
    /// d x r loading matrix with orthonormal columns.
    pub loadings: DMatrix<f64>,
    /// d x d residual matrix.
    pub sigma0: DMatrix<f64>,
    /// r x r factor covariance matrix per day.
    pub factor_series: Vec<DMatrix<f64>>,
    /// Full eigenvalue spectrum of the scatter matrix, descending.
    pub eigenvalues: DVector<f64>,
    /// Mean of the daily covariance matrices.
    pub mean_cov: DMatrix<f64>,
}

impl FactorModelFit {
    pub fn rank(&self) -> usize {
        self.loadings.ncols()
    }

    pub fn dim(&self) -> usize {
        self.loadings.nrows()
    }
}

/// Mean covariance and scatter of a series of daily matrices.
///
/// The scatter is the averaged matrix square of the deviations,
/// `(1/T) sum_t (Sigma_x(t) - mean)^2`, which is symmetric PSD.
pub fn sample_moments(series: &CovMatrixSeries) -> Result<(DMatrix<f64>, DMatrix<f64>), FactorError> {
    let t_len = series.len();
    if t_len < 2 {
        return Err(FactorError::InsufficientHistory { needed: 2, got: t_len });
    }
    let d = series.dim();
    let mut mean = DMatrix::zeros(d, d);
    for m in series.matrices() {
        mean += m;
    }
    mean /= t_len as f64;
    let mut scatter = DMatrix::zeros(d, d);
    for m in series.matrices() {
        let dev = m - &mean;
        scatter += &dev * &dev;
    }
    scatter /= t_len as f64;
    Ok((linalg::symmetrize(&mean), linalg::symmetrize(&scatter)))
}

/// Leading eigenvectors of the scatter matrix as loadings, plus the full
/// descending eigenvalue spectrum for scree inspection.
///
/// Each column's sign is fixed so its largest-magnitude entry is positive;
/// eigenvalue ties are ordered by that entry's row index. Both conventions
/// make the output deterministic.
pub fn extract_loadings(
    scatter: &DMatrix<f64>,
    r: usize,
) -> Result<(DMatrix<f64>, DVector<f64>), FactorError> {
    let d = scatter.nrows();
    if scatter.ncols() != d {
        return Err(FactorError::DimensionMismatch(format!(
            "scatter is {}x{}",
            scatter.nrows(),
            scatter.ncols()
        )));
    }
    if r < 1 || r > d {
        return Err(FactorError::BadRank { r, d });
    }
    let asym = linalg::asymmetry(scatter);
    if asym > 1e-8 * (1.0 + scatter.amax()) {
        return Err(FactorError::NotSymmetric(asym));
    }
    let (values, vectors) = linalg::sym_eigen_desc(scatter);
    let mut loadings = DMatrix::zeros(d, r);
    for j in 0..r {
        let col = vectors.column(j);
        let lead = linalg::argmax_abs(col.as_slice());
        let flip = if col[lead] < 0.0 { -1.0 } else { 1.0 };
        loadings.set_column(j, &(col * flip));
    }
    Ok((loadings, values))
}

/// Project each daily matrix into factor space: `A' Sigma_x(t) A`.
pub fn factor_covs(
    series: &CovMatrixSeries,
    loadings: &DMatrix<f64>,
) -> Result<Vec<DMatrix<f64>>, FactorError> {
    if loadings.nrows() != series.dim() {
        return Err(FactorError::DimensionMismatch(format!(
            "loadings have {} rows, series dimension is {}",
            loadings.nrows(),
            series.dim()
        )));
    }
    Ok(series
        .matrices()
        .map(|m| linalg::symmetrize(&(loadings.transpose() * m * loadings)))
        .collect())
}

/// Residual matrix of the factor model:
/// `Sigma_0 = mean - A A' mean A A'`.
pub fn estimate_sigma0(
    mean_cov: &DMatrix<f64>,
    loadings: &DMatrix<f64>,
) -> Result<DMatrix<f64>, FactorError> {
    if loadings.nrows() != mean_cov.nrows() || mean_cov.nrows() != mean_cov.ncols() {
        return Err(FactorError::DimensionMismatch(format!(
            "mean is {}x{}, loadings have {} rows",
            mean_cov.nrows(),
            mean_cov.ncols(),
            loadings.nrows()
        )));
    }
    let proj = loadings * loadings.transpose();
    Ok(linalg::symmetrize(&(mean_cov - &proj * mean_cov * &proj)))
}

/// Map a factor-space matrix back to asset space: `A F A' + Sigma_0`.
pub fn to_asset_space(factor_matrix: &DMatrix<f64>, fit: &FactorModelFit) -> DMatrix<f64> {
    linalg::symmetrize(&(&fit.loadings * factor_matrix * fit.loadings.transpose() + &fit.sigma0))
}

/// Full factor-model fit: moments, loadings, factor series and residual.
pub fn fit_factor_model(series: &CovMatrixSeries, r: usize) -> Result<FactorModelFit, FactorError> {
    let (mean_cov, scatter) = sample_moments(series)?;
    let (loadings, eigenvalues) = extract_loadings(&scatter, r)?;
    let factor_series = factor_covs(series, &loadings)?;
    let sigma0 = estimate_sigma0(&mean_cov, &loadings)?;
    Ok(FactorModelFit { loadings, sigma0, factor_series, eigenvalues, mean_cov })
}

/// Rank suggestion from the scree: the position of the largest ratio drop
/// between consecutive eigenvalues. Advisory only; the rank used by the
/// pipeline is always caller-supplied.
pub fn suggest_rank(eigenvalues: &DVector<f64>) -> usize {
    let d = eigenvalues.len();
    let mut best = 1usize;
    let mut best_ratio = 0.0f64;
    for j in 0..d.saturating_sub(1) {
        let next = eigenvalues[j + 1];
        if next <= 0.0 {
            // everything beyond is numerically rank-deficient
            if eigenvalues[j] > 0.0 && best_ratio == 0.0 {
                best = j + 1;
            }
            break;
        }
        let ratio = eigenvalues[j] / next;
        if ratio > best_ratio {
            best_ratio = ratio;
            best = j + 1;
        }
    }
    best
}

/// Align the columns of `estimated` to `reference` over signed permutations,
/// maximizing the sum of `|estimated' . reference|` diagonal magnitudes.
/// Returns the aligned matrix. Used by simulation-based convergence checks
/// where eigenvector order and sign are arbitrary.
pub fn align_columns(estimated: &DMatrix<f64>, reference: &DMatrix<f64>) -> DMatrix<f64> {
    let r = estimated.ncols();
    assert_eq!(r, reference.ncols(), "column counts must match");
    let gram = estimated.transpose() * reference;
    let mut best_perm: Vec<usize> = (0..r).collect();
    let mut best_score = f64::NEG_INFINITY;
    let mut perm: Vec<usize> = (0..r).collect();
    permute(&mut perm, 0, &mut |p| {
        let score: f64 = (0..r).map(|j| gram[(p[j], j)].abs()).sum();
        if score > best_score {
            best_score = score;
            best_perm = p.to_vec();
        }
    });
    let mut aligned = DMatrix::zeros(estimated.nrows(), r);
    for j in 0..r {
        let src = best_perm[j];
        let sign = if gram[(src, j)] < 0.0 { -1.0 } else { 1.0 };
        aligned.set_column(j, &(estimated.column(src) * sign));
    }
    aligned
}

fn permute(xs: &mut [usize], k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == xs.len() {
        visit(xs);
        return;
    }
    for i in k..xs.len() {
        xs.swap(k, i);
        permute(xs, k + 1, visit);
        xs.swap(k, i);
    }
}
