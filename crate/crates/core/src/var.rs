//! Benchmark VAR model on the half-vectorized factor covariance series.
//!
//! The factor matrices are stacked into vech vectors of length
//! `K = r (r + 1) / 2`, a VAR(n) is fitted by least squares, and order
//! selection uses the AIC / HQ / SC / FPE criteria on a common effective
//! sample. Forecasts are iterated and un-vech'ed; unlike the Wishart model
//! they carry no positive-definiteness guarantee, so each forecast matrix
//! is tagged with a PSD flag.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::linalg;

#[derive(Debug, Error)]
pub enum VarError {
    #[error("vector length {0} is not a triangular number")]
    BadLength(usize),
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("regressor matrix is rank deficient")]
    SingularDesign,
    #[error("need more than {needed} rows, got {got}")]
    InsufficientHistory { needed: usize, got: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Half-vectorization: stack the lower triangle column by column.
pub fn vech(m: &DMatrix<f64>) -> Result<DVector<f64>, VarError> {
    let r = m.nrows();
    if m.ncols() != r {
        return Err(VarError::InvalidArgument(format!("matrix is {}x{}", m.nrows(), m.ncols())));
    }
    let asym = linalg::asymmetry(m);
    if asym > 1e-8 * (1.0 + m.amax()) {
        return Err(VarError::NotSymmetric(asym));
    }
    let mut v = DVector::zeros(r * (r + 1) / 2);
    let mut idx = 0;
    for j in 0..r {
        for i in j..r {
            v[idx] = m[(i, j)];
            idx += 1;
        }
    }
    Ok(v)
}

/// Inverse of [`vech`]: rebuild the symmetric matrix.
pub fn unvech(v: &DVector<f64>) -> Result<DMatrix<f64>, VarError> {
    let k = v.len();
    let r = ((((8 * k + 1) as f64).sqrt() - 1.0) / 2.0).round() as usize;
    if r * (r + 1) / 2 != k {
        return Err(VarError::BadLength(k));
    }
    let mut m = DMatrix::zeros(r, r);
    let mut idx = 0;
    for j in 0..r {
        for i in j..r {
            m[(i, j)] = v[idx];
            m[(j, i)] = v[idx];
            idx += 1;
        }
    }
    Ok(m)
}

/// T x K matrix whose row t is `vech` of the t-th factor covariance matrix.
#[derive(Debug, Clone)]
pub struct VechSeries {
    r: usize,
    rows: DMatrix<f64>,
}

impl VechSeries {
    /// Stack a factor covariance series.
    pub fn from_matrices(matrices: &[DMatrix<f64>]) -> Result<Self, VarError> {
        if matrices.is_empty() {
            return Err(VarError::InvalidArgument("empty series".to_string()));
        }
        let r = matrices[0].nrows();
        let k = r * (r + 1) / 2;
        let mut rows = DMatrix::zeros(matrices.len(), k);
        for (t, m) in matrices.iter().enumerate() {
            if m.nrows() != r {
                return Err(VarError::InvalidArgument(format!(
                    "matrix {t} is {}x{}, expected {r}x{r}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            rows.row_mut(t).copy_from(&vech(m)?.transpose());
        }
        Ok(VechSeries { r, rows })
    }

    /// Use raw rows directly (row length must be triangular).
    pub fn from_rows(rows: DMatrix<f64>) -> Result<Self, VarError> {
        let k = rows.ncols();
        let r = ((((8 * k + 1) as f64).sqrt() - 1.0) / 2.0).round() as usize;
        if r * (r + 1) / 2 != k {
            return Err(VarError::BadLength(k));
        }
        Ok(VechSeries { r, rows })
    }

    pub fn rank(&self) -> usize {
        self.r
    }

    pub fn k(&self) -> usize {
        self.rows.ncols()
    }

    pub fn len(&self) -> usize {
        self.rows.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.nrows() == 0
    }

    pub fn rows(&self) -> &DMatrix<f64> {
        &self.rows
    }
}

/// Order-selection criteria for one candidate order.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct CriteriaRow {
    pub order: usize,
    pub aic: f64,
    pub hq: f64,
    pub sc: f64,
    pub fpe: f64,
}

/// Criteria table over orders 1..=max_order with per-criterion argmins.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct CriteriaTable {
    pub rows: Vec<CriteriaRow>,
    pub selected_aic: usize,
    pub selected_hq: usize,
    pub selected_sc: usize,
    pub selected_fpe: usize,
}

/// Least-squares VAR fit.
#[derive(Debug, Clone)]
pub struct VarFit {
    pub order: usize,
    /// Intercept vector, length K.
    pub intercept: DVector<f64>,
    /// Coefficient matrices A_1..A_n, each K x K.
    pub coefficients: Vec<DMatrix<f64>>,
    /// Residual covariance with the degrees-of-freedom divisor.
    pub resid_cov: DMatrix<f64>,
    /// Residual covariance with the maximum-likelihood divisor (1/T*).
    pub resid_cov_ml: DMatrix<f64>,
    /// Effective sample size used by the regression.
    pub effective_rows: usize,
    /// Criteria table when the fit came out of an order-selection run.
    pub criteria: Option<CriteriaTable>,
}

impl VarFit {
    /// Free parameter count `K + n K^2`.
    pub fn param_count(&self) -> usize {
        let k = self.intercept.len();
        k + self.order * k * k
    }
}

/// Relative pivot threshold below which the design is declared singular.
const RANK_TOL: f64 = 1e-10;

/// Regress rows on an intercept plus `order` lags by QR least squares.
///
/// `targets` selects the regressand rows (used by [`order_criteria`] to fix
/// a common effective sample across orders); `None` uses all rows past the
/// order.
fn least_squares(
    series: &VechSeries,
    order: usize,
    first_target: usize,
) -> Result<(DMatrix<f64>, DMatrix<f64>, usize), VarError> {
    let t_len = series.len();
    let k = series.k();
    let n_obs = t_len - first_target;
    let n_reg = 1 + order * k;
    let mut x = DMatrix::zeros(n_obs, n_reg);
    let mut y = DMatrix::zeros(n_obs, k);
    for (row, t) in (first_target..t_len).enumerate() {
        x[(row, 0)] = 1.0;
        for lag in 1..=order {
            for j in 0..k {
                x[(row, 1 + (lag - 1) * k + j)] = series.rows[(t - lag, j)];
            }
        }
        for j in 0..k {
            y[(row, j)] = series.rows[(t, j)];
        }
    }
    // SVD least squares with explicit rank detection
    let svd = nalgebra::SVD::new(x.clone(), true, true);
    let max_sv = svd.singular_values.iter().fold(0.0f64, |m, v| m.max(*v));
    if max_sv <= 0.0 || svd.rank(RANK_TOL * max_sv) < n_reg {
        return Err(VarError::SingularDesign);
    }
    let beta = svd
        .solve(&y, RANK_TOL * max_sv)
        .map_err(|_| VarError::SingularDesign)?;
    let resid = &y - &x * &beta;
    Ok((beta, resid, n_obs))
}

/// Fit a VAR(`order`) by multivariate least squares of each row on an
/// intercept and the previous `order` rows.
pub fn fit_var(series: &VechSeries, order: usize) -> Result<VarFit, VarError> {
    if order < 1 {
        return Err(VarError::InvalidArgument("order must be at least 1".to_string()));
    }
    let t_len = series.len();
    let k = series.k();
    if t_len <= order * k + 1 {
        return Err(VarError::InsufficientHistory { needed: order * k + 1, got: t_len });
    }
    let (beta, resid, n_obs) = least_squares(series, order, order)?;
    let intercept = beta.row(0).transpose();
    let mut coefficients = Vec::with_capacity(order);
    for lag in 0..order {
        let block = beta.rows(1 + lag * k, k);
        coefficients.push(block.transpose().into_owned());
    }
    let ete = linalg::symmetrize(&(resid.transpose() * &resid));
    let df = n_obs as isize - (order * k) as isize - 1;
    let resid_cov = if df >= 1 { &ete / df as f64 } else { &ete / n_obs as f64 };
    let resid_cov_ml = &ete / n_obs as f64;
    Ok(VarFit {
        order,
        intercept,
        coefficients,
        resid_cov,
        resid_cov_ml,
        effective_rows: n_obs,
        criteria: None,
    })
}

/// Order-selection table. For each candidate order `n` the model is fitted
/// on the common effective sample (rows `max_order..T`), and with
/// `T* = T - max_order` and ML residual covariance `S_u(n)`:
///
/// ```text
/// AIC(n) = ln det S_u(n) + (2 / T*)             n K^2
/// HQ(n)  = ln det S_u(n) + (2 ln ln T* / T*)    n K^2
/// SC(n)  = ln det S_u(n) + (ln T* / T*)         n K^2
/// FPE(n) = ((T* + nK + 1) / (T* - nK - 1))^K  det S_u(n)
/// ```
pub fn order_criteria(series: &VechSeries, max_order: usize) -> Result<CriteriaTable, VarError> {
    if max_order < 1 {
        return Err(VarError::InvalidArgument("max_order must be at least 1".to_string()));
    }
    let t_len = series.len();
    let k = series.k();
    let t_eff = t_len as isize - max_order as isize;
    if t_eff <= (max_order * k + 1) as isize {
        return Err(VarError::InsufficientHistory {
            needed: max_order + max_order * k + 1,
            got: t_len,
        });
    }
    let t_star = t_eff as f64;
    let mut rows = Vec::with_capacity(max_order);
    for n in 1..=max_order {
        let (_, resid, n_obs) = least_squares(series, n, max_order)?;
        let sigma_ml = linalg::symmetrize(&(resid.transpose() * &resid)) / n_obs as f64;
        let ld = logdet_psd(&sigma_ml);
        let penalty = (n * k * k) as f64;
        let nk = (n * k) as f64;
        let aic = ld + (2.0 / t_star) * penalty;
        let hq = ld + (2.0 * t_star.ln().ln() / t_star) * penalty;
        let sc = ld + (t_star.ln() / t_star) * penalty;
        let fpe = ((t_star + nk + 1.0) / (t_star - nk - 1.0)).powi(k as i32) * ld.exp();
        rows.push(CriteriaRow { order: n, aic, hq, sc, fpe });
    }
    let argmin = |f: fn(&CriteriaRow) -> f64| -> usize {
        rows.iter()
            .min_by(|a, b| f(a).total_cmp(&f(b)))
            .map(|r| r.order)
            .unwrap_or(1)
    };
    Ok(CriteriaTable {
        selected_aic: argmin(|r| r.aic),
        selected_hq: argmin(|r| r.hq),
        selected_sc: argmin(|r| r.sc),
        selected_fpe: argmin(|r| r.fpe),
        rows,
    })
}

/// Log-determinant of a symmetric PSD matrix, with eigenvalues floored at
/// a tiny positive value so that a perfect in-sample fit stays finite.
fn logdet_psd(m: &DMatrix<f64>) -> f64 {
    match nalgebra::Cholesky::new(m.clone()) {
        Some(chol) => 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>(),
        None => {
            let (vals, _) = linalg::sym_eigen_desc(m);
            vals.iter().map(|&v| v.max(1e-300).ln()).sum()
        }
    }
}

/// One forecast matrix plus its positive-semidefiniteness flag.
#[derive(Debug, Clone)]
pub struct VarForecast {
    pub matrix: DMatrix<f64>,
    pub is_psd: bool,
}

/// Iterated VAR forecast, un-vech'ed to symmetric matrices. Forecasts are
/// substituted for unobserved rows beyond the sample; positive
/// semidefiniteness is flagged per matrix, not enforced.
pub fn var_forecast(
    fit: &VarFit,
    series: &VechSeries,
    horizon: usize,
) -> Result<Vec<VarForecast>, VarError> {
    if horizon < 1 {
        return Err(VarError::InvalidArgument("horizon must be at least 1".to_string()));
    }
    let k = series.k();
    if fit.intercept.len() != k {
        return Err(VarError::InvalidArgument(format!(
            "fit has K={}, series has K={k}",
            fit.intercept.len()
        )));
    }
    let t_len = series.len();
    if t_len < fit.order {
        return Err(VarError::InsufficientHistory { needed: fit.order, got: t_len });
    }
    let mut history: Vec<DVector<f64>> = (t_len - fit.order..t_len)
        .map(|t| series.rows.row(t).transpose())
        .collect();
    let mut out = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let mut next = fit.intercept.clone();
        for (lag, coeff) in fit.coefficients.iter().enumerate() {
            next += coeff * &history[history.len() - 1 - lag];
        }
        history.push(next.clone());
        let matrix = unvech(&next)?;
        let is_psd = linalg::is_psd(&matrix, 1e-10);
        out.push(VarForecast { matrix, is_psd });
    }
    Ok(out)
}

/// Spectral radius of the (companion) coefficient matrix and the implied
/// stationarity verdict (radius strictly below one).
pub fn stationarity_check(fit: &VarFit) -> (f64, bool) {
    let k = fit.intercept.len();
    let n = fit.order;
    let companion = if n == 1 {
        fit.coefficients[0].clone()
    } else {
        let mut c = DMatrix::zeros(n * k, n * k);
        for (lag, coeff) in fit.coefficients.iter().enumerate() {
            c.view_mut((0, lag * k), (k, k)).copy_from(coeff);
        }
        for i in 0..(n - 1) * k {
            c[(k + i, i)] = 1.0;
        }
        c
    };
    let radius = companion
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0f64, f64::max);
    (radius, radius < 1.0)
}

/// Sparsity profile of a coefficient matrix: for each exponent `m` the
/// value `(1/K^2) sum |a_ij|^m`, with the convention `0^0 = 1`.
pub fn sparsity_measure(coeff: &DMatrix<f64>, exponents: &[f64]) -> Vec<(f64, f64)> {
    let k2 = (coeff.nrows() * coeff.ncols()) as f64;
    exponents
        .iter()
        .map(|&m| {
            let total: f64 = coeff
                .iter()
                .map(|&a| {
                    if a == 0.0 && m > 0.0 {
                        0.0
                    } else {
                        a.abs().powf(m)
                    }
                })
                .sum();
            (m, total / k2)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn vech_definition() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 3.0]);
        let v = vech(&m).unwrap();
        assert_eq!(v.as_slice(), &[1.0, 2.0, 3.0]);
        let m3 = DMatrix::identity(3, 3);
        assert_eq!(vech(&m3).unwrap().len(), 6);
    }

    #[test]
    fn vech_roundtrip() {
        let m = DMatrix::from_row_slice(
            4,
            4,
            &[
                4.0, 1.0, 0.5, 0.2, 1.0, 3.0, -0.3, 0.1, 0.5, -0.3, 2.0, 0.7, 0.2, 0.1, 0.7, 5.0,
            ],
        );
        let back = unvech(&vech(&m).unwrap()).unwrap();
        assert_relative_eq!((back - m).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn unvech_rejects_bad_length() {
        assert!(matches!(unvech(&DVector::zeros(4)), Err(VarError::BadLength(4))));
        assert!(unvech(&DVector::zeros(6)).is_ok());
    }

    fn generate_var1(
        a0: &DVector<f64>,
        a1: &DMatrix<f64>,
        y0: &DVector<f64>,
        t_len: usize,
        noise: Option<(&mut rand_chacha::ChaCha12Rng, f64)>,
    ) -> VechSeries {
        use rand_distr::{Distribution, StandardNormal};
        let k = a0.len();
        let mut rows = DMatrix::zeros(t_len, k);
        let mut y = y0.clone();
        let mut noise = noise;
        for t in 0..t_len {
            rows.row_mut(t).copy_from(&y.transpose());
            let mut next = a0 + a1 * &y;
            if let Some((rng, sd)) = noise.as_mut() {
                for i in 0..k {
                    let z: f64 = StandardNormal.sample(*rng);
                    next[i] += *sd * z;
                }
            }
            y = next;
        }
        VechSeries::from_rows(rows).unwrap()
    }

    #[test]
    fn noiseless_var1_recovery() {
        // deterministic generation oracle: data built from known (A0, A1)
        // must be recovered to 1e-8
        let k = 3;
        let a0 = DVector::from_vec(vec![0.5, -0.2, 0.1]);
        let a1 = DMatrix::from_row_slice(
            k,
            k,
            &[0.4, 0.3, -0.2, -0.5, 0.1, 0.3, 0.2, -0.4, 0.5],
        );
        let y0 = DVector::from_vec(vec![2.0, -1.0, 1.5]);
        let series = generate_var1(&a0, &a1, &y0, 50, None);
        let fit = fit_var(&series, 1).unwrap();
        assert!((&fit.intercept - &a0).amax() < 1e-8);
        assert!((&fit.coefficients[0] - &a1).amax() < 1e-8);
        assert!(fit.resid_cov.amax() < 1e-12);
    }

    #[test]
    fn constant_series_is_singular() {
        let rows = DMatrix::from_element(30, 3, 1.0);
        let series = VechSeries::from_rows(rows).unwrap();
        assert!(matches!(fit_var(&series, 1), Err(VarError::SingularDesign)));
    }

    #[test]
    fn residuals_orthogonal_to_regressors() {
        let mut rng = <rand_chacha::ChaCha12Rng as rand::SeedableRng>::seed_from_u64(5);
        let a0 = DVector::from_vec(vec![0.1, 0.2, 0.05]);
        let a1 = DMatrix::from_row_slice(3, 3, &[0.5, 0.1, 0.0, -0.1, 0.4, 0.1, 0.0, 0.2, 0.3]);
        let y0 = DVector::from_vec(vec![0.0, 0.0, 0.0]);
        let series = generate_var1(&a0, &a1, &y0, 120, Some((&mut rng, 0.3)));
        let fit = fit_var(&series, 1).unwrap();
        // rebuild design and residuals
        let t_len = series.len();
        let k = series.k();
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for j in 0..=k {
            let mut dot = vec![0.0; k];
            for t in 1..t_len {
                let reg = if j == 0 { 1.0 } else { series.rows()[(t - 1, j - 1)] };
                let y_t = series.rows().row(t).transpose();
                let mut pred = fit.intercept.clone();
                pred += &fit.coefficients[0] * series.rows().row(t - 1).transpose();
                for c in 0..k {
                    dot[c] += reg * (y_t[c] - pred[c]);
                    scale = scale.max(reg.abs());
                }
            }
            for v in dot {
                worst = worst.max(v.abs());
            }
        }
        assert!(worst / scale.max(1.0) < 1e-8, "worst cross product {worst}");
    }

    #[test]
    fn white_noise_has_small_coefficients() {
        let mut rng = <rand_chacha::ChaCha12Rng as rand::SeedableRng>::seed_from_u64(9);
        let a0 = DVector::from_vec(vec![1.0, 1.0, 1.0]);
        let a1 = DMatrix::zeros(3, 3);
        let y0 = DVector::from_vec(vec![1.0, 1.0, 1.0]);
        let series = generate_var1(&a0, &a1, &y0, 400, Some((&mut rng, 0.5)));
        let fit = fit_var(&series, 1).unwrap();
        assert!(fit.coefficients[0].amax() < 0.2);
        // algebraic identity: intercept ~ (I - A1) * sample mean
        let mean = series.rows().row_mean().transpose();
        let implied = (DMatrix::identity(3, 3) - &fit.coefficients[0]) * mean;
        assert!((implied - &fit.intercept).amax() < 0.05);
    }

    #[test]
    fn criteria_with_max_order_one() {
        let mut rng = <rand_chacha::ChaCha12Rng as rand::SeedableRng>::seed_from_u64(2);
        let a0 = DVector::from_vec(vec![0.2, 0.1, 0.3]);
        let a1 = DMatrix::from_row_slice(3, 3, &[0.6, 0.0, 0.1, 0.1, 0.5, 0.0, 0.0, 0.1, 0.4]);
        let y0 = DVector::zeros(3);
        let series = generate_var1(&a0, &a1, &y0, 100, Some((&mut rng, 0.2)));
        let table = order_criteria(&series, 1).unwrap();
        assert_eq!(table.rows.len(), 1);
        assert_eq!(table.selected_aic, 1);
        assert_eq!(table.selected_fpe, 1);
    }

    #[test]
    fn criteria_table_is_complete() {
        let mut rng = <rand_chacha::ChaCha12Rng as rand::SeedableRng>::seed_from_u64(3);
        let a0 = DVector::from_vec(vec![0.0, 0.0, 0.0]);
        let a1 = DMatrix::zeros(3, 3);
        let y0 = DVector::zeros(3);
        let series = generate_var1(&a0, &a1, &y0, 150, Some((&mut rng, 1.0)));
        let table = order_criteria(&series, 4).unwrap();
        assert_eq!(table.rows.len(), 4);
        for row in &table.rows {
            assert!(row.aic.is_finite() && row.hq.is_finite() && row.sc.is_finite());
            assert!(row.fpe.is_finite() && row.fpe >= 0.0);
        }
    }

    #[test]
    fn forecast_with_zero_coefficients_is_intercept() {
        let k = 3; // r = 2
        let fit = VarFit {
            order: 1,
            intercept: DVector::from_vec(vec![2.0, 0.5, 1.0]),
            coefficients: vec![DMatrix::zeros(k, k)],
            resid_cov: DMatrix::identity(k, k),
            resid_cov_ml: DMatrix::identity(k, k),
            effective_rows: 10,
            criteria: None,
        };
        let series = VechSeries::from_rows(DMatrix::from_element(5, k, 1.0)).unwrap();
        let fc = var_forecast(&fit, &series, 3).unwrap();
        let expect = unvech(&fit.intercept).unwrap();
        for f in fc {
            assert_relative_eq!((f.matrix.clone() - &expect).norm(), 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn forecast_scalar_iteration() {
        // K = 1: y_{t+1} = 0.5 y_t + 1 from y_T = 4 gives 3, then 2.5
        let fit = VarFit {
            order: 1,
            intercept: DVector::from_vec(vec![1.0]),
            coefficients: vec![DMatrix::from_element(1, 1, 0.5)],
            resid_cov: DMatrix::identity(1, 1),
            resid_cov_ml: DMatrix::identity(1, 1),
            effective_rows: 10,
            criteria: None,
        };
        let series = VechSeries::from_rows(DMatrix::from_row_slice(2, 1, &[2.0, 4.0])).unwrap();
        let fc = var_forecast(&fit, &series, 2).unwrap();
        assert_relative_eq!(fc[0].matrix[(0, 0)], 3.0, epsilon = 1e-14);
        assert_relative_eq!(fc[1].matrix[(0, 0)], 2.5, epsilon = 1e-14);
    }

    #[test]
    fn forecast_flags_non_psd() {
        // r = 2, K = 3: unvech((1, 2, 1)) = [[1,2],[2,1]] has a negative
        // eigenvalue
        let fit = VarFit {
            order: 1,
            intercept: DVector::from_vec(vec![1.0, 2.0, 1.0]),
            coefficients: vec![DMatrix::zeros(3, 3)],
            resid_cov: DMatrix::identity(3, 3),
            resid_cov_ml: DMatrix::identity(3, 3),
            effective_rows: 10,
            criteria: None,
        };
        let series = VechSeries::from_rows(DMatrix::from_element(2, 3, 1.0)).unwrap();
        let fc = var_forecast(&fit, &series, 1).unwrap();
        assert!(!fc[0].is_psd);
    }

    #[test]
    fn stationarity_radius() {
        let mk = |a1: DMatrix<f64>| VarFit {
            order: 1,
            intercept: DVector::zeros(a1.nrows()),
            coefficients: vec![a1.clone()],
            resid_cov: DMatrix::identity(a1.nrows(), a1.nrows()),
            resid_cov_ml: DMatrix::identity(a1.nrows(), a1.nrows()),
            effective_rows: 10,
            criteria: None,
        };
        let (radius, stat) = stationarity_check(&mk(DMatrix::identity(2, 2) * 0.5));
        assert_relative_eq!(radius, 0.5, epsilon = 1e-12);
        assert!(stat);
        let (radius, stat) = stationarity_check(&mk(DMatrix::identity(2, 2)));
        assert_relative_eq!(radius, 1.0, epsilon = 1e-12);
        assert!(!stat);
        // eigenvalues +-0.5i by hand
        let (radius, _) = stationarity_check(&mk(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -0.25, 0.0])));
        assert_relative_eq!(radius, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn companion_matrix_for_higher_order() {
        // VAR(2) with A1 = 0.5 I, A2 = 0: radius is 0.5 (plus zero modes)
        let k = 2;
        let fit = VarFit {
            order: 2,
            intercept: DVector::zeros(k),
            coefficients: vec![DMatrix::identity(k, k) * 0.5, DMatrix::zeros(k, k)],
            resid_cov: DMatrix::identity(k, k),
            resid_cov_ml: DMatrix::identity(k, k),
            effective_rows: 10,
            criteria: None,
        };
        let (radius, stat) = stationarity_check(&fit);
        assert_relative_eq!(radius, 0.5, epsilon = 1e-10);
        assert!(stat);
    }

    #[test]
    fn sparsity_values() {
        let dense = DMatrix::from_element(4, 4, 0.7);
        let out = sparsity_measure(&dense, &[0.0]);
        assert_relative_eq!(out[0].1, 1.0, epsilon = 1e-14);
        let zeros = DMatrix::zeros(3, 3);
        let out = sparsity_measure(&zeros, &[0.5]);
        assert_relative_eq!(out[0].1, 0.0, epsilon = 1e-14);
        let single = DMatrix::from_element(1, 1, 0.25);
        let out = sparsity_measure(&single, &[0.5]);
        assert_relative_eq!(out[0].1, 0.5, epsilon = 1e-14);
    }
}
