//! Rolling out-of-sample comparison of the covariance forecasting models,
//! plus the matrix norms and descriptive statistics used for reporting.
//!
//! For every window the factor model is re-estimated on the first `k` days,
//! each dynamic model is refitted on the resulting factor series, forecasts
//! are mapped back to asset space and compared to the realized matrix under
//! the Frobenius and spectral norms, both for the matrices and for their
//! inverses. Windows where either matrix fails to invert are excluded from
//! the inverse averages and counted.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::caw::{self, CawOrder};
use crate::factor::{self, FactorError};
use crate::linalg;
use crate::rcov::CovMatrixSeries;
use crate::var::{self, VarError, VechSeries};
use crate::{derive_seed, DayId};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("invalid rolling spec: {0}")]
    BadSpec(String),
    #[error("too few observations: {0}")]
    InsufficientData(String),
    #[error(transparent)]
    Factor(#[from] FactorError),
    #[error(transparent)]
    Caw(#[from] caw::CawError),
    #[error(transparent)]
    Var(#[from] VarError),
}

/// Frobenius norm: square root of the sum of squared entries.
pub fn frobenius_norm(m: &DMatrix<f64>) -> f64 {
    m.norm()
}

/// Spectral norm: the largest singular value, computed as the square root
/// of the top eigenvalue of `M' M`.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    let gram = m.transpose() * m;
    let (vals, _) = linalg::sym_eigen_desc(&gram);
    vals[0].max(0.0).sqrt()
}

/// Descriptive statistics in the usual reporting layout. Standard deviation
/// uses the `n - 1` divisor; skewness and kurtosis are built from `1/n`
/// central moments (`m3 / m2^{3/2}`, `m4 / m2^2`, kurtosis raw with normal
/// baseline 3) and are undefined for degenerate samples.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DescriptiveStats {
    pub mean: f64,
    pub max: f64,
    pub min: f64,
    pub sd: f64,
    pub skewness: Option<f64>,
    pub kurtosis: Option<f64>,
}

pub fn descriptive_stats(xs: &[f64]) -> Result<DescriptiveStats, EvalError> {
    let n = xs.len();
    if n < 2 {
        return Err(EvalError::InsufficientData(format!("need at least 2 values, got {n}")));
    }
    let nf = n as f64;
    let mean = xs.iter().sum::<f64>() / nf;
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let ss: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
    let sd = (ss / (nf - 1.0)).sqrt();
    let m2 = ss / nf;
    let (skewness, kurtosis) = if n >= 3 && m2 > 0.0 {
        let m3: f64 = xs.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / nf;
        let m4: f64 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / nf;
        (Some(m3 / m2.powf(1.5)), Some(m4 / (m2 * m2)))
    } else {
        (None, None)
    };
    Ok(DescriptiveStats { mean, max, min, sd, skewness, kurtosis })
}

/// A model entered into the rolling comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelSpec {
    Caw { order: CawOrder },
    Var { order: usize },
    /// Diagnostic baseline that "forecasts" the realized matrix itself;
    /// all its errors are zero by construction.
    PerfectForesight,
}

impl ModelSpec {
    pub fn label(&self) -> String {
        match self {
            ModelSpec::Caw { order } => format!("caw{order}"),
            ModelSpec::Var { order } => format!("var({order})"),
            ModelSpec::PerfectForesight => "perfect-foresight".to_string(),
        }
    }

    fn param_count(&self, r: usize) -> usize {
        match self {
            ModelSpec::Caw { order } => caw::count_params(*order, r),
            ModelSpec::Var { order } => {
                let k = r * (r + 1) / 2;
                k + order * k * k
            }
            ModelSpec::PerfectForesight => 0,
        }
    }
}

/// Rolling evaluation plan: train on days `1..=k` for `k` in
/// `k_min..=k_max`, forecast each horizon, refitting everything per window.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RollingSpec {
    pub k_min: usize,
    pub k_max: usize,
    pub horizons: Vec<usize>,
    pub models: Vec<ModelSpec>,
    /// Restarts per CAW fit inside the harness.
    pub caw_restarts: usize,
    /// Inverse-error handling for singular matrices: `None` excludes the
    /// window from the inverse averages (with a count); `Some(lambda)`
    /// inverts `M + lambda I` instead. Exclusion is the default because a
    /// ridge biases the comparison.
    #[serde(default)]
    pub inverse_ridge: Option<f64>,
}

impl RollingSpec {
    fn validate(&self, t_len: usize, r: usize) -> Result<(), EvalError> {
        if self.models.is_empty() {
            return Err(EvalError::BadSpec("no models to compare".to_string()));
        }
        if self.horizons.is_empty() || self.horizons.iter().any(|&h| h < 1) {
            return Err(EvalError::BadSpec("horizons must be positive".to_string()));
        }
        if self.k_min < 2 || self.k_min > self.k_max {
            return Err(EvalError::BadSpec(format!(
                "invalid window range {}..={}",
                self.k_min, self.k_max
            )));
        }
        let max_h = self.horizons.iter().copied().max().unwrap_or(1);
        if self.k_max + max_h > t_len {
            return Err(EvalError::BadSpec(format!(
                "k_max {} plus horizon {max_h} exceeds series length {t_len}",
                self.k_max
            )));
        }
        if self.caw_restarts < 1 && self.models.iter().any(|m| matches!(m, ModelSpec::Caw { .. })) {
            return Err(EvalError::BadSpec("caw_restarts must be at least 1".to_string()));
        }
        let _ = r;
        Ok(())
    }
}

/// Errors of one model at one window and horizon.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WindowRecord {
    pub window_k: usize,
    pub model: String,
    pub horizon: usize,
    pub target_day: DayId,
    pub frobenius: f64,
    pub spectral: f64,
    /// Inverse-error entries are absent when either matrix failed to invert.
    pub frobenius_inv: Option<f64>,
    pub spectral_inv: Option<f64>,
}

/// Aggregated errors of one model at one horizon.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorRow {
    pub model: String,
    pub n_params: usize,
    pub mean_frobenius: f64,
    pub mean_spectral: f64,
    pub mean_frobenius_inv: Option<f64>,
    pub mean_spectral_inv: Option<f64>,
    pub windows: usize,
    pub inverse_excluded: usize,
}

/// One table per horizon, rows in model order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorTable {
    pub horizon: usize,
    pub rows: Vec<ErrorRow>,
}

/// Full outcome of a rolling run: aggregate tables plus per-window detail.
#[derive(Debug, Clone)]
pub struct RollingOutcome {
    pub tables: Vec<ErrorTable>,
    pub windows: Vec<WindowRecord>,
}

/// Run the rolling comparison.
///
/// Randomness (CAW restarts) flows from `seed` through streams named by
/// `(window, model)`, and windows are evaluated independently, so the
/// outcome is deterministic for a fixed seed regardless of scheduling.
pub fn rolling_compare(
    series: &CovMatrixSeries,
    spec: &RollingSpec,
    factor_rank: usize,
    seed: u64,
) -> Result<RollingOutcome, EvalError> {
    spec.validate(series.len(), factor_rank)?;
    let max_h = spec.horizons.iter().copied().max().unwrap_or(1);

    let per_window: Result<Vec<Vec<WindowRecord>>, EvalError> = (spec.k_min..=spec.k_max)
        .into_par_iter()
        .map(|k| evaluate_window(series, spec, factor_rank, seed, k, max_h))
        .collect();
    let mut windows: Vec<WindowRecord> = per_window?.into_iter().flatten().collect();
    windows.sort_by(|a, b| {
        (a.window_k, &a.model, a.horizon).cmp(&(b.window_k, &b.model, b.horizon))
    });

    let mut tables = Vec::with_capacity(spec.horizons.len());
    for &h in &spec.horizons {
        let mut rows = Vec::with_capacity(spec.models.len());
        for model in &spec.models {
            let label = model.label();
            let hits: Vec<&WindowRecord> = windows
                .iter()
                .filter(|w| w.horizon == h && w.model == label)
                .collect();
            let n = hits.len();
            let mean = |f: &dyn Fn(&WindowRecord) -> f64| -> f64 {
                hits.iter().map(|w| f(w)).sum::<f64>() / n as f64
            };
            let inv_values: Vec<(f64, f64)> = hits
                .iter()
                .filter_map(|w| w.frobenius_inv.zip(w.spectral_inv))
                .collect();
            let excluded = n - inv_values.len();
            let (mean_fn_inv, mean_sn_inv) = if inv_values.is_empty() {
                (None, None)
            } else {
                let cnt = inv_values.len() as f64;
                (
                    Some(inv_values.iter().map(|v| v.0).sum::<f64>() / cnt),
                    Some(inv_values.iter().map(|v| v.1).sum::<f64>() / cnt),
                )
            };
            rows.push(ErrorRow {
                model: label,
                n_params: model.param_count(factor_rank),
                mean_frobenius: mean(&|w| w.frobenius),
                mean_spectral: mean(&|w| w.spectral),
                mean_frobenius_inv: mean_fn_inv,
                mean_spectral_inv: mean_sn_inv,
                windows: n,
                inverse_excluded: excluded,
            });
        }
        tables.push(ErrorTable { horizon: h, rows });
    }
    Ok(RollingOutcome { tables, windows })
}

/// Inverse of a symmetric matrix via its eigendecomposition, `None` when
/// numerically singular. LU succeeds on matrices whose smallest eigenvalue
/// was clipped to zero by PSD repair and returns round-off garbage, so
/// invertibility is decided on the spectrum instead.
fn symmetric_inverse(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let (vals, vecs) = linalg::sym_eigen_desc(m);
    let max_abs = vals.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if max_abs <= 0.0 || vals.iter().any(|v| v.abs() <= 1e-12 * max_abs) {
        return None;
    }
    let inv_diag = DMatrix::from_diagonal(&vals.map(|v| 1.0 / v));
    Some(linalg::symmetrize(&(&vecs * inv_diag * vecs.transpose())))
}

fn evaluate_window(
    series: &CovMatrixSeries,
    spec: &RollingSpec,
    factor_rank: usize,
    seed: u64,
    k: usize,
    max_h: usize,
) -> Result<Vec<WindowRecord>, EvalError> {
    let train = series.head(k);
    let fit = factor::fit_factor_model(&train, factor_rank)?;
    let mut records = Vec::new();
    for (model_idx, model) in spec.models.iter().enumerate() {
        // factor-space forecasts for horizons 1..=max_h
        let factor_forecasts: Vec<DMatrix<f64>> = match model {
            ModelSpec::Caw { order } => {
                let stream = derive_seed(seed, &[k as u64, model_idx as u64]);
                let caw_fit = caw::fit(&fit.factor_series, *order, spec.caw_restarts, stream)?;
                caw::forecast(&caw_fit, &fit.factor_series, max_h)?
            }
            ModelSpec::Var { order } => {
                let vech_series = VechSeries::from_matrices(&fit.factor_series)?;
                let var_fit = var::fit_var(&vech_series, *order)?;
                var::var_forecast(&var_fit, &vech_series, max_h)?
                    .into_iter()
                    .map(|f| f.matrix)
                    .collect()
            }
            ModelSpec::PerfectForesight => Vec::new(),
        };
        for &h in &spec.horizons {
            let realized = series.days()[k + h - 1].values();
            let predicted = match model {
                ModelSpec::PerfectForesight => realized.clone(),
                _ => factor::to_asset_space(&factor_forecasts[h - 1], &fit),
            };
            let diff = &predicted - realized;
            let ridge = |m: &DMatrix<f64>| match spec.inverse_ridge {
                Some(lambda) => m + DMatrix::identity(m.nrows(), m.ncols()) * lambda,
                None => m.clone(),
            };
            let (fn_inv, sn_inv) = match (
                symmetric_inverse(&ridge(&predicted)),
                symmetric_inverse(&ridge(realized)),
            ) {
                (Some(pi), Some(ri)) => {
                    let dinv = pi - ri;
                    (Some(frobenius_norm(&dinv)), Some(spectral_norm(&dinv)))
                }
                _ => (None, None),
            };
            records.push(WindowRecord {
                window_k: k,
                model: model.label(),
                horizon: h,
                target_day: series.days()[k + h - 1].day_id(),
                frobenius: frobenius_norm(&diff),
                spectral: spectral_norm(&diff),
                frobenius_inv: fn_inv,
                spectral_inv: sn_inv,
            });
        }
    }
    Ok(records)
}
