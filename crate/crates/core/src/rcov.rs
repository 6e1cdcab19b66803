//! Daily realized covariance matrices and their regularization.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::linalg;
use crate::market_data::ReturnPanel;
use crate::DayId;

/// Tolerance for the symmetry invariant of [`CovMatrix`].
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum RcovError {
    #[error("return panel has no intervals")]
    EmptyPanel,
    #[error("matrix for day {day} is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { day: DayId, asymmetry: f64 },
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("day {day} has dimension {got}, series dimension is {expected}")]
    DimensionMismatch { day: DayId, expected: usize, got: usize },
    #[error("day ids must be strictly increasing; {prev} is followed by {next}")]
    DaysOutOfOrder { prev: DayId, next: DayId },
    #[error("threshold fraction must lie in [0, 1), got {0}")]
    BadFraction(f64),
}

/// A symmetric d x d covariance matrix for one day.
///
/// Construction validates squareness and symmetry (to [`SYMMETRY_TOL`]) and
/// stores the exactly symmetrized matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CovMatrix {
    day_id: DayId,
    values: DMatrix<f64>,
}

impl CovMatrix {
    pub fn new(day_id: DayId, values: DMatrix<f64>) -> Result<Self, RcovError> {
        if values.nrows() != values.ncols() {
            return Err(RcovError::NotSquare { rows: values.nrows(), cols: values.ncols() });
        }
        let asym = linalg::asymmetry(&values);
        if asym > SYMMETRY_TOL * (1.0 + values.amax()) {
            return Err(RcovError::NotSymmetric { day: day_id, asymmetry: asym });
        }
        Ok(CovMatrix { day_id, values: linalg::symmetrize(&values) })
    }

    pub fn day_id(&self) -> DayId {
        self.day_id
    }

    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_values(self) -> DMatrix<f64> {
        self.values
    }
}

/// An ordered series of daily covariance matrices with a fixed asset
/// registry. Dimensions are uniform and day ids strictly increasing.
#[derive(Debug, Clone)]
pub struct CovMatrixSeries {
    registry: Vec<String>,
    days: Vec<CovMatrix>,
}

impl CovMatrixSeries {
    pub fn new(registry: Vec<String>, days: Vec<CovMatrix>) -> Result<Self, RcovError> {
        let dim = registry.len();
        for day in &days {
            if day.dim() != dim {
                return Err(RcovError::DimensionMismatch {
                    day: day.day_id(),
                    expected: dim,
                    got: day.dim(),
                });
            }
        }
        for pair in days.windows(2) {
            if pair[1].day_id() <= pair[0].day_id() {
                return Err(RcovError::DaysOutOfOrder {
                    prev: pair[0].day_id(),
                    next: pair[1].day_id(),
                });
            }
        }
        Ok(CovMatrixSeries { registry, days })
    }

    pub fn registry(&self) -> &[String] {
        &self.registry
    }

    pub fn dim(&self) -> usize {
        self.registry.len()
    }

    pub fn len(&self) -> usize {
        self.days.len()
    }

    pub fn is_empty(&self) -> bool {
        self.days.is_empty()
    }

    pub fn days(&self) -> &[CovMatrix] {
        &self.days
    }

    pub fn matrices(&self) -> impl Iterator<Item = &DMatrix<f64>> {
        self.days.iter().map(|d| d.values())
    }

    /// Sub-series of the first `n` days (shared registry).
    pub fn head(&self, n: usize) -> CovMatrixSeries {
        CovMatrixSeries {
            registry: self.registry.clone(),
            days: self.days[..n.min(self.days.len())].to_vec(),
        }
    }
}

/// Realized covariance of one day: the sum over intervals of the outer
/// product of the return vector, `sum_j y_j y_j'`.
pub fn realized_cov_day(panel: &ReturnPanel) -> Result<CovMatrix, RcovError> {
    let m = panel.intervals();
    if m == 0 {
        return Err(RcovError::EmptyPanel);
    }
    let d = panel.assets();
    let mut acc = DMatrix::zeros(d, d);
    for j in 0..m {
        let row = panel.returns.row(j);
        for a in 0..d {
            for b in 0..=a {
                acc[(a, b)] += row[a] * row[b];
            }
        }
    }
    // mirror the lower triangle: exactly symmetric by construction
    for a in 0..d {
        for b in 0..a {
            acc[(b, a)] = acc[(a, b)];
        }
    }
    CovMatrix::new(panel.day_id, acc)
}

/// Zero out small off-diagonal entries: an off-diagonal entry is kept only
/// when `|entry| >= fraction * max_ij |m_ij|`. Diagonal entries are never
/// touched, so positive semidefiniteness of the diagonal is preserved.
pub fn threshold_regularize(m: &CovMatrix, fraction: f64) -> Result<CovMatrix, RcovError> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(RcovError::BadFraction(fraction));
    }
    let cutoff = fraction * m.values().amax();
    let mut out = m.values().clone();
    let d = out.nrows();
    for a in 0..d {
        for b in 0..d {
            if a != b && out[(a, b)].abs() < cutoff {
                out[(a, b)] = 0.0;
            }
        }
    }
    CovMatrix::new(m.day_id(), out)
}

/// Clip negative eigenvalues at zero and reassemble. A matrix that is
/// already PSD is reproduced to within eigendecomposition round-off.
pub fn psd_repair(m: &CovMatrix) -> Result<CovMatrix, RcovError> {
    CovMatrix::new(m.day_id(), psd_repair_matrix(m.values()))
}

/// [`psd_repair`] on a raw symmetric matrix.
pub fn psd_repair_matrix(values: &DMatrix<f64>) -> DMatrix<f64> {
    let (mut vals, vecs) = linalg::sym_eigen_desc(values);
    let mut dirty = false;
    for v in vals.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
            dirty = true;
        }
    }
    if !dirty {
        return values.clone();
    }
    linalg::symmetrize(&(&vecs * DMatrix::from_diagonal(&vals) * vecs.transpose()))
}
