//! Small shared linear-algebra helpers used across modules.

use nalgebra::{DMatrix, DVector};

/// Force exact symmetry by averaging a matrix with its transpose.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

/// Largest absolute asymmetry `max |m_ij - m_ji|`.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..i {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Eigendecomposition of a symmetric matrix with eigenvalues sorted in
/// descending order and eigenvector columns reordered to match.
///
/// Ties are broken by the row index of the eigenvector's largest-magnitude
/// entry so that the output is a total order.
pub fn sym_eigen_desc(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let eig = nalgebra::SymmetricEigen::new(symmetrize(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| {
                let ka = argmax_abs(&eig.eigenvectors.column(a).iter().copied().collect::<Vec<_>>());
                let kb = argmax_abs(&eig.eigenvectors.column(b).iter().copied().collect::<Vec<_>>());
                ka.cmp(&kb)
            })
    });
    let mut values = DVector::zeros(n);
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        values[dst] = eig.eigenvalues[src];
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Index of the first entry with maximal absolute value.
pub fn argmax_abs(xs: &[f64]) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (i, &x) in xs.iter().enumerate() {
        if x.abs() > best_val {
            best_val = x.abs();
            best = i;
        }
    }
    best
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let (values, _) = sym_eigen_desc(m);
    values[values.len() - 1]
}

/// Whether a symmetric matrix is positive semidefinite to within `tol`.
pub fn is_psd(m: &DMatrix<f64>, tol: f64) -> bool {
    min_eigenvalue(m) >= -tol
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn eigen_sorted_descending() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 5.0, 0.0, 0.0, 0.0, 2.0]);
        let (vals, vecs) = sym_eigen_desc(&m);
        assert_relative_eq!(vals[0], 5.0, epsilon = 1e-12);
        assert_relative_eq!(vals[1], 2.0, epsilon = 1e-12);
        assert_relative_eq!(vals[2], 1.0, epsilon = 1e-12);
        // reconstruct
        let rec = &vecs * DMatrix::from_diagonal(&vals) * vecs.transpose();
        assert_relative_eq!((rec - m).norm(), 0.0, epsilon = 1e-10);
    }

    #[test]
    fn symmetrize_is_exact() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let s = symmetrize(&m);
        assert_eq!(s[(0, 1)], s[(1, 0)]);
        assert_eq!(s[(0, 1)], 2.5);
        assert_eq!(asymmetry(&s), 0.0);
    }

    #[test]
    fn psd_detects_negative_eigenvalue() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(!is_psd(&m, 1e-12));
        assert_relative_eq!(min_eigenvalue(&m), -1.0, epsilon = 1e-12);
    }
}
