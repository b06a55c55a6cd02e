//! Thin wrappers over nalgebra's dense decompositions with the ordering
//! conventions the rest of the crate relies on.

use nalgebra::{SymmetricEigen, SVD};

use crate::{Error, Matrix, Result};

/// Eigenpairs of a symmetric matrix, sorted by `key` descending.
///
/// Eigenvector signs are whatever the solver produces; they are
/// deterministic for a given input but otherwise arbitrary.
pub fn symmetric_eigen_sorted(m: &Matrix, key: impl Fn(f64) -> f64) -> (Vec<f64>, Matrix) {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let order = descending_order(eig.eigenvalues.as_slice(), key);
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = Matrix::from_fn(m.nrows(), order.len(), |i, j| {
        eig.eigenvectors[(i, order[j])]
    });
    (values, vectors)
}

/// Left singular vectors and singular values, sorted descending.
pub fn left_singular_sorted(m: &Matrix) -> (Vec<f64>, Matrix) {
    let svd = SVD::new(m.clone(), true, false);
    let u = svd.u.expect("left singular vectors were requested");
    let order = descending_order(svd.singular_values.as_slice(), |v| v);
    let values = order.iter().map(|&k| svd.singular_values[k]).collect();
    let vectors = Matrix::from_fn(u.nrows(), order.len(), |i, j| u[(i, order[j])]);
    (values, vectors)
}

/// Moore-Penrose pseudo-inverse of a full-column-rank matrix.
pub fn pinv_full_column_rank(m: &Matrix) -> Result<Matrix> {
    let (rows, cols) = m.shape();
    if rows < cols {
        return Err(Error::Singular(format!(
            "{rows}x{cols} matrix cannot have full column rank"
        )));
    }
    let svd = SVD::new(m.clone(), true, true);
    let smax = svd.singular_values.max();
    let tol = smax * (rows.max(cols) as f64) * f64::EPSILON;
    if smax <= 0.0 || svd.singular_values.iter().any(|&s| s <= tol) {
        return Err(Error::Singular(format!(
            "{rows}x{cols} matrix has a singular value below {tol:e}"
        )));
    }
    svd.pseudo_inverse(tol)
        .map_err(|e| Error::Singular(e.to_string()))
}

fn descending_order(values: &[f64], key: impl Fn(f64) -> f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    // stable: equal keys keep solver order
    order.sort_by(|&a, &b| key(values[b]).total_cmp(&key(values[a])));
    order
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_sorted_descending() {
        let m = Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 4.0, 2.0]));
        let (vals, vecs) = symmetric_eigen_sorted(&m, |v| v);
        assert_eq!(vals, vec![4.0, 2.0, 1.0]);
        assert_eq!(vecs[(1, 0)].abs(), 1.0);
    }

    #[test]
    fn eigen_sorted_by_magnitude() {
        let m = Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, -4.0, 2.0]));
        let (vals, _) = symmetric_eigen_sorted(&m, f64::abs);
        assert_eq!(vals, vec![-4.0, 2.0, 1.0]);
    }

    #[test]
    fn pinv_rejects_rank_deficient() {
        let m = Matrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
        assert!(matches!(pinv_full_column_rank(&m), Err(Error::Singular(_))));
    }

    #[test]
    fn pinv_is_left_inverse() {
        let m = Matrix::from_row_slice(3, 2, &[1.0, 0.5, 0.2, 2.0, 3.0, 1.0]);
        let p = pinv_full_column_rank(&m).unwrap();
        assert!((p * m - Matrix::identity(2, 2)).norm() < 1e-12);
    }
}
