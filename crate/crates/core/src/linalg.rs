//! Thin helpers over nalgebra for Hermitian matrices.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
/// Columns of the returned matrix are the matching eigenvectors.
pub fn hermitian_eigen(a: &CMatrix) -> (Vec<f64>, CMatrix) {
    // symmetrise to remove round-off asymmetry before the solver sees it
    let herm = (a + a.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = herm.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = CMatrix::from_fn(a.nrows(), a.ncols(), |r, c| eig.eigenvectors[(r, order[c])]);
    (vals, vecs)
}

/// Eigenvalues only, ascending.
pub fn hermitian_eigenvalues(a: &CMatrix) -> Vec<f64> {
    let herm = (a + a.adjoint()) * Complex64::new(0.5, 0.0);
    let mut v: Vec<f64> = herm.symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// `E[z zᴴ]` estimated from rows of regressors (no mean removal).
pub fn sample_covariance<'a, I>(regressors: I, dim: usize) -> CMatrix
where
    I: IntoIterator<Item = &'a [Complex64]>,
{
    let mut acc = CMatrix::zeros(dim, dim);
    let mut count = 0usize;
    for z in regressors {
        debug_assert_eq!(z.len(), dim);
        for i in 0..dim {
            let zi = z[i];
            for j in i..dim {
                acc[(i, j)] += zi * z[j].conj();
            }
        }
        count += 1;
    }
    for i in 0..dim {
        for j in 0..i {
            acc[(i, j)] = acc[(j, i)].conj();
        }
    }
    if count > 0 {
        acc /= Complex64::new(count as f64, 0.0);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_of_diagonal() {
        let a = CMatrix::from_diagonal(&CVector::from_vec(vec![
            Complex64::new(3.0, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(2.0, 0.0),
        ]));
        let (vals, vecs) = hermitian_eigen(&a);
        assert_eq!(vals, vec![1.0, 2.0, 3.0]);
        let recon = &vecs * CMatrix::from_diagonal(&CVector::from_iterator(
            3,
            vals.iter().map(|&v| Complex64::new(v, 0.0)),
        )) * vecs.adjoint();
        assert!((recon - a).norm() < 1e-12);
    }

    #[test]
    fn covariance_of_single_vector() {
        let z = [Complex64::new(1.0, 1.0), Complex64::new(0.0, 2.0)];
        let r = sample_covariance([&z[..]], 2);
        assert!((r[(0, 1)] - z[0] * z[1].conj()).norm() < 1e-15);
        assert!((r[(1, 0)] - z[1] * z[0].conj()).norm() < 1e-15);
    }
}
