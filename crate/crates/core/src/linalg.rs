//! Small dense linear algebra helpers.
//!
//! The refinement loop only ever diagonalizes real symmetric 3x3 matrices, so
//! it uses a cyclic Jacobi sweep that is deterministic and accurate to a few
//! ulps. Hermitian M x M work (subspaces, inverses) goes through nalgebra.

use nalgebra::{DMatrix, Matrix3, Vector3};
use num_complex::Complex64;

/// Eigen-decomposition of a real symmetric 3x3 matrix.
///
/// Eigenvalues are sorted ascending; column `i` of `vectors` is the unit
/// eigenvector for `values[i]`.
#[derive(Debug, Clone, Copy)]
pub struct SymEigen3 {
    pub values: Vector3<f64>,
    pub vectors: Matrix3<f64>,
}

impl SymEigen3 {
    pub fn new(m: &Matrix3<f64>) -> Self {
        let mut a = (m + m.transpose()) * 0.5;
        let mut v = Matrix3::<f64>::identity();

        for _sweep in 0..64 {
            let off = a[(0, 1)].powi(2) + a[(0, 2)].powi(2) + a[(1, 2)].powi(2);
            let diag = a[(0, 0)].powi(2) + a[(1, 1)].powi(2) + a[(2, 2)].powi(2);
            if off <= f64::EPSILON * f64::EPSILON * diag || off == 0.0 {
                break;
            }
            for (p, q) in [(0usize, 1usize), (0, 2), (1, 2)] {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                // a <- J^T a J, v <- v J
                for k in 0..3 {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..3 {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..3 {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }

        let mut order = [0usize, 1, 2];
        // stable: ties keep input order
        order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
        let values = Vector3::new(a[(order[0], order[0])], a[(order[1], order[1])], a[(order[2], order[2])]);
        let vectors = Matrix3::from_columns(&[v.column(order[0]), v.column(order[1]), v.column(order[2])]);
        SymEigen3 { values, vectors }
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[2]
    }
}

/// Eigen-decomposition of a Hermitian matrix with ascending eigenvalues.
///
/// Ties are broken by the order nalgebra produced them in (stable sort).
pub(crate) fn hermitian_eigen_ascending(m: &DMatrix<Complex64>) -> (Vec<f64>, DMatrix<Complex64>) {
    let n = m.nrows();
    let sym = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = nalgebra::SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::<Complex64>::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn hermitian_min_eigenvalue(m: &DMatrix<Complex64>) -> f64 {
    let (values, _) = hermitian_eigen_ascending(m);
    values.first().copied().unwrap_or(0.0)
}

pub(crate) fn trace_re(m: &DMatrix<Complex64>) -> f64 {
    (0..m.nrows()).map(|i| m[(i, i)].re).sum()
}

/// Largest entry of `|m - m^H|`.
pub(crate) fn hermitian_defect(m: &DMatrix<Complex64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn jacobi_reconstructs_random_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..500 {
            let b = Matrix3::<f64>::from_fn(|_, _| rng.random_range(-3.0..3.0));
            let m = b + b.transpose();
            let e = SymEigen3::new(&m);
            let rebuilt = e.vectors * Matrix3::from_diagonal(&e.values) * e.vectors.transpose();
            assert!((rebuilt - m).abs().max() < 1e-12 * m.abs().max().max(1.0));
            let ortho = e.vectors.transpose() * e.vectors - Matrix3::identity();
            assert!(ortho.abs().max() < 1e-13);
            assert!(e.values[0] <= e.values[1] && e.values[1] <= e.values[2]);
        }
    }

    #[test]
    fn jacobi_diagonal_and_repeated() {
        let e = SymEigen3::new(&Matrix3::from_diagonal(&Vector3::new(3.0, 1.0, 2.0)));
        assert_eq!(e.values, Vector3::new(1.0, 2.0, 3.0));
        assert_eq!(e.vectors.column(0).into_owned(), Vector3::new(0.0, 1.0, 0.0));

        let e = SymEigen3::new(&Matrix3::identity());
        assert_eq!(e.vectors, Matrix3::identity());
    }

    #[test]
    fn hermitian_eigen_sorted() {
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            Complex64::new(2.0, 0.0),
            Complex64::new(-1.0, 0.0),
            Complex64::new(5.0, 0.0),
        ]));
        let (vals, vecs) = hermitian_eigen_ascending(&m);
        assert_eq!(vals, vec![-1.0, 2.0, 5.0]);
        assert!((vecs[(1, 0)].norm() - 1.0).abs() < 1e-14);
    }
}
