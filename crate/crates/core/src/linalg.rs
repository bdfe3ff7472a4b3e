//! Small dense symmetric matrices and a cyclic Jacobi eigenvalue solver.
//!
//! Hessians handled here are tiny (a handful of rows), so the O(n³) per
//! sweep cost of Jacobi is irrelevant and its unconditional stability on
//! symmetric input is what matters.

use crate::error::{invalid, Result};

/// Row-major square matrix that is symmetric by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len());
        for (i, &v) in values.iter().enumerate() {
            m.data[i * m.n + i] = v;
        }
        m
    }

    /// Builds a matrix from rows, rejecting ragged or asymmetric input.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(invalid("matrix must have at least one row"));
        }
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(invalid(format!("expected a square {n}x{n} matrix")));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(invalid("matrix entries must be finite"));
            }
            data.extend_from_slice(row);
        }
        let m = Self { n, data };
        for i in 0..n {
            for j in (i + 1)..n {
                if m.get(i, j) != m.get(j, i) {
                    return Err(invalid(format!("matrix is not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(m)
    }

    /// Symmetrizes an arbitrary square matrix as (A + Aᵀ)/2.
    pub(crate) fn symmetrized(n: usize, raw: Vec<f64>) -> Self {
        debug_assert_eq!(raw.len(), n * n);
        let mut data = raw.clone();
        for i in 0..n {
            for j in (i + 1)..n {
                let avg = 0.5 * (raw[i * n + j] + raw[j * n + i]);
                data[i * n + j] = avg;
                data[j * n + i] = avg;
            }
        }
        Self { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.n).map(<[f64]>::to_vec).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        self.data
            .chunks(self.n)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }

    fn off_diagonal_norm(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                if i != j {
                    s += self.get(i, j).powi(2);
                }
            }
        }
        s.sqrt()
    }

    fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Off-diagonal Frobenius norm at which Jacobi sweeps stop (scaled by ‖A‖ when ‖A‖ > 1).
pub const JACOBI_TOL: f64 = 1e-10;
const MAX_SWEEPS: usize = 100;

/// Eigenvalues of a symmetric matrix in ascending order, by cyclic Jacobi rotations.
pub fn jacobi_eigenvalues(matrix: &SymMatrix) -> Vec<f64> {
    let n = matrix.n;
    let mut a = matrix.clone();
    let tol = JACOBI_TOL * a.frobenius_norm().max(1.0);

    for _ in 0..MAX_SWEEPS {
        if a.off_diagonal_norm() < tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let app = a.get(p, p);
                let aqq = a.get(q, q);
                // Rotation angle that annihilates a[p][q].
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                for k in 0..n {
                    if k != p && k != q {
                        let akp = a.get(k, p);
                        let akq = a.get(k, q);
                        let new_kp = c * akp - s * akq;
                        let new_kq = s * akp + c * akq;
                        a.set(k, p, new_kp);
                        a.set(p, k, new_kp);
                        a.set(k, q, new_kq);
                        a.set(q, k, new_kq);
                    }
                }
                a.set(p, p, app - t * apq);
                a.set(q, q, aqq + t * apq);
                a.set(p, q, 0.0);
                a.set(q, p, 0.0);
            }
        }
    }

    let mut eig: Vec<f64> = (0..n).map(|i| a.get(i, i)).collect();
    eig.sort_by(f64::total_cmp);
    eig
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_is_already_converged() {
        let m = SymMatrix::diag(&[3.0, -1.0, 2.0]);
        assert_eq!(jacobi_eigenvalues(&m), vec![-1.0, 2.0, 3.0]);
    }

    #[test]
    fn two_by_two_matches_closed_form() {
        // [[a, b], [b, c]] has eigenvalues (a+c)/2 ± sqrt(((a-c)/2)² + b²).
        let (a, b, c) = (2.0, 0.7, -1.5);
        let m = SymMatrix::from_rows(&[vec![a, b], vec![b, c]]).unwrap();
        let mid = 0.5 * (a + c);
        let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
        let eig = jacobi_eigenvalues(&m);
        assert!((eig[0] - (mid - rad)).abs() < 1e-12);
        assert!((eig[1] - (mid + rad)).abs() < 1e-12);
    }

    #[test]
    fn rosenbrock_hessian_at_minimum() {
        // [[802, -400], [-400, 200]]
        let m = SymMatrix::from_rows(&[vec![802.0, -400.0], vec![-400.0, 200.0]]).unwrap();
        let eig = jacobi_eigenvalues(&m);
        let tr: f64 = 1002.0;
        let det = 802.0 * 200.0 - 160000.0;
        let disc = (tr * tr / 4.0 - det).sqrt();
        assert!((eig[0] - (tr / 2.0 - disc)).abs() < 1e-9);
        assert!((eig[1] - (tr / 2.0 + disc)).abs() < 1e-9);
    }

    #[test]
    fn rejects_asymmetric_rows() {
        assert!(SymMatrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).is_err());
        assert!(SymMatrix::from_rows(&[vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn symmetrized_averages_off_diagonal() {
        let m = SymMatrix::symmetrized(2, vec![1.0, 2.0, 4.0, 1.0]);
        assert_eq!(m.get(0, 1), 3.0);
        assert!(m.is_symmetric());
    }

    proptest::proptest! {
        #[test]
        fn trace_and_frobenius_are_preserved(
            entries in proptest::collection::vec(-10.0f64..10.0, 10),
        ) {
            // Random symmetric 4x4 from the upper triangle.
            let n = 4;
            let mut rows = vec![vec![0.0; n]; n];
            let mut it = entries.iter();
            for i in 0..n {
                for j in i..n {
                    let v = *it.next().unwrap();
                    rows[i][j] = v;
                    rows[j][i] = v;
                }
            }
            let m = SymMatrix::from_rows(&rows).unwrap();
            let eig = jacobi_eigenvalues(&m);
            let trace: f64 = (0..n).map(|i| m.get(i, i)).sum();
            let fro2: f64 = rows.iter().flatten().map(|v| v * v).sum();
            let scale = 1.0 + fro2.sqrt();
            proptest::prop_assert!((eig.iter().sum::<f64>() - trace).abs() < 1e-9 * scale);
            proptest::prop_assert!((eig.iter().map(|v| v * v).sum::<f64>() - fro2).abs() < 1e-8 * scale * scale);
        }
    }
}
