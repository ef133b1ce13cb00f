//! Dense LU with partial pivoting, generic over the scalar. At desk scale
//! (n <= 8) a hand-rolled factorization beats pulling in a BLAS binding and
//! keeps every solver usable at any float width.

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix is singular to working precision (pivot {pivot:e} at step {step})")]
    Singular { step: usize, pivot: f64 },
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("right-hand side length {got} does not match dimension {want}")]
    RhsLength { got: usize, want: usize },
}

/// Row-major dense square matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<F> {
    n: usize,
    data: Vec<F>,
}

impl<F: Scalar> Matrix<F> {
    pub fn zeros(n: usize) -> Self {
        Matrix {
            n,
            data: vec![F::zero(); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = F::one();
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<F>>) -> Result<Self, LinalgError> {
        let n = rows.len();
        for r in &rows {
            if r.len() != n {
                return Err(LinalgError::NotSquare {
                    rows: n,
                    cols: r.len(),
                });
            }
        }
        Ok(Matrix {
            n,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[F] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    /// Max absolute row sum.
    pub fn inf_norm(&self) -> F {
        (0..self.n)
            .map(|i| self.row(i).iter().map(|x| x.abs()).sum())
            .fold(F::zero(), |a: F, b: F| if b > a { b } else { a })
    }

    /// Delete row `s` and column `s`.
    pub fn deleted(&self, s: usize) -> Matrix<F> {
        let keep: Vec<usize> = (0..self.n).filter(|&i| i != s).collect();
        let mut m = Matrix::zeros(keep.len());
        for (i, &oi) in keep.iter().enumerate() {
            for (j, &oj) in keep.iter().enumerate() {
                m[(i, j)] = self[(oi, oj)];
            }
        }
        m
    }

    pub fn factor(&self) -> Result<Lu<F>, LinalgError> {
        Lu::new(self.clone())
    }

    /// Inverse via LU; errors on singular input.
    pub fn inverse(&self) -> Result<Matrix<F>, LinalgError> {
        let lu = self.factor()?;
        let n = self.n;
        let mut inv = Matrix::zeros(n);
        for j in 0..n {
            let mut e = vec![F::zero(); n];
            e[j] = F::one();
            let col = lu.solve(&e)?;
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        Ok(inv)
    }

    /// Condition number estimate in the infinity norm (exact, via the
    /// inverse; fine at desk scale).
    pub fn condition_inf(&self) -> Option<f64> {
        let inv = self.inverse().ok()?;
        Some((self.inf_norm() * inv.inf_norm()).to_f64_lossy())
    }
}

impl<F> std::ops::Index<(usize, usize)> for Matrix<F> {
    type Output = F;
    fn index(&self, (i, j): (usize, usize)) -> &F {
        &self.data[i * self.n + j]
    }
}

impl<F> std::ops::IndexMut<(usize, usize)> for Matrix<F> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut F {
        &mut self.data[i * self.n + j]
    }
}

/// LU factorization with partial pivoting.
pub struct Lu<F> {
    lu: Matrix<F>,
    perm: Vec<usize>,
}

impl<F: Scalar> Lu<F> {
    fn new(mut a: Matrix<F>) -> Result<Self, LinalgError> {
        let n = a.n;
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = a.inf_norm().max(F::one());
        let tiny = scale * F::epsilon() * F::cast(16.0);
        for k in 0..n {
            let pivot_row = (k..n)
                .max_by(|&i, &j| {
                    a[(i, k)]
                        .abs()
                        .partial_cmp(&a[(j, k)].abs())
                        .expect("no NaN in pivot search")
                })
                .unwrap();
            if a[(pivot_row, k)].abs() <= tiny {
                return Err(LinalgError::Singular {
                    step: k,
                    pivot: a[(pivot_row, k)].abs().to_f64_lossy(),
                });
            }
            if pivot_row != k {
                for j in 0..n {
                    let tmp = a[(k, j)];
                    a[(k, j)] = a[(pivot_row, j)];
                    a[(pivot_row, j)] = tmp;
                }
                perm.swap(k, pivot_row);
            }
            for i in k + 1..n {
                let factor = a[(i, k)] / a[(k, k)];
                a[(i, k)] = factor;
                for j in k + 1..n {
                    let akj = a[(k, j)];
                    a[(i, j)] = a[(i, j)] - factor * akj;
                }
            }
        }
        Ok(Lu { lu: a, perm })
    }

    pub fn solve(&self, b: &[F]) -> Result<Vec<F>, LinalgError> {
        let n = self.lu.n;
        if b.len() != n {
            return Err(LinalgError::RhsLength {
                got: b.len(),
                want: n,
            });
        }
        let mut x: Vec<F> = self.perm.iter().map(|&i| b[i]).collect();
        for i in 1..n {
            for j in 0..i {
                let lij = self.lu[(i, j)];
                let xj = x[j];
                x[i] = x[i] - lij * xj;
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                let uij = self.lu[(i, j)];
                let xj = x[j];
                x[i] = x[i] - uij * xj;
            }
            x[i] = x[i] / self.lu[(i, i)];
        }
        Ok(x)
    }

    /// Determinant from the pivots, with the permutation sign.
    pub fn determinant(&self) -> F {
        let mut visited = vec![false; self.perm.len()];
        let mut swaps = 0usize;
        for start in 0..self.perm.len() {
            if visited[start] {
                continue;
            }
            let mut len = 0;
            let mut cur = start;
            while !visited[cur] {
                visited[cur] = true;
                cur = self.perm[cur];
                len += 1;
            }
            swaps += len - 1;
        }
        let sign = if swaps % 2 == 0 { F::one() } else { -F::one() };
        (0..self.lu.n).fold(sign, |acc, i| acc * self.lu[(i, i)])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        let a: Matrix<f64> = Matrix::from_rows(vec![vec![2.0, 1.0], vec![1.0, 3.0]]).unwrap();
        let x = a.factor().unwrap().solve(&[5.0, 10.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14);
        assert!((x[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn inverse_times_matrix_is_identity() {
        let a = Matrix::from_rows(vec![
            vec![4.0, 1.0, 0.5],
            vec![0.25, 3.0, 1.0],
            vec![1.0, 0.0, 2.0],
        ])
        .unwrap();
        let inv = a.inverse().unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let prod: f64 = (0..3).map(|k| a[(i, k)] * inv[(k, j)]).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((prod - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn detects_singularity() {
        let a = Matrix::from_rows(vec![vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert!(matches!(a.factor(), Err(LinalgError::Singular { .. })));
    }

    #[test]
    fn determinant_with_pivoting() {
        // Needs a row swap; det = -2.
        let a: Matrix<f64> = Matrix::from_rows(vec![vec![0.0, 1.0], vec![2.0, 0.0]]).unwrap();
        let det = a.factor().unwrap().determinant();
        assert!((det + 2.0).abs() < 1e-14);
    }

    #[test]
    fn deleted_submatrix() {
        let a = Matrix::from_rows(vec![
            vec![1.0, 2.0, 3.0],
            vec![4.0, 5.0, 6.0],
            vec![7.0, 8.0, 9.0],
        ])
        .unwrap();
        let d = a.deleted(1);
        assert_eq!(d.row(0), &[1.0, 3.0]);
        assert_eq!(d.row(1), &[7.0, 9.0]);
    }

    #[test]
    fn condition_of_identity_is_one() {
        let a: Matrix<f64> = Matrix::identity(4);
        assert!((a.condition_inf().unwrap() - 1.0).abs() < 1e-12);
    }
}
