//! Small dense solves used by the decoders: LU with partial pivoting and a
//! 1-norm condition number.

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

/// Decoding refuses systems whose 1-norm condition number exceeds this.
pub const MAX_CONDITION: f64 = 1e12;

/// LU factorization `P A = L U` of a square matrix.
#[derive(Debug, Clone)]
pub struct Lu {
    n: usize,
    // packed L (unit diagonal, below) and U (on and above the diagonal)
    lu: Vec<f64>,
    perm: Vec<usize>,
    norm1: f64,
}

impl Lu {
    /// Factorizes `a` (row-major, `n x n`). Exactly singular systems report an
    /// infinite condition number.
    pub fn factor(n: usize, a: &[f64]) -> Result<Self> {
        assert_eq!(a.len(), n * n);
        let norm1 = (0..n)
            .map(|j| (0..n).map(|i| a[i * n + j].abs()).sum::<f64>())
            .fold(0.0, f64::max);
        let mut lu = a.to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let pivot_row = (k..n)
                .max_by(|&x, &y| lu[x * n + k].abs().total_cmp(&lu[y * n + k].abs()))
                .expect("non-empty range");
            if lu[pivot_row * n + k] == 0.0 {
                return Err(Error::IllConditioned(f64::INFINITY));
            }
            if pivot_row != k {
                for j in 0..n {
                    lu.swap(k * n + j, pivot_row * n + j);
                }
                perm.swap(k, pivot_row);
            }
            let pivot = lu[k * n + k];
            for i in k + 1..n {
                let factor = lu[i * n + k] / pivot;
                lu[i * n + k] = factor;
                for j in k + 1..n {
                    lu[i * n + j] -= factor * lu[k * n + j];
                }
            }
        }
        Ok(Self { n, lu, perm, norm1 })
    }

    /// Solves `A x = b` in place.
    pub fn solve_vec(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for j in 0..i {
                x[i] -= self.lu[i * n + j] * x[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                x[i] -= self.lu[i * n + j] * x[j];
            }
            x[i] /= self.lu[i * n + i];
        }
        x
    }

    /// Exact `‖A‖₁ ‖A⁻¹‖₁`, computed column by column. Fine for the tiny
    /// systems the decoders build.
    pub fn condition_number(&self) -> f64 {
        let n = self.n;
        let mut inv_norm = 0.0f64;
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let col = self.solve_vec(&e);
            inv_norm = inv_norm.max(col.iter().map(|v| v.abs()).sum());
        }
        self.norm1 * inv_norm
    }

    /// Factorizes and rejects systems above [`MAX_CONDITION`].
    pub fn factor_checked(n: usize, a: &[f64]) -> Result<Self> {
        let lu = Self::factor(n, a)?;
        let cond = lu.condition_number();
        if !cond.is_finite() || cond > MAX_CONDITION {
            return Err(Error::IllConditioned(cond));
        }
        Ok(lu)
    }

    /// Solves `A X = R` where every "entry" of `X` and `R` is a matrix block
    /// of a common shape; i.e. one scalar system per block entry.
    pub fn solve_blocks(&self, rhs: &[&DenseMatrix]) -> Vec<DenseMatrix> {
        let n = self.n;
        assert_eq!(rhs.len(), n);
        let (rows, cols) = rhs[0].shape();
        let mut out = vec![DenseMatrix::zeros(rows, cols); n];
        let mut b = vec![0.0; n];
        for r in 0..rows {
            for c in 0..cols {
                for (slot, m) in b.iter_mut().zip(rhs) {
                    *slot = m[(r, c)];
                }
                let x = self.solve_vec(&b);
                for (m, v) in out.iter_mut().zip(x) {
                    m[(r, c)] = v;
                }
            }
        }
        out
    }
}

/// Row-major Vandermonde matrix `V[i][j] = points[i]^j`, `j < degree`.
pub fn vandermonde(points: &[f64], columns: usize) -> Vec<f64> {
    let mut v = Vec::with_capacity(points.len() * columns);
    for &x in points {
        let mut pow = 1.0;
        for _ in 0..columns {
            v.push(pow);
            pow *= x;
        }
    }
    v
}
