use crate::error::Result;
use crate::linalg::Lu;
use crate::matrix::DenseMatrix;

/// Real-valued systematic `(n, k)` MDS code with generator `[I_k; P]`.
///
/// Parity row `r` is `(1, y_r, y_r², …, y_r^{k-1})` with distinct positive
/// nodes `y_r = 1 + 2r/(n+1)`. A Vandermonde matrix on increasing positive
/// nodes is totally positive, so every square submatrix of `P` is
/// nonsingular and any `k` rows of the generator are invertible. The first
/// parity codeword is the plain sum of the data blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct SystematicCode {
    length: usize,
    dimension: usize,
    generator: Vec<f64>,
}

impl SystematicCode {
    pub fn new(length: usize, dimension: usize) -> Self {
        assert!(dimension >= 1 && dimension <= length);
        let mut generator = vec![0.0; length * dimension];
        for i in 0..dimension {
            generator[i * dimension + i] = 1.0;
        }
        let step = 2.0 / (length as f64 + 1.0);
        for r in 0..length - dimension {
            let y = 1.0 + step * r as f64;
            let row = &mut generator[(dimension + r) * dimension..(dimension + r + 1) * dimension];
            let mut pow = 1.0;
            for g in row {
                *g = pow;
                pow *= y;
            }
        }
        Self {
            length,
            dimension,
            generator,
        }
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.generator[i * self.dimension..(i + 1) * self.dimension]
    }

    /// Codeword `i`: `sum_j G[i][j] * data[j]`.
    pub fn encode_one(&self, data: &[DenseMatrix], i: usize) -> DenseMatrix {
        DenseMatrix::linear_combination(data, self.row(i))
    }

    pub fn encode_all(&self, data: &[DenseMatrix]) -> Vec<DenseMatrix> {
        assert_eq!(data.len(), self.dimension);
        (0..self.length).map(|i| self.encode_one(data, i)).collect()
    }

    /// Recovers the `k` data blocks from exactly `k` codewords at `positions`.
    pub fn solve(&self, positions: &[usize], codewords: &[&DenseMatrix]) -> Result<Vec<DenseMatrix>> {
        let k = self.dimension;
        assert_eq!(positions.len(), k);
        assert_eq!(codewords.len(), k);
        if positions.iter().zip(0..).all(|(&p, i)| p == i) {
            return Ok(codewords.iter().map(|&m| m.clone()).collect());
        }
        let system: Vec<f64> = positions.iter().flat_map(|&p| self.row(p).to_vec()).collect();
        let lu = Lu::factor_checked(k, &system)?;
        Ok(lu.solve_blocks(codewords))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_two_code_adds_blocks() {
        let code = SystematicCode::new(3, 2);
        assert_eq!(code.row(0), &[1.0, 0.0]);
        assert_eq!(code.row(1), &[0.0, 1.0]);
        assert_eq!(code.row(2), &[1.0, 1.0]);
    }

    #[test]
    fn every_k_subset_is_invertible() {
        for n in 2..=9 {
            for k in 1..=n {
                let code = SystematicCode::new(n, k);
                for mask in 0u32..(1 << n) {
                    if mask.count_ones() as usize != k {
                        continue;
                    }
                    let rows: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
                    let system: Vec<f64> = rows.iter().flat_map(|&r| code.row(r).to_vec()).collect();
                    assert!(Lu::factor_checked(k, &system).is_ok(), "n={n} k={k} rows={rows:?}");
                }
            }
        }
    }
}
