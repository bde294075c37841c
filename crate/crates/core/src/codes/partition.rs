use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

/// Splits `m` into `p` equal-width column blocks, left to right.
pub fn partition_columnwise(m: &DenseMatrix, p: usize) -> Result<Vec<DenseMatrix>> {
    if p == 0 || !m.cols().is_multiple_of(p) {
        return Err(Error::InfeasiblePartition {
            len: m.cols(),
            parts: p,
        });
    }
    let width = m.cols() / p;
    Ok((0..p)
        .map(|i| m.block(0, i * width, m.rows(), width))
        .collect())
}

/// Splits `m` into `p` equal-height row blocks, top to bottom.
pub fn partition_rowwise(m: &DenseMatrix, p: usize) -> Result<Vec<DenseMatrix>> {
    if p == 0 || !m.rows().is_multiple_of(p) {
        return Err(Error::InfeasiblePartition {
            len: m.rows(),
            parts: p,
        });
    }
    let height = m.rows() / p;
    Ok((0..p)
        .map(|i| m.block(i * height, 0, height, m.cols()))
        .collect())
}
