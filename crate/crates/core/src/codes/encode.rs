use serde::{Deserialize, Serialize};

use super::partition::{partition_columnwise, partition_rowwise};
use super::systematic::SystematicCode;
use super::{check_feasible, isqrt, CodeChoice, Scheme};
use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

/// Evaluation points for the polynomial-type codes: `1..=n` rescaled by
/// `2/(n+1)` and shifted to be symmetric about zero, all inside `(-1, 1)`.
pub fn evaluation_points(n: usize) -> Vec<f64> {
    let scale = 2.0 / (n as f64 + 1.0);
    (1..=n).map(|i| i as f64 * scale - 1.0).collect()
}

/// Operands shipped to one worker. The worker returns `leftᵀ · right`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkerPayload {
    pub left: DenseMatrix,
    pub right: DenseMatrix,
}

impl WorkerPayload {
    pub fn compute(&self) -> DenseMatrix {
        self.left
            .t_matmul(&self.right)
            .expect("payload operands share a row count")
    }
}

/// What the master keeps for decoding.
#[derive(Debug, Clone, PartialEq)]
pub enum Layout {
    /// `block_of_worker[n]` is the column block of `A` held by worker `n`.
    Replicated { block_of_worker: Vec<usize> },
    /// Systematic `(N, p)` code over the column blocks of `A`.
    Mds { code: SystematicCode },
    /// Worker `n` evaluated both encoding polynomials at `points[n]`.
    Polynomial { points: Vec<f64> },
    MatDot { points: Vec<f64> },
    /// Worker `n` sits at grid cell `(n / side, n % side)`; rows and columns
    /// share the `(side, p)` code.
    Grid { side: usize, code: SystematicCode },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CodedTaskSet {
    pub choice: CodeChoice,
    pub workers: usize,
    pub payloads: Vec<WorkerPayload>,
    pub layout: Layout,
    /// `(K_A, K_B, L)`: `A` is `L x K_A`, `B` is `L x K_B`.
    pub original_dims: (usize, usize, usize),
}

impl CodedTaskSet {
    /// Scalar evaluation points, for the codes that have them.
    pub fn eval_points(&self) -> Option<&[f64]> {
        match &self.layout {
            Layout::Polynomial { points } | Layout::MatDot { points } => Some(points),
            _ => None,
        }
    }

    /// Grid coordinates of every coded worker (product codes only).
    pub fn grid_positions(&self) -> Option<Vec<(usize, usize)>> {
        match &self.layout {
            Layout::Grid { side, .. } => Some(
                (0..side * side).map(|n| (n / side, n % side)).collect(),
            ),
            _ => None,
        }
    }

    /// Runs every worker locally, in worker order.
    pub fn compute_all(&self) -> Vec<(usize, DenseMatrix)> {
        self.payloads
            .iter()
            .enumerate()
            .map(|(n, p)| (n, p.compute()))
            .collect()
    }
}

/// Encodes `C = AᵀB` into per-worker payloads for `choice` on `workers` workers.
pub fn encode(
    a: &DenseMatrix,
    b: &DenseMatrix,
    choice: CodeChoice,
    workers: usize,
) -> Result<CodedTaskSet> {
    check_feasible(choice, workers)?;
    if a.rows() != b.rows() {
        return Err(Error::Shape(format!(
            "A has {} rows but B has {}",
            a.rows(),
            b.rows()
        )));
    }
    let p = choice.partitions;
    let original_dims = (a.cols(), b.cols(), a.rows());
    let (payloads, layout) = match choice.scheme {
        Scheme::Repetition => {
            let blocks = partition_columnwise(a, p)?;
            let copies = workers / p;
            let block_of_worker: Vec<usize> = (0..workers).map(|n| n / copies).collect();
            let payloads = block_of_worker
                .iter()
                .map(|&i| WorkerPayload {
                    left: blocks[i].clone(),
                    right: b.clone(),
                })
                .collect();
            (payloads, Layout::Replicated { block_of_worker })
        }
        Scheme::Mds => {
            let blocks = partition_columnwise(a, p)?;
            let code = SystematicCode::new(workers, p);
            let payloads = code
                .encode_all(&blocks)
                .into_iter()
                .map(|left| WorkerPayload {
                    left,
                    right: b.clone(),
                })
                .collect();
            (payloads, Layout::Mds { code })
        }
        Scheme::Polynomial => {
            let a_blocks = partition_columnwise(a, p)?;
            let b_blocks = partition_columnwise(b, p)?;
            let points = evaluation_points(workers);
            let payloads = points
                .iter()
                .map(|&x| WorkerPayload {
                    // α(x) = Σ A_j x^j,  β(x) = Σ B_j x^{jp}
                    left: eval_poly(&a_blocks, x, 1),
                    right: eval_poly(&b_blocks, x, p),
                })
                .collect();
            (payloads, Layout::Polynomial { points })
        }
        Scheme::MatDot => {
            let a_blocks = partition_rowwise(a, p)?;
            let mut b_blocks = partition_rowwise(b, p)?;
            // β(x) = Σ B_j x^{p-1-j}
            b_blocks.reverse();
            let points = evaluation_points(workers);
            let payloads = points
                .iter()
                .map(|&x| WorkerPayload {
                    left: eval_poly(&a_blocks, x, 1),
                    right: eval_poly(&b_blocks, x, 1),
                })
                .collect();
            (payloads, Layout::MatDot { points })
        }
        Scheme::Product => {
            let side = isqrt(workers);
            let code = SystematicCode::new(side, p);
            let a_coded = code.encode_all(&partition_columnwise(a, p)?);
            let b_coded = code.encode_all(&partition_columnwise(b, p)?);
            let payloads = (0..side * side)
                .map(|n| WorkerPayload {
                    left: a_coded[n / side].clone(),
                    right: b_coded[n % side].clone(),
                })
                .collect();
            (payloads, Layout::Grid { side, code })
        }
    };
    Ok(CodedTaskSet {
        choice,
        workers,
        payloads,
        layout,
        original_dims,
    })
}

/// `Σ_j blocks[j] · x^{j·stride}`
fn eval_poly(blocks: &[DenseMatrix], x: f64, stride: usize) -> DenseMatrix {
    let step = x.powi(stride as i32);
    let mut coeffs = Vec::with_capacity(blocks.len());
    let mut pow = 1.0;
    for _ in blocks {
        coeffs.push(pow);
        pow *= step;
    }
    DenseMatrix::linear_combination(blocks, &coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: usize, cols: usize, seed: f64) -> DenseMatrix {
        DenseMatrix::from_fn(rows, cols, |i, j| ((i * cols + j) as f64 * 0.37 + seed).sin())
    }

    #[test]
    fn points_are_symmetric_and_distinct() {
        let pts = evaluation_points(3);
        assert_eq!(pts, vec![-0.5, 0.0, 0.5]);
        let pts = evaluation_points(10);
        for w in pts.windows(2) {
            assert!(w[1] > w[0]);
        }
        assert!((pts[0] + pts[9]).abs() < 1e-15);
    }

    #[test]
    fn three_two_mds_third_task_is_block_sum() {
        let a = m(4, 4, 0.1);
        let b = m(4, 4, 0.7);
        let tasks = encode(&a, &b, CodeChoice::new(Scheme::Mds, 2), 3).unwrap();
        let blocks = partition_columnwise(&a, 2).unwrap();
        assert_eq!(tasks.payloads[0].left, blocks[0]);
        assert_eq!(tasks.payloads[1].left, blocks[1]);
        let mut sum = blocks[0].clone();
        sum.add_scaled(&blocks[1], 1.0);
        assert_eq!(tasks.payloads[2].left, sum);
        assert!(tasks.payloads.iter().all(|p| p.right == b));
    }

    #[test]
    fn polynomial_payloads() {
        let a = m(3, 4, 0.2);
        let b = m(3, 4, 0.9);
        let tasks = encode(&a, &b, CodeChoice::new(Scheme::Polynomial, 2), 5).unwrap();
        let ab = partition_columnwise(&a, 2).unwrap();
        let bb = partition_columnwise(&b, 2).unwrap();
        for (payload, &x) in tasks.payloads.iter().zip(tasks.eval_points().unwrap()) {
            let mut left = ab[0].clone();
            left.add_scaled(&ab[1], x);
            let mut right = bb[0].clone();
            right.add_scaled(&bb[1], x * x);
            assert!(payload.left.relative_error(&left) < 1e-15);
            assert!(payload.right.relative_error(&right) < 1e-15);
        }
    }

    #[test]
    fn matdot_product_polynomial_coefficients() {
        // α(x)ᵀβ(x) = A0ᵀB1 + (A0ᵀB0 + A1ᵀB1) x + A1ᵀB0 x²
        let a = m(4, 3, 0.3);
        let b = m(4, 3, 1.3);
        let tasks = encode(&a, &b, CodeChoice::new(Scheme::MatDot, 2), 3).unwrap();
        let ab = partition_rowwise(&a, 2).unwrap();
        let bb = partition_rowwise(&b, 2).unwrap();
        let t = |i: usize, j: usize| ab[i].t_matmul(&bb[j]).unwrap();
        for (payload, &x) in tasks.payloads.iter().zip(tasks.eval_points().unwrap()) {
            let mut expected = t(0, 1);
            let mut middle = t(0, 0);
            middle.add_scaled(&t(1, 1), 1.0);
            expected.add_scaled(&middle, x);
            expected.add_scaled(&t(1, 0), x * x);
            assert!(payload.compute().relative_error(&expected) < 1e-12);
        }
    }

    #[test]
    fn product_grid_layout() {
        let a = m(2, 4, 0.4);
        let b = m(2, 4, 0.8);
        let tasks = encode(&a, &b, CodeChoice::new(Scheme::Product, 2), 10).unwrap();
        assert_eq!(tasks.payloads.len(), 9);
        let pos = tasks.grid_positions().unwrap();
        assert_eq!(pos[5], (1, 2));
        // cell (2, 2) holds (A0 + A1, B0 + B1)
        let ab = partition_columnwise(&a, 2).unwrap();
        let mut sum = ab[0].clone();
        sum.add_scaled(&ab[1], 1.0);
        assert_eq!(tasks.payloads[8].left, sum);
    }

    #[test]
    fn encode_rejects_infeasible_and_bad_shapes() {
        let a = m(4, 4, 0.0);
        let b = m(4, 4, 1.0);
        let err = encode(&a, &b, CodeChoice::new(Scheme::Repetition, 2), 7).unwrap_err();
        assert!(matches!(err, Error::Infeasible { .. }));
        let odd = m(4, 3, 0.0);
        assert!(matches!(
            encode(&odd, &b, CodeChoice::new(Scheme::Mds, 2), 3),
            Err(Error::InfeasiblePartition { .. })
        ));
        let short = m(3, 4, 0.0);
        assert!(matches!(
            encode(&short, &b, CodeChoice::new(Scheme::Mds, 2), 3),
            Err(Error::Shape(_))
        ));
    }
}
