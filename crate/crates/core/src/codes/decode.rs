use std::collections::BTreeMap;

use super::encode::{CodedTaskSet, Layout};
use super::systematic::SystematicCode;
use super::{decodable, threshold_unchecked, CompletionPattern};
use crate::error::{Error, Result};
use crate::linalg::{vandermonde, Lu};
use crate::matrix::DenseMatrix;

/// Recovers `AᵀB` from worker results `(worker index, leftᵀ·right)`.
///
/// Threshold codes use the first `k` distinct workers in the order given.
pub fn decode(tasks: &CodedTaskSet, results: &[(usize, DenseMatrix)]) -> Result<DenseMatrix> {
    let mut received: BTreeMap<usize, &DenseMatrix> = BTreeMap::new();
    let mut order = Vec::new();
    for (w, m) in results {
        if *w >= tasks.payloads.len() {
            return Err(Error::Domain(format!(
                "result from worker {w}, but only {} workers hold tasks",
                tasks.payloads.len()
            )));
        }
        if received.insert(*w, m).is_none() {
            order.push(*w);
        }
    }
    let pattern = CompletionPattern::new(received.keys().copied(), tasks.workers)?;
    let need = threshold_unchecked(tasks.choice, tasks.workers);
    if !decodable(tasks.choice, tasks.workers, &pattern)? {
        return Err(Error::NotEnoughResults {
            have: pattern.len(),
            need,
        });
    }
    let (ka, kb, _) = tasks.original_dims;
    let p = tasks.choice.partitions;
    let expect = |w: usize, shape: (usize, usize)| -> Result<&DenseMatrix> {
        let m = received[&w];
        if m.shape() != shape {
            return Err(Error::Shape(format!(
                "worker {w} returned {:?}, expected {shape:?}",
                m.shape()
            )));
        }
        Ok(m)
    };

    match &tasks.layout {
        Layout::Replicated { block_of_worker } => {
            let mut blocks: Vec<Option<&DenseMatrix>> = vec![None; p];
            for &w in &order {
                let slot = &mut blocks[block_of_worker[w]];
                if slot.is_none() {
                    *slot = Some(expect(w, (ka / p, kb))?);
                }
            }
            let blocks: Vec<DenseMatrix> = blocks.into_iter().map(|b| b.unwrap().clone()).collect();
            DenseMatrix::vcat(&blocks)
        }
        Layout::Mds { code } => {
            let chosen = &order[..p];
            let codewords = chosen
                .iter()
                .map(|&w| expect(w, (ka / p, kb)))
                .collect::<Result<Vec<_>>>()?;
            DenseMatrix::vcat(&code.solve(chosen, &codewords)?)
        }
        Layout::Polynomial { points } => {
            let coeffs = interpolate(points, &order[..need], |w| expect(w, (ka / p, kb / p)))?;
            // coefficient j + l·p is A_jᵀ B_l
            let (bh, bw) = (ka / p, kb / p);
            let mut c = DenseMatrix::zeros(ka, kb);
            for (d, block) in coeffs.iter().enumerate() {
                c.set_block((d % p) * bh, (d / p) * bw, block);
            }
            Ok(c)
        }
        Layout::MatDot { points } => {
            let mut coeffs = interpolate(points, &order[..need], |w| expect(w, (ka, kb)))?;
            Ok(coeffs.swap_remove(p - 1))
        }
        Layout::Grid { side, code } => {
            let mut grid: Vec<Option<DenseMatrix>> = vec![None; side * side];
            for &w in &order {
                grid[w] = Some(expect(w, (ka / p, kb / p))?.clone());
            }
            peel_values(&mut grid, *side, code)?;
            let mut c = DenseMatrix::zeros(ka, kb);
            for a in 0..p {
                for b in 0..p {
                    let cell = grid[a * side + b].as_ref().ok_or(Error::NotEnoughResults {
                        have: pattern.len(),
                        need,
                    })?;
                    c.set_block(a * (ka / p), b * (kb / p), cell);
                }
            }
            Ok(c)
        }
    }
}

/// Monomial-basis coefficients of the matrix polynomial sampled at the
/// points of `workers`.
fn interpolate<'a>(
    points: &[f64],
    workers: &[usize],
    mut value: impl FnMut(usize) -> Result<&'a DenseMatrix>,
) -> Result<Vec<DenseMatrix>> {
    let xs: Vec<f64> = workers.iter().map(|&w| points[w]).collect();
    let lu = Lu::factor_checked(xs.len(), &vandermonde(&xs, xs.len()))?;
    let rhs = workers.iter().map(|&w| value(w)).collect::<Result<Vec<_>>>()?;
    Ok(lu.solve_blocks(&rhs))
}

/// Peeling on the result grid. Row `i` holds the codeword
/// `R[i][j] = Σ_b G[j][b] D[i][b]`, so any `p` known entries pin down the
/// row's `p` unknowns `D[i][·]`, after which every entry can be re-encoded.
/// Columns are symmetric. Sweep rows ascending, then columns, to fixpoint.
fn peel_values(grid: &mut [Option<DenseMatrix>], side: usize, code: &SystematicCode) -> Result<()> {
    let p = code.dimension();
    loop {
        let mut changed = false;
        for line in 0..2 * side {
            let cells: Vec<usize> = if line < side {
                (0..side).map(|j| line * side + j).collect()
            } else {
                (0..side).map(|i| i * side + (line - side)).collect()
            };
            let known: Vec<usize> = (0..side).filter(|&t| grid[cells[t]].is_some()).collect();
            if known.len() < p || known.len() == side {
                continue;
            }
            let positions = &known[..p];
            let codewords: Vec<&DenseMatrix> = positions
                .iter()
                .map(|&t| grid[cells[t]].as_ref().unwrap())
                .collect();
            let data = code.solve(positions, &codewords)?;
            for t in 0..side {
                if grid[cells[t]].is_none() {
                    grid[cells[t]] = Some(code.encode_one(&data, t));
                }
            }
            changed = true;
        }
        if !changed {
            return Ok(());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codes::{encode, CodeChoice, Scheme};

    fn m(rows: usize, cols: usize, seed: f64) -> DenseMatrix {
        DenseMatrix::from_fn(rows, cols, |i, j| ((i * cols + j) as f64 * 0.61 + seed).cos())
    }

    #[test]
    fn identity_round_trip_every_scheme() {
        let i4 = DenseMatrix::identity(4);
        for (scheme, n) in [
            (Scheme::Repetition, 4),
            (Scheme::Mds, 3),
            (Scheme::Polynomial, 4),
            (Scheme::MatDot, 3),
            (Scheme::Product, 9),
        ] {
            let tasks = encode(&i4, &i4, CodeChoice::new(scheme, 2), n).unwrap();
            let c = decode(&tasks, &tasks.compute_all()).unwrap();
            assert!(c.relative_error(&i4) < 1e-12, "{scheme}: {c:?}");
        }
    }

    #[test]
    fn three_worker_example_from_last_two() {
        let a = m(4, 4, 0.5);
        let b = m(4, 4, 2.5);
        let tasks = encode(&a, &b, CodeChoice::new(Scheme::Mds, 2), 3).unwrap();
        let all = tasks.compute_all();
        let c = decode(&tasks, &all[1..]).unwrap();
        assert!(c.relative_error(&a.t_matmul(&b).unwrap()) < 1e-12);
    }

    #[test]
    fn too_few_results() {
        let a = m(4, 4, 0.5);
        let tasks = encode(&a, &a, CodeChoice::new(Scheme::MatDot, 2), 5).unwrap();
        let all = tasks.compute_all();
        assert_eq!(
            decode(&tasks, &all[..2]).unwrap_err(),
            Error::NotEnoughResults { have: 2, need: 3 }
        );
        // duplicates do not count twice
        let dup = vec![all[0].clone(), all[0].clone(), all[1].clone()];
        assert!(matches!(decode(&tasks, &dup), Err(Error::NotEnoughResults { .. })));
    }

    #[test]
    fn wrong_result_shape_is_reported() {
        let a = m(4, 4, 0.5);
        let tasks = encode(&a, &a, CodeChoice::new(Scheme::Mds, 2), 3).unwrap();
        let bad = vec![(0, DenseMatrix::zeros(1, 1)), (1, DenseMatrix::zeros(2, 4))];
        assert!(matches!(decode(&tasks, &bad), Err(Error::Shape(_))));
    }

    #[test]
    fn wide_interpolation_is_ill_conditioned() {
        // degree-24 interpolation on points in (-1, 1) cannot be trusted
        let a = m(5, 5, 0.1);
        let tasks = encode(&a, &a, CodeChoice::new(Scheme::Polynomial, 5), 25).unwrap();
        assert!(matches!(
            decode(&tasks, &tasks.compute_all()),
            Err(Error::IllConditioned(c)) if c > 1e12
        ));
    }
}
