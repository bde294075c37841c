use super::{check_feasible, isqrt, threshold_unchecked, CodeChoice, Scheme};
use crate::error::Result;

/// Iterative row/column peeling on a `side x side` grid of known cells.
///
/// A row or column holding at least `p` known cells becomes fully known.
/// Rows are swept in ascending order, then columns, until nothing changes.
/// Returns `true` iff the whole grid ends up known.
pub fn peel_grid(known: &mut [bool], side: usize, p: usize) -> bool {
    assert_eq!(known.len(), side * side);
    loop {
        let mut changed = false;
        for i in 0..side {
            let row = &mut known[i * side..(i + 1) * side];
            let count = row.iter().filter(|&&k| k).count();
            if count >= p && count < side {
                row.iter_mut().for_each(|k| *k = true);
                changed = true;
            }
        }
        for j in 0..side {
            let count = (0..side).filter(|&i| known[i * side + j]).count();
            if count >= p && count < side {
                for i in 0..side {
                    known[i * side + j] = true;
                }
                changed = true;
            }
        }
        if !changed {
            return known.iter().all(|&k| k);
        }
    }
}

/// Incremental decodability check: feed completed workers one at a time and
/// learn when the master first has enough to decode.
#[derive(Debug, Clone)]
pub struct DecodeTracker {
    choice: CodeChoice,
    threshold: usize,
    arrived: Vec<bool>,
    count: usize,
    state: TrackerState,
    decodable: bool,
}

#[derive(Debug, Clone)]
enum TrackerState {
    Threshold,
    Replicas { per_block: usize, covered: Vec<bool>, remaining: usize },
    Grid { side: usize },
}

impl DecodeTracker {
    pub fn new(choice: CodeChoice, workers: usize) -> Result<Self> {
        check_feasible(choice, workers)?;
        let p = choice.partitions;
        let (used, state) = match choice.scheme {
            Scheme::Repetition => (
                workers,
                TrackerState::Replicas {
                    per_block: workers / p,
                    covered: vec![false; p],
                    remaining: p,
                },
            ),
            Scheme::Product => {
                let side = isqrt(workers);
                (
                    side * side,
                    TrackerState::Grid { side },
                )
            }
            _ => (workers, TrackerState::Threshold),
        };
        Ok(Self {
            choice,
            threshold: threshold_unchecked(choice, workers),
            arrived: vec![false; used],
            count: 0,
            state,
            decodable: false,
        })
    }

    pub fn is_decodable(&self) -> bool {
        self.decodable
    }

    pub fn arrived(&self) -> usize {
        self.count
    }

    /// Records worker `w` as complete; returns whether the set is now
    /// decodable. Duplicate and idle-worker indices are ignored.
    pub fn complete(&mut self, w: usize) -> bool {
        if self.decodable || w >= self.arrived.len() || self.arrived[w] {
            return self.decodable;
        }
        self.arrived[w] = true;
        self.count += 1;
        self.decodable = match &mut self.state {
            TrackerState::Threshold => self.count >= self.threshold,
            TrackerState::Replicas {
                per_block,
                covered,
                remaining,
            } => {
                let block = w / *per_block;
                if !covered[block] {
                    covered[block] = true;
                    *remaining -= 1;
                }
                *remaining == 0
            }
            TrackerState::Grid { side } => {
                // peeling can succeed below the worst-case threshold
                let mut scratch = self.arrived.clone();
                peel_grid(&mut scratch, *side, self.choice.partitions)
            }
        };
        self.decodable
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codes::{decodable, CompletionPattern};

    fn grid(cells: &[(usize, usize)], side: usize) -> Vec<bool> {
        let mut g = vec![false; side * side];
        for &(i, j) in cells {
            g[i * side + j] = true;
        }
        g
    }

    #[test]
    fn full_row_plus_one_per_row() {
        // row 0 complete, one extra cell in each of rows 1 and 2
        let mut g = grid(&[(0, 0), (0, 1), (0, 2), (1, 0), (2, 1), (1, 2)], 3);
        assert!(peel_grid(&mut g, 3, 2));
    }

    #[test]
    fn erased_square_is_a_stopping_set() {
        // 2x2 block of erasures in a 3x3 grid with p = 2
        let mut g = vec![true; 9];
        for (i, j) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            g[i * 3 + j] = false;
        }
        assert!(!peel_grid(&mut g, 3, 2));
        assert_eq!(g.iter().filter(|&&k| k).count(), 5);
    }

    /// Stopping-set oracle: the erased set cannot be peeled iff it contains a
    /// non-empty subset in which every occupied row and column has more than
    /// `side - p` erasures. Brute force over all subsets of the erasures.
    fn has_stopping_set(known: &[bool], side: usize, p: usize) -> bool {
        let erased: Vec<usize> = (0..side * side).filter(|&c| !known[c]).collect();
        let m = erased.len();
        (1u32..(1 << m)).any(|mask| {
            let cells: Vec<usize> = (0..m).filter(|b| mask >> b & 1 == 1).map(|b| erased[b]).collect();
            let mut rows = vec![0usize; side];
            let mut cols = vec![0usize; side];
            for &c in &cells {
                rows[c / side] += 1;
                cols[c % side] += 1;
            }
            rows.iter().chain(&cols).all(|&n| n == 0 || n > side - p)
        })
    }

    #[test]
    fn peeling_matches_stopping_set_oracle() {
        for (side, p) in [(3usize, 2usize), (3, 3), (4, 2), (4, 3)] {
            let cells = side * side;
            for mask in 0u32..(1 << cells) {
                // keep the subset oracle cheap on the 4x4 grids
                if cells - mask.count_ones() as usize > 8 {
                    continue;
                }
                let known: Vec<bool> = (0..cells).map(|c| mask >> c & 1 == 1).collect();
                let mut g = known.clone();
                assert_eq!(
                    peel_grid(&mut g, side, p),
                    !has_stopping_set(&known, side, p),
                    "side={side} p={p} mask={mask:b}"
                );
            }
        }
    }

    #[test]
    fn tracker_agrees_with_batch_predicate() {
        let choice = CodeChoice::new(Scheme::Product, 2);
        let mut t = DecodeTracker::new(choice, 10).unwrap();
        // worker 9 is idle on the 3x3 grid
        assert!(!t.complete(9));
        assert_eq!(t.arrived(), 0);
        for w in [0, 1, 2, 3] {
            assert!(!t.complete(w));
        }
        assert!(t.complete(7));
        let pattern = CompletionPattern::new([0, 1, 2, 3, 7], 10).unwrap();
        assert!(decodable(choice, 10, &pattern).unwrap());
    }
}
