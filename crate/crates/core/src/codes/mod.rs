//! The five coding schemes for distributed `C = AᵀB`: repetition, MDS,
//! polynomial, MatDot and product codes.
//!
//! Worker indices are 0-based throughout. Every worker computes
//! `leftᵀ · right` on its payload; the schemes differ in how the operands are
//! partitioned and combined, and in how the master decodes.

mod decode;
mod encode;
mod partition;
mod peeling;
mod systematic;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use decode::decode;
pub use encode::{encode, evaluation_points, CodedTaskSet, Layout, WorkerPayload};
pub use partition::{partition_columnwise, partition_rowwise};
pub use peeling::{peel_grid, DecodeTracker};
pub use systematic::SystematicCode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Repetition,
    Mds,
    Polynomial,
    MatDot,
    Product,
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [
        Scheme::Repetition,
        Scheme::Mds,
        Scheme::Polynomial,
        Scheme::MatDot,
        Scheme::Product,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Repetition => "repetition",
            Scheme::Mds => "mds",
            Scheme::Polynomial => "polynomial",
            Scheme::MatDot => "matdot",
            Scheme::Product => "product",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "repetition" | "rep" => Ok(Scheme::Repetition),
            "mds" => Ok(Scheme::Mds),
            "polynomial" | "poly" => Ok(Scheme::Polynomial),
            "matdot" => Ok(Scheme::MatDot),
            "product" | "pro" => Ok(Scheme::Product),
            other => Err(Error::Domain(format!("unknown scheme `{other}`"))),
        }
    }
}

/// A scheme together with its partition count `p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CodeChoice {
    pub scheme: Scheme,
    pub partitions: usize,
}

impl CodeChoice {
    pub const fn new(scheme: Scheme, partitions: usize) -> Self {
        Self { scheme, partitions }
    }

    /// Scale parameter of the per-worker delay: the sub-task is `1/α` of the
    /// full multiplication.
    pub fn scale(&self) -> f64 {
        let p = self.partitions as f64;
        match self.scheme {
            Scheme::Repetition | Scheme::Mds | Scheme::MatDot => p,
            Scheme::Polynomial | Scheme::Product => p * p,
        }
    }
}

impl fmt::Display for CodeChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(p={})", self.scheme, self.partitions)
    }
}

pub fn isqrt(n: usize) -> usize {
    let mut r = (n as f64).sqrt() as usize;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

/// Number of workers that actually receive a task. Product codes only use
/// the largest square grid that fits.
pub fn workers_used(choice: CodeChoice, workers: usize) -> usize {
    match choice.scheme {
        Scheme::Product => {
            let side = isqrt(workers);
            side * side
        }
        _ => workers,
    }
}

fn threshold_unchecked(choice: CodeChoice, workers: usize) -> usize {
    let p = choice.partitions;
    match choice.scheme {
        Scheme::Repetition => workers - workers / p + 1,
        Scheme::Mds => p,
        Scheme::Polynomial => p * p,
        Scheme::MatDot => 2 * p - 1,
        Scheme::Product => {
            let side = isqrt(workers);
            // 2(p-1)s - (p-1)^2 + 1, non-negative whenever p <= s
            2 * (p - 1) * side + 1 - (p - 1) * (p - 1)
        }
    }
}

/// Checks every structural constraint on `(choice, N)`, naming the first one
/// that fails.
pub fn check_feasible(choice: CodeChoice, workers: usize) -> Result<()> {
    let p = choice.partitions;
    let fail = |reason: String| {
        Err(Error::Infeasible {
            choice,
            workers,
            reason,
        })
    };
    if workers == 0 {
        return fail("no workers".into());
    }
    if p < 2 {
        return fail(format!("p = {p} < 2"));
    }
    match choice.scheme {
        Scheme::Repetition if !workers.is_multiple_of(p) => {
            return fail(format!("p = {p} does not divide N = {workers}"))
        }
        Scheme::Mds if p > workers => return fail(format!("p = {p} > N = {workers}")),
        Scheme::Polynomial if p * p > workers => {
            return fail(format!("p^2 = {} > N = {workers}", p * p))
        }
        Scheme::MatDot if 2 * p - 1 > workers => {
            return fail(format!("2p-1 = {} > N = {workers}", 2 * p - 1))
        }
        Scheme::Product if p > isqrt(workers) => {
            return fail(format!("p = {p} > floor(sqrt(N)) = {}", isqrt(workers)))
        }
        _ => {}
    }
    let k = threshold_unchecked(choice, workers);
    let used = workers_used(choice, workers);
    if k > used {
        return fail(format!("recovery threshold {k} > {used} workers"));
    }
    Ok(())
}

pub fn feasible(choice: CodeChoice, workers: usize) -> bool {
    check_feasible(choice, workers).is_ok()
}

/// Worst-case number of results the master must collect.
pub fn recovery_threshold(choice: CodeChoice, workers: usize) -> Result<usize> {
    check_feasible(choice, workers)?;
    Ok(threshold_unchecked(choice, workers))
}

/// Largest partition count worth trying for `scheme` at `N` workers.
pub fn max_partitions(scheme: Scheme, workers: usize) -> usize {
    match scheme {
        Scheme::Repetition | Scheme::Mds => workers,
        Scheme::Polynomial | Scheme::Product => isqrt(workers),
        Scheme::MatDot => workers.div_ceil(2),
    }
}

/// The set of workers whose results have arrived.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CompletionPattern {
    completed: BTreeSet<usize>,
}

impl CompletionPattern {
    pub fn new(indices: impl IntoIterator<Item = usize>, workers: usize) -> Result<Self> {
        let completed: BTreeSet<usize> = indices.into_iter().collect();
        if let Some(&bad) = completed.iter().find(|&&i| i >= workers) {
            return Err(Error::Domain(format!(
                "worker index {bad} out of range for {workers} workers"
            )));
        }
        Ok(Self { completed })
    }

    pub fn len(&self) -> usize {
        self.completed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.completed.is_empty()
    }

    pub fn contains(&self, worker: usize) -> bool {
        self.completed.contains(&worker)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.completed.iter().copied()
    }
}

/// Whether the master can recover `AᵀB` from the completed workers.
///
/// Indices at or beyond the number of workers that hold a task (the idle
/// workers of a non-square product grid) are ignored.
pub fn decodable(choice: CodeChoice, workers: usize, pattern: &CompletionPattern) -> Result<bool> {
    let mut tracker = DecodeTracker::new(choice, workers)?;
    Ok(pattern.iter().any(|w| tracker.complete(w)) || tracker.is_decodable())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(scheme: Scheme, p: usize) -> CodeChoice {
        CodeChoice::new(scheme, p)
    }

    #[test]
    fn thresholds_for_two_partitions() {
        assert_eq!(recovery_threshold(c(Scheme::Product, 2), 9).unwrap(), 6);
        for n in 4..=12 {
            assert_eq!(recovery_threshold(c(Scheme::Polynomial, 2), n).unwrap(), 4);
            assert_eq!(recovery_threshold(c(Scheme::MatDot, 2), n).unwrap(), 3);
            assert_eq!(recovery_threshold(c(Scheme::Mds, 2), n).unwrap(), 2);
        }
        assert_eq!(recovery_threshold(c(Scheme::Repetition, 2), 6).unwrap(), 4);
        for n in [6usize, 8, 10] {
            assert_eq!(
                recovery_threshold(c(Scheme::Repetition, 2), n).unwrap(),
                n / 2 + 1
            );
        }
    }

    #[test]
    fn feasibility_rules() {
        // floor(sqrt(8)) = 2: a 2x2 grid, k = 4 <= 4
        assert!(feasible(c(Scheme::Product, 2), 8));
        assert_eq!(recovery_threshold(c(Scheme::Product, 2), 8).unwrap(), 4);
        assert_eq!(workers_used(c(Scheme::Product, 2), 8), 4);
        assert!(!feasible(c(Scheme::Repetition, 2), 7));
        assert!(!feasible(c(Scheme::Polynomial, 3), 8));
        assert!(feasible(c(Scheme::Polynomial, 3), 9));
        assert!(!feasible(c(Scheme::Mds, 1), 9));
        assert!(!feasible(c(Scheme::MatDot, 3), 4));
        assert!(feasible(c(Scheme::MatDot, 3), 5));
        assert!(feasible(c(Scheme::Product, 3), 9));
        assert!(!feasible(c(Scheme::Product, 4), 15));
        let err = check_feasible(c(Scheme::Polynomial, 3), 8).unwrap_err();
        assert!(err.to_string().contains("p^2 = 9 > N = 8"), "{err}");
    }

    #[test]
    fn threshold_consistency_exhaustive() {
        for n in 1..=10usize {
            for scheme in [Scheme::Mds, Scheme::Polynomial, Scheme::MatDot] {
                for p in 2..=n {
                    let choice = c(scheme, p);
                    let Ok(k) = recovery_threshold(choice, n) else {
                        continue;
                    };
                    for mask in 0u32..(1 << n) {
                        let pattern =
                            CompletionPattern::new((0..n).filter(|i| mask >> i & 1 == 1), n)
                                .unwrap();
                        let ok = decodable(choice, n, &pattern).unwrap();
                        assert_eq!(ok, pattern.len() >= k, "{choice} N={n} mask={mask:b}");
                    }
                }
            }
        }
    }

    #[test]
    fn example_decodability() {
        let mds = c(Scheme::Mds, 2);
        assert!(decodable(mds, 3, &CompletionPattern::new([0, 2], 3).unwrap()).unwrap());
        // repetition, N = 6: workers 0..3 hold block 0, so only block 0 arrived
        let rep = c(Scheme::Repetition, 2);
        let only_first = CompletionPattern::new([0, 1, 2], 6).unwrap();
        assert!(!decodable(rep, 6, &only_first).unwrap());
        let both = CompletionPattern::new([2, 3], 6).unwrap();
        assert!(decodable(rep, 6, &both).unwrap());
        assert!(CompletionPattern::new([6], 6).is_err());
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in Scheme::ALL {
            assert_eq!(s.name().parse::<Scheme>().unwrap(), s);
        }
        assert!("ldpc".parse::<Scheme>().is_err());
    }
}
