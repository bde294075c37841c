//! Adaptive code selection: per round, pick the `(scheme, p)` with the
//! smallest expected computing time among those meeting the storage and
//! success-probability limits. The search is exhaustive over `p ∈ 2..=N`
//! for every scheme.

use std::cmp::Ordering;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{analyze, AnalysisRow};
use crate::codes::{check_feasible, max_partitions, CodeChoice, Scheme};
use crate::delay::child_rng;
use crate::error::{Error, Result};
use crate::sim::simulate_round;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionConstraints {
    pub workers: usize,
    pub k_dim: usize,
    pub l_dim: usize,
    /// Probability that a worker survives the round (`φ`).
    pub survival_probability: f64,
    /// `None` means unconstrained.
    pub storage_master_limit: Option<f64>,
    pub storage_worker_limit: Option<f64>,
    /// Minimum success probability; `0` disables the constraint.
    pub success_threshold: f64,
}

impl SelectionConstraints {
    pub fn unconstrained(workers: usize, k_dim: usize, l_dim: usize, phi: f64) -> Self {
        Self {
            workers,
            k_dim,
            l_dim,
            survival_probability: phi,
            storage_master_limit: None,
            storage_worker_limit: None,
            success_threshold: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.workers < 2 {
            return Err(Error::Domain(format!("need at least 2 workers, got {}", self.workers)));
        }
        if self.k_dim == 0 || self.l_dim == 0 {
            return Err(Error::Domain("matrix dimensions must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.survival_probability) {
            return Err(Error::Domain("survival probability outside [0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.success_threshold) {
            return Err(Error::Domain("success threshold outside [0, 1]".into()));
        }
        for limit in [self.storage_master_limit, self.storage_worker_limit].into_iter().flatten() {
            if limit.is_nan() || limit <= 0.0 {
                return Err(Error::Domain(format!("storage limit must be positive, got {limit}")));
            }
        }
        Ok(())
    }

    /// The first constraint `row` violates, if any.
    pub fn violation(&self, row: &AnalysisRow) -> Option<Exclusion> {
        if let Some(limit) = self.storage_master_limit {
            if row.storage_master > limit {
                return Some(Exclusion::MasterStorage {
                    required: row.storage_master,
                    limit,
                });
            }
        }
        if let Some(limit) = self.storage_worker_limit {
            if row.storage_worker > limit {
                return Some(Exclusion::WorkerStorage {
                    required: row.storage_worker,
                    limit,
                });
            }
        }
        if row.success_probability < self.success_threshold {
            return Some(Exclusion::SuccessProbability {
                probability: row.success_probability,
                threshold: self.success_threshold,
            });
        }
        None
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Exclusion {
    Infeasible(String),
    MasterStorage { required: f64, limit: f64 },
    WorkerStorage { required: f64, limit: f64 },
    SuccessProbability { probability: f64, threshold: f64 },
}

impl fmt::Display for Exclusion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exclusion::Infeasible(reason) => write!(f, "infeasible: {reason}"),
            Exclusion::MasterStorage { required, limit } => {
                write!(f, "master storage {required:.4e} > {limit:.4e}")
            }
            Exclusion::WorkerStorage { required, limit } => {
                write!(f, "worker storage {required:.4e} > {limit:.4e}")
            }
            Exclusion::SuccessProbability {
                probability,
                threshold,
            } => write!(f, "success probability {probability:.4} < {threshold}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Enumeration {
    pub admitted: Vec<AnalysisRow>,
    pub excluded: Vec<(CodeChoice, Exclusion)>,
}

/// Selection order among equal-time candidates.
pub fn scheme_rank(scheme: Scheme) -> usize {
    match scheme {
        Scheme::Mds => 0,
        Scheme::Polynomial => 1,
        Scheme::MatDot => 2,
        Scheme::Product => 3,
        Scheme::Repetition => 4,
    }
}

/// Total order used by the selector: time, then worker storage, then
/// recovery threshold, then scheme rank, then `p`.
/// Times within a relative `1e-12` count as equal, so closed forms that
/// agree mathematically but round differently still reach the tie-break.
pub fn preference(a: &AnalysisRow, b: &AnalysisRow) -> Ordering {
    let (ta, tb) = (a.expected_time, b.expected_time);
    let time = if (ta - tb).abs() <= 1e-12 * ta.abs().max(tb.abs()) {
        Ordering::Equal
    } else {
        ta.total_cmp(&tb)
    };
    time
        .then(a.storage_worker.total_cmp(&b.storage_worker))
        .then(a.recovery_threshold.cmp(&b.recovery_threshold))
        .then(scheme_rank(a.choice.scheme).cmp(&scheme_rank(b.choice.scheme)))
        .then(a.choice.partitions.cmp(&b.choice.partitions))
}

/// Every `(scheme, p)` with `2 ≤ p ≤ N`, split into admitted rows and
/// exclusions with reasons.
pub fn enumerate_candidates(constraints: &SelectionConstraints, lambda: f64) -> Result<Enumeration> {
    constraints.validate()?;
    let n = constraints.workers;
    let mut out = Enumeration::default();
    for scheme in [Scheme::Mds, Scheme::Polynomial, Scheme::MatDot, Scheme::Product, Scheme::Repetition] {
        for p in 2..=n {
            let choice = CodeChoice::new(scheme, p);
            if let Err(e) = check_feasible(choice, n) {
                // beyond the structural maximum every p fails the same way
                if p <= max_partitions(scheme, n) {
                    out.excluded.push((choice, Exclusion::Infeasible(e.to_string())));
                }
                continue;
            }
            let row = analyze(
                choice,
                n,
                constraints.k_dim,
                constraints.l_dim,
                constraints.survival_probability,
                lambda,
            )?;
            match constraints.violation(&row) {
                Some(why) => out.excluded.push((choice, why)),
                None => out.admitted.push(row),
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub choice: CodeChoice,
    pub objective_time: f64,
    pub row: AnalysisRow,
    pub feasible_set_size: usize,
}

pub fn select(constraints: &SelectionConstraints, lambda: f64) -> Result<SelectionResult> {
    let enumeration = enumerate_candidates(constraints, lambda)?;
    let best = enumeration.admitted.iter().min_by(|a, b| preference(a, b));
    match best {
        Some(row) => Ok(SelectionResult {
            choice: row.choice,
            objective_time: row.expected_time,
            row: *row,
            feasible_set_size: enumeration.admitted.len(),
        }),
        None => {
            let reasons: Vec<String> = enumeration
                .excluded
                .iter()
                .map(|(c, why)| format!("{c}: {why}"))
                .collect();
            Err(Error::NoFeasibleCode(reasons.join("; ")))
        }
    }
}

/// Best admitted `p` for a single scheme, as a non-adaptive baseline.
pub fn best_for_scheme(
    constraints: &SelectionConstraints,
    scheme: Scheme,
    lambda: f64,
) -> Result<Option<AnalysisRow>> {
    let enumeration = enumerate_candidates(constraints, lambda)?;
    Ok(enumeration
        .admitted
        .into_iter()
        .filter(|r| r.choice.scheme == scheme)
        .min_by(preference))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub iteration: usize,
    pub lambda: f64,
    /// `Err` carries the no-feasible-code message for that round.
    pub selection: std::result::Result<SelectionResult, String>,
    pub simulated_completion: Option<f64>,
}

/// Runs `rounds` selection rounds. Round `r` draws `λ` uniformly from
/// `lambda_support` on child stream `r` of `master_seed` and, when
/// `simulate` is set, simulates the chosen code on the same stream.
pub fn run_iterations(
    constraints: &SelectionConstraints,
    lambda_support: &[f64],
    rounds: usize,
    master_seed: u64,
    simulate: bool,
) -> Result<Vec<IterationTrace>> {
    constraints.validate()?;
    if lambda_support.is_empty() || lambda_support.iter().any(|&l| !(l.is_finite() && l > 0.0)) {
        return Err(Error::Domain("λ support must be non-empty and positive".into()));
    }
    if rounds == 0 {
        return Err(Error::Domain("at least one round is required".into()));
    }
    let mut traces = Vec::with_capacity(rounds);
    for iteration in 0..rounds {
        let mut rng = child_rng(master_seed, iteration as u64);
        let lambda = lambda_support[rng.random_range(0..lambda_support.len())];
        let selection = select(constraints, lambda);
        let simulated_completion = match (&selection, simulate) {
            (Ok(sel), true) => simulate_round(
                sel.choice,
                constraints.workers,
                lambda,
                constraints.survival_probability,
                &mut rng,
            )?
            .completion_time,
            _ => None,
        };
        traces.push(IterationTrace {
            iteration,
            lambda,
            selection: selection.map_err(|e| e.to_string()),
            simulated_completion,
        });
    }
    Ok(traces)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::computing_time;
    use crate::codes::feasible;

    fn choices(e: &Enumeration, scheme: Scheme) -> Vec<usize> {
        e.admitted
            .iter()
            .filter(|r| r.choice.scheme == scheme)
            .map(|r| r.choice.partitions)
            .collect()
    }

    #[test]
    fn enumeration_at_nine_workers() {
        let c = SelectionConstraints::unconstrained(9, 12, 12, 0.95);
        let e = enumerate_candidates(&c, 1.0).unwrap();
        assert_eq!(choices(&e, Scheme::Product), vec![2, 3]);
        assert_eq!(choices(&e, Scheme::Polynomial), vec![2, 3]);
        assert_eq!(choices(&e, Scheme::MatDot), vec![2, 3, 4, 5]);
        assert_eq!(choices(&e, Scheme::Mds), (2..=9).collect::<Vec<_>>());
        assert_eq!(choices(&e, Scheme::Repetition), vec![3, 9]);
        assert!(e.excluded.iter().any(|(c, why)| *c == CodeChoice::new(Scheme::Repetition, 2)
            && matches!(why, Exclusion::Infeasible(_))));
    }

    #[test]
    fn enumeration_matches_brute_force_feasibility() {
        for n in 2..=20 {
            let c = SelectionConstraints::unconstrained(n, 12, 12, 0.9);
            let e = enumerate_candidates(&c, 2.0).unwrap();
            let mut oracle = Vec::new();
            for s in [Scheme::Mds, Scheme::Polynomial, Scheme::MatDot, Scheme::Product, Scheme::Repetition] {
                for p in 2..=n {
                    if feasible(CodeChoice::new(s, p), n) {
                        oracle.push(CodeChoice::new(s, p));
                    }
                }
            }
            let got: Vec<CodeChoice> = e.admitted.iter().map(|r| r.choice).collect();
            assert_eq!(got, oracle, "N={n}");
        }
    }

    #[test]
    fn reliability_constraint_leaves_small_k_mds() {
        let mut c = SelectionConstraints::unconstrained(6, 12, 12, 2.0 / 3.0);
        c.success_threshold = 0.95;
        let e = enumerate_candidates(&c, 1.0).unwrap();
        assert!(!e.admitted.is_empty());
        for r in &e.admitted {
            assert_eq!(r.choice.scheme, Scheme::Mds);
            assert!(r.recovery_threshold <= 2);
        }
    }

    #[test]
    fn fast_workers_square_n_picks_product() {
        let c = SelectionConstraints::unconstrained(9, 2000, 5000, 0.95);
        let sel = select(&c, 5.0).unwrap();
        assert_eq!(sel.choice.scheme, Scheme::Product);
        let sel = select(&SelectionConstraints::unconstrained(16, 2000, 5000, 0.95), 5.0).unwrap();
        assert_eq!(sel.choice, CodeChoice::new(Scheme::Product, 4));
    }

    #[test]
    fn optimality_against_independent_enumeration() {
        for n in 3..=20 {
            for lambda in [0.1, 1.0, 5.0] {
                let c = SelectionConstraints::unconstrained(n, 2000, 5000, 0.95);
                let sel = select(&c, lambda).unwrap();
                let mut best = f64::INFINITY;
                for s in Scheme::ALL {
                    for p in 2..=n {
                        if let Ok(t) = computing_time(CodeChoice::new(s, p), n, lambda) {
                            best = best.min(t);
                        }
                    }
                }
                assert!((sel.objective_time - best).abs() <= 1e-12 * best, "N={n} λ={lambda}");
                for s in Scheme::ALL {
                    if let Some(row) = best_for_scheme(&c, s, lambda).unwrap() {
                        assert!(sel.objective_time <= row.expected_time);
                    }
                }
            }
        }
    }

    #[test]
    fn tie_breaks() {
        let base = analyze(CodeChoice::new(Scheme::Mds, 3), 6, 10, 10, 0.9, 1.0).unwrap();
        let mut other = base;
        other.choice = CodeChoice::new(Scheme::Repetition, 3);
        assert_eq!(preference(&base, &other), Ordering::Less);
        other.expected_time = base.expected_time * (1.0 + 1e-14);
        assert_eq!(preference(&base, &other), Ordering::Less);
        other.recovery_threshold = base.recovery_threshold - 1;
        assert_eq!(preference(&base, &other), Ordering::Greater);
        other.storage_worker = base.storage_worker + 1.0;
        assert_eq!(preference(&base, &other), Ordering::Less);
        other.expected_time = base.expected_time * 0.99;
        assert_eq!(preference(&base, &other), Ordering::Greater);
    }

    #[test]
    fn small_cluster_selection() {
        // N = 3: MDS p = 2, 3, MatDot p = 2 and repetition p = 3
        let mut c = SelectionConstraints::unconstrained(3, 10, 10, 0.9);
        let e = enumerate_candidates(&c, 1.0).unwrap();
        assert_eq!(e.admitted.len(), 4);
        // repetition's ln p beats the harmonic sum at p = N
        assert_eq!(select(&c, 1.0).unwrap().choice, CodeChoice::new(Scheme::Repetition, 3));
        c.success_threshold = 0.95;
        let sel = select(&c, 1.0).unwrap();
        assert_eq!(sel.feasible_set_size, 1);
        assert_eq!(sel.choice, CodeChoice::new(Scheme::Mds, 2));
    }

    #[test]
    fn no_feasible_code_lists_reasons() {
        let mut c = SelectionConstraints::unconstrained(6, 100, 100, 0.9);
        c.storage_worker_limit = Some(1.0);
        match select(&c, 1.0) {
            Err(Error::NoFeasibleCode(msg)) => {
                assert!(msg.contains("worker storage"));
                assert!(msg.contains("repetition(p=4): infeasible"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn returned_choice_meets_every_constraint() {
        let support = [0.5, 1.0, 2.0];
        for n in 4..=16 {
            let c = SelectionConstraints {
                workers: n,
                k_dim: 2000,
                l_dim: 5000,
                survival_probability: 0.9,
                storage_master_limit: Some(8e7),
                storage_worker_limit: Some(1.5e7),
                success_threshold: 0.9,
            };
            for &lambda in &support {
                if let Ok(sel) = select(&c, lambda) {
                    assert!(feasible(sel.choice, n));
                    assert!(sel.row.storage_master <= 8e7);
                    assert!(sel.row.storage_worker <= 1.5e7);
                    assert!(sel.row.success_probability >= 0.9);
                    assert!(sel.choice.partitions >= 2);
                }
            }
        }
    }

    #[test]
    fn iterations_are_deterministic() {
        let c = SelectionConstraints::unconstrained(9, 2000, 5000, 0.95);
        let support: Vec<f64> = (2..=10).map(f64::from).collect();
        let a = run_iterations(&c, &support, 50, 7, true).unwrap();
        let b = run_iterations(&c, &support, 50, 7, true).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|t| support.contains(&t.lambda)));
        let product = a
            .iter()
            .filter(|t| t.selection.as_ref().unwrap().choice.scheme == Scheme::Product)
            .count();
        assert_eq!(product, 50);
        let one = run_iterations(&c, &[3.0], 1, 0, false).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].lambda, 3.0);
        assert_eq!(one[0].simulated_completion, None);
        assert!(run_iterations(&c, &[], 1, 0, false).is_err());
    }
}
