use codedmm::analysis::{analyze, computing_time, success_probability};
use codedmm::codes::{decodable, decode, encode, feasible, recovery_threshold, CodeChoice, CompletionPattern, Scheme};
use codedmm::delay::{child_rng, expected_kth_order_statistic, DelayModel};
use codedmm::selector::{enumerate_candidates, select, SelectionConstraints};
use codedmm::sim::{run_experiment, simulate_round, WorkerState};
use codedmm::DenseMatrix;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn scheme_strategy() -> impl Strategy<Value = Scheme> {
    prop::sample::select(Scheme::ALL.to_vec())
}

/// A feasible `(choice, N)` with `N ≤ 16`.
fn feasible_code() -> impl Strategy<Value = (CodeChoice, usize)> {
    (scheme_strategy(), 2usize..=4, 2usize..=16)
        .prop_map(|(s, p, n)| (CodeChoice::new(s, p), n))
        .prop_filter("feasible", |(c, n)| feasible(*c, *n))
}

fn pattern(mask: u32, n: usize) -> CompletionPattern {
    CompletionPattern::new((0..n).filter(|w| mask >> w & 1 == 1), n).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    /// Adding a finished worker never turns a decodable set undecodable.
    #[test]
    fn decodability_is_monotone((choice, n) in feasible_code(), mask in any::<u32>(), extra in 0usize..16) {
        let mask = mask & ((1u32 << n) - 1);
        let before = decodable(choice, n, &pattern(mask, n)).unwrap();
        let after = decodable(choice, n, &pattern(mask | 1 << (extra % n), n)).unwrap();
        prop_assert!(!before || after);
    }

    /// Every set of `k` or more distinct workers decodes, for every scheme.
    #[test]
    fn threshold_sets_decode((choice, n) in feasible_code(), seed in any::<u64>()) {
        let k = recovery_threshold(choice, n).unwrap();
        let used = match choice.scheme {
            Scheme::Product => codedmm::codes::isqrt(n).pow(2),
            _ => n,
        };
        let mut order: Vec<usize> = (0..used).collect();
        order.shuffle(&mut child_rng(seed, 0));
        let chosen = CompletionPattern::new(order[..k.min(used)].iter().copied(), n).unwrap();
        prop_assert!(decodable(choice, n, &chosen).unwrap());
    }

    /// Decoding from a random decodable subset recovers AᵀB.
    #[test]
    fn round_trip_from_random_subset((choice, n) in feasible_code(), seed in any::<u64>()) {
        prop_assume!(choice.partitions <= 3);
        let mut rng = child_rng(seed, 1);
        let p = choice.partitions;
        let dims = match choice.scheme {
            Scheme::Repetition | Scheme::Mds => (p * 2, 3, 4),
            Scheme::Polynomial | Scheme::Product => (p * 2, p, 3),
            Scheme::MatDot => (3, 2, p * 2),
        };
        let (ka, kb, l) = dims;
        let a = DenseMatrix::from_fn(l, ka, |_, _| rng.random_range(-1.0..1.0));
        let b = DenseMatrix::from_fn(l, kb, |_, _| rng.random_range(-1.0..1.0));
        let tasks = encode(&a, &b, choice, n).unwrap();
        let all = tasks.compute_all();
        let mut order: Vec<usize> = (0..all.len()).collect();
        order.shuffle(&mut rng);
        let mut taken = Vec::new();
        for w in order {
            taken.push(all[w].clone());
            let pat = CompletionPattern::new(taken.iter().map(|(i, _)| *i), n).unwrap();
            if decodable(choice, n, &pat).unwrap() {
                break;
            }
        }
        let c = decode(&tasks, &taken).unwrap();
        let direct = DenseMatrix::from_fn(ka, kb, |i, j| (0..l).map(|t| a[(t, i)] * b[(t, j)]).sum());
        prop_assert!(c.relative_error(&direct) < 1e-8);
    }

    /// ρ falls as the threshold rises and rises with φ.
    #[test]
    fn success_probability_monotone(n in 2usize..40, k_raw in 0usize..40, phi in 0.05f64..0.95) {
        let k = 1 + k_raw % (n - 1);
        let here = success_probability(k, n, phi).unwrap();
        prop_assert!((0.0..=1.0).contains(&here));
        prop_assert!(success_probability(k + 1, n, phi).unwrap() <= here + 1e-12);
        prop_assert!(success_probability(k, n, phi + 0.04).unwrap() >= here - 1e-12);
    }

    /// The expected k-th order statistic matches the Rényi sum
    /// a + (b/λ) Σ_{i=1}^{k} 1/(n − i + 1).
    #[test]
    fn order_statistic_matches_renyi_sum(n in 1usize..60, k in 1usize..60, lambda in 0.01f64..20.0, shift in 0.0f64..3.0, scale in 0.1f64..3.0) {
        prop_assume!(k <= n);
        let model = DelayModel::new(lambda, shift, scale).unwrap();
        let renyi = shift + scale / lambda * (1..=k).map(|i| 1.0 / (n - i + 1) as f64).sum::<f64>();
        let got = expected_kth_order_statistic(&model, n, k).unwrap();
        prop_assert!((got - renyi).abs() <= 1e-12 * renyi.max(1.0));
    }

    /// The selector's objective is the minimum over admitted rows, and the
    /// chosen row satisfies every constraint.
    #[test]
    fn selector_optimal_and_admissible(
        n in 3usize..25,
        lambda in 0.05f64..10.0,
        phi in 0.6f64..1.0,
        rho in 0.0f64..0.99,
        worker_cap in prop::option::of(5e6f64..2e7),
    ) {
        let c = SelectionConstraints {
            workers: n,
            k_dim: 2000,
            l_dim: 5000,
            survival_probability: phi,
            storage_master_limit: None,
            storage_worker_limit: worker_cap,
            success_threshold: rho,
        };
        let e = enumerate_candidates(&c, lambda).unwrap();
        match select(&c, lambda) {
            Ok(sel) => {
                let best = e.admitted.iter().map(|r| r.expected_time).fold(f64::INFINITY, f64::min);
                prop_assert!((sel.objective_time - best).abs() <= 1e-12 * best);
                prop_assert_eq!(sel.feasible_set_size, e.admitted.len());
                let row = analyze(sel.choice, n, 2000, 5000, phi, lambda).unwrap();
                prop_assert!(row.success_probability >= rho);
                if let Some(cap) = worker_cap {
                    prop_assert!(row.storage_worker <= cap);
                }
                prop_assert!((computing_time(sel.choice, n, lambda).unwrap() - sel.objective_time).abs() == 0.0);
            }
            Err(_) => prop_assert!(e.admitted.is_empty()),
        }
    }

    /// A round's completion time is the arrival that first made the result
    /// decodable: the finished set just before it does not decode.
    #[test]
    fn completion_is_first_decodable_arrival((choice, n) in feasible_code(), seed in any::<u64>(), phi in 0.5f64..1.0) {
        let mut rng = child_rng(seed, 2);
        let outcome = simulate_round(choice, n, 1.0, phi, &mut rng).unwrap();
        if let Some(t) = outcome.completion_time {
            let before: Vec<usize> = outcome
                .per_worker
                .iter()
                .enumerate()
                .filter_map(|(w, s)| matches!(s, WorkerState::Finished(d) if *d < t).then_some(w))
                .collect();
            let at: Vec<usize> = outcome
                .per_worker
                .iter()
                .enumerate()
                .filter_map(|(w, s)| matches!(s, WorkerState::Finished(d) if *d <= t).then_some(w))
                .collect();
            prop_assert!(!decodable(choice, n, &CompletionPattern::new(before, n).unwrap()).unwrap());
            prop_assert!(decodable(choice, n, &CompletionPattern::new(at, n).unwrap()).unwrap());
        }
    }
}

#[test]
fn experiment_is_reproducible_and_seed_sensitive() {
    let c = CodeChoice::new(Scheme::Polynomial, 2);
    let a = run_experiment(c, 7, 2.0, 0.9, 3000, 42).unwrap();
    let b = run_experiment(c, 7, 2.0, 0.9, 3000, 42).unwrap();
    let other = run_experiment(c, 7, 2.0, 0.9, 3000, 43).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.mean_completion, other.mean_completion);
}

#[test]
fn single_trial_matches_single_round() {
    let c = CodeChoice::new(Scheme::MatDot, 3);
    let stats = run_experiment(c, 8, 1.0, 0.8, 1, 9).unwrap();
    let round = simulate_round(c, 8, 1.0, 0.8, &mut child_rng(9, 0)).unwrap();
    assert_eq!(stats.mean_completion, round.completion_time);
    assert_eq!(stats.p50, round.completion_time);
}
