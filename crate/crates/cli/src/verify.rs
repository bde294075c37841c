//! Self-checks runnable from the command line: decode round trips, the
//! product-code decodability census, analytic-vs-simulated agreement and
//! determinism. Each check reports what it measured against a pinned
//! tolerance. Monte Carlo checks run with fewer than
//! [`FULL_CONFIDENCE_TRIALS`] trials widen their tolerance to the sampling
//! error and become non-fatal.

use anyhow::Result;
use codedmm::analysis::{code_success_probability, computing_load, storage_worker};
use codedmm::codes::{decode, encode, feasible, recovery_threshold, CodeChoice, CompletionPattern, DecodeTracker, Scheme};
use codedmm::delay::child_rng;
use codedmm::sim::run_experiment;
use codedmm::DenseMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use crate::config::{ExperimentConfig, Preset};
use crate::sweep::{dominance_violation, run_sweep};

pub const FULL_CONFIDENCE_TRIALS: usize = 100_000;
pub const DECODE_TOLERANCE: f64 = 1e-6;
pub const ORDER_STATISTIC_TOLERANCE: f64 = 0.01;
pub const LOG_APPROXIMATION_TOLERANCE: f64 = 0.10;
pub const DOMINANCE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub passed: bool,
    /// A failing fatal check makes `verify` exit non-zero.
    pub fatal: bool,
    pub measured: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl CheckReport {
    fn new(name: &str, measured: f64, tolerance: f64, fatal: bool, detail: String) -> Self {
        Self {
            name: name.to_string(),
            passed: measured <= tolerance,
            fatal,
            measured,
            tolerance,
            detail,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub trials: usize,
    pub seed: u64,
    pub checks: Vec<CheckReport>,
    pub fatal_failures: usize,
}

pub fn run_verify(config: &ExperimentConfig) -> Result<VerifyReport> {
    config.validate()?;
    let (trials, seed) = (config.trials, config.seed);
    let checks = vec![
        check_table_structure()?,
        check_decode_round_trips(200, seed)?,
        check_product_census()?,
        check_order_statistics(trials, seed)?,
        check_log_approximation(),
        check_failure_model(trials, seed)?,
        check_selector_dominance()?,
        check_parallel_determinism(trials.min(20_000), seed)?,
    ];
    let fatal_failures = checks.iter().filter(|c| c.fatal && !c.passed).count();
    Ok(VerifyReport {
        trials,
        seed,
        checks,
        fatal_failures,
    })
}

fn harmonic_tail(n: usize, k: usize) -> f64 {
    // H_n − H_{n−k}, summed directly over the k largest terms
    (n - k + 1..=n).map(|i| 1.0 / i as f64).sum()
}

/// Recovery threshold, per-worker load and worker storage at `p = 2` against
/// their closed forms in `K` (with `L = K`).
pub fn check_table_structure() -> Result<CheckReport> {
    let kd = 1000usize;
    let kf = kd as f64;
    let mut mismatches = Vec::new();
    for n in 6..=9usize {
        let expected = [
            (Scheme::Product, 6, kf.powi(3) / 4.0, kf * kf + kf * kf / 4.0),
            (Scheme::Polynomial, 4, kf.powi(3) / 4.0, kf * kf + kf * kf / 4.0),
            (Scheme::MatDot, 3, kf.powi(3) / 2.0, 2.0 * kf * kf),
            (Scheme::Mds, 2, kf.powi(3) / 2.0, 2.0 * kf * kf),
            (Scheme::Repetition, n / 2 + 1, kf.powi(3) / 2.0, 2.0 * kf * kf),
        ];
        for (scheme, k, gamma, mu_worker) in expected {
            let choice = CodeChoice::new(scheme, 2);
            if !feasible(choice, n) {
                continue;
            }
            let got_k = recovery_threshold(choice, n)?;
            // the product threshold lives on the 3×3 grid, reached at N = 9
            if scheme == Scheme::Product && n < 9 {
                continue;
            }
            if got_k != k
                || computing_load(choice, kd, kd) != gamma
                || storage_worker(choice, kd, kd) != mu_worker
            {
                mismatches.push(format!("{scheme} N={n}"));
            }
        }
    }
    Ok(CheckReport::new(
        "table_structure",
        mismatches.len() as f64,
        0.0,
        true,
        if mismatches.is_empty() {
            "k, gamma and mu_worker match their closed forms".into()
        } else {
            mismatches.join(", ")
        },
    ))
}

fn random_matrix<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

/// Smallest prefix of `order` that decodes.
fn minimal_prefix(choice: CodeChoice, workers: usize, order: &[usize]) -> Result<Vec<usize>> {
    let mut tracker = DecodeTracker::new(choice, workers)?;
    let mut taken = Vec::new();
    for &w in order {
        taken.push(w);
        if tracker.complete(w) {
            return Ok(taken);
        }
    }
    anyhow::bail!("{choice} never decodes with N = {workers}")
}

/// Worker counts that exercise each scheme at `p`.
fn worker_range(scheme: Scheme, p: usize) -> Vec<usize> {
    let range: Vec<usize> = match scheme {
        Scheme::Repetition => (2..=3).map(|c| c * p).collect(),
        Scheme::Mds => (p + 1..=p + 4).collect(),
        Scheme::Polynomial => (p * p..=p * p + 3).collect(),
        Scheme::MatDot => (2 * p - 1..=2 * p + 3).collect(),
        Scheme::Product => (p * p..(p + 2) * (p + 2)).collect(),
    };
    range.into_iter().filter(|&n| feasible(CodeChoice::new(scheme, p), n)).collect()
}

/// Round trips with random shapes (every dimension ≤ 8) and minimal
/// decodable completion sets. Every fourth trial uses the adversarial
/// order (last workers first: all-parity or extreme evaluation points).
pub fn check_decode_round_trips(trials_per_scheme: usize, seed: u64) -> Result<CheckReport> {
    let mut worst: f64 = 0.0;
    let mut worst_case = String::new();
    for (s, scheme) in Scheme::ALL.into_iter().enumerate() {
        for t in 0..trials_per_scheme {
            let mut rng = child_rng(seed, (s * trials_per_scheme + t) as u64);
            let p = rng.random_range(2..=3usize);
            let choice = CodeChoice::new(scheme, p);
            let ns = worker_range(scheme, p);
            let n = ns[rng.random_range(0..ns.len())];
            let ka = p * rng.random_range(1..=8 / p);
            let kb = match scheme {
                Scheme::Polynomial | Scheme::Product => p * rng.random_range(1..=8 / p),
                _ => rng.random_range(1..=8usize),
            };
            let l = match scheme {
                Scheme::MatDot => p * rng.random_range(1..=8 / p),
                _ => rng.random_range(1..=8usize),
            };
            let a = random_matrix(l, ka, &mut rng);
            let b = random_matrix(l, kb, &mut rng);
            let tasks = encode(&a, &b, choice, n)?;
            let mut order: Vec<usize> = (0..tasks.payloads.len()).collect();
            if t % 4 == 0 {
                order.reverse();
            } else {
                order.shuffle(&mut rng);
            }
            let chosen = minimal_prefix(choice, n, &order)?;
            let all = tasks.compute_all();
            let results: Vec<(usize, DenseMatrix)> = chosen.iter().map(|&w| all[w].clone()).collect();
            let c = decode(&tasks, &results)?;
            let err = c.relative_error(&a.t_matmul(&b)?);
            if err.is_nan() || err > worst {
                worst = err;
                worst_case = format!("{choice} N={n} A={l}x{ka} B={l}x{kb} workers={chosen:?}");
            }
        }
    }
    Ok(CheckReport::new(
        "decode_round_trip",
        worst,
        DECODE_TOLERANCE,
        true,
        format!("{} trials per scheme; worst: {worst_case}", trials_per_scheme),
    ))
}

/// All 2⁹ completion patterns of the 3×3 product grid with `p = 2`: every
/// pattern of 6 or more workers decodes and some pattern of 5 does not.
pub fn check_product_census() -> Result<CheckReport> {
    let choice = CodeChoice::new(Scheme::Product, 2);
    let mut undecodable_large = 0usize;
    let mut undecodable_five = 0usize;
    for mask in 0u32..(1 << 9) {
        let pattern = CompletionPattern::new((0..9).filter(|w| mask >> w & 1 == 1), 9)?;
        let ok = codedmm::codes::decodable(choice, 9, &pattern)?;
        match pattern.len() {
            6.. if !ok => undecodable_large += 1,
            5 if !ok => undecodable_five += 1,
            _ => {}
        }
    }
    let violations = undecodable_large + usize::from(undecodable_five == 0);
    Ok(CheckReport::new(
        "product_census",
        violations as f64,
        0.0,
        true,
        format!("{undecodable_large} undecodable patterns of size >= 6, {undecodable_five} of size 5"),
    ))
}

fn monte_carlo_status(trials: usize) -> bool {
    trials >= FULL_CONFIDENCE_TRIALS
}

/// Simulated mean completion with every worker alive against
/// `(1/α)(1 + (H_N − H_{N−k})/λ)`, for MDS, polynomial and MatDot codes.
pub fn check_order_statistics(trials: usize, seed: u64) -> Result<CheckReport> {
    let lambda = 1.0;
    let mut worst: f64 = 0.0;
    let mut widest: f64 = ORDER_STATISTIC_TOLERANCE;
    let mut worst_case = String::new();
    let mut stream = 0u64;
    for scheme in [Scheme::Mds, Scheme::Polynomial, Scheme::MatDot] {
        for n in [6usize, 10, 20] {
            for p in [2usize, 3] {
                let choice = CodeChoice::new(scheme, p);
                if !feasible(choice, n) {
                    continue;
                }
                let k = recovery_threshold(choice, n)?;
                let alpha = choice.scale();
                let exact = (1.0 + harmonic_tail(n, k) / lambda) / alpha;
                stream += 1;
                let stats = run_experiment(choice, n, lambda, 1.0, trials, seed.wrapping_add(stream))?;
                let sim = stats.mean_completion.expect("φ = 1 always decodes");
                let gap = (sim - exact).abs() / exact;
                if !monte_carlo_status(trials) {
                    widest = widest.max(4.0 * stats.std_error.unwrap_or(0.0) / exact);
                }
                if gap > worst {
                    worst = gap;
                    worst_case = format!("{choice} N={n}: simulated {sim:.6}, exact {exact:.6}");
                }
            }
        }
    }
    Ok(CheckReport::new(
        "order_statistics",
        worst,
        widest,
        monte_carlo_status(trials),
        format!("{trials} trials; worst: {worst_case}"),
    ))
}

/// Logarithmic planning form against the exact harmonic form for
/// `15 ≤ N ≤ 60`, `1 ≤ k ≤ 0.6N` and `λ ∈ {0.1, 1, 10}`.
pub fn check_log_approximation() -> CheckReport {
    let mut worst: f64 = 0.0;
    let mut worst_case = String::new();
    for n in 15..=60usize {
        for k in (1..=n).filter(|&k| 5 * k <= 3 * n) {
            for lambda in [0.1, 1.0, 10.0] {
                let exact = 1.0 + harmonic_tail(n, k) / lambda;
                let approx = 1.0 + (n as f64 / (n - k) as f64).ln() / lambda;
                let gap = (approx - exact).abs() / exact;
                if gap > worst {
                    worst = gap;
                    worst_case = format!("N={n} k={k} λ={lambda}");
                }
            }
        }
    }
    CheckReport::new(
        "log_approximation",
        worst,
        LOG_APPROXIMATION_TOLERANCE,
        true,
        format!("worst: {worst_case}"),
    )
}

/// Undecodable fraction of MDS `(N = 6, p = 2)` under `φ = 2/3` against
/// `1 − P[Bin(6, 2/3) ≥ 2]`, within three binomial standard errors.
pub fn check_failure_model(trials: usize, seed: u64) -> Result<CheckReport> {
    let choice = CodeChoice::new(Scheme::Mds, 2);
    let phi = 2.0 / 3.0;
    // P[at most one survivor] = (1/3)^6 + 6·(2/3)·(1/3)^5
    let expected = (1.0f64 / 3.0).powi(6) + 6.0 * (2.0 / 3.0) * (1.0f64 / 3.0).powi(5);
    let stats = run_experiment(choice, 6, 1.0, phi, trials, seed)?;
    let sigma = (expected * (1.0 - expected) / trials as f64).sqrt();
    let gap = (stats.undecodable_fraction - expected).abs();
    let model = 1.0 - code_success_probability(choice, 6, phi)?;
    Ok(CheckReport::new(
        "failure_model",
        gap,
        3.0 * sigma,
        monte_carlo_status(trials),
        format!(
            "{trials} trials: empirical {:.6}, expected {expected:.6} (model {model:.6})",
            stats.undecodable_fraction
        ),
    ))
}

/// On the unconstrained fast-worker sweep, every per-round objective equals
/// a fresh minimum over admitted codes and the adaptive row is never slower
/// than any single scheme.
pub fn check_selector_dominance() -> Result<CheckReport> {
    let mut config = ExperimentConfig::preset(Preset::Fig1);
    config.rounds = 50;
    let sweep = run_sweep(&config, false)?;
    let violation = dominance_violation(&config, &sweep)?;
    Ok(CheckReport::new(
        "selector_dominance",
        violation,
        DOMINANCE_TOLERANCE,
        true,
        format!("N in {:?}, {} rounds each", (6, 20), config.rounds),
    ))
}

/// The same experiment on one thread and on four gives identical statistics.
pub fn check_parallel_determinism(trials: usize, seed: u64) -> Result<CheckReport> {
    let choice = CodeChoice::new(Scheme::Product, 2);
    let run = |threads: usize| -> Result<_> {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
        Ok(pool.install(|| run_experiment(choice, 9, 1.0, 0.9, trials, seed))?)
    };
    let (one, four) = (run(1)?, run(4)?);
    Ok(CheckReport::new(
        "parallel_determinism",
        if one == four { 0.0 } else { 1.0 },
        0.0,
        true,
        format!("{choice} N=9, {trials} trials on 1 and 4 threads"),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_checks_pass() {
        assert!(check_table_structure().unwrap().passed);
        assert!(check_product_census().unwrap().passed);
        assert!(check_log_approximation().passed);
        assert!(check_decode_round_trips(20, 1).unwrap().passed);
    }

    #[test]
    fn reduced_trials_are_non_fatal() {
        let r = check_order_statistics(100, 3).unwrap();
        assert!(!r.fatal);
        assert!(r.tolerance > ORDER_STATISTIC_TOLERANCE);
        let f = check_failure_model(100, 3).unwrap();
        assert!(!f.fatal);
    }
}
