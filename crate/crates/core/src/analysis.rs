//! Closed-form models per coding scheme: expected computing time, storage at
//! the master and at each worker, per-worker computing load, and the
//! probability that enough workers survive to decode.
//!
//! Storage counts matrix entries, computing load counts scalar
//! multiplications, and times are in units of the uncoded job's shift.

use serde::{Deserialize, Serialize};

use crate::codes::{check_feasible, isqrt, recovery_threshold, workers_used, CodeChoice, Scheme};
use crate::delay::{expected_kth_order_statistic, harmonic, DelayModel};
use crate::error::{Error, Result};
use crate::sim;

/// Product codes use the first-regime asymptotics once `p / ⌊√N⌋` reaches
/// this ratio.
pub const PRODUCT_FIRST_REGIME_RATIO: f64 = 0.8;

/// One code's figures of merit at a given `N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisRow {
    pub choice: CodeChoice,
    pub recovery_threshold: usize,
    pub computing_load: f64,
    pub storage_master: f64,
    pub storage_worker: f64,
    pub success_probability: f64,
    pub expected_time: f64,
}

/// Which asymptotic description applies to a product code.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ProductRegime {
    /// `⌊√N⌋ = p + τ/2`; `c_threshold = c_{τ/2+1}`.
    First { tau: usize, c_threshold: f64 },
    /// `N' = (1 + δ) p²`.
    Second { delta: f64 },
}

/// `c_{m} ≈ m + √(m ln m)`
pub fn core_threshold(m: f64) -> f64 {
    m + (m * m.ln()).sqrt()
}

pub fn product_regime(p: usize, workers: usize) -> ProductRegime {
    let side = isqrt(workers);
    if p as f64 / side as f64 >= PRODUCT_FIRST_REGIME_RATIO {
        let tau = 2 * (side - p);
        ProductRegime::First {
            tau,
            c_threshold: core_threshold(1.0 + tau as f64 / 2.0),
        }
    } else {
        ProductRegime::Second {
            delta: (side * side) as f64 / (p * p) as f64 - 1.0,
        }
    }
}

/// First-regime product time `(1/p²)(1 + ln((p + τ/2) / c_{τ/2+1}) / λ)`.
pub fn product_time_first_regime(p: usize, tau: usize, lambda: f64) -> f64 {
    let half = tau as f64 / 2.0;
    let p = p as f64;
    (1.0 + ((p + half) / core_threshold(1.0 + half)).ln() / lambda) / (p * p)
}

/// Second-regime `(lower, upper)` bounds on product time for a fixed `δ > 0`.
pub fn product_time_bounds(p: usize, delta: f64, lambda: f64) -> (f64, f64) {
    let pp = (p * p) as f64;
    let lower = (1.0 + ((1.0 + delta) / delta).ln() / lambda) / pp;
    let root = (1.0 + delta).sqrt();
    let upper = (1.0 + 2.0 / lambda * ((1.0 + delta + root) / delta).ln()) / pp;
    (lower, upper)
}

fn check_rate(lambda: f64) -> Result<()> {
    if lambda.is_finite() && lambda > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("straggling parameter must be positive, got {lambda}")))
    }
}

/// Expected time of the `k`-th of `n` sub-task completions for scale `α`.
fn order_statistic_time(alpha: f64, n: usize, k: usize, lambda: f64) -> Result<f64> {
    expected_kth_order_statistic(&DelayModel::subtask(lambda, alpha)?, n, k)
}

/// Planning value of the expected computing time (log-approximated forms).
///
/// Threshold codes with `k = N` fall back to the exact harmonic form, since
/// `ln(N/(N−k))` diverges there while `H_N − H_{N−k}` does not. Product
/// codes use the first-regime estimate when `p/⌊√N⌋ ≥ 0.8`, otherwise the
/// second-regime upper bound.
pub fn computing_time(choice: CodeChoice, workers: usize, lambda: f64) -> Result<f64> {
    check_rate(lambda)?;
    let k = recovery_threshold(choice, workers)?;
    let p = choice.partitions as f64;
    let n = workers as f64;
    let log_form = |alpha: f64| -> Result<f64> {
        if k == workers {
            order_statistic_time(alpha, workers, k, lambda)
        } else {
            Ok((1.0 + (n / (n - k as f64)).ln() / lambda) / alpha)
        }
    };
    match choice.scheme {
        Scheme::Repetition => Ok((1.0 + p / (n * lambda) * p.ln()) / p),
        Scheme::Mds | Scheme::MatDot | Scheme::Polynomial => log_form(choice.scale()),
        Scheme::Product => Ok(match product_regime(choice.partitions, workers) {
            ProductRegime::First { tau, .. } => {
                product_time_first_regime(choice.partitions, tau, lambda)
            }
            ProductRegime::Second { delta } => product_time_bounds(choice.partitions, delta, lambda).1,
        }),
    }
}

/// Monte Carlo budget for quantities without a closed form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonteCarlo {
    pub trials: usize,
    pub seed: u64,
}

impl Default for MonteCarlo {
    fn default() -> Self {
        Self {
            trials: 100_000,
            seed: 0x5eed,
        }
    }
}

/// Expected computing time without the logarithmic approximation, assuming
/// every worker survives.
///
/// Threshold codes: `(1/α)(1 + (H_N − H_{N−k})/λ)`. Repetition: the slowest
/// of `p` blocks, each finished by the fastest of its `N/p` replicas, which
/// gives `(1/p)(1 + p·H_p/(Nλ))`. Product codes have no closed form and are
/// simulated with `mc`.
pub fn exact_expected_time(choice: CodeChoice, workers: usize, lambda: f64, mc: MonteCarlo) -> Result<f64> {
    check_rate(lambda)?;
    let k = recovery_threshold(choice, workers)?;
    let p = choice.partitions as f64;
    match choice.scheme {
        Scheme::Repetition => {
            Ok((1.0 + p * harmonic(choice.partitions) / (workers as f64 * lambda)) / p)
        }
        Scheme::Mds | Scheme::Polynomial | Scheme::MatDot => {
            order_statistic_time(choice.scale(), workers, k, lambda)
        }
        Scheme::Product => {
            let stats = sim::run_experiment(choice, workers, lambda, 1.0, mc.trials, mc.seed)?;
            Ok(stats.mean_completion.expect("no failures with φ = 1"))
        }
    }
}

/// Entries held by the master: both inputs, the result, the coded
/// sub-matrices it keeps, and the first `k` worker results.
pub fn storage_master(choice: CodeChoice, workers: usize, k_dim: usize, l_dim: usize) -> Result<f64> {
    let k = recovery_threshold(choice, workers)? as f64;
    let n = workers_used(choice, workers) as f64;
    let p = choice.partitions as f64;
    let (kk, kl) = ((k_dim * k_dim) as f64, (k_dim * l_dim) as f64);
    let base = 2.0 * kl + kk;
    Ok(base
        + match choice.scheme {
            Scheme::Repetition => k * kk / p,
            Scheme::Mds => (n - k) * kl / p + k * kk / p,
            Scheme::Polynomial => 2.0 * n * kl / p + k * kk / (p * p),
            Scheme::MatDot => 2.0 * n * kl / p + k * kk,
            Scheme::Product => 2.0 * (n - k) * kl / p + k * kk / (p * p),
        })
}

/// Entries held by one worker: its operands and its result.
pub fn storage_worker(choice: CodeChoice, k_dim: usize, l_dim: usize) -> f64 {
    let p = choice.partitions as f64;
    let (kk, kl) = ((k_dim * k_dim) as f64, (k_dim * l_dim) as f64);
    match choice.scheme {
        Scheme::Repetition | Scheme::Mds => kl / p + kl + kk / p,
        Scheme::Polynomial | Scheme::Product => 2.0 * kl / p + kk / (p * p),
        Scheme::MatDot => 2.0 * kl / p + kk,
    }
}

/// Scalar multiplications per worker.
pub fn computing_load(choice: CodeChoice, k_dim: usize, l_dim: usize) -> f64 {
    let p = choice.partitions as f64;
    let (k, l) = (k_dim as f64, l_dim as f64);
    match choice.scheme {
        Scheme::Repetition | Scheme::Mds => l * k * k / p,
        Scheme::Polynomial | Scheme::Product => l * (k / p) * (k / p),
        Scheme::MatDot => l / p * k * k,
    }
}

/// `P[Binomial(N, φ) ≥ k]`, summed exactly in log space.
pub fn success_probability(k: usize, workers: usize, phi: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&phi) {
        return Err(Error::Domain(format!("survival probability {phi} outside [0, 1]")));
    }
    if k > workers {
        return Err(Error::Domain(format!("k = {k} exceeds N = {workers}")));
    }
    if k == 0 {
        return Ok(1.0);
    }
    if phi == 0.0 {
        return Ok(0.0);
    }
    if phi == 1.0 {
        return Ok(1.0);
    }
    let (lp, lq) = (phi.ln(), (1.0 - phi).ln());
    // ln C(N, i) built incrementally
    let mut ln_choose = vec![0.0; workers + 1];
    for i in 1..=workers {
        ln_choose[i] = ln_choose[i - 1] + ((workers - i + 1) as f64).ln() - (i as f64).ln();
    }
    let tail: f64 = (k..=workers)
        .rev()
        .map(|i| (ln_choose[i] + i as f64 * lp + (workers - i) as f64 * lq).exp())
        .sum();
    Ok(tail.clamp(0.0, 1.0))
}

/// Success probability of a code: at least `k` of the workers that hold a
/// task must survive.
pub fn code_success_probability(choice: CodeChoice, workers: usize, phi: f64) -> Result<f64> {
    let k = recovery_threshold(choice, workers)?;
    success_probability(k, workers_used(choice, workers), phi)
}

/// Every figure of merit for `choice` at `N` workers and straggling `λ`.
pub fn analyze(
    choice: CodeChoice,
    workers: usize,
    k_dim: usize,
    l_dim: usize,
    phi: f64,
    lambda: f64,
) -> Result<AnalysisRow> {
    check_feasible(choice, workers)?;
    Ok(AnalysisRow {
        choice,
        recovery_threshold: recovery_threshold(choice, workers)?,
        computing_load: computing_load(choice, k_dim, l_dim),
        storage_master: storage_master(choice, workers, k_dim, l_dim)?,
        storage_worker: storage_worker(choice, k_dim, l_dim),
        success_probability: code_success_probability(choice, workers, phi)?,
        expected_time: computing_time(choice, workers, lambda)?,
    })
}

/// One cell group of the comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableEntry {
    pub workers: usize,
    pub choice: CodeChoice,
    /// Structurally feasible at this `N`.
    pub feasible: bool,
    /// Feasible and tolerates at least one straggler (`k` below the number
    /// of workers holding a task). Cells that are not applicable print N/A.
    pub applicable: bool,
    pub row: Option<AnalysisRow>,
}

/// Rows for every scheme (product, polynomial, MatDot, MDS, repetition) and
/// every `N`, all with `p` partitions.
pub fn build_comparison_table(
    worker_counts: &[usize],
    partitions: usize,
    k_dim: usize,
    l_dim: usize,
    phi: f64,
    lambda: f64,
) -> Result<Vec<TableEntry>> {
    let order = [
        Scheme::Product,
        Scheme::Polynomial,
        Scheme::MatDot,
        Scheme::Mds,
        Scheme::Repetition,
    ];
    let mut out = Vec::new();
    for scheme in order {
        for &n in worker_counts {
            let choice = CodeChoice::new(scheme, partitions);
            let row = match analyze(choice, n, k_dim, l_dim, phi, lambda) {
                Ok(r) => Some(r),
                Err(Error::Infeasible { .. }) => None,
                Err(e) => return Err(e),
            };
            let applicable = row
                .map(|r| r.recovery_threshold < workers_used(choice, n))
                .unwrap_or(false);
            out.push(TableEntry {
                workers: n,
                choice,
                feasible: row.is_some(),
                applicable,
                row,
            });
        }
    }
    Ok(out)
}
