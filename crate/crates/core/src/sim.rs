//! Seeded Monte Carlo simulation of one master/worker round.
//!
//! Only delays are simulated; [`crate::codes::DecodeTracker`] decides when
//! the arrived results suffice. Trials draw from independent child streams
//! of the master seed and are aggregated in trial order, so statistics do
//! not depend on how many threads ran them.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{computing_time, exact_expected_time, MonteCarlo};
use crate::codes::{check_feasible, workers_used, CodeChoice, CompletionPattern, DecodeTracker};
use crate::delay::{child_rng, DelayModel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum WorkerState {
    /// Returned its result after this delay.
    Finished(f64),
    /// Died before returning.
    Failed,
    /// Held no task (spare workers of a non-square product grid).
    Idle,
}

impl WorkerState {
    pub fn delay(&self) -> Option<f64> {
        match *self {
            WorkerState::Finished(d) => Some(d),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundOutcome {
    pub per_worker: Vec<WorkerState>,
    /// Earliest instant at which the arrived set is decodable.
    pub completion_time: Option<f64>,
    /// Workers whose results had arrived by `completion_time`.
    pub completed_at_decode: CompletionPattern,
}

impl RoundOutcome {
    pub fn decodable(&self) -> bool {
        self.completion_time.is_some()
    }
}

fn check_round_params(lambda: f64, phi: f64) -> Result<()> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::Domain(format!("straggling parameter must be positive, got {lambda}")));
    }
    if !(0.0..=1.0).contains(&phi) {
        return Err(Error::Domain(format!("survival probability {phi} outside [0, 1]")));
    }
    Ok(())
}

/// One round: each worker holding a task survives with probability `φ` and
/// then finishes after a shifted-scaled exponential delay with scale
/// `α = choice.scale()`.
pub fn simulate_round<R: Rng + ?Sized>(
    choice: CodeChoice,
    workers: usize,
    lambda: f64,
    phi: f64,
    rng: &mut R,
) -> Result<RoundOutcome> {
    check_feasible(choice, workers)?;
    check_round_params(lambda, phi)?;
    let model = DelayModel::subtask(lambda, choice.scale())?;
    let used = workers_used(choice, workers);
    let per_worker: Vec<WorkerState> = (0..workers)
        .map(|n| {
            if n >= used {
                WorkerState::Idle
            } else if rng.random::<f64>() < phi {
                WorkerState::Finished(model.sample(rng))
            } else {
                WorkerState::Failed
            }
        })
        .collect();
    Ok(resolve_round(choice, workers, per_worker))
}

/// Completion time of a round with known per-worker states.
pub fn resolve_round(choice: CodeChoice, workers: usize, per_worker: Vec<WorkerState>) -> RoundOutcome {
    let mut arrivals: Vec<(f64, usize)> = per_worker
        .iter()
        .enumerate()
        .filter_map(|(n, s)| s.delay().map(|d| (d, n)))
        .collect();
    arrivals.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut tracker = DecodeTracker::new(choice, workers).expect("feasibility checked by caller");
    let mut completion_time = None;
    for &(d, n) in &arrivals {
        if tracker.complete(n) {
            completion_time = Some(d);
            break;
        }
    }
    let completed = match completion_time {
        Some(t) => arrivals.iter().filter(|a| a.0 <= t).map(|a| a.1).collect(),
        None => Vec::new(),
    };
    RoundOutcome {
        per_worker,
        completion_time,
        completed_at_decode: CompletionPattern::new(completed, workers).expect("indices in range"),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentStats {
    pub trials: usize,
    pub decodable_trials: usize,
    /// Mean completion over decodable trials only.
    pub mean_completion: Option<f64>,
    /// Standard error of `mean_completion`.
    pub std_error: Option<f64>,
    pub undecodable_fraction: f64,
    pub p50: Option<f64>,
    pub p95: Option<f64>,
}

impl ExperimentStats {
    /// Aggregates per-trial completion times (`None` = undecodable), in order.
    pub fn from_completions(completions: &[Option<f64>]) -> Self {
        let trials = completions.len();
        let mut done: Vec<f64> = completions.iter().flatten().copied().collect();
        let decodable_trials = done.len();
        let (mean, std_error) = if done.is_empty() {
            (None, None)
        } else {
            let mean = kahan_sum(done.iter().copied()) / decodable_trials as f64;
            let var = if decodable_trials > 1 {
                kahan_sum(done.iter().map(|x| (x - mean) * (x - mean))) / (decodable_trials - 1) as f64
            } else {
                0.0
            };
            (Some(mean), Some((var / decodable_trials as f64).sqrt()))
        };
        done.sort_by(f64::total_cmp);
        Self {
            trials,
            decodable_trials,
            mean_completion: mean,
            std_error,
            undecodable_fraction: if trials == 0 {
                0.0
            } else {
                (trials - decodable_trials) as f64 / trials as f64
            },
            p50: nearest_rank(&done, 0.50),
            p95: nearest_rank(&done, 0.95),
        }
    }
}

fn kahan_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut carry = 0.0;
    for v in values {
        let y = v - carry;
        let t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
    sum
}

fn nearest_rank(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let rank = (q * sorted.len() as f64).ceil().max(1.0) as usize;
    Some(sorted[rank.min(sorted.len()) - 1])
}

/// `trials` independent rounds; trial `t` uses child stream `t` of `master_seed`.
pub fn run_experiment(
    choice: CodeChoice,
    workers: usize,
    lambda: f64,
    phi: f64,
    trials: usize,
    master_seed: u64,
) -> Result<ExperimentStats> {
    if trials == 0 {
        return Err(Error::Domain("at least one trial is required".into()));
    }
    check_feasible(choice, workers)?;
    check_round_params(lambda, phi)?;
    let completions: Vec<Option<f64>> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = child_rng(master_seed, t);
            simulate_round(choice, workers, lambda, phi, &mut rng)
                .map(|o| o.completion_time)
                .expect("parameters validated")
        })
        .collect();
    Ok(ExperimentStats::from_completions(&completions))
}

/// Like [`run_experiment`], but trial `t` runs `schedule[t mod len]`, a
/// `(code, λ)` pair. Sweeps use it to simulate a sequence of rounds whose
/// straggling parameter (and possibly code) changes from round to round.
pub fn run_schedule(
    schedule: &[(CodeChoice, f64)],
    workers: usize,
    phi: f64,
    trials: usize,
    master_seed: u64,
) -> Result<ExperimentStats> {
    if trials == 0 || schedule.is_empty() {
        return Err(Error::Domain("need at least one trial and one scheduled round".into()));
    }
    for &(choice, lambda) in schedule {
        check_feasible(choice, workers)?;
        check_round_params(lambda, phi)?;
    }
    let completions: Vec<Option<f64>> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let (choice, lambda) = schedule[(t % schedule.len() as u64) as usize];
            let mut rng = child_rng(master_seed, t);
            simulate_round(choice, workers, lambda, phi, &mut rng)
                .map(|o| o.completion_time)
                .expect("parameters validated")
        })
        .collect();
    Ok(ExperimentStats::from_completions(&completions))
}

/// Simulated mean (all workers alive) against the exact expectation and the
/// log-approximated planning value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelComparison {
    pub simulated: f64,
    pub simulated_std_error: f64,
    pub exact: f64,
    pub approximate: f64,
    /// `|simulated − exact| / exact`
    pub gap_simulated_exact: f64,
    /// `|approximate − exact| / exact`
    pub gap_approximate_exact: f64,
    /// `|simulated − approximate| / approximate`
    pub gap_simulated_approximate: f64,
}

pub fn empirical_vs_analytic(
    choice: CodeChoice,
    workers: usize,
    lambda: f64,
    trials: usize,
    master_seed: u64,
) -> Result<ModelComparison> {
    let stats = run_experiment(choice, workers, lambda, 1.0, trials, master_seed)?;
    let simulated = stats.mean_completion.expect("no failures with φ = 1");
    // product codes estimate the "exact" value on a separate stream family
    let exact = exact_expected_time(
        choice,
        workers,
        lambda,
        MonteCarlo {
            trials,
            seed: master_seed ^ 0x9e37_79b9_7f4a_7c15,
        },
    )?;
    let approximate = computing_time(choice, workers, lambda)?;
    Ok(ModelComparison {
        simulated,
        simulated_std_error: stats.std_error.unwrap_or(0.0),
        exact,
        approximate,
        gap_simulated_exact: (simulated - exact).abs() / exact,
        gap_approximate_exact: (approximate - exact).abs() / exact,
        gap_simulated_approximate: (simulated - approximate).abs() / approximate,
    })
}
