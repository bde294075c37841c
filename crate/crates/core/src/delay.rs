//! Shifted-scaled exponential worker delays and their order statistics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `H_n = Σ_{i=1}^{n} 1/i`, with `H_0 = 0`.
pub fn harmonic(n: usize) -> f64 {
    // summing small terms first keeps the last bits stable
    (1..=n).rev().map(|i| 1.0 / i as f64).sum()
}

/// Delay `a + b·X` with `X ~ Exp(λ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayModel {
    pub straggling_rate: f64,
    pub shift: f64,
    pub scale: f64,
}

impl DelayModel {
    pub fn new(straggling_rate: f64, shift: f64, scale: f64) -> Result<Self> {
        for (name, v) in [("rate", straggling_rate), ("shift", shift), ("scale", scale)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Domain(format!("delay {name} must be finite and non-negative, got {v}")));
            }
        }
        if straggling_rate == 0.0 || scale == 0.0 {
            return Err(Error::Domain("delay rate and scale must be positive".into()));
        }
        Ok(Self {
            straggling_rate,
            shift,
            scale,
        })
    }

    /// Sub-task delay for a job split `α` ways: shift `1/α`, tail rate `αλ`.
    pub fn subtask(straggling_rate: f64, alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::Domain(format!("scale parameter must be positive, got {alpha}")));
        }
        Self::new(straggling_rate, 1.0 / alpha, 1.0 / alpha)
    }

    pub fn mean(&self) -> f64 {
        self.shift + self.scale / self.straggling_rate
    }

    /// Inverse-CDF draw: `a + b·(−ln(1−U))/λ`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.shift + self.scale * unit_exponential(rng) / self.straggling_rate
    }
}

pub fn unit_exponential<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    -(1.0 - u).ln()
}

/// `E[Y_(k)]` of `n` i.i.d. delays: `a + (b/λ)(H_n − H_{n−k})`.
pub fn expected_kth_order_statistic(model: &DelayModel, n: usize, k: usize) -> Result<f64> {
    if k == 0 || k > n {
        return Err(Error::Domain(format!("order statistic k = {k} outside 1..={n}")));
    }
    Ok(model.shift + model.scale / model.straggling_rate * (harmonic(n) - harmonic(n - k)))
}

/// Independent random stream `index` under `master_seed`. Streams never
/// overlap, so trial results do not depend on execution order.
pub fn child_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}
