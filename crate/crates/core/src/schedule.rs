//! Batch-size schedules and the analytic functions behind them.
//!
//! Three facts drive every scheduling decision in this crate:
//!
//! 1. With per-candidate improvement probability `p`, a batch of `M`
//!    i.i.d. candidates succeeds (produces at least one improvement) with
//!    probability `1 - (1 - p)^M`.
//! 2. The expected success per invocation `h(M) = (1 - (1 - p)^M) / M` is
//!    strictly decreasing in `M`, so under a fixed total budget the smallest
//!    feasible batch (2, the minimum for comparative evaluation) maximizes
//!    expected gain per call.
//! 3. Without a budget cap, growing the batch like
//!    `M_k = ceil(2 ln k / |ln(1 - p_floor)|)` drives the per-round failure
//!    probability below `1/k^2`, whose tail sum is finite, so from a
//!    computable start round every round improves with probability at least
//!    `1 - delta`.
//!
//! All functions here are pure; the Monte Carlo counterparts live in
//! [`crate::simulation`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum feasible batch: comparative evaluation needs two candidates.
pub const M_MIN: usize = 2;

/// Policy producing the per-round batch size `M_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BatchSchedule {
    /// Same batch size every round.
    Constant { m: usize },
    /// Always the minimum feasible batch of 2.
    MinFeasible,
    /// `max(2, ceil(2 ln k / |ln(1 - p_floor)|))`; sufficient for monotone
    /// improvement with high probability when `p_k >= p_floor`.
    LogGrowth { p_floor: f64 },
}

impl BatchSchedule {
    pub fn constant(m: usize) -> Result<Self> {
        if m < 1 {
            return Err(Error::invalid("batch size", "constant M must be >= 1"));
        }
        Ok(BatchSchedule::Constant { m })
    }

    pub fn log_growth(p_floor: f64) -> Result<Self> {
        if !(p_floor > 0.0 && p_floor < 1.0) {
            return Err(Error::invalid(
                "p_floor",
                format!("{p_floor} outside (0, 1)"),
            ));
        }
        Ok(BatchSchedule::LogGrowth { p_floor })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            BatchSchedule::Constant { m } if m < 1 => {
                Err(Error::invalid("batch size", "constant M must be >= 1"))
            }
            BatchSchedule::LogGrowth { p_floor } if !(p_floor > 0.0 && p_floor < 1.0) => Err(
                Error::invalid("p_floor", format!("{p_floor} outside (0, 1)")),
            ),
            _ => Ok(()),
        }
    }

    pub fn batch_size(&self, k: usize) -> usize {
        batch_size(self, k)
    }
}

/// Batch size for round `k >= 1` under the given schedule.
pub fn batch_size(schedule: &BatchSchedule, k: usize) -> usize {
    debug_assert!(k >= 1, "rounds are 1-based");
    match *schedule {
        BatchSchedule::Constant { m } => m,
        BatchSchedule::MinFeasible => M_MIN,
        BatchSchedule::LogGrowth { p_floor } => {
            let b = (-p_floor).ln_1p().abs(); // |ln(1 - p_floor)|
            let required = (2.0 * (k as f64).ln() / b).ceil();
            // ln 1 = 0 floors round 1 at the feasibility minimum.
            (required as usize).max(M_MIN)
        }
    }
}

/// Analysis parameters: improvement probability, conditional gain, round
/// index, and failure budget. The fixed-budget ordering analysis additionally
/// requires `p` in `(0, 0.5)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryParams {
    /// Per-sample improvement probability, in `(0, 1)`.
    pub p: f64,
    /// Expected gain conditional on a successful round; non-negative. Carried
    /// but never folded into the per-invocation ordering, which is invariant
    /// to it.
    pub g: f64,
    /// Round index, >= 1.
    pub k: usize,
    /// Failure budget, in `(0, 1)`.
    pub delta: f64,
}

impl TheoryParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(Error::invalid("p", format!("{} outside (0, 1)", self.p)));
        }
        if self.g < 0.0 {
            return Err(Error::invalid("g", format!("{} negative", self.g)));
        }
        if self.k < 1 {
            return Err(Error::invalid("k", "round index must be >= 1"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::invalid(
                "delta",
                format!("{} outside (0, 1)", self.delta),
            ));
        }
        Ok(())
    }

    /// The fixed-budget ordering result is stated for `p` in `(0, 0.5)`.
    pub fn validate_for_fixed_budget(&self) -> Result<()> {
        self.validate()?;
        if self.p >= 0.5 {
            return Err(Error::invalid(
                "p",
                format!(
                    "{} outside (0, 0.5) required by the fixed-budget ordering analysis",
                    self.p
                ),
            ));
        }
        Ok(())
    }
}

/// `(1 - p)^m` evaluated in log space and clamped to `[0, 1]`.
fn failure_power(p: f64, m: usize) -> f64 {
    if p <= 0.0 {
        return 1.0;
    }
    if p >= 1.0 {
        return 0.0;
    }
    let log_term = m as f64 * (-p).ln_1p();
    log_term.exp().clamp(0.0, 1.0)
}

/// Probability that at least one of `m` i.i.d. candidates improves on the
/// reference: `1 - (1 - p)^m`.
pub fn success_prob(p: f64, m: usize) -> f64 {
    (1.0 - failure_power(p, m)).clamp(0.0, 1.0)
}

/// Expected success per invocation `h(m) = (1 - (1 - p)^m) / m`, the
/// gain-free efficiency measure; callers multiply by the conditional gain.
pub fn gain_per_invocation(p: f64, m: usize) -> f64 {
    debug_assert!(m >= 1);
    success_prob(p, m) / m as f64
}

/// Per-invocation gain at every integer batch size in `1..=m_max`.
///
/// For `p` in `(0, 1)` the sequence is strictly decreasing, which is the
/// whole argument for minimal feasible batches under a fixed budget.
pub fn monotonicity_witness(p: f64, m_max: usize) -> Vec<(usize, f64)> {
    (1..=m_max)
        .map(|m| (m, gain_per_invocation(p, m)))
        .collect()
}

/// Sign witness for the decrease of `h` on the real line:
/// `N(x) = e^(-bx) (1 + bx) - 1` with `b = -ln(1 - p)`, negative for all
/// `x > 0`. Evaluated via `exp_m1` so the near-zero cancellation keeps full
/// precision.
pub fn decrease_indicator(p: f64, x: f64) -> f64 {
    let b = -(-p).ln_1p();
    let t = b * x;
    // e^-t (1 + t) - 1 = (e^-t - 1) + t e^-t
    (-t).exp_m1() + t * (-t).exp()
}

/// Tail of the inverse-square series from `k_start`:
/// `sum_{k >= k_start} 1/k^2 = pi^2/6 - sum_{k < k_start} 1/k^2`.
///
/// Bounds the probability that any round at or beyond `k_start` fails under a
/// log-growth schedule. Always below the integral bound `1/(k_start - 1)`,
/// which is undefined at 1, hence the `k_start >= 2` precondition.
pub fn failure_tail_bound(k_start: usize) -> Result<f64> {
    if k_start < 2 {
        return Err(Error::TailBoundUndefined(k_start));
    }
    let partial: f64 = (1..k_start).map(|k| 1.0 / (k as f64 * k as f64)).sum();
    Ok(std::f64::consts::PI.powi(2) / 6.0 - partial)
}

/// Smallest start round whose failure tail is below `delta`.
pub fn min_start_round(delta: f64) -> Result<usize> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid("delta", format!("{delta} outside (0, 1)")));
    }
    let basel = std::f64::consts::PI.powi(2) / 6.0;
    let mut partial = 1.0; // sum over k < 2
    let mut k_start = 2usize;
    loop {
        if basel - partial < delta {
            return Ok(k_start);
        }
        partial += 1.0 / (k_start as f64 * k_start as f64);
        k_start += 1;
    }
}
