//! Candidate-score models: the analytic Bernoulli process used by the
//! batch-size verifiers, plus the conditioning and mean-shift dynamics behind
//! the score-distribution picture.

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::standard_normal;

/// How candidate scores are generated, all on the `[0, 1]` score domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ScoreModel {
    /// Bernoulli success process: a round-`k` draw beats the reference with
    /// probability `p_k` exactly, landing `gain` above it on success and
    /// `loss` below otherwise. The clean setting for checking the closed
    /// forms. `p` applies to every round unless an explicit per-round
    /// schedule overrides it (rounds past the schedule fall back to `p`).
    Analytic {
        p: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        p_schedule: Option<Vec<f64>>,
        #[serde(default = "default_gain")]
        gain: f64,
        #[serde(default = "default_gain")]
        loss: f64,
        #[serde(default = "default_r1")]
        r1: f64,
    },
    /// Truncated-normal candidates whose mean chases the reference:
    /// `mu <- alpha * r + (1 - alpha) * mu` after each round. Generation is
    /// biased toward, but centered below, the reference, so the probability
    /// of beating it drifts downward as the reference strengthens.
    Conditioning {
        alpha: f64,
        sigma: f64,
        #[serde(default = "default_r1")]
        r1: f64,
        #[serde(default = "default_mu1")]
        mu1: f64,
    },
    /// Mean-shift contrast: the distribution mean climbs by `step` each round
    /// independent of any reference, so a fresh draw beats the current mean
    /// with probability about one half, round after round.
    RlShift {
        step: f64,
        sigma: f64,
        #[serde(default = "default_mu1")]
        mu1: f64,
    },
}

fn default_gain() -> f64 {
    0.01
}

fn default_r1() -> f64 {
    0.5
}

fn default_mu1() -> f64 {
    0.3
}

impl ScoreModel {
    /// Documented defaults for the conditioning dynamics.
    pub fn conditioning_defaults() -> Self {
        ScoreModel::Conditioning {
            alpha: 0.5,
            sigma: 0.1,
            r1: 0.5,
            mu1: 0.3,
        }
    }

    /// Documented defaults for the mean-shift contrast.
    pub fn rl_shift_defaults() -> Self {
        ScoreModel::RlShift {
            step: 0.005,
            sigma: 0.1,
            mu1: 0.3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ScoreModel::Analytic {
                p,
                ref p_schedule,
                gain,
                loss,
                r1,
            } => {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::invalid("p", format!("{p} outside [0, 1]")));
                }
                if let Some(schedule) = p_schedule {
                    for (k, p_k) in schedule.iter().enumerate() {
                        if !(0.0..=1.0).contains(p_k) {
                            return Err(Error::invalid(
                                "p_schedule",
                                format!("p_{} = {p_k} outside [0, 1]", k + 1),
                            ));
                        }
                    }
                }
                if gain <= 0.0 || loss < 0.0 {
                    return Err(Error::invalid(
                        "gain/loss",
                        "gain must be positive, loss non-negative",
                    ));
                }
                if !(0.0..=1.0).contains(&r1) {
                    return Err(Error::invalid("r1", format!("{r1} outside [0, 1]")));
                }
            }
            ScoreModel::Conditioning {
                alpha,
                sigma,
                r1,
                mu1,
            } => {
                if !(alpha > 0.0 && alpha < 1.0) {
                    return Err(Error::invalid("alpha", format!("{alpha} outside (0, 1)")));
                }
                if sigma <= 0.0 {
                    return Err(Error::invalid("sigma", "must be positive"));
                }
                if !(0.0..=1.0).contains(&r1) || !(0.0..=1.0).contains(&mu1) {
                    return Err(Error::invalid("r1/mu1", "outside [0, 1]"));
                }
            }
            ScoreModel::RlShift { step, sigma, mu1 } => {
                if step < 0.0 {
                    return Err(Error::invalid("step", "must be non-negative"));
                }
                if sigma <= 0.0 {
                    return Err(Error::invalid("sigma", "must be positive"));
                }
                if !(0.0..=1.0).contains(&mu1) {
                    return Err(Error::invalid("mu1", format!("{mu1} outside [0, 1]")));
                }
            }
        }
        Ok(())
    }

    /// Per-round improvement probability in analytic mode.
    pub fn p_for_round(&self, round: usize) -> Option<f64> {
        match self {
            ScoreModel::Analytic { p, p_schedule, .. } => Some(
                p_schedule
                    .as_ref()
                    .and_then(|s| s.get(round.saturating_sub(1)).copied())
                    .unwrap_or(*p),
            ),
            _ => None,
        }
    }

    /// Fresh process state at round 1 with the configured initial reference.
    pub fn initial_state(&self) -> ModelState {
        match *self {
            ScoreModel::Analytic { r1, .. } => ModelState {
                reference: r1,
                mu: r1,
                round: 1,
            },
            ScoreModel::Conditioning { r1, mu1, .. } => ModelState {
                reference: r1,
                mu: mu1,
                round: 1,
            },
            // The mean-shift picture has no separate reference: its
            // comparison point is the distribution mean itself.
            ScoreModel::RlShift { mu1, .. } => ModelState {
                reference: mu1,
                mu: mu1,
                round: 1,
            },
        }
    }

    /// Process state seeded from exploration draws instead of a configured
    /// reference: the best of the first batch becomes the reference.
    pub fn state_from_exploration(&self, best: f64) -> ModelState {
        let mut state = self.initial_state();
        state.reference = best;
        state
    }
}

/// Evolving state of one simulated refinement process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelState {
    /// Score of the current reference trajectory.
    pub reference: f64,
    /// Current generation-distribution mean parameter.
    pub mu: f64,
    /// 1-based round index.
    pub round: usize,
}

impl ModelState {
    /// Advances the generation distribution after a round whose (possibly
    /// updated) reference is `self.reference`.
    pub fn advance(&mut self, model: &ScoreModel) {
        match *model {
            ScoreModel::Analytic { .. } => {}
            ScoreModel::Conditioning { alpha, .. } => {
                self.mu = alpha * self.reference + (1.0 - alpha) * self.mu;
            }
            ScoreModel::RlShift { step, .. } => {
                self.mu = (self.mu + step).min(1.0);
                self.reference = self.mu;
            }
        }
        self.round += 1;
    }
}

/// One candidate score draw under the model.
pub fn sample_score(state: &ModelState, model: &ScoreModel, rng: &mut ChaCha12Rng) -> f64 {
    match *model {
        ScoreModel::Analytic { gain, loss, .. } => {
            let p_k = model.p_for_round(state.round).expect("analytic mode");
            if rng.random::<f64>() < p_k {
                (state.reference + gain).min(1.0)
            } else {
                (state.reference - loss).max(0.0)
            }
        }
        ScoreModel::Conditioning { sigma, .. } | ScoreModel::RlShift { sigma, .. } => {
            truncated_normal(state.mu, sigma, rng)
        }
    }
}

/// `M` i.i.d. candidate scores; deterministic per stream.
pub fn sample_candidates(
    state: &ModelState,
    m: usize,
    model: &ScoreModel,
    rng: &mut ChaCha12Rng,
) -> Vec<f64> {
    (0..m).map(|_| sample_score(state, model, rng)).collect()
}

/// Normal draw rejected to the `[0, 1]` score domain. With the mean inside
/// the domain at least half the mass is retained, so the loop terminates
/// quickly and deterministically per stream.
fn truncated_normal(mu: f64, sigma: f64, rng: &mut ChaCha12Rng) -> f64 {
    loop {
        let draw = mu + sigma * standard_normal(rng);
        if (0.0..=1.0).contains(&draw) {
            return draw;
        }
    }
}

/// Monte Carlo estimate with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
    pub trials: usize,
}

/// Estimates the probability that a single fresh candidate strictly beats
/// the current reference.
pub fn estimate_improvement_prob(
    state: &ModelState,
    model: &ScoreModel,
    trials: usize,
    rng: &mut ChaCha12Rng,
) -> Result<Estimate> {
    if trials < 1000 {
        return Err(Error::invalid(
            "trials",
            "improvement estimates need >= 1000 trials",
        ));
    }
    let mut hits = 0usize;
    for _ in 0..trials {
        if sample_score(state, model, rng) > state.reference {
            hits += 1;
        }
    }
    let p_hat = hits as f64 / trials as f64;
    let se = (p_hat * (1.0 - p_hat) / trials as f64).sqrt();
    Ok(Estimate {
        value: p_hat,
        se,
        trials,
    })
}
