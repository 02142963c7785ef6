//! Score-level inference policies under a fixed invocation budget: single
//! sample, best-of-N with a noisy selector, sequential self-refinement,
//! batched reference refinement, and the oracle pass@N upper bound.
//!
//! All policies draw candidate scores through substreams keyed by
//! `(seed, trial, round, draw)`, so policies sharing a round consume
//! identical draws under the same seed (common random numbers). That makes
//! paired comparisons decisive at desk scale and gives exact per-seed
//! dominance of the oracle selector over the noisy one.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::orchestrator::budget_plan;
use crate::rng::substream;
use crate::schedule::BatchSchedule;

use super::score_model::{sample_score, ModelState, ScoreModel};

/// Stream tag separating selector/judge flips from candidate draws.
const FLIP_TAG: u64 = 0xf11b;

/// How the batched refinement policy compares candidates to the reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MarineSelection {
    /// Exact comparisons: the best pool member always wins.
    Oracle,
    /// Each pairwise comparison flips with this probability.
    Judge { flip: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicyKind {
    /// Single-sample decoding.
    Cot,
    /// N samples, noisy best-of-N selection: with probability
    /// `selector_flip` the selector returns the runner-up instead of the top
    /// sample.
    Bon { n: usize, selector_flip: f64 },
    /// Sequential single-candidate revision: one exploration draw, then one
    /// conditioned draw per round, accepted only on judged improvement (the
    /// judge's verdict flips with probability `judge_flip`).
    SelfRefine { judge_flip: f64 },
    /// Batched reference refinement under a schedule. With minimum-batch
    /// enforcement on, a 1-candidate round cannot run comparative selection
    /// and degrades to judged single-candidate acceptance.
    Marine {
        schedule: BatchSchedule,
        selection: MarineSelection,
        enforce_min_batch: bool,
        judge_flip: f64,
    },
    /// Exact maximum over N samples.
    PassNOracle { n: usize },
}

impl PolicyKind {
    /// Conventional defaults for the noisy components.
    pub const DEFAULT_SELECTOR_FLIP: f64 = 0.25;
    pub const DEFAULT_JUDGE_FLIP: f64 = 0.25;

    pub fn marine_default(m: usize) -> Result<Self> {
        Ok(PolicyKind::Marine {
            schedule: BatchSchedule::constant(m)?,
            selection: MarineSelection::Oracle,
            enforce_min_batch: true,
            judge_flip: Self::DEFAULT_JUDGE_FLIP,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            PolicyKind::Cot => "cot",
            PolicyKind::Bon { .. } => "bon",
            PolicyKind::SelfRefine { .. } => "self_refine",
            PolicyKind::Marine { .. } => "marine",
            PolicyKind::PassNOracle { .. } => "pass_n_oracle",
        }
    }

    /// Short parameter label for report rows.
    pub fn param_label(&self) -> String {
        match self {
            PolicyKind::Cot => "-".to_string(),
            PolicyKind::Bon { n, .. } => format!("N={n}"),
            PolicyKind::SelfRefine { .. } => "M=1".to_string(),
            PolicyKind::Marine { schedule, .. } => match schedule {
                BatchSchedule::Constant { m } => format!("M={m}"),
                BatchSchedule::MinFeasible => "M=2".to_string(),
                BatchSchedule::LogGrowth { p_floor } => format!("log(p={p_floor})"),
            },
            PolicyKind::PassNOracle { n } => format!("N={n}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySpec {
    pub kind: PolicyKind,
    /// Invocation budget, excluding any answer call.
    pub budget: usize,
}

/// Execution trace of one policy run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicyTrace {
    /// Best candidate score seen in each round.
    pub per_round_best: Vec<f64>,
    /// The policy's final pass@1-style score.
    pub final_score: f64,
    /// Invocations actually consumed; never exceeds the budget.
    pub invocations: usize,
}

/// Runs one policy for one trial. Deterministic per `(seed, trial)`.
pub fn run_policy(
    spec: &PolicySpec,
    model: &ScoreModel,
    seed: u64,
    trial: u64,
) -> Result<PolicyTrace> {
    model.validate()?;
    let draw = |state: &ModelState, round: usize, index: usize| -> f64 {
        let mut rng = substream(seed, &[trial, round as u64, index as u64]);
        sample_score(state, model, &mut rng)
    };
    let flip = |round: usize, flip_probability: f64| -> bool {
        let mut rng = substream(seed, &[trial, round as u64, FLIP_TAG]);
        rng.random::<f64>() < flip_probability
    };

    match &spec.kind {
        PolicyKind::Cot => {
            require_budget(spec.budget, 1)?;
            let state = model.initial_state();
            let s = draw(&state, 1, 0);
            Ok(PolicyTrace {
                per_round_best: vec![s],
                final_score: s,
                invocations: 1,
            })
        }

        PolicyKind::PassNOracle { n } => {
            require_budget(spec.budget, *n)?;
            let state = model.initial_state();
            let draws: Vec<f64> = (0..*n).map(|i| draw(&state, 1, i)).collect();
            let best = max_of(&draws);
            Ok(PolicyTrace {
                per_round_best: vec![best],
                final_score: best,
                invocations: *n,
            })
        }

        PolicyKind::Bon { n, selector_flip } => {
            require_budget(spec.budget, *n)?;
            let state = model.initial_state();
            let draws: Vec<f64> = (0..*n).map(|i| draw(&state, 1, i)).collect();
            let best = max_of(&draws);
            let picked = if draws.len() >= 2 && flip(1, *selector_flip) {
                runner_up(&draws)
            } else {
                best
            };
            Ok(PolicyTrace {
                per_round_best: vec![best],
                final_score: picked,
                invocations: *n,
            })
        }

        PolicyKind::SelfRefine { judge_flip } => {
            require_budget(spec.budget, 1)?;
            let mut state = model.initial_state();
            let first = draw(&state, 1, 0);
            state = model.state_from_exploration(first);
            let mut per_round_best = vec![first];
            state.advance(model);
            for k in 2..=spec.budget {
                let s = draw(&state, k, 0);
                per_round_best.push(s);
                let improvement = s > state.reference;
                if improvement != flip(k, *judge_flip) {
                    state.reference = s;
                }
                state.advance(model);
            }
            Ok(PolicyTrace {
                per_round_best,
                final_score: state.reference,
                invocations: spec.budget,
            })
        }

        PolicyKind::Marine {
            schedule,
            selection,
            enforce_min_batch,
            judge_flip,
        } => {
            let plan = budget_plan(spec.budget, schedule)?;
            let mut state = model.initial_state();
            let mut per_round_best = Vec::with_capacity(plan.len());
            let mut invocations = 0usize;
            for (round_idx, &m) in plan.iter().enumerate() {
                let k = round_idx + 1;
                let draws: Vec<f64> = (0..m).map(|i| draw(&state, k, i)).collect();
                invocations += m;
                per_round_best.push(max_of(&draws));

                if k == 1 {
                    // Exploration: the reference is selected from the initial
                    // set, there is nothing prior to fall back on.
                    let chosen = match selection {
                        MarineSelection::Oracle => max_of(&draws),
                        MarineSelection::Judge { flip: p } => {
                            tournament(f64::NEG_INFINITY, &draws, *p, seed, trial, k)
                        }
                    };
                    state = model.state_from_exploration(chosen);
                } else if m == 1 && *enforce_min_batch {
                    // Comparative evaluation is off the table with one
                    // candidate: fall back to judged acceptance.
                    let s = draws[0];
                    let improvement = s > state.reference;
                    if improvement != flip(k, *judge_flip) {
                        state.reference = s;
                    }
                } else {
                    match selection {
                        MarineSelection::Oracle => {
                            let best = max_of(&draws);
                            if best > state.reference {
                                state.reference = best;
                            }
                        }
                        MarineSelection::Judge { flip: p } => {
                            let winner = tournament(state.reference, &draws, *p, seed, trial, k);
                            state.reference = winner;
                        }
                    }
                }
                state.advance(model);
            }
            Ok(PolicyTrace {
                per_round_best,
                final_score: state.reference,
                invocations,
            })
        }
    }
}

fn require_budget(budget: usize, needed: usize) -> Result<()> {
    if budget < needed {
        return Err(Error::BudgetBelowMinimum {
            budget,
            minimum: needed,
        });
    }
    Ok(())
}

fn max_of(draws: &[f64]) -> f64 {
    draws.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn runner_up(draws: &[f64]) -> f64 {
    let mut sorted = draws.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    sorted[1]
}

/// Left-to-right tournament over `incumbent` then `draws`; each comparison
/// inverts with probability `flip_probability` on its own substream.
fn tournament(
    incumbent: f64,
    draws: &[f64],
    flip_probability: f64,
    seed: u64,
    trial: u64,
    round: usize,
) -> f64 {
    let mut rng = substream(seed, &[trial, round as u64, FLIP_TAG, 1]);
    let mut champion = incumbent;
    for &challenger in draws {
        let mut challenger_wins = challenger > champion;
        if rng.random::<f64>() < flip_probability {
            challenger_wins = !challenger_wins;
        }
        if challenger_wins {
            champion = challenger;
        }
    }
    champion
}
