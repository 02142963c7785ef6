//! Budgeted orchestration: one exploration round, recursive enhancement
//! rounds, and a final answer stage, with full run logging.
//!
//! The budget `T` counts agent invocations excluding the single answer call.
//! Exploration is round 1 of the plan, so a constant batch of 2 under `T = 8`
//! yields four rounds and `T + 1 = 9` total calls. Rounds are strictly
//! sequential (each consumes the previous reference); candidates within a
//! round merge by agent index, so the records are identical no matter how the
//! generate calls were scheduled.

use std::collections::BTreeMap;
use std::time::Instant;

use rand_chacha::ChaCha12Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::evaluator::{select_reference, EvalPort};
use crate::llm::DiversityProfile;
use crate::refine::{refine, ExternalVerifier, RefineConfig, RefineMode};
use crate::rng::substream;
use crate::schedule::{batch_size, BatchSchedule};
use crate::trajectory::{NodeId, ReferenceState, SupplementaryContext, TrajectoryGraph};

/// A unit of work handed to agents.
#[derive(Debug, Clone)]
pub struct Task {
    pub id: String,
    pub question: String,
}

impl Task {
    pub fn new(id: impl Into<String>, question: impl Into<String>) -> Self {
        Task {
            id: id.into(),
            question: question.into(),
        }
    }
}

/// Context a single generation produced alongside its trajectory: tool logs
/// and self-reported per-node confidences.
#[derive(Debug, Clone, Default)]
pub struct ContextFragment {
    pub tool_logs: Vec<String>,
    pub confidences: BTreeMap<NodeId, f64>,
}

/// Behavior contract for one agent. Given identical inputs and an identical
/// RNG stream, the output must be identical; the orchestrator keys a fresh
/// substream per (round, agent, attempt).
pub trait AgentPort {
    fn id(&self) -> &str;

    fn profile(&self) -> &DiversityProfile;

    /// Generates a candidate trajectory, unconditioned when `state` is None
    /// (exploration) and conditioned on the reference otherwise.
    fn generate(
        &self,
        task: &Task,
        state: Option<&ReferenceState>,
        rng: &mut ChaCha12Rng,
    ) -> Result<(TrajectoryGraph, ContextFragment)>;

    /// Produces the final free-text answer from the refined state.
    fn answer(&self, task: &Task, state: &ReferenceState, rng: &mut ChaCha12Rng) -> Result<String>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    /// Dimension winners come from the oracle evaluation port.
    Oracle,
    /// No oracle: winners come from conflict resolution; per-round distances
    /// are logged only if an instrumentation port is supplied.
    Judge,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    /// Agent invocations available, excluding the single answer call.
    pub total_budget: usize,
    pub schedule: BatchSchedule,
    pub mode: RunMode,
    pub seed: u64,
    /// Skip remaining rounds once the reference distance hits zero. Off by
    /// default so budget-matched comparisons consume identical invocations.
    pub early_exit: bool,
}

/// Per-round log entry. Serializes to the documented JSONL schema; wall time
/// is measured but deliberately kept out of the serialized record so reruns
/// are byte-identical.
#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub k: usize,
    #[serde(rename = "M_k")]
    pub m_k: usize,
    pub cand_dists: Vec<f64>,
    pub ref_before: f64,
    pub ref_after: f64,
    pub success: bool,
    pub invocations: usize,
    pub skipped: bool,
    #[serde(skip)]
    pub wall_ms: f64,
}

#[derive(Debug)]
pub struct RunOutput {
    pub answer: String,
    pub records: Vec<RunRecord>,
    /// Total invocations spent: all batched rounds plus the answer call.
    pub invocations: usize,
}

/// A run aborted by a twice-failed agent; carries everything logged so far.
#[derive(Debug, thiserror::Error)]
#[error("run aborted: {diagnostic}")]
pub struct RunFailure {
    pub records: Vec<RunRecord>,
    pub diagnostic: String,
}

/// Greedy batched plan under a total budget: emits rounds `k = 1, 2, ...`
/// with `M_k = batch_size(schedule, k)` while the cumulative sum fits.
/// Partial rounds are never scheduled, so leftover budget goes unused.
pub fn budget_plan(total_budget: usize, schedule: &BatchSchedule) -> Result<Vec<usize>> {
    schedule.validate()?;
    let mut plan = Vec::new();
    let mut used = 0usize;
    let mut k = 1usize;
    loop {
        let m = batch_size(schedule, k);
        if used + m > total_budget {
            break;
        }
        plan.push(m);
        used += m;
        k += 1;
    }
    if plan.is_empty() {
        return Err(Error::BudgetBelowMinimum {
            budget: total_budget,
            minimum: batch_size(schedule, 1),
        });
    }
    Ok(plan)
}

/// Runs the full exploration / enhancement / answer pipeline for one task.
///
/// `eval` is required in oracle mode and optional instrumentation in judge
/// mode (it only feeds the per-round distance columns). A failed generate
/// call is retried once on a fresh substream; a second failure aborts.
pub fn run(
    task: &Task,
    config: &RunConfig,
    agents: &[&dyn AgentPort],
    eval: Option<&dyn EvalPort>,
    external: &mut dyn ExternalVerifier,
    refine_config: &RefineConfig,
) -> Result<RunOutput, RunFailure> {
    let fail = |records: &[RunRecord], diagnostic: String| RunFailure {
        records: records.to_vec(),
        diagnostic,
    };

    let plan =
        budget_plan(config.total_budget, &config.schedule).map_err(|e| fail(&[], e.to_string()))?;
    let max_batch = plan.iter().copied().max().unwrap_or(0);
    if agents.len() < max_batch {
        let e = Error::InsufficientAgents {
            round: plan
                .iter()
                .position(|m| *m == max_batch)
                .map(|i| i + 1)
                .unwrap_or(1),
            needed: max_batch,
            available: agents.len(),
        };
        return Err(fail(&[], e.to_string()));
    }
    if config.mode == RunMode::Oracle && eval.is_none() {
        return Err(fail(
            &[],
            "oracle mode requires an evaluation port".to_string(),
        ));
    }

    let mut records: Vec<RunRecord> = Vec::with_capacity(plan.len());
    let mut invocations = 0usize;
    let mut state: Option<ReferenceState> = None;
    let mut exited_early = false;

    for (round_idx, &m_k) in plan.iter().enumerate() {
        let k = round_idx + 1;
        let started = Instant::now();

        if exited_early {
            let current = dist_of(state.as_ref().map(|s| &s.trajectory), eval);
            records.push(RunRecord {
                k,
                m_k,
                cand_dists: Vec::new(),
                ref_before: current,
                ref_after: current,
                success: false,
                invocations,
                skipped: true,
                wall_ms: started.elapsed().as_secs_f64() * 1e3,
            });
            continue;
        }

        // Candidates merge by agent index regardless of execution order.
        let mut candidates = Vec::with_capacity(m_k);
        let mut fragments = Vec::with_capacity(m_k);
        for (i, agent) in agents.iter().take(m_k).enumerate() {
            let generated = generate_with_retry(*agent, task, state.as_ref(), config.seed, k, i);
            match generated {
                Ok((graph, fragment)) => {
                    candidates.push(graph);
                    fragments.push(fragment);
                    invocations += 1;
                }
                Err(e) => return Err(fail(&records, e.to_string())),
            }
        }

        let (ref_before, ref_after, success, cand_dists) = if k == 1 {
            let cand_dists: Vec<f64> = dists_of(&candidates, eval);
            let chosen = match config.mode {
                RunMode::Oracle => {
                    let eval = eval.expect("checked above");
                    let scored = candidates
                        .iter()
                        .map(|g| eval.evaluate(g))
                        .collect::<Result<Vec<_>>>()
                        .map_err(|e| fail(&records, e.to_string()))?;
                    select_reference(&scored).map_err(|e| fail(&records, e.to_string()))?
                }
                // Without trajectory-level scoring the exploration order is
                // the tie-break: the first candidate seeds the reference.
                RunMode::Judge => 0,
            };
            let fragment = fragments.swap_remove(chosen);
            let trajectory = candidates.swap_remove(chosen);
            let context = SupplementaryContext {
                verified_facts: Default::default(),
                confidences: fragment.confidences,
                tool_logs: fragment.tool_logs,
            };
            let selected = ReferenceState::initial(trajectory, context);
            let d = dist_of(Some(&selected.trajectory), eval);
            state = Some(selected);
            (d, d, false, cand_dists)
        } else {
            let current = state.as_ref().expect("state after round 1");
            let before = dist_of(Some(&current.trajectory), eval);
            let cand_dists: Vec<f64> = dists_of(&candidates, eval);
            let mode = match config.mode {
                RunMode::Oracle => RefineMode::Oracle(eval.expect("checked above")),
                RunMode::Judge => RefineMode::Judge,
            };
            let outcome = refine(
                &task.id,
                current,
                &candidates,
                mode,
                external,
                refine_config,
                config.seed,
            )
            .map_err(|e| fail(&records, e.to_string()))?;
            let mut next = outcome.state;
            merge_fragments(&mut next, &fragments, refine_config);
            let after = dist_of(Some(&next.trajectory), eval);
            let success = if before.is_nan() || after.is_nan() {
                !outcome.winners.is_empty()
            } else {
                after < before
            };
            state = Some(next);
            (before, after, success, cand_dists)
        };

        records.push(RunRecord {
            k,
            m_k,
            cand_dists,
            ref_before,
            ref_after,
            success,
            invocations,
            skipped: false,
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
        });

        if config.early_exit && ref_after == 0.0 {
            exited_early = true;
        }
    }

    // Answer stage: the first agent of the final round's roster speaks.
    let final_state = state.expect("plan is non-empty");
    let answer_agent = agents[0];
    let answer = answer_with_retry(answer_agent, task, &final_state, config.seed)
        .map_err(|e| fail(&records, e.to_string()))?;
    invocations += 1;

    Ok(RunOutput {
        answer,
        records,
        invocations,
    })
}

fn generate_with_retry(
    agent: &dyn AgentPort,
    task: &Task,
    state: Option<&ReferenceState>,
    seed: u64,
    k: usize,
    index: usize,
) -> Result<(TrajectoryGraph, ContextFragment)> {
    let mut last = None;
    for attempt in 0..2u64 {
        let mut rng = substream(seed, &[k as u64, index as u64, attempt]);
        match agent.generate(task, state, &mut rng) {
            Ok(out) => return Ok(out),
            Err(e) => last = Some(e),
        }
    }
    Err(Error::AgentFailed {
        round: k,
        agent: agent.id().to_string(),
        reason: last.expect("two attempts failed").to_string(),
    })
}

fn answer_with_retry(
    agent: &dyn AgentPort,
    task: &Task,
    state: &ReferenceState,
    seed: u64,
) -> Result<String> {
    let mut last = None;
    for attempt in 0..2u64 {
        let mut rng = substream(seed, &[0x415e, attempt]);
        match agent.answer(task, state, &mut rng) {
            Ok(out) => return Ok(out),
            Err(e) => last = Some(e),
        }
    }
    Err(Error::AgentFailed {
        round: 0,
        agent: agent.id().to_string(),
        reason: last.expect("two attempts failed").to_string(),
    })
}

fn dist_of(trajectory: Option<&TrajectoryGraph>, eval: Option<&dyn EvalPort>) -> f64 {
    match (trajectory, eval) {
        (Some(t), Some(e)) => e.evaluate(t).and_then(|v| v.dist()).unwrap_or(f64::NAN),
        _ => f64::NAN,
    }
}

fn dists_of(candidates: &[TrajectoryGraph], eval: Option<&dyn EvalPort>) -> Vec<f64> {
    candidates.iter().map(|c| dist_of(Some(c), eval)).collect()
}

/// Folds the round's candidate fragments into the refined state: tool logs
/// append (capped per round), confidences merge for nodes that made it into
/// the merged trajectory.
fn merge_fragments(
    state: &mut ReferenceState,
    fragments: &[ContextFragment],
    config: &RefineConfig,
) {
    let mut budget = config.tool_log_cap_per_round;
    for fragment in fragments {
        for log in &fragment.tool_logs {
            if budget == 0 {
                return;
            }
            state.context.tool_logs.push(log.clone());
            budget -= 1;
        }
        for (id, confidence) in &fragment.confidences {
            if state.trajectory.node(id).is_some() {
                state.context.confidences.insert(id.clone(), *confidence);
            }
        }
    }
}
