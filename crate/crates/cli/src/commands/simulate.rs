//! The `simulate` command: policy comparisons and ablation sweeps over a
//! seed range, emitting a summary CSV and optional per-run traces.

use anyhow::Result;
use serde::Serialize;

use marine_core::schedule::BatchSchedule;
use marine_core::simulation::{
    run_policy, simulate_policies, MarineSelection, PolicyKind, PolicySpec, ScoreModel,
};

use crate::config::ExperimentConfig;
use crate::output::write_atomic;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sweep {
    /// One roster at one budget: the four standard policies.
    None,
    /// Batch-size ablation: refinement arms at M in {1, 2, 4, 8} under one
    /// budget.
    Batch,
    /// Depth ablation: rounds K in 1..=4 with budget 2K for the refinement
    /// and sequential arms and 2K+1 draws for the oracle selection arm.
    Rounds,
}

impl Sweep {
    pub fn parse(token: &str) -> Option<Self> {
        match token {
            "none" => Some(Sweep::None),
            "batch" => Some(Sweep::Batch),
            "rounds" => Some(Sweep::Rounds),
            _ => None,
        }
    }
}

/// Default head-to-head roster at one budget: batched refinement, noisy
/// best-of-N, sequential self-refinement, and single-sample decoding.
pub fn default_policies(budget: usize) -> Vec<PolicySpec> {
    vec![
        PolicySpec {
            kind: PolicyKind::Marine {
                schedule: BatchSchedule::Constant { m: 2 },
                selection: MarineSelection::Oracle,
                enforce_min_batch: true,
                judge_flip: PolicyKind::DEFAULT_JUDGE_FLIP,
            },
            budget,
        },
        PolicySpec {
            kind: PolicyKind::Bon {
                n: budget,
                selector_flip: PolicyKind::DEFAULT_SELECTOR_FLIP,
            },
            budget,
        },
        PolicySpec {
            kind: PolicyKind::SelfRefine {
                judge_flip: PolicyKind::DEFAULT_JUDGE_FLIP,
            },
            budget,
        },
        PolicySpec {
            kind: PolicyKind::Cot,
            budget,
        },
    ]
}

fn batch_sweep(budget: usize) -> Vec<PolicySpec> {
    [1usize, 2, 4, 8]
        .iter()
        .map(|&m| PolicySpec {
            kind: PolicyKind::Marine {
                schedule: BatchSchedule::Constant { m },
                selection: MarineSelection::Oracle,
                enforce_min_batch: true,
                judge_flip: PolicyKind::DEFAULT_JUDGE_FLIP,
            },
            budget,
        })
        .collect()
}

fn rounds_sweep() -> Vec<PolicySpec> {
    let mut specs = Vec::new();
    for k in 1..=4usize {
        let t = 2 * k;
        specs.push(PolicySpec {
            kind: PolicyKind::Marine {
                schedule: BatchSchedule::Constant { m: 2 },
                selection: MarineSelection::Oracle,
                enforce_min_batch: true,
                judge_flip: PolicyKind::DEFAULT_JUDGE_FLIP,
            },
            budget: t,
        });
        specs.push(PolicySpec {
            kind: PolicyKind::SelfRefine {
                judge_flip: PolicyKind::DEFAULT_JUDGE_FLIP,
            },
            budget: t,
        });
        // The oracle-selection arm has no separate answer call, so its
        // matched budget includes that extra invocation.
        specs.push(PolicySpec {
            kind: PolicyKind::PassNOracle { n: t + 1 },
            budget: t + 1,
        });
    }
    specs
}

#[derive(Serialize)]
struct TraceLine<'a> {
    policy: &'a str,
    param: String,
    trial: usize,
    per_round_best: &'a [f64],
    final_score: f64,
    invocations: usize,
}

pub fn run(config: &ExperimentConfig, sweep: Sweep, traces: bool) -> Result<()> {
    let model: ScoreModel = config.model_or_default();
    let policies = match (sweep, &config.policies) {
        (Sweep::None, Some(list)) => list.clone(),
        (Sweep::None, None) => default_policies(config.budget),
        (Sweep::Batch, _) => batch_sweep(config.budget),
        (Sweep::Rounds, _) => rounds_sweep(),
    };

    let trials = config.simulate_trials();
    let summary = simulate_policies(&policies, &model, trials, config.seed)?;
    write_atomic(&config.out_dir, "summary.csv", &summary.table().to_csv())?;

    if traces {
        let mut lines = String::new();
        for (spec, _) in policies.iter().zip(summary.rows.iter()) {
            for trial in 0..trials {
                let trace = run_policy(spec, &model, config.seed, trial as u64)?;
                let line = TraceLine {
                    policy: spec.kind.name(),
                    param: spec.kind.param_label(),
                    trial,
                    per_round_best: &trace.per_round_best,
                    final_score: trace.final_score,
                    invocations: trace.invocations,
                };
                lines.push_str(&serde_json::to_string(&line)?);
                lines.push('\n');
            }
        }
        write_atomic(&config.out_dir, "traces.jsonl", &lines)?;
    }

    for row in &summary.rows {
        println!(
            "{:<14} {:<10} budget {:<3} mean {:.4} ci [{:.4}, {:.4}]",
            row.policy, row.param, row.budget, row.mean, row.ci_lo, row.ci_hi,
        );
    }
    Ok(())
}
