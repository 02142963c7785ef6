//! The `run` command: executes the full exploration / enhancement / answer
//! pipeline against a configured chat-completions endpoint (or a scripted
//! stub), printing the answer and persisting run records plus transcripts.

use std::path::Path;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use serde::Deserialize;

use marine_core::llm::{
    DiversityProfile, EndpointSession, LlmAgent, LlmVerifier, TemperatureTier, PROMPT_CATALOG,
};
use marine_core::orchestrator::{budget_plan, AgentPort, RunConfig, RunMode, Task};
use marine_core::refine::RefineConfig;
use marine_core::schedule::BatchSchedule;

use crate::config::ExperimentConfig;
use crate::output::write_atomic;

/// Task file schema: the question plus the evaluation dimension count.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskFile {
    pub id: String,
    pub question: String,
    #[serde(default = "default_j")]
    pub j: usize,
}

fn default_j() -> usize {
    3
}

pub struct RunArgs {
    pub task_path: std::path::PathBuf,
    pub batch: usize,
    pub mode: RunMode,
    pub dry_run: bool,
}

/// Exit-3 marker: endpoint, auth, or agent failures.
#[derive(Debug)]
pub struct TransportFailure(pub String);

impl std::fmt::Display for TransportFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for TransportFailure {}

pub fn run(config: &ExperimentConfig, args: &RunArgs) -> Result<()> {
    let schedule = BatchSchedule::Constant { m: args.batch };
    let plan = budget_plan(config.budget, &schedule)?;

    if args.dry_run {
        println!(
            "budget plan for T = {}: {} rounds {:?} ({} invocations + 1 answer call)",
            config.budget,
            plan.len(),
            plan,
            plan.iter().sum::<usize>(),
        );
        return Ok(());
    }

    let task_file = read_task(&args.task_path)?;
    let task = Task::new(task_file.id.clone(), task_file.question.clone());

    let endpoint = config.endpoint.clone().ok_or_else(|| {
        anyhow!("run requires an endpoint config (file `endpoint` section or --endpoint-url)")
    })?;
    let session = Arc::new(
        EndpointSession::connect(endpoint).map_err(|e| anyhow!(TransportFailure(e.to_string())))?,
    );

    // Roster: as many agents as the widest round, profiles cycling through
    // the preference catalog and temperature tiers.
    let widest = plan.iter().copied().max().unwrap_or(0);
    let tiers = [
        TemperatureTier::Reliable,
        TemperatureTier::Balanced,
        TemperatureTier::Exploratory,
    ];
    let agents: Vec<LlmAgent> = (0..widest)
        .map(|i| {
            let profile = DiversityProfile::new(
                PROMPT_CATALOG[i % PROMPT_CATALOG.len()].0,
                tiers[i % tiers.len()],
            );
            LlmAgent::new(format!("agent-{i}"), task_file.j, profile, session.clone())
        })
        .collect();
    let roster: Vec<&dyn AgentPort> = agents.iter().map(|a| a as &dyn AgentPort).collect();

    let run_config = RunConfig {
        total_budget: config.budget,
        schedule,
        mode: args.mode,
        seed: config.seed,
        early_exit: false,
    };
    let mut verifier = LlmVerifier::new(session.clone());

    let outcome = marine_core::orchestrator::run(
        &task,
        &run_config,
        &roster,
        None,
        &mut verifier,
        &RefineConfig::default(),
    );

    let (records, result) = match outcome {
        Ok(output) => {
            let records = output.records;
            (records, Ok((output.answer, output.invocations)))
        }
        Err(failure) => {
            let diagnostic = failure.diagnostic.clone();
            (failure.records, Err(diagnostic))
        }
    };

    let mut record_lines = String::new();
    for record in &records {
        record_lines.push_str(&serde_json::to_string(record)?);
        record_lines.push('\n');
    }
    write_atomic(&config.out_dir, "run_records.jsonl", &record_lines)?;

    let mut transcript_lines = String::new();
    for t in session.transcripts() {
        transcript_lines.push_str(&serde_json::to_string(&t)?);
        transcript_lines.push('\n');
    }
    write_atomic(&config.out_dir, "transcripts.jsonl", &transcript_lines)?;

    match result {
        Ok((answer, invocations)) => {
            println!("{answer}");
            eprintln!(
                "rounds: {}, invocations: {invocations}, transcripts: {}",
                records.len(),
                session.transcripts().len(),
            );
            Ok(())
        }
        Err(diagnostic) => bail!(TransportFailure(diagnostic)),
    }
}

fn read_task(path: &Path) -> Result<TaskFile> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading task file {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing task file {}", path.display()))
}
