//! `marine`: theory verification, policy simulation, and endpoint-backed
//! runs for the reference-trajectory refinement engine.
//!
//! Exit codes: 0 all checks passed, 1 a check failed, 2 configuration error,
//! 3 endpoint/transport error.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::anyhow;
use clap::{Args, Parser, Subcommand};

use commands::run::{RunArgs, TransportFailure};
use commands::simulate::Sweep;
use commands::verify::CheckId;
use config::ExperimentConfig;
use marine_core::orchestrator::RunMode;
use marine_core::simulation::ScoreModel;

const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_TRANSPORT: u8 = 3;

#[derive(Parser)]
#[command(
    name = "marine",
    version,
    about = "Iterative reference-trajectory refinement: verification, simulation, and endpoint runs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonFlags {
    /// JSON experiment config; flags override file values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed (all randomness derives from it; never time-based).
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo trials / simulated runs.
    #[arg(long)]
    trials: Option<usize>,
    /// Output directory for reports, verdicts, and traces.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Invocation budget (excluding the answer call).
    #[arg(long)]
    budget: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one verification suite: 2 (fixed-budget ordering), 3 (log-growth
    /// guarantee), prop1 (conditioning drift), appendixA (gain analytics),
    /// appendixB (tail bounds).
    Verify {
        /// Suite id: 2 | 3 | prop1 | appendixA | appendixB.
        check: String,
        #[command(flatten)]
        common: CommonFlags,
        /// Improvement probability for the fixed-budget suite.
        #[arg(long)]
        p: Option<f64>,
        /// Batch-size arms, e.g. `--m-grid 1,2,4,8`.
        #[arg(long, value_delimiter = ',')]
        m_grid: Option<Vec<usize>>,
        /// Improvement-probability floor for the log-growth suite.
        #[arg(long)]
        p_floor: Option<f64>,
        /// Failure budget for the log-growth suite.
        #[arg(long)]
        delta: Option<f64>,
        /// Round horizon for the log-growth suite.
        #[arg(long)]
        horizon: Option<usize>,
        /// Rounds for the conditioning-drift suite.
        #[arg(long)]
        rounds: Option<usize>,
    },
    /// Compare inference policies under a fixed budget, or sweep ablations.
    Simulate {
        #[command(flatten)]
        common: CommonFlags,
        /// Ablation sweep: none | batch | rounds.
        #[arg(long, default_value = "none")]
        sweep: String,
        /// Also write per-run traces.jsonl.
        #[arg(long)]
        traces: bool,
        /// Score model as inline JSON, e.g.
        /// '{"mode":"analytic","p":0.3}'.
        #[arg(long)]
        model: Option<String>,
    },
    /// Execute the full pipeline for one task against an endpoint.
    Run {
        /// Task file: {"id", "question", "j"}.
        #[arg(long)]
        task: PathBuf,
        #[command(flatten)]
        common: CommonFlags,
        /// Chat-completions URL, or stub://<responses.json> for offline runs.
        #[arg(long)]
        endpoint_url: Option<String>,
        /// Model name sent in request bodies.
        #[arg(long)]
        model: Option<String>,
        /// Env var holding the bearer token.
        #[arg(long)]
        auth_env: Option<String>,
        /// Per-round batch size.
        #[arg(long, default_value_t = 2)]
        batch: usize,
        /// Winner selection: judge (default; no oracle available) | oracle.
        #[arg(long, default_value = "judge")]
        mode: String,
        /// Print the budget plan without calling any agent.
        #[arg(long)]
        dry_run: bool,
    },
}

fn apply_common(config: &mut ExperimentConfig, flags: &CommonFlags) {
    if let Some(seed) = flags.seed {
        config.seed = seed;
    }
    if let Some(trials) = flags.trials {
        config.trials = Some(trials);
    }
    if let Some(dir) = &flags.out_dir {
        config.out_dir = dir.clone();
    }
    if let Some(budget) = flags.budget {
        config.budget = budget;
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_CHECK_FAILED),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<TransportFailure>().is_some()
                || e.downcast_ref::<marine_core::llm::TransportError>()
                    .is_some()
            {
                ExitCode::from(EXIT_TRANSPORT)
            } else {
                // Everything else that aborts a command is a configuration
                // problem: bad flags, bad file, out-of-range parameters.
                ExitCode::from(EXIT_CONFIG)
            }
        }
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Verify {
            check,
            common,
            p,
            m_grid,
            p_floor,
            delta,
            horizon,
            rounds,
        } => {
            let check = CheckId::parse(&check).ok_or_else(|| {
                anyhow!("unknown check {check:?}; expected 2 | 3 | prop1 | appendixA | appendixB")
            })?;
            let mut config = ExperimentConfig::load_or_default(common.config.as_deref())?;
            apply_common(&mut config, &common);
            if let Some(p) = p {
                config.verify.p = p;
            }
            if let Some(grid) = m_grid {
                config.verify.m_grid = grid;
            }
            if let Some(budget) = common.budget {
                config.verify.budget = budget;
            }
            if let Some(p_floor) = p_floor {
                config.verify.p_floor = p_floor;
            }
            if let Some(delta) = delta {
                config.verify.delta = delta;
            }
            if let Some(horizon) = horizon {
                config.verify.horizon = horizon;
            }
            if let Some(rounds) = rounds {
                config.verify.rounds = rounds;
            }
            commands::verify::run(check, &config)
        }
        Command::Simulate {
            common,
            sweep,
            traces,
            model,
        } => {
            let sweep = Sweep::parse(&sweep).ok_or_else(|| {
                anyhow!("unknown sweep {sweep:?}; expected none | batch | rounds")
            })?;
            let mut config = ExperimentConfig::load_or_default(common.config.as_deref())?;
            apply_common(&mut config, &common);
            if let Some(text) = model {
                let parsed: ScoreModel = serde_json::from_str(&text)?;
                parsed.validate()?;
                config.model = Some(parsed);
            }
            commands::simulate::run(&config, sweep, traces)?;
            Ok(true)
        }
        Command::Run {
            task,
            common,
            endpoint_url,
            model,
            auth_env,
            batch,
            mode,
            dry_run,
        } => {
            let mut config = ExperimentConfig::load_or_default(common.config.as_deref())?;
            apply_common(&mut config, &common);
            if config.endpoint.is_none() && endpoint_url.is_some() {
                config.endpoint = Some(marine_core::llm::EndpointConfig {
                    base_url: String::new(),
                    model: "default".to_string(),
                    auth_env: "MARINE_API_TOKEN".to_string(),
                    timeout_secs: 60,
                    retries: 2,
                    max_tokens: 4096,
                    temperatures: None,
                    max_context_chars: 120_000,
                });
            }
            if let Some(endpoint) = config.endpoint.as_mut() {
                if let Some(url) = endpoint_url {
                    endpoint.base_url = url;
                }
                if let Some(model) = model {
                    endpoint.model = model;
                }
                if let Some(auth_env) = auth_env {
                    endpoint.auth_env = auth_env;
                }
            }
            let mode = match mode.as_str() {
                "judge" => RunMode::Judge,
                "oracle" => RunMode::Oracle,
                other => return Err(anyhow!("unknown mode {other:?}; expected judge | oracle")),
            };
            commands::run::run(
                &config,
                &RunArgs {
                    task_path: task,
                    batch,
                    mode,
                    dry_run,
                },
            )?;
            Ok(true)
        }
    }
}
