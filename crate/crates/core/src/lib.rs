//! Test-time refinement engine built around a persistent reference trajectory.
//!
//! Instead of decoding once or sampling N independent answers, the engine keeps
//! a single best-known reasoning trajectory and spends its invocation budget in
//! small batches of candidate generations, merging dimension-wise improvements
//! back into the reference. The crate ships four layers:
//!
//! - [`trajectory`] / [`evaluator`] / [`mod@refine`]: the graph data model, the
//!   per-dimension error vector, and the alignment → conflict detection →
//!   resolution → segment-integration pipeline that implements the refinement
//!   operator.
//! - [`schedule`]: batch-size policies (constant, minimal-feasible,
//!   log-growth) and the analytic functions behind them (per-invocation gain,
//!   success probability, tail bounds).
//! - [`orchestrator`]: the budgeted exploration → recursive-enhancement →
//!   answer state machine with full run logging.
//! - [`simulation`]: stochastic score models, baseline policies (CoT, BoN,
//!   Self-Refine, oracle pass@N), and Monte Carlo verifiers for the batch-size
//!   theory.
//!
//! [`llm`] adapts the same orchestration to a chat-completions endpoint; the
//! simulation and verification paths never require it.
//!
//! Everything is deterministic given a seed: randomness flows through
//! explicitly keyed ChaCha substreams (see [`rng`]).

pub mod error;
pub mod evaluator;
pub mod llm;
pub mod orchestrator;
pub mod refine;
pub mod report;
pub mod rng;
pub mod schedule;
pub mod simulation;
pub mod trajectory;

pub use error::{Error, Result};
pub use evaluator::{dimension_argmin, evaluate, select_reference, IdealTrajectory, JudgeNoise};
pub use refine::{
    refine, Conflict, ConflictKind, FactsLedger, RefineConfig, RefineMode, Resolution,
};
pub use schedule::{
    batch_size, failure_tail_bound, gain_per_invocation, min_start_round, success_prob,
    BatchSchedule, TheoryParams,
};
pub use trajectory::{
    align_nodes, dist, validate_graph, Cell, EvaluationVector, NodeId, NodeKind, ReferenceState,
    SourceId, SourceRef, TrajectoryGraph, TrajectoryNode,
};
