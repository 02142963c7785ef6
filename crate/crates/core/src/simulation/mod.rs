//! Stochastic score models, baseline policies, Monte Carlo verifiers, and
//! simulated graph-level agents.
//!
//! The score-level simulation strips the trajectory machinery down to a
//! single scalar per candidate so the batch-size theory can be checked at
//! desk scale: the reference carries a score in `[0, 1]`, each round draws
//! `M_k` candidate scores from a configurable model, and a policy decides
//! what the next reference score is. Graph-level simulated agents live in
//! [`graph_agent`] and drive the real refinement pipeline instead.

pub mod graph_agent;
mod policy;
mod score_model;
mod stats;
mod verify;

pub use policy::{run_policy, MarineSelection, PolicyKind, PolicySpec, PolicyTrace};
pub use score_model::{
    estimate_improvement_prob, sample_candidates, Estimate, ModelState, ScoreModel,
};
pub use stats::{mann_kendall_z, mean_and_sd, paired_diff};
pub use verify::{
    grid_table, improvement_prob_curve, rl_shift_contrast, simulate_policies,
    verify_conditioning_drift, verify_fixed_budget_ordering, verify_log_growth_guarantee,
    verify_success_prob_grid, ConditioningDriftReport, ContrastReport, FixedBudgetArm,
    FixedBudgetReport, GridCheckRow, LogGrowthReport, PolicySummary, SimulationSummary,
};
