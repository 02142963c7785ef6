//! Monte Carlo verifiers for the batch-size theory and the score-dynamics
//! claims, plus the policy-comparison harness.
//!
//! Every verifier consumes a seed, runs a deterministic experiment, and
//! returns a report exposing named checks (for the verdict block) and CSV
//! tables (for the report files). Thresholds are pinned here, not in callers.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::report::{fmt_f64, fmt_usize, CheckResult, CsvTable};
use crate::rng::substream;
use crate::schedule::{
    batch_size, failure_tail_bound, gain_per_invocation, min_start_round, success_prob,
    BatchSchedule,
};

use super::policy::{run_policy, PolicyKind, PolicySpec};
use super::score_model::{sample_score, ScoreModel};
use super::stats::{mann_kendall_z, mean_and_sd, paired_diff, Z_95, Z_CI_95};

/// One `(p, M)` grid point comparing the closed form against Monte Carlo.
#[derive(Debug, Clone, Serialize)]
pub struct GridCheckRow {
    pub p: f64,
    pub m: usize,
    pub closed_form: f64,
    pub estimate: f64,
    pub se: f64,
    pub abs_err: f64,
    pub bound: f64,
    pub pass: bool,
}

/// Closed-form vs Monte Carlo check of the round success probability over a
/// `(p, M)` grid: `|estimate - (1 - (1-p)^M)| <= 4 * binomial SE`.
pub fn verify_success_prob_grid(
    p_grid: &[f64],
    m_grid: &[usize],
    trials: usize,
    seed: u64,
) -> Result<Vec<GridCheckRow>> {
    if p_grid.is_empty() || m_grid.is_empty() {
        return Err(Error::invalid("grid", "p and M grids must be non-empty"));
    }
    let mut rows = Vec::with_capacity(p_grid.len() * m_grid.len());
    for (pi, &p) in p_grid.iter().enumerate() {
        for (mi, &m) in m_grid.iter().enumerate() {
            let closed = success_prob(p, m);
            let mut rng = substream(seed, &[pi as u64, mi as u64]);
            let mut hits = 0usize;
            for _ in 0..trials {
                let succeeded = (0..m).any(|_| rng.random::<f64>() < p);
                if succeeded {
                    hits += 1;
                }
            }
            let estimate = hits as f64 / trials as f64;
            let se = (closed * (1.0 - closed) / trials as f64).sqrt();
            let abs_err = (estimate - closed).abs();
            let bound = 4.0 * se;
            rows.push(GridCheckRow {
                p,
                m,
                closed_form: closed,
                estimate,
                se,
                abs_err,
                bound,
                pass: abs_err <= bound,
            });
        }
    }
    Ok(rows)
}

pub fn grid_table(rows: &[GridCheckRow]) -> CsvTable {
    let mut t = CsvTable::new(
        "success_prob_grid",
        vec![
            "p",
            "m",
            "closed_form",
            "estimate",
            "se",
            "abs_err",
            "bound",
            "pass",
        ],
    );
    for r in rows {
        t.push(vec![
            fmt_f64(r.p),
            fmt_usize(r.m),
            fmt_f64(r.closed_form),
            fmt_f64(r.estimate),
            fmt_f64(r.se),
            fmt_f64(r.abs_err),
            fmt_f64(r.bound),
            r.pass.to_string(),
        ]);
    }
    t
}

/// One Monte Carlo arm of the fixed-budget ordering experiment.
#[derive(Debug, Clone, Serialize)]
pub struct FixedBudgetArm {
    pub m: usize,
    /// True when the arm ran with comparative selection disabled (batch of
    /// one under minimum-batch enforcement).
    pub judged_fallback: bool,
    pub gain_per_invocation: f64,
    pub mean_final: f64,
    pub sd: f64,
    pub se: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FixedBudgetReport {
    pub p: f64,
    pub budget: usize,
    pub trials: usize,
    /// Closed-form per-invocation gain strictly decreases over the grid.
    pub analytic_pass: bool,
    pub arms: Vec<FixedBudgetArm>,
    /// Mean final scores non-increasing over the comparative arms (m >= 2).
    pub ordering_pass: bool,
    /// 95% CIs of the smallest and largest comparative arms do not overlap.
    pub separation_pass: bool,
    /// Batch-of-one arm underperforms the minimal feasible batch by more
    /// than twice the paired standard error (present when the grid has both).
    pub m1_gap: Option<(f64, f64)>,
    pub m1_pass: Option<bool>,
}

/// Fixed-budget ordering experiment at one `p`: analytic decrease of the
/// per-invocation gain over the grid, plus paired-seed Monte Carlo means of
/// the final reference score per batch size under a common total budget.
pub fn verify_fixed_budget_ordering(
    p: f64,
    m_grid: &[usize],
    budget: usize,
    trials: usize,
    seed: u64,
) -> Result<FixedBudgetReport> {
    if !(p > 0.0 && p < 0.5) {
        return Err(Error::invalid(
            "p",
            format!("{p} outside (0, 0.5) required by the fixed-budget ordering analysis"),
        ));
    }
    if m_grid.is_empty() {
        return Err(Error::invalid("m_grid", "must be non-empty"));
    }
    let mut m_sorted: Vec<usize> = m_grid.to_vec();
    m_sorted.sort_unstable();
    m_sorted.dedup();

    let analytic_pass = m_sorted
        .windows(2)
        .all(|w| gain_per_invocation(p, w[1]) < gain_per_invocation(p, w[0]));

    let model = ScoreModel::Analytic {
        p,
        p_schedule: None,
        gain: 0.01,
        loss: 0.01,
        r1: 0.5,
    };
    let mut finals: Vec<Vec<f64>> = Vec::with_capacity(m_sorted.len());
    let mut arms = Vec::with_capacity(m_sorted.len());
    for &m in &m_sorted {
        let spec = PolicySpec {
            kind: PolicyKind::marine_default(m)?,
            budget,
        };
        let mut arm_finals = Vec::with_capacity(trials);
        for trial in 0..trials {
            arm_finals.push(run_policy(&spec, &model, seed, trial as u64)?.final_score);
        }
        let (mean, sd) = mean_and_sd(&arm_finals);
        let se = sd / (trials as f64).sqrt();
        arms.push(FixedBudgetArm {
            m,
            judged_fallback: m == 1,
            gain_per_invocation: gain_per_invocation(p, m),
            mean_final: mean,
            sd,
            se,
            ci_lo: mean - Z_CI_95 * se,
            ci_hi: mean + Z_CI_95 * se,
        });
        finals.push(arm_finals);
    }

    let comparative: Vec<usize> = (0..m_sorted.len()).filter(|&i| m_sorted[i] >= 2).collect();
    let ordering_pass = comparative
        .windows(2)
        .all(|w| arms[w[0]].mean_final >= arms[w[1]].mean_final);
    let separation_pass = match (comparative.first(), comparative.last()) {
        (Some(&lo), Some(&hi)) if lo != hi => arms[lo].ci_lo > arms[hi].ci_hi,
        _ => true, // degenerate grid: vacuous
    };

    let (m1_gap, m1_pass) = match (
        m_sorted.iter().position(|&m| m == 1),
        m_sorted.iter().position(|&m| m == 2),
    ) {
        (Some(i1), Some(i2)) => {
            let (diff, se) = paired_diff(&finals[i2], &finals[i1]);
            (Some((diff, se)), Some(diff > 2.0 * se))
        }
        _ => (None, None),
    };

    Ok(FixedBudgetReport {
        p,
        budget,
        trials,
        analytic_pass,
        arms,
        ordering_pass,
        separation_pass,
        m1_gap,
        m1_pass,
    })
}

impl FixedBudgetReport {
    pub fn checks(&self) -> Vec<CheckResult> {
        let mut checks = vec![
            CheckResult::new(
                "analytic_gain_strictly_decreasing",
                self.analytic_pass,
                if self.analytic_pass { 1.0 } else { 0.0 },
                1.0,
            ),
            CheckResult::new(
                "mc_mean_ordering_non_increasing_in_m",
                self.ordering_pass,
                if self.ordering_pass { 1.0 } else { 0.0 },
                1.0,
            ),
        ];
        if let (Some(&first), Some(&last)) = (
            self.arms.iter().find(|a| a.m >= 2).map(|a| &a.ci_lo),
            self.arms.last().map(|a| &a.ci_hi),
        ) {
            checks.push(CheckResult::new(
                "mc_ci_separation_smallest_vs_largest",
                self.separation_pass,
                first - last,
                0.0,
            ));
        }
        if let (Some((gap, se)), Some(pass)) = (self.m1_gap, self.m1_pass) {
            checks.push(CheckResult::new("m1_underperforms_m2", pass, gap, 2.0 * se));
        }
        checks
    }

    pub fn table(&self) -> CsvTable {
        let mut t = CsvTable::new(
            "fixed_budget_arms",
            vec![
                "p",
                "m",
                "judged_fallback",
                "gain_per_invocation",
                "mean_final",
                "sd",
                "se",
                "ci_lo",
                "ci_hi",
            ],
        );
        for a in &self.arms {
            t.push(vec![
                fmt_f64(self.p),
                fmt_usize(a.m),
                a.judged_fallback.to_string(),
                fmt_f64(a.gain_per_invocation),
                fmt_f64(a.mean_final),
                fmt_f64(a.sd),
                fmt_f64(a.se),
                fmt_f64(a.ci_lo),
                fmt_f64(a.ci_hi),
            ]);
        }
        t
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LogGrowthRound {
    pub k: usize,
    pub m_k: usize,
    pub failure_bound: f64,
    pub inverse_k_squared: f64,
    pub empirical_failure_rate: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LogGrowthReport {
    pub p_floor: f64,
    pub delta: f64,
    pub k_max: usize,
    pub trials: usize,
    pub start_round: usize,
    /// Fraction of trials with at least one failure round in the monitored
    /// window `[start_round, k_max]` under the log-growth schedule.
    pub observed_failure_fraction: f64,
    pub threshold: f64,
    /// Same fraction for the constant-batch control arm.
    pub control_p: f64,
    pub control_failure_fraction: f64,
    pub per_round: Vec<LogGrowthRound>,
}

/// Unlimited-budget guarantee experiment: under the log-growth schedule with
/// `p_k = p_floor`, the fraction of trials with any failure round at or
/// beyond the computed start round must stay within `delta` plus Monte Carlo
/// slack. A constant-batch control arm at a weaker floor shows the growth is
/// doing the work.
pub fn verify_log_growth_guarantee(
    p_floor: f64,
    delta: f64,
    k_max: usize,
    trials: usize,
    seed: u64,
    control_p: f64,
) -> Result<LogGrowthReport> {
    if !(p_floor > 0.0 && p_floor < 1.0) {
        return Err(Error::invalid(
            "p_floor",
            format!("{p_floor} outside (0, 1)"),
        ));
    }
    let start_round = min_start_round(delta)?;
    if k_max < start_round {
        return Err(Error::invalid(
            "k_max",
            format!("horizon {k_max} ends before monitored window starts at {start_round}"),
        ));
    }

    let schedule = BatchSchedule::log_growth(p_floor)?;
    let batch_sizes: Vec<usize> = (1..=k_max).map(|k| batch_size(&schedule, k)).collect();

    let mut window_failures = 0usize;
    let mut per_round_failures = vec![0usize; k_max];
    for trial in 0..trials {
        let mut rng = substream(seed, &[1, trial as u64]);
        let mut failed_in_window = false;
        for (idx, &m) in batch_sizes.iter().enumerate() {
            let k = idx + 1;
            let succeeded = (0..m).any(|_| rng.random::<f64>() < p_floor);
            if !succeeded {
                per_round_failures[idx] += 1;
                if k >= start_round {
                    failed_in_window = true;
                }
            }
        }
        if failed_in_window {
            window_failures += 1;
        }
    }
    let observed = window_failures as f64 / trials as f64;
    let threshold = delta + 3.0 * (delta / trials as f64).sqrt();

    // Control: minimal constant batches with a weaker improvement floor.
    let mut control_failures = 0usize;
    for trial in 0..trials {
        let mut rng = substream(seed, &[2, trial as u64]);
        let mut failed_in_window = false;
        for k in 1..=k_max {
            let succeeded = (0..2).any(|_| rng.random::<f64>() < control_p);
            if !succeeded && k >= start_round {
                failed_in_window = true;
            }
        }
        if failed_in_window {
            control_failures += 1;
        }
    }
    let control_fraction = control_failures as f64 / trials as f64;

    let per_round = (1..=k_max)
        .map(|k| LogGrowthRound {
            k,
            m_k: batch_sizes[k - 1],
            failure_bound: 1.0 - success_prob(p_floor, batch_sizes[k - 1]),
            inverse_k_squared: 1.0 / (k as f64 * k as f64),
            empirical_failure_rate: per_round_failures[k - 1] as f64 / trials as f64,
        })
        .collect();

    Ok(LogGrowthReport {
        p_floor,
        delta,
        k_max,
        trials,
        start_round,
        observed_failure_fraction: observed,
        threshold,
        control_p,
        control_failure_fraction: control_fraction,
        per_round,
    })
}

impl LogGrowthReport {
    pub fn checks(&self) -> Vec<CheckResult> {
        vec![
            CheckResult::new(
                "window_failure_fraction_within_delta",
                self.observed_failure_fraction <= self.threshold,
                self.observed_failure_fraction,
                self.threshold,
            ),
            CheckResult::new(
                "union_bound_holds",
                self.observed_failure_fraction
                    <= failure_tail_bound(self.start_round).unwrap_or(f64::INFINITY),
                self.observed_failure_fraction,
                failure_tail_bound(self.start_round).unwrap_or(f64::INFINITY),
            ),
            CheckResult::new(
                "constant_batch_control_exceeds_delta",
                self.control_failure_fraction > self.delta,
                self.control_failure_fraction,
                self.delta,
            ),
        ]
    }

    pub fn table(&self) -> CsvTable {
        let mut t = CsvTable::new(
            "log_growth_failure_curve",
            vec![
                "k",
                "m_k",
                "failure_bound",
                "inverse_k_squared",
                "empirical_failure_rate",
            ],
        );
        for r in &self.per_round {
            t.push(vec![
                fmt_usize(r.k),
                fmt_usize(r.m_k),
                fmt_f64(r.failure_bound),
                fmt_f64(r.inverse_k_squared),
                fmt_f64(r.empirical_failure_rate),
            ]);
        }
        t
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditioningDriftReport {
    pub rounds: usize,
    pub trials: usize,
    pub batch: usize,
    pub burn_in: usize,
    /// Per-round probability that a fresh candidate beats the reference.
    pub p_hat: Vec<f64>,
    pub p_hat_trend_z: f64,
    /// Mean reference score entering each round.
    pub mean_reference: Vec<f64>,
    /// Mean generation-mean parameter entering each round.
    pub mean_mu: Vec<f64>,
    /// Mean reference-minus-mean-parameter gap after each round.
    pub gap_param: Vec<f64>,
    /// Mean reference-minus-realized-candidate-mean gap per round (the
    /// distribution's actual mean, which truncation pulls below the
    /// parameter).
    pub gap_actual: Vec<f64>,
    pub gap_trend_z: f64,
    pub gap_all_positive: bool,
}

/// Conditioning-drift experiment: runs the refinement process under the
/// conditioning model and tests that the per-round improvement probability
/// trends downward while the reference stays strictly above the generation
/// mean. The gap trend is evaluated after a short burn-in because the
/// configured initial gap is arbitrary; the claim is about the process,
/// not the starting point.
pub fn verify_conditioning_drift(
    model: &ScoreModel,
    rounds: usize,
    trials: usize,
    seed: u64,
) -> Result<ConditioningDriftReport> {
    if !matches!(model, ScoreModel::Conditioning { .. }) {
        return Err(Error::RequiresConditioningMode);
    }
    model.validate()?;
    if rounds < 10 {
        return Err(Error::invalid(
            "rounds",
            "trend analysis needs >= 10 rounds",
        ));
    }
    let batch = 2usize;
    let burn_in = 5usize;

    let mut beat_counts = vec![0usize; rounds];
    let mut ref_sums = vec![0.0f64; rounds];
    let mut mu_sums = vec![0.0f64; rounds];
    let mut gap_param_sums = vec![0.0f64; rounds];
    let mut first_draw_sums = vec![0.0f64; rounds];

    for trial in 0..trials {
        let mut state = model.initial_state();
        let mut rng = substream(seed, &[3, trial as u64]);
        for k in 0..rounds {
            ref_sums[k] += state.reference;
            mu_sums[k] += state.mu;
            let draws: Vec<f64> = (0..batch)
                .map(|_| sample_score(&state, model, &mut rng))
                .collect();
            first_draw_sums[k] += draws[0];
            if draws[0] > state.reference {
                beat_counts[k] += 1;
            }
            let best = draws.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if best > state.reference {
                state.reference = best;
            }
            state.advance(model);
            gap_param_sums[k] += state.reference - state.mu;
        }
    }

    let n = trials as f64;
    let p_hat: Vec<f64> = beat_counts.iter().map(|c| *c as f64 / n).collect();
    let mean_reference: Vec<f64> = ref_sums.iter().map(|s| s / n).collect();
    let mean_mu: Vec<f64> = mu_sums.iter().map(|s| s / n).collect();
    let gap_param: Vec<f64> = gap_param_sums.iter().map(|s| s / n).collect();
    // Reference entering round k+1 minus the realized mean of round-(k+1)
    // candidates.
    let gap_actual: Vec<f64> = (1..rounds)
        .map(|k| mean_reference[k] - first_draw_sums[k] / n)
        .collect();

    let p_hat_trend_z = mann_kendall_z(&p_hat);
    let gap_window = &gap_actual[burn_in.min(gap_actual.len().saturating_sub(1))..];
    let gap_trend_z = mann_kendall_z(gap_window);
    let gap_all_positive = gap_param.iter().all(|g| *g > 0.0);

    Ok(ConditioningDriftReport {
        rounds,
        trials,
        batch,
        burn_in,
        p_hat,
        p_hat_trend_z,
        mean_reference,
        mean_mu,
        gap_param,
        gap_actual,
        gap_trend_z,
        gap_all_positive,
    })
}

impl ConditioningDriftReport {
    pub fn checks(&self) -> Vec<CheckResult> {
        vec![
            CheckResult::new(
                "improvement_prob_trend_non_increasing",
                self.p_hat_trend_z <= -Z_95,
                self.p_hat_trend_z,
                -Z_95,
            ),
            CheckResult::new(
                "reference_stays_above_generation_mean",
                self.gap_all_positive,
                if self.gap_all_positive { 1.0 } else { 0.0 },
                1.0,
            ),
            CheckResult::new(
                "reference_mean_gap_non_decreasing_after_burn_in",
                self.gap_trend_z >= -Z_95,
                self.gap_trend_z,
                -Z_95,
            ),
        ]
    }

    pub fn table(&self) -> CsvTable {
        let mut t = CsvTable::new(
            "conditioning_drift",
            vec![
                "k",
                "p_hat",
                "mean_reference",
                "mean_mu",
                "gap_param",
                "gap_actual",
            ],
        );
        for k in 0..self.rounds {
            t.push(vec![
                fmt_usize(k + 1),
                fmt_f64(self.p_hat[k]),
                fmt_f64(self.mean_reference[k]),
                fmt_f64(self.mean_mu[k]),
                fmt_f64(self.gap_param[k]),
                fmt_f64(if k + 1 < self.rounds {
                    self.gap_actual[k]
                } else {
                    f64::NAN
                }),
            ]);
        }
        t
    }
}

/// Per-round improvement-probability curve under any model, without the
/// conditioning-only assertions; the comparison point is the model's own
/// reference (the distribution mean in mean-shift mode).
pub fn improvement_prob_curve(
    model: &ScoreModel,
    rounds: usize,
    trials: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    model.validate()?;
    let mut beat_counts = vec![0usize; rounds];
    for trial in 0..trials {
        let mut state = model.initial_state();
        let mut rng = substream(seed, &[4, trial as u64]);
        for count in beat_counts.iter_mut() {
            let draw = sample_score(&state, model, &mut rng);
            if draw > state.reference {
                *count += 1;
            }
            if !matches!(model, ScoreModel::RlShift { .. }) {
                let second = sample_score(&state, model, &mut rng);
                let best = draw.max(second);
                if best > state.reference {
                    state.reference = best;
                }
            }
            state.advance(model);
        }
    }
    Ok(beat_counts
        .iter()
        .map(|c| *c as f64 / trials as f64)
        .collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct ContrastReport {
    pub rounds: usize,
    pub trials: usize,
    pub p_hat: Vec<f64>,
    pub band: f64,
    pub max_abs_deviation: f64,
    pub pass: bool,
}

/// Mean-shift contrast: the improvement probability against the moving mean
/// must sit flat at one half, within the configured band.
pub fn rl_shift_contrast(
    model: &ScoreModel,
    rounds: usize,
    trials: usize,
    seed: u64,
    band: f64,
) -> Result<ContrastReport> {
    if !matches!(model, ScoreModel::RlShift { .. }) {
        return Err(Error::invalid("model", "contrast runs the mean-shift mode"));
    }
    let p_hat = improvement_prob_curve(model, rounds, trials, seed)?;
    let max_abs_deviation = p_hat.iter().map(|p| (p - 0.5).abs()).fold(0.0f64, f64::max);
    Ok(ContrastReport {
        rounds,
        trials,
        p_hat: p_hat.clone(),
        band,
        max_abs_deviation,
        pass: max_abs_deviation <= band,
    })
}

impl ContrastReport {
    pub fn check(&self) -> CheckResult {
        CheckResult::new(
            "mean_shift_improvement_prob_flat_at_half",
            self.pass,
            self.max_abs_deviation,
            self.band,
        )
    }

    pub fn table(&self) -> CsvTable {
        let mut t = CsvTable::new("mean_shift_contrast", vec!["k", "p_hat"]);
        for (k, p) in self.p_hat.iter().enumerate() {
            t.push(vec![fmt_usize(k + 1), fmt_f64(*p)]);
        }
        t
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PolicySummary {
    pub policy: String,
    pub param: String,
    pub budget: usize,
    pub trials: usize,
    pub mean: f64,
    pub sd: f64,
    pub se: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

#[derive(Debug, Clone)]
pub struct SimulationSummary {
    pub rows: Vec<PolicySummary>,
    /// Per-policy, per-trial final scores, aligned with `rows`; kept for
    /// paired comparisons.
    pub finals: Vec<Vec<f64>>,
}

/// Runs every policy over the trial range with common random numbers and
/// summarizes final scores.
pub fn simulate_policies(
    policies: &[PolicySpec],
    model: &ScoreModel,
    trials: usize,
    seed: u64,
) -> Result<SimulationSummary> {
    let mut rows = Vec::with_capacity(policies.len());
    let mut finals = Vec::with_capacity(policies.len());
    for spec in policies {
        let mut scores = Vec::with_capacity(trials);
        for trial in 0..trials {
            scores.push(run_policy(spec, model, seed, trial as u64)?.final_score);
        }
        let (mean, sd) = mean_and_sd(&scores);
        let se = sd / (trials as f64).sqrt();
        rows.push(PolicySummary {
            policy: spec.kind.name().to_string(),
            param: spec.kind.param_label(),
            budget: spec.budget,
            trials,
            mean,
            sd,
            se,
            ci_lo: mean - Z_CI_95 * se,
            ci_hi: mean + Z_CI_95 * se,
        });
        finals.push(scores);
    }
    Ok(SimulationSummary { rows, finals })
}

impl SimulationSummary {
    pub fn table(&self) -> CsvTable {
        let mut t = CsvTable::new(
            "policy_summary",
            vec![
                "policy", "param", "budget", "trials", "mean", "sd", "se", "ci_lo", "ci_hi",
            ],
        );
        for r in &self.rows {
            t.push(vec![
                r.policy.clone(),
                r.param.clone(),
                fmt_usize(r.budget),
                fmt_usize(r.trials),
                fmt_f64(r.mean),
                fmt_f64(r.sd),
                fmt_f64(r.se),
                fmt_f64(r.ci_lo),
                fmt_f64(r.ci_hi),
            ]);
        }
        t
    }

    /// Paired mean difference (row `a` minus row `b`) and its standard error.
    pub fn paired_gap(&self, a: usize, b: usize) -> (f64, f64) {
        paired_diff(&self.finals[a], &self.finals[b])
    }
}
