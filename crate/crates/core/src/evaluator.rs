//! Oracle evaluation against an ideal trajectory, plus the comparative
//! per-dimension selection the refinement operator relies on.
//!
//! The oracle path exists to power simulation and tests: it is the only code
//! that ever sees the ideal trajectory, and the refinement pipeline reaches it
//! exclusively through [`EvalPort`]. The noisy path models an imperfect judge
//! as per-comparison order flips, keeping the error rate directly
//! configurable.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::trajectory::{Cell, EvaluationVector, SourceId, TrajectoryGraph};

/// The ideal trajectory together with per-cell ground-truth flags.
///
/// A flagged-true cell is scored by content equality against the ideal's node
/// there; a flagged-false cell counts as failed no matter what a candidate
/// puts in it (its ground truth is recorded as unattainable). Every declared
/// cell must carry a flag and at least one flag must be true.
#[derive(Debug, Clone)]
pub struct IdealTrajectory {
    trajectory: TrajectoryGraph,
    truth: BTreeMap<Cell, bool>,
}

impl IdealTrajectory {
    pub fn new(trajectory: TrajectoryGraph, truth: BTreeMap<Cell, bool>) -> Result<Self> {
        for cell in trajectory.cells() {
            if !truth.contains_key(&cell) {
                return Err(Error::invalid(
                    "ideal trajectory",
                    format!("cell {cell} has no ground-truth flag"),
                ));
            }
        }
        if !truth.values().any(|&v| v) {
            return Err(Error::invalid(
                "ideal trajectory",
                "at least one cell must be flagged correct",
            ));
        }
        Ok(IdealTrajectory { trajectory, truth })
    }

    /// Marks every cell of the trajectory as scoreable ground truth.
    pub fn exact(trajectory: TrajectoryGraph) -> Result<Self> {
        let truth = trajectory.cells().into_iter().map(|c| (c, true)).collect();
        Self::new(trajectory, truth)
    }

    pub fn j(&self) -> usize {
        self.trajectory.j
    }

    pub fn trajectory(&self) -> &TrajectoryGraph {
        &self.trajectory
    }

    pub fn content_at(&self, cell: Cell) -> Option<&str> {
        self.trajectory.node_at(cell).map(|n| n.content.as_str())
    }

    /// Declared cells of dimension `j` with their flags.
    fn cells_in_dim(&self, j: usize) -> impl Iterator<Item = (Cell, bool)> + '_ {
        self.truth
            .iter()
            .filter(move |(cell, _)| cell.dimension == j)
            .map(|(c, f)| (*c, *f))
    }
}

/// Judge imperfection model: each pairwise comparison has its outcome
/// inverted with this probability. Zero is the oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JudgeNoise {
    flip_probability: f64,
}

impl JudgeNoise {
    pub const ORACLE: JudgeNoise = JudgeNoise {
        flip_probability: 0.0,
    };

    pub fn new(flip_probability: f64) -> Result<Self> {
        if !(0.0..0.5).contains(&flip_probability) {
            return Err(Error::invalid(
                "flip_probability",
                format!("{flip_probability} outside [0, 0.5)"),
            ));
        }
        Ok(JudgeNoise { flip_probability })
    }

    pub fn flip_probability(&self) -> f64 {
        self.flip_probability
    }

    pub fn is_oracle(&self) -> bool {
        self.flip_probability == 0.0
    }
}

/// Scores `t` against the ideal, one error fraction per dimension.
///
/// `d_j` is the fraction of the ideal's dimension-`j` cells that `t` fails:
/// a cell fails when `t` has no node there, the contents differ, or the cell
/// is flagged unattainable. A dimension the ideal declares nothing in scores
/// 0 (nothing is required), while a dimension `t` leaves empty scores 1.
pub fn evaluate(t: &TrajectoryGraph, ideal: &IdealTrajectory) -> Result<EvaluationVector> {
    if t.j != ideal.j() {
        return Err(Error::DimensionMismatch {
            left: t.j,
            right: ideal.j(),
        });
    }
    let mut d = Vec::with_capacity(t.j);
    for j in 1..=t.j {
        let mut declared = 0usize;
        let mut failed = 0usize;
        for (cell, flag) in ideal.cells_in_dim(j) {
            declared += 1;
            let matched = flag
                && t.node_at(cell)
                    .is_some_and(|n| Some(n.content.as_str()) == ideal.content_at(cell));
            if !matched {
                failed += 1;
            }
        }
        d.push(if declared == 0 {
            0.0
        } else {
            failed as f64 / declared as f64
        });
    }
    EvaluationVector::new(d)
}

/// Index of the candidate with minimal overall distance; ties break to the
/// lowest index. Errors on an empty list or a zero-dimensional vector.
pub fn select_reference(candidates: &[EvaluationVector]) -> Result<usize> {
    if candidates.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    let mut best = 0usize;
    let mut best_dist = candidates[0].dist()?;
    for (i, e) in candidates.iter().enumerate().skip(1) {
        let d = e.dist()?;
        if d < best_dist {
            best = i;
            best_dist = d;
        }
    }
    Ok(best)
}

/// Picks the pool member with the smallest error on dimension `j` (1-based).
///
/// Oracle mode returns the exact argmin; ties prefer the reference source if
/// it is among the minimizers, then the lowest pool index, so the reference
/// is never churned without strict improvement. In noisy mode each pairwise
/// comparison of a left-to-right tournament is inverted with the configured
/// flip probability, deterministically per RNG stream.
pub fn dimension_argmin(
    pool: &[(SourceId, EvaluationVector)],
    j: usize,
    noise: &JudgeNoise,
    rng: &mut ChaCha12Rng,
) -> Result<SourceId> {
    if pool.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    let dim = j.checked_sub(1).ok_or(Error::DimensionOutOfRange {
        dimension: j,
        j: pool[0].1.len(),
    })?;
    for (_, e) in pool {
        if dim >= e.len() {
            return Err(Error::DimensionOutOfRange {
                dimension: j,
                j: e.len(),
            });
        }
    }

    if noise.is_oracle() {
        let mut winner = 0usize;
        for i in 1..pool.len() {
            if champion_loses(&pool[winner], &pool[i], dim) {
                winner = i;
            }
        }
        return Ok(pool[winner].0);
    }

    let mut winner = 0usize;
    for i in 1..pool.len() {
        let mut challenger_wins = champion_loses(&pool[winner], &pool[i], dim);
        if rng.random::<f64>() < noise.flip_probability() {
            challenger_wins = !challenger_wins;
        }
        if challenger_wins {
            winner = i;
        }
    }
    Ok(pool[winner].0)
}

/// True when the challenger strictly beats the champion on dimension `dim`.
/// On an exact tie only the reference may displace an earlier pool member,
/// so ties resolve to the reference if present, else the lowest pool index.
fn champion_loses(
    champion: &(SourceId, EvaluationVector),
    challenger: &(SourceId, EvaluationVector),
    dim: usize,
) -> bool {
    let (cv, nv) = (champion.1.d[dim], challenger.1.d[dim]);
    nv < cv
        || (nv == cv && challenger.0 == SourceId::Reference && champion.0 != SourceId::Reference)
}

/// Evaluation capability handed to the refinement pipeline. The pipeline
/// never touches the ideal directly; this interface is the only route.
pub trait EvalPort {
    fn j(&self) -> usize;
    fn evaluate(&self, g: &TrajectoryGraph) -> Result<EvaluationVector>;
}

/// Oracle scorer wrapping an ideal trajectory.
pub struct OracleEval {
    ideal: IdealTrajectory,
}

impl OracleEval {
    pub fn new(ideal: IdealTrajectory) -> Self {
        OracleEval { ideal }
    }

    pub fn ideal(&self) -> &IdealTrajectory {
        &self.ideal
    }
}

impl EvalPort for OracleEval {
    fn j(&self) -> usize {
        self.ideal.j()
    }

    fn evaluate(&self, g: &TrajectoryGraph) -> Result<EvaluationVector> {
        evaluate(g, &self.ideal)
    }
}
