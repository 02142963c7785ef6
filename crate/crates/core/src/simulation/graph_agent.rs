//! Simulated graph-level agents: generate trajectory graphs of controlled
//! quality against a hidden ideal, so the full alignment / conflict /
//! integration pipeline can be exercised and property-tested without a model
//! endpoint. Only the simulation layer holds the ideal; the refinement
//! pipeline still sees it exclusively through its ports.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::error::Result;
use crate::evaluator::IdealTrajectory;
use crate::llm::{DiversityProfile, TemperatureTier};
use crate::orchestrator::{AgentPort, ContextFragment, Task};
use crate::refine::{ExternalVerifier, PortUnavailable, VerifyOutcome};
use crate::rng::substream;
use crate::trajectory::{Cell, NodeId, ReferenceState, SourceRef, TrajectoryGraph, TrajectoryNode};

/// An agent that reproduces the ideal's cell structure with configurable
/// accuracy. Exploration draws each cell correct with `exploration_accuracy`;
/// refinement keeps the reference's correct cells (minus `regression_prob`
/// slips) and fixes wrong or missing cells with `improvement_prob`.
pub struct SimulatedAgent {
    id: String,
    ideal: Arc<IdealTrajectory>,
    pub exploration_accuracy: f64,
    pub improvement_prob: f64,
    pub regression_prob: f64,
    profile: DiversityProfile,
}

impl SimulatedAgent {
    pub fn new(index: usize, ideal: Arc<IdealTrajectory>) -> Self {
        let tiers = [
            TemperatureTier::Reliable,
            TemperatureTier::Balanced,
            TemperatureTier::Exploratory,
        ];
        let prompts = ["systematic", "skeptic", "explorer"];
        SimulatedAgent {
            id: format!("sim-{index}"),
            ideal,
            exploration_accuracy: 0.6,
            improvement_prob: 0.35,
            regression_prob: 0.05,
            profile: DiversityProfile::new(prompts[index % 3], tiers[index % 3]),
        }
    }

    fn correct_content(&self, cell: Cell) -> String {
        self.ideal
            .content_at(cell)
            .expect("agent iterates the ideal's own cells")
            .to_string()
    }

    fn wrong_content(&self, cell: Cell, rng: &mut ChaCha12Rng) -> String {
        // A small pool of wrong answers per cell keeps genuine factual
        // conflicts (two agents disagreeing on the wrong value) common.
        let variant = rng.random_range(0..3u32);
        format!("bogus-{}-{}-{variant}", cell.dimension, cell.step)
    }

    fn build_graph(
        &self,
        state: Option<&ReferenceState>,
        rng: &mut ChaCha12Rng,
    ) -> TrajectoryGraph {
        let ideal = self.ideal.trajectory();
        let mut nodes = Vec::with_capacity(ideal.nodes.len());
        for ideal_node in &ideal.nodes {
            let cell = ideal_node.cell();
            let reference_node = state.and_then(|s| s.trajectory.node_at(cell));
            let reference_correct =
                reference_node.is_some_and(|n| n.content == self.correct_content(cell));

            let correct = match (state, reference_correct) {
                // Exploration: independent accuracy per cell.
                (None, _) => rng.random::<f64>() < self.exploration_accuracy,
                // Refinement: keep what works, sometimes fix what does not.
                (Some(_), true) => rng.random::<f64>() >= self.regression_prob,
                (Some(_), false) => rng.random::<f64>() < self.improvement_prob,
            };
            let content = if correct {
                self.correct_content(cell)
            } else if let (Some(_), Some(node)) = (state, reference_node) {
                // Keep the reference's wrong claim more often than inventing
                // a new one; echoing is what conditioned generation does.
                if !reference_correct && rng.random::<f64>() < 0.7 {
                    node.content.clone()
                } else {
                    self.wrong_content(cell, rng)
                }
            } else {
                self.wrong_content(cell, rng)
            };

            // Reuse the reference's node id when refining an existing cell so
            // conditioned candidates look like edits, not rewrites.
            let id = match reference_node {
                Some(node) => node.id.clone(),
                None => NodeId::new(format!("{}-d{}s{}", self.id, cell.dimension, cell.step)),
            };
            let authority = if correct {
                0.55 + 0.4 * rng.random::<f64>()
            } else {
                0.05 + 0.45 * rng.random::<f64>()
            };
            nodes.push(TrajectoryNode {
                id,
                kind: ideal_node.kind,
                content,
                depends_on: Vec::new(), // rebuilt below once ids are known
                dimension: cell.dimension,
                step_index: cell.step,
                confidence: if correct {
                    0.6 + 0.4 * rng.random::<f64>()
                } else {
                    0.3 + 0.4 * rng.random::<f64>()
                },
                sources: vec![SourceRef {
                    authority,
                    verifiable: rng.random::<f64>() < 0.85,
                }],
                origin: self.id.clone(),
            });
        }

        // Mirror the ideal's dependency structure through cells.
        let cell_to_id: std::collections::BTreeMap<Cell, NodeId> =
            nodes.iter().map(|n| (n.cell(), n.id.clone())).collect();
        for (node, ideal_node) in nodes.iter_mut().zip(ideal.nodes.iter()) {
            node.depends_on = ideal_node
                .depends_on
                .iter()
                .filter_map(|dep| ideal.node(dep).map(TrajectoryNode::cell))
                .filter_map(|cell| cell_to_id.get(&cell).cloned())
                .collect();
        }
        TrajectoryGraph::new(ideal.j, nodes)
    }
}

impl AgentPort for SimulatedAgent {
    fn id(&self) -> &str {
        &self.id
    }

    fn profile(&self) -> &DiversityProfile {
        &self.profile
    }

    fn generate(
        &self,
        _task: &Task,
        state: Option<&ReferenceState>,
        rng: &mut ChaCha12Rng,
    ) -> Result<(TrajectoryGraph, ContextFragment)> {
        let graph = self.build_graph(state, rng);
        let mut fragment = ContextFragment::default();
        fragment
            .tool_logs
            .push(format!("{} sampled {} cells", self.id, graph.nodes.len()));
        for node in &graph.nodes {
            fragment
                .confidences
                .insert(node.id.clone(), node.confidence);
        }
        Ok((graph, fragment))
    }

    fn answer(
        &self,
        task: &Task,
        state: &ReferenceState,
        _rng: &mut ChaCha12Rng,
    ) -> Result<String> {
        let facts = state.context.verified_facts.len();
        Ok(format!(
            "answer[{}] from round {} trajectory ({} nodes, {} ledger entries)",
            task.id,
            state.round,
            state.trajectory.nodes.len(),
            facts,
        ))
    }
}

/// External verification oracle with configurable reliability: with
/// probability `correctness` it points at the true content when present;
/// otherwise it endorses a wrong option or admits ignorance.
pub struct OracleVerifier {
    ideal: Arc<IdealTrajectory>,
    correctness: f64,
    seed: u64,
    calls: u64,
}

impl OracleVerifier {
    pub fn new(ideal: Arc<IdealTrajectory>, correctness: f64, seed: u64) -> Self {
        OracleVerifier {
            ideal,
            correctness,
            seed,
            calls: 0,
        }
    }

    pub fn perfect(ideal: Arc<IdealTrajectory>, seed: u64) -> Self {
        Self::new(ideal, 1.0, seed)
    }
}

impl ExternalVerifier for OracleVerifier {
    fn verify(
        &mut self,
        cell: Cell,
        contents: &[String],
    ) -> std::result::Result<VerifyOutcome, PortUnavailable> {
        let mut rng = substream(self.seed, &[0xec, self.calls]);
        self.calls += 1;
        let truth = self.ideal.content_at(cell);
        let true_index = truth.and_then(|t| contents.iter().position(|c| c == t));
        match true_index {
            Some(index) => {
                if self.correctness >= 1.0 || rng.random::<f64>() < self.correctness {
                    Ok(VerifyOutcome::Index(index))
                } else if contents.len() > 1 {
                    // Endorse some wrong option deterministically per stream.
                    let mut wrong = rng.random_range(0..contents.len() - 1);
                    if wrong >= index {
                        wrong += 1;
                    }
                    Ok(VerifyOutcome::Index(wrong))
                } else {
                    Ok(VerifyOutcome::Unknown)
                }
            }
            None => Ok(VerifyOutcome::Unknown),
        }
    }
}

/// Builds a layered ideal trajectory fixture: `j` dimensions with
/// `steps_per_dim` steps each, facts at step 0 and reasoning above, each step
/// depending on the previous step of its dimension and reasoning steps also
/// crossing into dimension 1.
pub fn layered_ideal(j: usize, steps_per_dim: usize) -> Result<IdealTrajectory> {
    use crate::trajectory::NodeKind;
    let mut nodes = Vec::new();
    for dim in 1..=j {
        for step in 0..steps_per_dim {
            let id = NodeId::new(format!("ideal-d{dim}s{step}"));
            let mut depends_on = Vec::new();
            if step > 0 {
                depends_on.push(NodeId::new(format!("ideal-d{dim}s{}", step - 1)));
            }
            if dim > 1 && step == steps_per_dim - 1 {
                depends_on.push(NodeId::new("ideal-d1s0".to_string()));
            }
            nodes.push(TrajectoryNode {
                id,
                kind: if step == 0 {
                    NodeKind::Fact
                } else {
                    NodeKind::Reasoning
                },
                content: format!("truth-{dim}-{step}"),
                depends_on,
                dimension: dim,
                step_index: step,
                confidence: 1.0,
                sources: vec![SourceRef {
                    authority: 1.0,
                    verifiable: true,
                }],
                origin: "reference".to_string(),
            });
        }
    }
    // Dimension-major order lists every dependency before its dependents
    // except the cross edge into d1s0, which points at the very first node.
    IdealTrajectory::exact(TrajectoryGraph::new(j, nodes))
}
