//! Trajectory graph data model, the per-dimension evaluation vector, and the
//! scalar distance metric.
//!
//! A trajectory is a DAG of typed nodes (facts, reasoning steps, actions).
//! Each node is tagged with an evaluation dimension in `1..=J` and a step
//! ordinal within that dimension; the `(dimension, step)` pair is the
//! alignment key used to compare trajectories node by node. All types are
//! immutable values after construction and all operations here are pure.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::refine::FactsLedger;

/// Node identifier, unique within one graph.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub String);

impl NodeId {
    pub fn new(id: impl Into<String>) -> Self {
        NodeId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for NodeId {
    fn from(s: &str) -> Self {
        NodeId(s.to_string())
    }
}

/// Which trajectory a segment or evaluation came from: the persistent
/// reference, or one of the candidate agents. `Reference` sorts first, which
/// is exactly the tie-break order used everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SourceId {
    Reference,
    Agent(usize),
}

impl fmt::Display for SourceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SourceId::Reference => f.write_str("reference"),
            SourceId::Agent(i) => write!(f, "agent-{i}"),
        }
    }
}

/// Alignment key: evaluation dimension (1-based) plus step ordinal within it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub dimension: usize,
    pub step: usize,
}

impl Cell {
    pub fn new(dimension: usize, step: usize) -> Self {
        Cell { dimension, step }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "d{}/s{}", self.dimension, self.step)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Fact,
    Reasoning,
    Action,
}

/// Provenance of a node's content.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceRef {
    /// Authority score in `[0, 1]`.
    pub authority: f64,
    /// Whether the source can be checked against an external verifier.
    pub verifiable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryNode {
    pub id: NodeId,
    pub kind: NodeKind,
    pub content: String,
    pub depends_on: Vec<NodeId>,
    /// Evaluation dimension in `1..=J`.
    pub dimension: usize,
    /// Step ordinal within the dimension; alignment key together with it.
    pub step_index: usize,
    /// Self-reported confidence in `[0, 1]`.
    pub confidence: f64,
    pub sources: Vec<SourceRef>,
    /// Agent identifier, or `"reference"` for nodes owned by the reference.
    pub origin: String,
}

impl TrajectoryNode {
    pub fn cell(&self) -> Cell {
        Cell::new(self.dimension, self.step_index)
    }
}

/// A reasoning trajectory: an ordered node list whose order is consistent
/// with the dependency relation, plus the dimension count `J` it is evaluated
/// against. `J` is fixed per task; mixing values is a hard error everywhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryGraph {
    #[serde(rename = "J")]
    pub j: usize,
    pub nodes: Vec<TrajectoryNode>,
}

impl TrajectoryGraph {
    pub fn new(j: usize, nodes: Vec<TrajectoryNode>) -> Self {
        TrajectoryGraph { j, nodes }
    }

    pub fn node(&self, id: &NodeId) -> Option<&TrajectoryNode> {
        self.nodes.iter().find(|n| &n.id == id)
    }

    /// First node occupying `cell`, in list order.
    pub fn node_at(&self, cell: Cell) -> Option<&TrajectoryNode> {
        self.nodes.iter().find(|n| n.cell() == cell)
    }

    /// Nodes of dimension `j` in list order.
    pub fn dim_slice(&self, j: usize) -> Vec<&TrajectoryNode> {
        self.nodes.iter().filter(|n| n.dimension == j).collect()
    }

    /// All occupied cells, sorted.
    pub fn cells(&self) -> BTreeSet<Cell> {
        self.nodes.iter().map(|n| n.cell()).collect()
    }

    /// Canonical JSON document; `from_canonical_json` is its exact inverse.
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string(self).expect("trajectory graphs always serialize")
    }

    pub fn from_canonical_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// The J-dimensional error vector `d(tau, tau*)`, each entry in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationVector {
    pub d: Vec<f64>,
}

impl EvaluationVector {
    pub fn new(d: Vec<f64>) -> Result<Self> {
        for (i, v) in d.iter().enumerate() {
            if !(0.0..=1.0).contains(v) {
                return Err(Error::invalid(
                    "evaluation vector",
                    format!("d[{i}] = {v} outside [0, 1]"),
                ));
            }
        }
        Ok(EvaluationVector { d })
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    pub fn dist(&self) -> Result<f64> {
        dist(self)
    }
}

/// Overall distance: the arithmetic mean of the per-dimension errors.
///
/// 0 means exact agreement with the ideal on every dimension, 1 maximal
/// discrepancy. Errors on a zero-dimensional vector.
pub fn dist(e: &EvaluationVector) -> Result<f64> {
    if e.d.is_empty() {
        return Err(Error::ZeroDimensional);
    }
    Ok(e.d.iter().sum::<f64>() / e.d.len() as f64)
}

/// Node-level alignment of a set of graphs sharing the same `J`.
///
/// Cells are keyed by `(dimension, step_index)`; each entry lists
/// `(graph index, node id)` for every node occupying that cell. Every node of
/// every input graph appears in exactly one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    pub j: usize,
    pub cells: BTreeMap<Cell, Vec<(usize, NodeId)>>,
}

impl Alignment {
    /// Total number of aligned node entries across all cells.
    pub fn entry_count(&self) -> usize {
        self.cells.values().map(Vec::len).sum()
    }
}

/// Aligns graphs on the `(dimension, step_index)` key.
///
/// Errors when the graphs disagree on `J`. Alignment is positional, not
/// semantic: two nodes land in the same cell exactly when they claim the same
/// dimension and step.
pub fn align_nodes(graphs: &[TrajectoryGraph]) -> Result<Alignment> {
    let j = match graphs.first() {
        Some(g) => g.j,
        None => return Err(Error::EmptyCandidates),
    };
    for g in graphs {
        if g.j != j {
            return Err(Error::DimensionMismatch {
                left: j,
                right: g.j,
            });
        }
    }
    let mut cells: BTreeMap<Cell, Vec<(usize, NodeId)>> = BTreeMap::new();
    for (gi, g) in graphs.iter().enumerate() {
        for node in &g.nodes {
            cells
                .entry(node.cell())
                .or_default()
                .push((gi, node.id.clone()));
        }
    }
    Ok(Alignment { j, cells })
}

/// One broken invariant found by [`validate_graph`]. Violations are data, not
/// failures: a malformed graph validates to a non-empty report.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    DuplicateId {
        id: NodeId,
    },
    DanglingDependency {
        id: NodeId,
        missing: NodeId,
    },
    Cycle {
        members: Vec<NodeId>,
    },
    /// A dependency appears later in the node list than its dependent.
    OrderInconsistency {
        id: NodeId,
        dependency: NodeId,
    },
    DimensionOutOfRange {
        id: NodeId,
        dimension: usize,
    },
    ConfidenceOutOfRange {
        id: NodeId,
        value: f64,
    },
    AuthorityOutOfRange {
        id: NodeId,
        value: f64,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateId { id } => write!(f, "duplicate node id {id}"),
            Violation::DanglingDependency { id, missing } => {
                write!(f, "node {id} depends on missing node {missing}")
            }
            Violation::Cycle { members } => {
                let ids: Vec<&str> = members.iter().map(NodeId::as_str).collect();
                write!(f, "dependency cycle through [{}]", ids.join(", "))
            }
            Violation::OrderInconsistency { id, dependency } => {
                write!(f, "node {id} listed before its dependency {dependency}")
            }
            Violation::DimensionOutOfRange { id, dimension } => {
                write!(f, "node {id} dimension {dimension} out of range")
            }
            Violation::ConfidenceOutOfRange { id, value } => {
                write!(f, "node {id} confidence {value} outside [0, 1]")
            }
            Violation::AuthorityOutOfRange { id, value } => {
                write!(f, "node {id} source authority {value} outside [0, 1]")
            }
        }
    }
}

/// Checks every structural invariant of a graph and reports all violations.
/// Empty report iff the graph is well-formed. Pure and idempotent.
pub fn validate_graph(g: &TrajectoryGraph) -> Vec<Violation> {
    let mut out = Vec::new();

    let mut seen: HashSet<&str> = HashSet::new();
    let mut duplicated: BTreeSet<&str> = BTreeSet::new();
    for node in &g.nodes {
        if !seen.insert(node.id.as_str()) {
            duplicated.insert(node.id.as_str());
        }
    }
    for id in &duplicated {
        out.push(Violation::DuplicateId {
            id: NodeId::new(*id),
        });
    }

    let position: HashMap<&str, usize> = g
        .nodes
        .iter()
        .enumerate()
        .map(|(i, n)| (n.id.as_str(), i))
        .collect();

    for (pos, node) in g.nodes.iter().enumerate() {
        if node.dimension == 0 || node.dimension > g.j {
            out.push(Violation::DimensionOutOfRange {
                id: node.id.clone(),
                dimension: node.dimension,
            });
        }
        if !(0.0..=1.0).contains(&node.confidence) {
            out.push(Violation::ConfidenceOutOfRange {
                id: node.id.clone(),
                value: node.confidence,
            });
        }
        for s in &node.sources {
            if !(0.0..=1.0).contains(&s.authority) {
                out.push(Violation::AuthorityOutOfRange {
                    id: node.id.clone(),
                    value: s.authority,
                });
            }
        }
        for dep in &node.depends_on {
            match position.get(dep.as_str()) {
                None => out.push(Violation::DanglingDependency {
                    id: node.id.clone(),
                    missing: dep.clone(),
                }),
                // A strictly-later dependency breaks the topological order;
                // a self-dependency is reported as a cycle below, not here.
                Some(&dep_pos) if dep_pos > pos => out.push(Violation::OrderInconsistency {
                    id: node.id.clone(),
                    dependency: dep.clone(),
                }),
                Some(_) => {}
            }
        }
    }

    for scc in strongly_connected_components(g, &position) {
        out.push(Violation::Cycle { members: scc });
    }

    out
}

/// Tarjan SCC over the dependency relation; returns only genuine cycles
/// (components of size >= 2, or self-loops).
fn strongly_connected_components(
    g: &TrajectoryGraph,
    position: &HashMap<&str, usize>,
) -> Vec<Vec<NodeId>> {
    let n = g.nodes.len();
    let adjacency: Vec<Vec<usize>> = g
        .nodes
        .iter()
        .map(|node| {
            node.depends_on
                .iter()
                .filter_map(|d| position.get(d.as_str()).copied())
                .collect()
        })
        .collect();

    struct State {
        index: Vec<Option<usize>>,
        lowlink: Vec<usize>,
        on_stack: Vec<bool>,
        stack: Vec<usize>,
        counter: usize,
        cycles: Vec<Vec<usize>>,
    }

    fn strongconnect(v: usize, adj: &[Vec<usize>], st: &mut State) {
        st.index[v] = Some(st.counter);
        st.lowlink[v] = st.counter;
        st.counter += 1;
        st.stack.push(v);
        st.on_stack[v] = true;

        for &w in &adj[v] {
            if st.index[w].is_none() {
                strongconnect(w, adj, st);
                st.lowlink[v] = st.lowlink[v].min(st.lowlink[w]);
            } else if st.on_stack[w] {
                st.lowlink[v] = st.lowlink[v].min(st.index[w].unwrap());
            }
        }

        if st.lowlink[v] == st.index[v].unwrap() {
            let mut component = Vec::new();
            loop {
                let w = st.stack.pop().unwrap();
                st.on_stack[w] = false;
                component.push(w);
                if w == v {
                    break;
                }
            }
            let self_loop = component.len() == 1 && adj[component[0]].contains(&component[0]);
            if component.len() > 1 || self_loop {
                component.sort_unstable();
                st.cycles.push(component);
            }
        }
    }

    let mut st = State {
        index: vec![None; n],
        lowlink: vec![0; n],
        on_stack: vec![false; n],
        stack: Vec::new(),
        counter: 0,
        cycles: Vec::new(),
    };
    for v in 0..n {
        if st.index[v].is_none() {
            strongconnect(v, &adjacency, &mut st);
        }
    }
    st.cycles.sort();
    st.cycles
        .into_iter()
        .map(|c| c.into_iter().map(|i| g.nodes[i].id.clone()).collect())
        .collect()
}

/// Supplementary analyses carried alongside the reference trajectory:
/// the verified-facts ledger, per-node confidences, and tool logs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SupplementaryContext {
    pub verified_facts: FactsLedger,
    pub confidences: BTreeMap<NodeId, f64>,
    pub tool_logs: Vec<String>,
}

/// The persistent pair `(trajectory, context)` at a given refinement round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceState {
    pub trajectory: TrajectoryGraph,
    pub context: SupplementaryContext,
    pub round: usize,
}

impl ReferenceState {
    pub fn initial(trajectory: TrajectoryGraph, context: SupplementaryContext) -> Self {
        ReferenceState {
            trajectory,
            context,
            round: 1,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn node(
        id: &str,
        kind: NodeKind,
        content: &str,
        deps: &[&str],
        dimension: usize,
        step: usize,
    ) -> TrajectoryNode {
        TrajectoryNode {
            id: NodeId::new(id),
            kind,
            content: content.to_string(),
            depends_on: deps.iter().map(|d| NodeId::new(*d)).collect(),
            dimension,
            step_index: step,
            confidence: 0.9,
            sources: vec![SourceRef {
                authority: 0.8,
                verifiable: true,
            }],
            origin: "reference".to_string(),
        }
    }

    fn chain3() -> TrajectoryGraph {
        TrajectoryGraph::new(
            2,
            vec![
                node("a", NodeKind::Fact, "x", &[], 1, 0),
                node("b", NodeKind::Reasoning, "y", &["a"], 1, 1),
                node("c", NodeKind::Action, "z", &["b"], 2, 0),
            ],
        )
    }

    #[test]
    fn dist_of_zero_vector_is_zero() {
        let e = EvaluationVector::new(vec![0.0, 0.0, 0.0]).unwrap();
        assert_eq!(dist(&e).unwrap(), 0.0);
    }

    #[test]
    fn dist_of_all_ones_is_one() {
        let e = EvaluationVector::new(vec![1.0, 1.0]).unwrap();
        assert_eq!(dist(&e).unwrap(), 1.0);
    }

    #[test]
    fn dist_is_the_arithmetic_mean() {
        let e = EvaluationVector::new(vec![0.1, 0.2, 0.4]).unwrap();
        assert!((dist(&e).unwrap() - 0.7 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn dist_rejects_empty_vector() {
        let e = EvaluationVector::new(vec![]).unwrap();
        assert!(matches!(dist(&e), Err(Error::ZeroDimensional)));
    }

    #[test]
    fn evaluation_vector_rejects_out_of_range() {
        assert!(EvaluationVector::new(vec![0.5, 1.5]).is_err());
        assert!(EvaluationVector::new(vec![-0.1]).is_err());
    }

    #[test]
    fn align_two_identical_graphs_pairs_every_cell() {
        let g = chain3();
        let alignment = align_nodes(&[g.clone(), g]).unwrap();
        assert_eq!(alignment.cells.len(), 3);
        for members in alignment.cells.values() {
            assert_eq!(members.len(), 2);
        }
    }

    #[test]
    fn align_reports_missing_steps_as_singleton_cells() {
        let a = TrajectoryGraph::new(2, vec![node("a", NodeKind::Fact, "x", &[], 1, 0)]);
        let b = TrajectoryGraph::new(2, vec![]);
        let alignment = align_nodes(&[a, b]).unwrap();
        let cell = alignment.cells.get(&Cell::new(1, 0)).unwrap();
        assert_eq!(cell, &vec![(0, NodeId::new("a"))]);
    }

    #[test]
    fn align_partitions_disjoint_dimensions() {
        let a = TrajectoryGraph::new(3, vec![node("a", NodeKind::Fact, "1", &[], 1, 0)]);
        let b = TrajectoryGraph::new(3, vec![node("b", NodeKind::Fact, "2", &[], 2, 0)]);
        let c = TrajectoryGraph::new(3, vec![node("c", NodeKind::Fact, "3", &[], 3, 0)]);
        let alignment = align_nodes(&[a, b, c]).unwrap();
        assert_eq!(alignment.cells.len(), 3);
        assert_eq!(alignment.entry_count(), 3);
        for (cell, members) in &alignment.cells {
            assert_eq!(members.len(), 1);
            let dims: BTreeSet<usize> = members.iter().map(|_| cell.dimension).collect();
            assert_eq!(dims.len(), 1);
        }
    }

    #[test]
    fn align_rejects_mismatched_j() {
        let a = TrajectoryGraph::new(2, vec![]);
        let b = TrajectoryGraph::new(3, vec![]);
        assert!(matches!(
            align_nodes(&[a, b]),
            Err(Error::DimensionMismatch { left: 2, right: 3 })
        ));
    }

    #[test]
    fn validate_accepts_well_formed_chain() {
        assert!(validate_graph(&chain3()).is_empty());
    }

    #[test]
    fn validate_flags_self_dependency_as_one_cycle() {
        let g = TrajectoryGraph::new(1, vec![node("a", NodeKind::Fact, "x", &["a"], 1, 0)]);
        let report = validate_graph(&g);
        assert_eq!(report.len(), 1);
        assert!(matches!(&report[0], Violation::Cycle { members } if members.len() == 1));
    }

    #[test]
    fn validate_flags_confidence_out_of_range() {
        let mut bad = node("a", NodeKind::Fact, "x", &[], 1, 0);
        bad.confidence = 1.5;
        let g = TrajectoryGraph::new(1, vec![bad]);
        let report = validate_graph(&g);
        assert_eq!(report.len(), 1);
        assert!(
            matches!(&report[0], Violation::ConfidenceOutOfRange { value, .. } if *value == 1.5)
        );
    }

    #[test]
    fn validate_flags_duplicates_dangling_and_order() {
        let g = TrajectoryGraph::new(
            2,
            vec![
                node("a", NodeKind::Fact, "x", &["later", "ghost"], 1, 0),
                node("later", NodeKind::Fact, "y", &[], 1, 1),
                node("a", NodeKind::Fact, "z", &[], 2, 0),
            ],
        );
        let report = validate_graph(&g);
        assert!(report
            .iter()
            .any(|v| matches!(v, Violation::DuplicateId { .. })));
        assert!(report
            .iter()
            .any(|v| matches!(v, Violation::DanglingDependency { .. })));
        assert!(report
            .iter()
            .any(|v| matches!(v, Violation::OrderInconsistency { .. })));
    }

    #[test]
    fn validate_is_idempotent() {
        let g = TrajectoryGraph::new(1, vec![node("a", NodeKind::Fact, "x", &["a"], 1, 0)]);
        assert_eq!(validate_graph(&g), validate_graph(&g));
    }

    #[test]
    fn canonical_json_schema_and_field_order() {
        let g = TrajectoryGraph::new(1, vec![node("a", NodeKind::Fact, "x", &[], 1, 0)]);
        let text = g.to_canonical_json();
        assert!(text.starts_with(r#"{"J":1,"nodes":[{"id":"a","kind":"fact","content":"x","#));
        assert!(text.contains(r#""depends_on":[],"dimension":1,"step_index":0,"confidence":0.9"#));
        assert!(text
            .contains(r#""sources":[{"authority":0.8,"verifiable":true}],"origin":"reference""#));
    }

    #[test]
    fn canonical_json_round_trips() {
        let g = chain3();
        let text = g.to_canonical_json();
        let back = TrajectoryGraph::from_canonical_json(&text).unwrap();
        assert_eq!(g, back);
        assert_eq!(text, back.to_canonical_json());
    }
}
