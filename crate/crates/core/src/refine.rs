//! The trajectory refinement operator: structured alignment, conflict
//! detection, conflict resolution, and segment-level integration.
//!
//! One refinement round takes the current reference state plus a batch of
//! candidate trajectories and produces the next reference state. The pipeline
//! is:
//!
//! 1. align the pool (reference + candidates) on `(dimension, step)` cells;
//! 2. detect factual conflicts (fact cells with disagreeing contents) and
//!    logical conflicts (reasoning cells with disagreeing dependency
//!    structure);
//! 3. resolve each conflict by source authority, structural stress checks, or
//!    an external verification port; unresolvable conflicts escalate and the
//!    reference keeps its segment;
//! 4. pick a winning source per dimension and splice the winning node slices
//!    into the reference, leaving every other dimension untouched.
//!
//! In oracle mode the winner per dimension is the exact per-dimension error
//! argmin over the pool (ties to the reference), which makes the operator
//! monotone: the merged trajectory's distance never exceeds the reference's.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluator::{dimension_argmin, EvalPort, JudgeNoise};
use crate::rng::substream;
use crate::trajectory::{
    align_nodes, Alignment, Cell, EvaluationVector, NodeId, NodeKind, ReferenceState, SourceId,
    SourceRef, SupplementaryContext, TrajectoryGraph, TrajectoryNode,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConflictKind {
    Factual,
    Logical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConflictStatus {
    Open,
    Resolved,
    Escalated,
}

/// A cell where aligned nodes disagree. Parties are every `(source, node)`
/// occupying the cell; a resolved conflict has exactly one winning party.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conflict {
    pub kind: ConflictKind,
    pub cell: Cell,
    pub parties: Vec<(SourceId, NodeId)>,
    pub status: ConflictStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResolutionMethod {
    AuthorityRanking,
    StressTest,
    ExternalVerification,
}

/// A settled conflict: the winning party plus the contents the verdict
/// endorsed and dismissed, so the facts ledger can be reconstructed from
/// resolutions alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resolution {
    pub conflict: Conflict,
    pub winner: (SourceId, NodeId),
    pub method: ResolutionMethod,
    pub evidence: String,
    pub winner_content: String,
    pub rejected_contents: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Verified,
    Rejected,
}

/// Where a ledger entry's verdict came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceNote {
    pub method: ResolutionMethod,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub cell: Cell,
    pub content: String,
    pub verdict: Verdict,
    pub source: SourceNote,
    pub round: usize,
}

/// Append-only record of verified (and rejected) contents across rounds.
/// Duplicate `(cell, content)` pairs are silently skipped, so re-recording a
/// fact is a no-op and earlier verdicts are never overwritten.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FactsLedger {
    entries: Vec<LedgerEntry>,
}

impl FactsLedger {
    pub fn new() -> Self {
        FactsLedger::default()
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Appends unless the `(cell, content)` pair is already recorded.
    /// Returns whether the entry was added.
    pub fn record(&mut self, entry: LedgerEntry) -> bool {
        let duplicate = self
            .entries
            .iter()
            .any(|e| e.cell == entry.cell && e.content == entry.content);
        if duplicate {
            return false;
        }
        self.entries.push(entry);
        true
    }

    /// True when `other` extends `self` without rewriting history.
    pub fn is_prefix_of(&self, other: &FactsLedger) -> bool {
        other.entries.len() >= self.entries.len()
            && other.entries[..self.entries.len()] == self.entries[..]
    }
}

/// Answer from the external verification port for a disputed cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerifyOutcome {
    /// Index into the submitted content list.
    Index(usize),
    Unknown,
}

#[derive(Debug, thiserror::Error)]
#[error("external verification port unavailable")]
pub struct PortUnavailable;

/// External verification source consulted for conflicts that authority
/// ranking or stress testing cannot settle. In simulation this is an oracle
/// with configurable reliability; in agent mode it is a judge call with the
/// same request/response contract.
pub trait ExternalVerifier {
    fn verify(
        &mut self,
        cell: Cell,
        contents: &[String],
    ) -> std::result::Result<VerifyOutcome, PortUnavailable>;
}

/// Port that always reports `Unknown`, forcing escalation.
pub struct NoExternalVerifier;

impl ExternalVerifier for NoExternalVerifier {
    fn verify(
        &mut self,
        _cell: Cell,
        _contents: &[String],
    ) -> std::result::Result<VerifyOutcome, PortUnavailable> {
        Ok(VerifyOutcome::Unknown)
    }
}

/// Per-node dependency structure, normalized for cross-graph comparison:
/// each dependency is mapped to the cell it occupies in its own graph, with
/// `None` marking a dangling target.
fn dependency_shape(node: &TrajectoryNode, graph: &TrajectoryGraph) -> BTreeSet<Option<Cell>> {
    node.depends_on
        .iter()
        .map(|dep| graph.node(dep).map(TrajectoryNode::cell))
        .collect()
}

/// Scans an alignment for cells whose member nodes disagree.
///
/// Agreement means identical `(kind, content, dependency shape)` across all
/// members; such cells merge silently and produce nothing. Disagreeing cells
/// of fact or action nodes raise factual conflicts; cells involving reasoning
/// nodes (or mixed kinds) raise logical conflicts.
pub fn detect_conflicts(
    alignment: &Alignment,
    graphs: &[TrajectoryGraph],
    sources: &[SourceId],
) -> Vec<Conflict> {
    debug_assert_eq!(graphs.len(), sources.len());
    let mut conflicts = Vec::new();
    for (cell, members) in &alignment.cells {
        let distinct_sources: BTreeSet<usize> = members.iter().map(|(gi, _)| *gi).collect();
        if distinct_sources.len() < 2 {
            continue;
        }
        let mut shapes: Vec<(NodeKind, &str, BTreeSet<Option<Cell>>)> = Vec::new();
        for (gi, id) in members {
            let graph = &graphs[*gi];
            let node = graph.node(id).expect("alignment references existing nodes");
            shapes.push((
                node.kind,
                node.content.as_str(),
                dependency_shape(node, graph),
            ));
        }
        let all_agree = shapes.windows(2).all(|w| w[0] == w[1]);
        if all_agree {
            continue;
        }
        let uniform_kind = shapes.windows(2).all(|w| w[0].0 == w[1].0);
        let kind = if uniform_kind && !matches!(shapes[0].0, NodeKind::Reasoning) {
            ConflictKind::Factual
        } else {
            ConflictKind::Logical
        };
        conflicts.push(Conflict {
            kind,
            cell: *cell,
            parties: members
                .iter()
                .map(|(gi, id)| (sources[*gi], id.clone()))
                .collect(),
            status: ConflictStatus::Open,
        });
    }
    conflicts
}

/// Pool context a single conflict is resolved against.
pub struct ResolveContext<'a> {
    pub graphs: &'a [TrajectoryGraph],
    pub sources: &'a [SourceId],
    /// Cells with a detected conflict this round.
    pub conflicted_cells: &'a BTreeSet<Cell>,
    /// Cells whose conflict has already been resolved this round.
    pub resolved_cells: &'a BTreeSet<Cell>,
}

impl ResolveContext<'_> {
    fn graph_of(&self, source: SourceId) -> Option<&TrajectoryGraph> {
        self.sources
            .iter()
            .position(|s| *s == source)
            .map(|i| &self.graphs[i])
    }
}

/// Outcome of [`resolve_conflict`]: either a resolution, or the conflict
/// handed back escalated (the caller keeps the reference segment).
#[derive(Debug, Clone, PartialEq)]
pub enum Resolved {
    Resolution(Resolution),
    Escalated(Conflict),
}

/// Best authority among a node's verifiable sources, if any.
fn verifiable_authority(sources: &[SourceRef]) -> Option<f64> {
    sources
        .iter()
        .filter(|s| s.verifiable)
        .map(|s| s.authority)
        .fold(None, |acc, a| Some(acc.map_or(a, |b: f64| b.max(a))))
}

/// Resolves one open conflict.
///
/// Factual conflicts rank parties by the authority of their verifiable
/// sources; no verifiable party or a tied top rank falls through to the
/// external port. Logical conflicts stress-test each party's dependency chain
/// (all targets present, none sitting in a still-contested cell); anything
/// but exactly one survivor falls through to the external port. An
/// unavailable port or an `Unknown` answer escalates the conflict.
///
/// The winning content is recorded in the ledger as verified, the losing
/// contents as rejected.
pub fn resolve_conflict(
    conflict: &Conflict,
    ctx: &ResolveContext<'_>,
    ledger: &mut FactsLedger,
    external: &mut dyn ExternalVerifier,
    round: usize,
) -> Result<Resolved> {
    debug_assert_eq!(conflict.status, ConflictStatus::Open);

    let party_nodes: Vec<(&SourceId, &TrajectoryNode)> = conflict
        .parties
        .iter()
        .map(|(source, id)| {
            let node = ctx
                .graph_of(*source)
                .and_then(|g| g.node(id))
                .ok_or_else(|| Error::UnknownSource(source.to_string()))?;
            Ok((source, node))
        })
        .collect::<Result<_>>()?;

    let settled = match conflict.kind {
        ConflictKind::Factual => resolve_factual(&party_nodes),
        ConflictKind::Logical => resolve_logical(&party_nodes, ctx),
    };

    let (winner_idx, method, evidence) = match settled {
        Some(found) => found,
        None => {
            // Distinct contents in first-appearance order; the port verdict
            // maps back to the first party carrying the verified content.
            let mut contents: Vec<String> = Vec::new();
            for (_, node) in &party_nodes {
                if !contents.contains(&node.content) {
                    contents.push(node.content.clone());
                }
            }
            match external.verify(conflict.cell, &contents) {
                Ok(VerifyOutcome::Index(i)) if i < contents.len() => {
                    let verified = contents[i].clone();
                    let idx = party_nodes
                        .iter()
                        .position(|(_, n)| n.content == verified)
                        .expect("verified content came from the party list");
                    (
                        idx,
                        ResolutionMethod::ExternalVerification,
                        format!("external port verified {verified:?}"),
                    )
                }
                Ok(_) | Err(PortUnavailable) => {
                    let mut escalated = conflict.clone();
                    escalated.status = ConflictStatus::Escalated;
                    return Ok(Resolved::Escalated(escalated));
                }
            }
        }
    };

    let (winner_source, winner_node) = (*party_nodes[winner_idx].0, party_nodes[winner_idx].1);
    let mut rejected_contents: Vec<String> = Vec::new();
    for (i, (_, node)) in party_nodes.iter().enumerate() {
        if i != winner_idx
            && node.content != winner_node.content
            && !rejected_contents.contains(&node.content)
        {
            rejected_contents.push(node.content.clone());
        }
    }

    let mut settled_conflict = conflict.clone();
    settled_conflict.status = ConflictStatus::Resolved;
    let resolution = Resolution {
        conflict: settled_conflict,
        winner: (winner_source, winner_node.id.clone()),
        method,
        evidence,
        winner_content: winner_node.content.clone(),
        rejected_contents,
    };
    record_resolution(ledger, &resolution, round);
    Ok(Resolved::Resolution(resolution))
}

/// Ledger entries implied by a resolution; the dedup in
/// [`FactsLedger::record`] makes re-recording a no-op.
fn record_resolution(ledger: &mut FactsLedger, resolution: &Resolution, round: usize) {
    let note = SourceNote {
        method: resolution.method,
        detail: resolution.evidence.clone(),
    };
    ledger.record(LedgerEntry {
        cell: resolution.conflict.cell,
        content: resolution.winner_content.clone(),
        verdict: Verdict::Verified,
        source: note.clone(),
        round,
    });
    for content in &resolution.rejected_contents {
        ledger.record(LedgerEntry {
            cell: resolution.conflict.cell,
            content: content.clone(),
            verdict: Verdict::Rejected,
            source: note.clone(),
            round,
        });
    }
}

/// Authority ranking operates over distinct contents: parties that agree
/// merge, each content is ranked by the best verifiable authority among its
/// parties, and only a tie between *disagreeing* contents (or the absence of
/// any verifiable source) falls through to the external port.
fn resolve_factual(
    parties: &[(&SourceId, &TrajectoryNode)],
) -> Option<(usize, ResolutionMethod, String)> {
    // (content, best authority, index of its best-ranked party).
    let mut contents: Vec<(&str, f64, usize)> = Vec::new();
    for (i, (_, node)) in parties.iter().enumerate() {
        let Some(authority) = verifiable_authority(&node.sources) else {
            continue;
        };
        match contents.iter_mut().find(|(c, _, _)| *c == node.content) {
            Some(entry) if authority > entry.1 => {
                entry.1 = authority;
                entry.2 = i;
            }
            Some(_) => {}
            None => contents.push((&node.content, authority, i)),
        }
    }
    if contents.is_empty() {
        return None;
    }
    contents.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal));
    let top = contents[0].1;
    if contents.iter().filter(|(_, a, _)| *a == top).count() > 1 {
        return None;
    }
    Some((
        contents[0].2,
        ResolutionMethod::AuthorityRanking,
        format!("top verifiable authority {top}"),
    ))
}

fn resolve_logical(
    parties: &[(&SourceId, &TrajectoryNode)],
    ctx: &ResolveContext<'_>,
) -> Option<(usize, ResolutionMethod, String)> {
    let passes: Vec<usize> = parties
        .iter()
        .enumerate()
        .filter(|(_, (source, node))| {
            let graph = match ctx.graph_of(**source) {
                Some(g) => g,
                None => return false,
            };
            node.depends_on.iter().all(|dep| match graph.node(dep) {
                None => false,
                Some(target) => {
                    let cell = target.cell();
                    !ctx.conflicted_cells.contains(&cell) || ctx.resolved_cells.contains(&cell)
                }
            })
        })
        .map(|(i, _)| i)
        .collect();
    // Passing parties that agree (same content, same dependency shape) count
    // as one surviving variant; the stress test settles the conflict exactly
    // when a single variant survives.
    type VariantKey<'a> = (&'a str, BTreeSet<Option<Cell>>);
    let mut variants: Vec<(usize, VariantKey)> = Vec::new();
    for &i in &passes {
        let (source, node) = (parties[i].0, parties[i].1);
        let shape = ctx
            .graph_of(*source)
            .map(|g| dependency_shape(node, g))
            .unwrap_or_default();
        let key = (node.content.as_str(), shape);
        if !variants.iter().any(|(_, k)| *k == key) {
            variants.push((i, key));
        }
    }
    if variants.len() == 1 {
        Some((
            variants[0].0,
            ResolutionMethod::StressTest,
            "sole surviving variant with an intact dependency chain".to_string(),
        ))
    } else {
        None
    }
}

/// Winning source and replacement node slice per dimension. Dimensions absent
/// from the map keep the reference slice.
pub type DimensionWinners = BTreeMap<usize, (SourceId, Vec<TrajectoryNode>)>;

#[derive(Debug, Clone)]
pub struct RefineConfig {
    /// Reject rounds with fewer than two candidates (comparative evaluation
    /// needs a pool).
    pub enforce_min_batch: bool,
    /// Tool-log entries retained per round; the trajectory and the facts
    /// ledger are never truncated.
    pub tool_log_cap_per_round: usize,
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig {
            enforce_min_batch: true,
            tool_log_cap_per_round: 32,
        }
    }
}

/// Splices winning dimension slices into the reference and advances the
/// round.
///
/// Dimensions whose winner is the reference (or that have no winner) are kept
/// byte-for-byte: their nodes are never rewritten. Transplanted nodes adopt
/// the reference's node id when they replace an existing cell, so edges from
/// kept dimensions stay valid; their own dependency edges are remapped by
/// cell against the donor graph and dropped when the target cell vanished
/// from the merge. The merged list keeps reference positions for replaced
/// cells and appends brand-new cells in `(dimension, step)` order, then gets
/// a topological repair that prefers the existing order and only ever severs
/// transplanted edges when mixing provenances created a cycle.
pub fn integrate(
    reference: &ReferenceState,
    winners: &DimensionWinners,
    resolutions: &[Resolution],
    pool: &[(SourceId, &TrajectoryGraph)],
    config: &RefineConfig,
    round_logs: Vec<String>,
) -> Result<ReferenceState> {
    let j = reference.trajectory.j;
    let donor_graph = |source: SourceId| -> Option<&TrajectoryGraph> {
        if source == SourceId::Reference {
            return Some(&reference.trajectory);
        }
        pool.iter().find(|(s, _)| *s == source).map(|(_, g)| *g)
    };
    for (dim, (source, _)) in winners {
        if *dim == 0 || *dim > j {
            return Err(Error::DimensionOutOfRange { dimension: *dim, j });
        }
        if donor_graph(*source).is_none() {
            return Err(Error::UnknownSource(source.to_string()));
        }
    }

    let replaced: BTreeSet<usize> = winners
        .iter()
        .filter(|(_, (source, _))| *source != SourceId::Reference)
        .map(|(dim, _)| *dim)
        .collect();

    // Merged id per cell, needed to remap transplanted dependency edges.
    let mut merged_id_at: BTreeMap<Cell, NodeId> = BTreeMap::new();
    for node in &reference.trajectory.nodes {
        if !replaced.contains(&node.dimension) {
            merged_id_at.insert(node.cell(), node.id.clone());
        }
    }
    let mut used_ids: HashSet<String> = merged_id_at.values().map(|n| n.0.clone()).collect();

    // First pass: adopt ids for every transplanted node.
    let mut adopted: BTreeMap<usize, Vec<TrajectoryNode>> = BTreeMap::new();
    for &dim in &replaced {
        let (source, slice) = &winners[&dim];
        let mut nodes = Vec::with_capacity(slice.len());
        for node in slice {
            if node.dimension != dim {
                return Err(Error::invalid(
                    "winner slice",
                    format!(
                        "node {} has dimension {}, expected {dim}",
                        node.id, node.dimension
                    ),
                ));
            }
            let cell = node.cell();
            let id = match reference.trajectory.node_at(cell) {
                Some(ref_node) => ref_node.id.clone(),
                None => {
                    let mut candidate = node.id.0.clone();
                    while !used_ids.insert(candidate.clone()) {
                        candidate.push_str(&format!("@{source}"));
                    }
                    NodeId(candidate)
                }
            };
            merged_id_at.insert(cell, id.clone());
            let mut out = node.clone();
            out.id = id;
            nodes.push(out);
        }
        adopted.insert(dim, nodes);
    }

    // Second pass: remap transplanted dependency edges by donor-graph cell.
    for (&dim, nodes) in &mut adopted {
        let (source, slice) = &winners[&dim];
        let donor = donor_graph(*source).expect("validated above");
        for (node, original) in nodes.iter_mut().zip(slice.iter()) {
            let mut deps = Vec::new();
            for dep in &original.depends_on {
                if let Some(target) = donor.node(dep) {
                    if let Some(id) = merged_id_at.get(&target.cell()) {
                        if !deps.contains(id) {
                            deps.push(id.clone());
                        }
                    }
                }
            }
            node.depends_on = deps;
        }
    }

    // Merged list: reference order with replaced cells swapped in place;
    // cells the reference never had append afterwards in cell order.
    let mut by_cell: BTreeMap<Cell, TrajectoryNode> = adopted
        .into_values()
        .flatten()
        .map(|n| (n.cell(), n))
        .collect();
    let mut merged: Vec<TrajectoryNode> = Vec::with_capacity(reference.trajectory.nodes.len());
    let mut kept: Vec<bool> = Vec::new();
    for node in &reference.trajectory.nodes {
        if replaced.contains(&node.dimension) {
            if let Some(replacement) = by_cell.remove(&node.cell()) {
                merged.push(replacement);
                kept.push(false);
            }
            // Cell dropped by the winner slice: the node is removed.
        } else {
            merged.push(node.clone());
            kept.push(true);
        }
    }
    for (_, node) in by_cell {
        merged.push(node);
        kept.push(false);
    }

    let trajectory = TrajectoryGraph::new(j, topological_repair(merged, &kept));

    // Context: the ledger gains this round's resolutions, node confidences
    // refresh from the merged trajectory, tool logs append capped per round.
    let mut verified_facts = reference.context.verified_facts.clone();
    for resolution in resolutions {
        record_resolution(&mut verified_facts, resolution, reference.round);
    }
    let mut confidences = reference.context.confidences.clone();
    for node in &trajectory.nodes {
        confidences.insert(node.id.clone(), node.confidence);
    }
    let mut tool_logs = reference.context.tool_logs.clone();
    tool_logs.extend(round_logs.into_iter().take(config.tool_log_cap_per_round));

    Ok(ReferenceState {
        trajectory,
        context: SupplementaryContext {
            verified_facts,
            confidences,
            tool_logs,
        },
        round: reference.round + 1,
    })
}

/// Kahn walk keyed by provisional position, preferring the incoming order.
/// When mixing provenances created a cycle, the lowest-positioned
/// transplanted participant drops its unsatisfied edges and the walk
/// continues; kept nodes are never rewritten.
fn topological_repair(nodes: Vec<TrajectoryNode>, kept: &[bool]) -> Vec<TrajectoryNode> {
    let n = nodes.len();
    let index_of: HashMap<String, usize> = nodes
        .iter()
        .enumerate()
        .map(|(i, node)| (node.id.0.clone(), i))
        .collect();

    let mut pending: Vec<usize> = vec![0; n];
    let mut dependents: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, node) in nodes.iter().enumerate() {
        for dep in &node.depends_on {
            if let Some(&d) = index_of.get(dep.as_str()) {
                if d != i {
                    pending[i] += 1;
                    dependents[d].push(i);
                }
            }
        }
    }

    let mut nodes: Vec<Option<TrajectoryNode>> = nodes.into_iter().map(Some).collect();
    let mut ready: BTreeSet<usize> = (0..n).filter(|&i| pending[i] == 0).collect();
    let mut emitted: Vec<bool> = vec![false; n];
    let mut out = Vec::with_capacity(n);

    while out.len() < n {
        let next = match ready.iter().next().copied() {
            Some(i) => i,
            None => {
                let victim = (0..n)
                    .find(|&i| !emitted[i] && !kept[i])
                    .or_else(|| (0..n).find(|&i| !emitted[i]))
                    .expect("unemitted node exists while output is short");
                let node = nodes[victim].as_mut().expect("victim not yet emitted");
                node.depends_on
                    .retain(|dep| index_of.get(dep.as_str()).is_none_or(|&d| emitted[d]));
                pending[victim] = 0;
                ready.insert(victim);
                continue;
            }
        };
        ready.remove(&next);
        emitted[next] = true;
        out.push(nodes[next].take().expect("emitted once"));
        for &dependent in &dependents[next] {
            if !emitted[dependent] {
                pending[dependent] -= 1;
                if pending[dependent] == 0 {
                    ready.insert(dependent);
                }
            }
        }
    }
    out
}

/// How the refinement round selects dimension winners.
pub enum RefineMode<'a> {
    /// Exact per-dimension argmin through the evaluation port.
    Oracle(&'a dyn EvalPort),
    /// No access to the ideal: winners come from conflict resolutions.
    Judge,
}

/// Output of one refinement round.
pub struct RefineOutcome {
    pub state: ReferenceState,
    pub conflicts: Vec<Conflict>,
    pub resolutions: Vec<Resolution>,
    pub escalated: Vec<Conflict>,
    pub winners: DimensionWinners,
}

/// One full refinement round over `reference + candidates`.
///
/// Composes alignment, conflict detection, resolution, dimension-winner
/// selection, and integration. `task` is carried into the round log; `seed`
/// keys the (oracle-silent) selection stream.
pub fn refine(
    task: &str,
    state: &ReferenceState,
    candidates: &[TrajectoryGraph],
    mode: RefineMode<'_>,
    external: &mut dyn ExternalVerifier,
    config: &RefineConfig,
    seed: u64,
) -> Result<RefineOutcome> {
    if candidates.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    if config.enforce_min_batch && candidates.len() < 2 {
        return Err(Error::BatchTooSmall {
            got: candidates.len(),
        });
    }
    let j = state.trajectory.j;
    for c in candidates {
        if c.j != j {
            return Err(Error::DimensionMismatch {
                left: j,
                right: c.j,
            });
        }
    }

    let mut graphs: Vec<&TrajectoryGraph> = Vec::with_capacity(candidates.len() + 1);
    graphs.push(&state.trajectory);
    graphs.extend(candidates.iter());
    let owned: Vec<TrajectoryGraph> = graphs.iter().map(|g| (*g).clone()).collect();
    let sources: Vec<SourceId> = (0..graphs.len())
        .map(|i| {
            if i == 0 {
                SourceId::Reference
            } else {
                SourceId::Agent(i - 1)
            }
        })
        .collect();

    let alignment = align_nodes(&owned)?;
    let conflicts = detect_conflicts(&alignment, &owned, &sources);

    let conflicted_cells: BTreeSet<Cell> = conflicts.iter().map(|c| c.cell).collect();
    let mut resolved_cells: BTreeSet<Cell> = BTreeSet::new();
    let mut ledger = state.context.verified_facts.clone();
    let mut resolutions = Vec::new();
    let mut escalated = Vec::new();
    for conflict in &conflicts {
        let ctx = ResolveContext {
            graphs: &owned,
            sources: &sources,
            conflicted_cells: &conflicted_cells,
            resolved_cells: &resolved_cells,
        };
        match resolve_conflict(conflict, &ctx, &mut ledger, external, state.round)? {
            Resolved::Resolution(resolution) => {
                resolved_cells.insert(resolution.conflict.cell);
                resolutions.push(resolution);
            }
            Resolved::Escalated(c) => escalated.push(c),
        }
    }

    let winners = match mode {
        RefineMode::Oracle(eval) => {
            let scored: Vec<(SourceId, EvaluationVector)> = owned
                .iter()
                .zip(sources.iter())
                .map(|(g, s)| Ok((*s, eval.evaluate(g)?)))
                .collect::<Result<_>>()?;
            let mut winners = DimensionWinners::new();
            let mut rng = substream(seed, &[state.round as u64, 0x6a72]);
            for dim in 1..=j {
                let winner = dimension_argmin(&scored, dim, &JudgeNoise::ORACLE, &mut rng)?;
                if winner != SourceId::Reference {
                    winners.insert(dim, (winner, slice_of(&owned, &sources, winner, dim)));
                }
            }
            winners
        }
        RefineMode::Judge => judge_winners(state, &owned, &sources, &resolutions, &escalated, j),
    };

    let round_logs = vec![format!(
        "task {task}: round {} resolved {}/{} conflicts over {} aligned cells",
        state.round,
        resolutions.len(),
        conflicts.len(),
        alignment.cells.len(),
    )];

    let pool: Vec<(SourceId, &TrajectoryGraph)> =
        sources.iter().copied().zip(owned.iter()).collect();
    let next = integrate(state, &winners, &resolutions, &pool, config, round_logs)?;

    Ok(RefineOutcome {
        state: next,
        conflicts,
        resolutions,
        escalated,
        winners,
    })
}

/// Judge-mode winner per dimension: most resolution wins, escalations
/// counting for the reference, ties to the reference then lowest agent. A
/// dimension with no signal keeps the reference unless the reference has no
/// nodes there and a candidate can fill the gap.
fn judge_winners(
    state: &ReferenceState,
    pool: &[TrajectoryGraph],
    sources: &[SourceId],
    resolutions: &[Resolution],
    escalated: &[Conflict],
    j: usize,
) -> DimensionWinners {
    let mut winners = DimensionWinners::new();
    for dim in 1..=j {
        let mut wins: BTreeMap<SourceId, usize> = BTreeMap::new();
        for r in resolutions {
            if r.conflict.cell.dimension == dim {
                *wins.entry(r.winner.0).or_insert(0) += 1;
            }
        }
        for c in escalated {
            if c.cell.dimension == dim {
                *wins.entry(SourceId::Reference).or_insert(0) += 1;
            }
        }
        let winner = wins
            .iter()
            .max_by_key(|(source, count)| (**count, std::cmp::Reverse(**source)))
            .map(|(source, _)| *source)
            .unwrap_or_else(|| {
                if state.trajectory.dim_slice(dim).is_empty() {
                    sources
                        .iter()
                        .skip(1)
                        .find(|s| !slice_of(pool, sources, **s, dim).is_empty())
                        .copied()
                        .unwrap_or(SourceId::Reference)
                } else {
                    SourceId::Reference
                }
            });
        if winner != SourceId::Reference {
            let slice = slice_of(pool, sources, winner, dim);
            if !slice.is_empty() {
                winners.insert(dim, (winner, slice));
            }
        }
    }
    winners
}

fn slice_of(
    pool: &[TrajectoryGraph],
    sources: &[SourceId],
    source: SourceId,
    dim: usize,
) -> Vec<TrajectoryNode> {
    sources
        .iter()
        .position(|s| *s == source)
        .map(|i| pool[i].dim_slice(dim).into_iter().cloned().collect())
        .unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluator::{evaluate, IdealTrajectory, OracleEval};
    use crate::rng::substream;
    use crate::simulation::graph_agent::layered_ideal;
    use crate::trajectory::{dist, NodeKind};
    use std::sync::Arc;

    #[allow(clippy::too_many_arguments)]
    fn node(
        id: &str,
        kind: NodeKind,
        content: &str,
        deps: &[&str],
        dimension: usize,
        step: usize,
        authority: f64,
        verifiable: bool,
    ) -> TrajectoryNode {
        TrajectoryNode {
            id: NodeId::new(id),
            kind,
            content: content.to_string(),
            depends_on: deps.iter().map(|d| NodeId::new(*d)).collect(),
            dimension,
            step_index: step,
            confidence: 0.8,
            sources: vec![SourceRef {
                authority,
                verifiable,
            }],
            origin: "test".to_string(),
        }
    }

    /// Graph reproducing the ideal except that the first `wrong[d]` steps of
    /// dimension `d + 1` carry `tag`-flavored wrong content.
    fn corrupted(ideal: &IdealTrajectory, wrong: &[usize], tag: &str) -> TrajectoryGraph {
        let base = ideal.trajectory();
        let nodes = base
            .nodes
            .iter()
            .map(|n| {
                let mut out = n.clone();
                out.id = NodeId::new(format!("{tag}-{}", n.id));
                out.origin = tag.to_string();
                if n.step_index < wrong[n.dimension - 1] {
                    out.content = format!("wrong-{tag}-{}-{}", n.dimension, n.step_index);
                }
                out.depends_on = n
                    .depends_on
                    .iter()
                    .map(|d| NodeId::new(format!("{tag}-{d}")))
                    .collect();
                out
            })
            .collect();
        TrajectoryGraph::new(base.j, nodes)
    }

    fn state_of(trajectory: TrajectoryGraph) -> ReferenceState {
        ReferenceState::initial(trajectory, Default::default())
    }

    #[test]
    fn identical_graphs_produce_no_conflicts() {
        let ideal = layered_ideal(2, 3).unwrap();
        let g = ideal.trajectory().clone();
        let graphs = vec![g.clone(), g];
        let sources = vec![SourceId::Reference, SourceId::Agent(0)];
        let alignment = align_nodes(&graphs).unwrap();
        assert!(detect_conflicts(&alignment, &graphs, &sources).is_empty());
    }

    #[test]
    fn fact_cells_with_distinct_contents_conflict_factually() {
        let a = TrajectoryGraph::new(
            1,
            vec![node("a", NodeKind::Fact, "1912", &[], 1, 0, 0.9, true)],
        );
        let b = TrajectoryGraph::new(
            1,
            vec![node("b", NodeKind::Fact, "1913", &[], 1, 0, 0.4, true)],
        );
        let graphs = vec![a, b];
        let sources = vec![SourceId::Reference, SourceId::Agent(0)];
        let alignment = align_nodes(&graphs).unwrap();
        let conflicts = detect_conflicts(&alignment, &graphs, &sources);
        assert_eq!(conflicts.len(), 1);
        assert_eq!(conflicts[0].kind, ConflictKind::Factual);
        assert_eq!(conflicts[0].parties.len(), 2);
    }

    #[test]
    fn reasoning_cells_with_divergent_dependencies_conflict_logically() {
        let a = TrajectoryGraph::new(
            1,
            vec![
                node("f0", NodeKind::Fact, "base-a", &[], 1, 0, 0.9, true),
                node("f1", NodeKind::Fact, "shared", &[], 1, 1, 0.9, true),
                node(
                    "r",
                    NodeKind::Reasoning,
                    "therefore",
                    &["f0"],
                    1,
                    2,
                    0.9,
                    true,
                ),
            ],
        );
        let b = TrajectoryGraph::new(
            1,
            vec![
                node("g0", NodeKind::Fact, "base-a", &[], 1, 0, 0.9, true),
                node("g1", NodeKind::Fact, "shared", &[], 1, 1, 0.9, true),
                node(
                    "r",
                    NodeKind::Reasoning,
                    "therefore",
                    &["g1"],
                    1,
                    2,
                    0.9,
                    true,
                ),
            ],
        );
        let graphs = vec![a, b];
        let sources = vec![SourceId::Reference, SourceId::Agent(0)];
        let alignment = align_nodes(&graphs).unwrap();
        let conflicts = detect_conflicts(&alignment, &graphs, &sources);
        assert_eq!(conflicts.len(), 1);
        assert_eq!(conflicts[0].kind, ConflictKind::Logical);
        assert_eq!(conflicts[0].cell, Cell::new(1, 2));
    }

    fn single_cell_conflict(
        auth_a: f64,
        ver_a: bool,
        auth_b: f64,
        ver_b: bool,
    ) -> (Vec<TrajectoryGraph>, Vec<SourceId>, Conflict) {
        let a = TrajectoryGraph::new(
            1,
            vec![node("a", NodeKind::Fact, "1912", &[], 1, 0, auth_a, ver_a)],
        );
        let b = TrajectoryGraph::new(
            1,
            vec![node("b", NodeKind::Fact, "1913", &[], 1, 0, auth_b, ver_b)],
        );
        let graphs = vec![a, b];
        let sources = vec![SourceId::Reference, SourceId::Agent(0)];
        let alignment = align_nodes(&graphs).unwrap();
        let mut conflicts = detect_conflicts(&alignment, &graphs, &sources);
        (graphs, sources, conflicts.remove(0))
    }

    struct FixedPort(std::result::Result<VerifyOutcome, ()>);
    impl ExternalVerifier for FixedPort {
        fn verify(
            &mut self,
            _: Cell,
            _: &[String],
        ) -> std::result::Result<VerifyOutcome, PortUnavailable> {
            self.0.map_err(|_| PortUnavailable)
        }
    }

    #[test]
    fn factual_resolution_ranks_by_authority() {
        let (graphs, sources, conflict) = single_cell_conflict(0.9, true, 0.4, true);
        let ctx = ResolveContext {
            graphs: &graphs,
            sources: &sources,
            conflicted_cells: &[conflict.cell].into_iter().collect(),
            resolved_cells: &BTreeSet::new(),
        };
        let mut ledger = FactsLedger::new();
        let mut port = FixedPort(Ok(VerifyOutcome::Unknown));
        match resolve_conflict(&conflict, &ctx, &mut ledger, &mut port, 1).unwrap() {
            Resolved::Resolution(r) => {
                assert_eq!(r.method, ResolutionMethod::AuthorityRanking);
                assert_eq!(r.winner.0, SourceId::Reference);
                assert_eq!(r.winner_content, "1912");
            }
            other => panic!("expected resolution, got {other:?}"),
        }
        assert_eq!(ledger.len(), 2);
        assert_eq!(ledger.entries()[0].verdict, Verdict::Verified);
        assert_eq!(ledger.entries()[1].verdict, Verdict::Rejected);
    }

    #[test]
    fn agreeing_parties_merge_before_authority_ranking() {
        // Two parties agree on "1911" with tied best authority; only the
        // disagreeing "1912" party opposes them. The tie between agreeing
        // parties is immaterial and must not reach the external port.
        let a = TrajectoryGraph::new(
            1,
            vec![node("a", NodeKind::Fact, "1911", &[], 1, 0, 0.85, true)],
        );
        let b = TrajectoryGraph::new(
            1,
            vec![node("b", NodeKind::Fact, "1911", &[], 1, 0, 0.85, true)],
        );
        let c = TrajectoryGraph::new(
            1,
            vec![node("c", NodeKind::Fact, "1912", &[], 1, 0, 0.4, true)],
        );
        let graphs = vec![a, b, c];
        let sources = vec![SourceId::Reference, SourceId::Agent(0), SourceId::Agent(1)];
        let alignment = align_nodes(&graphs).unwrap();
        let conflicts = detect_conflicts(&alignment, &graphs, &sources);
        assert_eq!(conflicts.len(), 1);
        assert_eq!(conflicts[0].parties.len(), 3);
        let ctx = ResolveContext {
            graphs: &graphs,
            sources: &sources,
            conflicted_cells: &conflicts.iter().map(|c| c.cell).collect(),
            resolved_cells: &BTreeSet::new(),
        };
        let mut ledger = FactsLedger::new();
        let mut port = FixedPort(Err(()));
        match resolve_conflict(&conflicts[0], &ctx, &mut ledger, &mut port, 1).unwrap() {
            Resolved::Resolution(r) => {
                assert_eq!(r.method, ResolutionMethod::AuthorityRanking);
                assert_eq!(r.winner_content, "1911");
                assert_eq!(r.rejected_contents, vec!["1912".to_string()]);
            }
            other => panic!("expected authority resolution, got {other:?}"),
        }
    }

    #[test]
    fn tied_authorities_defer_to_the_external_port() {
        let (graphs, sources, conflict) = single_cell_conflict(0.7, true, 0.7, true);
        let ctx = ResolveContext {
            graphs: &graphs,
            sources: &sources,
            conflicted_cells: &[conflict.cell].into_iter().collect(),
            resolved_cells: &BTreeSet::new(),
        };
        let mut ledger = FactsLedger::new();
        let mut port = FixedPort(Ok(VerifyOutcome::Index(1)));
        match resolve_conflict(&conflict, &ctx, &mut ledger, &mut port, 1).unwrap() {
            Resolved::Resolution(r) => {
                assert_eq!(r.method, ResolutionMethod::ExternalVerification);
                assert_eq!(r.winner_content, "1913");
            }
            other => panic!("expected resolution, got {other:?}"),
        }
    }

    #[test]
    fn unavailable_port_escalates() {
        let (graphs, sources, conflict) = single_cell_conflict(0.7, false, 0.7, false);
        let ctx = ResolveContext {
            graphs: &graphs,
            sources: &sources,
            conflicted_cells: &[conflict.cell].into_iter().collect(),
            resolved_cells: &BTreeSet::new(),
        };
        let mut ledger = FactsLedger::new();
        let mut port = FixedPort(Err(()));
        match resolve_conflict(&conflict, &ctx, &mut ledger, &mut port, 1).unwrap() {
            Resolved::Escalated(c) => assert_eq!(c.status, ConflictStatus::Escalated),
            other => panic!("expected escalation, got {other:?}"),
        }
        assert!(ledger.is_empty());
    }

    #[test]
    fn logical_resolution_stress_tests_dangling_dependencies() {
        let a = TrajectoryGraph::new(
            1,
            vec![
                node("f", NodeKind::Fact, "base", &[], 1, 0, 0.9, true),
                node(
                    "r",
                    NodeKind::Reasoning,
                    "conclusion",
                    &["f"],
                    1,
                    1,
                    0.9,
                    true,
                ),
            ],
        );
        let b = TrajectoryGraph::new(
            1,
            vec![
                node("f2", NodeKind::Fact, "base", &[], 1, 0, 0.9, true),
                node(
                    "r2",
                    NodeKind::Reasoning,
                    "conclusion",
                    &["missing"],
                    1,
                    1,
                    0.9,
                    true,
                ),
            ],
        );
        let graphs = vec![a, b];
        let sources = vec![SourceId::Reference, SourceId::Agent(0)];
        let alignment = align_nodes(&graphs).unwrap();
        let conflicts = detect_conflicts(&alignment, &graphs, &sources);
        assert_eq!(conflicts.len(), 1);
        assert_eq!(conflicts[0].kind, ConflictKind::Logical);
        let ctx = ResolveContext {
            graphs: &graphs,
            sources: &sources,
            conflicted_cells: &conflicts.iter().map(|c| c.cell).collect(),
            resolved_cells: &BTreeSet::new(),
        };
        let mut ledger = FactsLedger::new();
        let mut port = FixedPort(Ok(VerifyOutcome::Unknown));
        match resolve_conflict(&conflicts[0], &ctx, &mut ledger, &mut port, 1).unwrap() {
            Resolved::Resolution(r) => {
                assert_eq!(r.method, ResolutionMethod::StressTest);
                assert_eq!(r.winner.0, SourceId::Reference);
            }
            other => panic!("expected stress-test win, got {other:?}"),
        }
    }

    #[test]
    fn integrate_with_reference_winners_is_a_noop_round() {
        let ideal = layered_ideal(2, 3).unwrap();
        let state = state_of(ideal.trajectory().clone());
        let next = integrate(
            &state,
            &DimensionWinners::new(),
            &[],
            &[],
            &Default::default(),
            vec![],
        )
        .unwrap();
        assert_eq!(next.trajectory, state.trajectory);
        assert_eq!(next.round, state.round + 1);
    }

    #[test]
    fn integrate_swaps_exactly_the_winning_dimension() {
        let ideal = layered_ideal(3, 4).unwrap();
        let reference = corrupted(&ideal, &[1, 2, 1], "ref");
        let candidate = corrupted(&ideal, &[3, 0, 1], "cand");
        let state = state_of(reference.clone());
        let mut winners = DimensionWinners::new();
        winners.insert(
            2,
            (
                SourceId::Agent(0),
                candidate.dim_slice(2).into_iter().cloned().collect(),
            ),
        );
        let pool = vec![(SourceId::Agent(0), &candidate)];
        let next = integrate(&state, &winners, &[], &pool, &Default::default(), vec![]).unwrap();

        // Dimension 2 now carries the candidate's contents.
        for n in next.trajectory.dim_slice(2) {
            let donor = candidate.node_at(n.cell()).unwrap();
            assert_eq!(n.content, donor.content);
        }
        // Dimensions 1 and 3 are byte-identical to the reference slice.
        for dim in [1usize, 3] {
            let before = serde_json::to_string(&reference.dim_slice(dim)).unwrap();
            let after = serde_json::to_string(&next.trajectory.dim_slice(dim)).unwrap();
            assert_eq!(before, after);
        }
        assert!(crate::trajectory::validate_graph(&next.trajectory).is_empty());
    }

    #[test]
    fn integrate_fills_a_dimension_the_reference_lacks() {
        let ideal = layered_ideal(2, 2).unwrap();
        let full = ideal.trajectory();
        let missing_dim2 = TrajectoryGraph::new(
            2,
            full.nodes
                .iter()
                .filter(|n| n.dimension == 1)
                .cloned()
                .collect(),
        );
        let candidate = corrupted(&ideal, &[0, 0], "cand");
        let state = state_of(missing_dim2.clone());
        let mut winners = DimensionWinners::new();
        winners.insert(
            2,
            (
                SourceId::Agent(0),
                candidate.dim_slice(2).into_iter().cloned().collect(),
            ),
        );
        let pool = vec![(SourceId::Agent(0), &candidate)];
        let next = integrate(&state, &winners, &[], &pool, &Default::default(), vec![]).unwrap();
        assert_eq!(
            next.trajectory.nodes.len(),
            missing_dim2.nodes.len() + candidate.dim_slice(2).len()
        );
        assert!(crate::trajectory::validate_graph(&next.trajectory).is_empty());
    }

    #[test]
    fn integrate_rejects_unknown_winner_sources() {
        let ideal = layered_ideal(1, 2).unwrap();
        let state = state_of(ideal.trajectory().clone());
        let mut winners = DimensionWinners::new();
        winners.insert(1, (SourceId::Agent(7), vec![]));
        let err = integrate(&state, &winners, &[], &[], &Default::default(), vec![]);
        assert!(matches!(err, Err(Error::UnknownSource(_))));
    }

    #[test]
    fn refine_merges_dimension_wise_minima() {
        let ideal = layered_ideal(3, 10).unwrap();
        let eval = OracleEval::new(ideal.clone());
        // Error fractions out of 10 cells per dimension.
        let reference = corrupted(&ideal, &[5, 2, 9], "ref");
        let c1 = corrupted(&ideal, &[1, 8, 9], "a");
        let c2 = corrupted(&ideal, &[6, 3, 4], "b");
        assert_eq!(evaluate(&reference, &ideal).unwrap().d, vec![0.5, 0.2, 0.9]);
        assert_eq!(evaluate(&c1, &ideal).unwrap().d, vec![0.1, 0.8, 0.9]);
        assert_eq!(evaluate(&c2, &ideal).unwrap().d, vec![0.6, 0.3, 0.4]);

        let state = state_of(reference);
        let mut port = NoExternalVerifier;
        let out = refine(
            "merge",
            &state,
            &[c1, c2],
            RefineMode::Oracle(&eval),
            &mut port,
            &Default::default(),
            42,
        )
        .unwrap();
        let merged = evaluate(&out.state.trajectory, &ideal).unwrap();
        assert_eq!(merged.d, vec![0.1, 0.2, 0.4]);
        assert!((dist(&merged).unwrap() - 0.7 / 3.0).abs() < 1e-12);
        assert_eq!(out.state.round, 2);
    }

    #[test]
    fn refine_keeps_reference_when_candidates_are_dominated() {
        let ideal = layered_ideal(2, 5).unwrap();
        let eval = OracleEval::new(ideal.clone());
        let reference = corrupted(&ideal, &[1, 0], "ref");
        let c1 = corrupted(&ideal, &[3, 2], "a");
        let c2 = corrupted(&ideal, &[2, 4], "b");
        let state = state_of(reference.clone());
        let mut port = NoExternalVerifier;
        let out = refine(
            "dominated",
            &state,
            &[c1, c2],
            RefineMode::Oracle(&eval),
            &mut port,
            &Default::default(),
            42,
        )
        .unwrap();
        assert!(out.winners.is_empty());
        assert_eq!(out.state.trajectory, reference);
    }

    #[test]
    fn refine_adopts_a_strictly_better_single_dimension_candidate() {
        let ideal = layered_ideal(1, 4).unwrap();
        let eval = OracleEval::new(ideal.clone());
        let reference = corrupted(&ideal, &[3], "ref");
        let better = corrupted(&ideal, &[0], "a");
        let other = corrupted(&ideal, &[4], "b");
        let state = state_of(reference);
        let mut port = NoExternalVerifier;
        let out = refine(
            "adopt",
            &state,
            &[better.clone(), other],
            RefineMode::Oracle(&eval),
            &mut port,
            &Default::default(),
            42,
        )
        .unwrap();
        let merged = evaluate(&out.state.trajectory, &ideal).unwrap();
        assert_eq!(merged.d, vec![0.0]);
        for n in out.state.trajectory.nodes.iter() {
            assert_eq!(n.content, better.node_at(n.cell()).unwrap().content);
        }
    }

    #[test]
    fn refine_enforces_the_minimum_batch() {
        let ideal = layered_ideal(1, 2).unwrap();
        let eval = OracleEval::new(ideal.clone());
        let state = state_of(ideal.trajectory().clone());
        let mut port = NoExternalVerifier;
        let one = vec![ideal.trajectory().clone()];
        let err = refine(
            "small",
            &state,
            &one,
            RefineMode::Oracle(&eval),
            &mut port,
            &Default::default(),
            1,
        );
        assert!(matches!(err, Err(Error::BatchTooSmall { got: 1 })));
        let relaxed = RefineConfig {
            enforce_min_batch: false,
            ..Default::default()
        };
        assert!(refine(
            "small",
            &state,
            &one,
            RefineMode::Oracle(&eval),
            &mut port,
            &relaxed,
            1
        )
        .is_ok());
        let none: Vec<TrajectoryGraph> = vec![];
        assert!(matches!(
            refine(
                "none",
                &state,
                &none,
                RefineMode::Oracle(&eval),
                &mut port,
                &relaxed,
                1
            ),
            Err(Error::EmptyCandidates)
        ));
    }

    #[test]
    fn refine_rejects_j_mismatch() {
        let ideal = layered_ideal(2, 2).unwrap();
        let eval = OracleEval::new(ideal.clone());
        let state = state_of(ideal.trajectory().clone());
        let mut port = NoExternalVerifier;
        let odd = TrajectoryGraph::new(3, vec![]);
        let err = refine(
            "mismatch",
            &state,
            &[odd.clone(), odd],
            RefineMode::Oracle(&eval),
            &mut port,
            &Default::default(),
            1,
        );
        assert!(matches!(err, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn ledger_grows_as_a_prefix_across_rounds() {
        let ideal = Arc::new(layered_ideal(2, 4).unwrap());
        let eval = OracleEval::new((*ideal).clone());
        let mut state = state_of(corrupted(&ideal, &[2, 3], "ref"));
        let mut port = crate::simulation::graph_agent::OracleVerifier::perfect(ideal.clone(), 5);
        let mut previous = state.context.verified_facts.clone();
        for round in 0..3 {
            let c1 = corrupted(&ideal, &[round, 1], "a");
            let c2 = corrupted(&ideal, &[1, round], "b");
            let out = refine(
                "ledger",
                &state,
                &[c1, c2],
                RefineMode::Oracle(&eval),
                &mut port,
                &Default::default(),
                9,
            )
            .unwrap();
            assert!(previous.is_prefix_of(&out.state.context.verified_facts));
            previous = out.state.context.verified_facts.clone();
            state = out.state;
        }
    }

    #[test]
    fn judge_mode_resolution_winners_drive_the_merge() {
        let ideal = Arc::new(layered_ideal(1, 3).unwrap());
        // Reference is wrong everywhere with weak sources; candidate a is
        // right everywhere with strong verifiable sources.
        let mut reference = corrupted(&ideal, &[3], "ref");
        for n in reference.nodes.iter_mut() {
            n.sources = vec![SourceRef {
                authority: 0.2,
                verifiable: true,
            }];
        }
        let mut good = corrupted(&ideal, &[0], "a");
        for n in good.nodes.iter_mut() {
            n.sources = vec![SourceRef {
                authority: 0.9,
                verifiable: true,
            }];
        }
        let other = corrupted(&ideal, &[3], "b");
        let state = state_of(reference);
        let mut port = crate::simulation::graph_agent::OracleVerifier::perfect(ideal.clone(), 3);
        let out = refine(
            "judge",
            &state,
            &[good.clone(), other],
            RefineMode::Judge,
            &mut port,
            &Default::default(),
            17,
        )
        .unwrap();
        assert!(!out.resolutions.is_empty());
        let merged = evaluate(&out.state.trajectory, &ideal).unwrap();
        assert_eq!(merged.d, vec![0.0]);
    }

    #[test]
    fn oracle_refine_is_monotone_on_random_instances() {
        use crate::orchestrator::{AgentPort, Task};
        use crate::simulation::graph_agent::SimulatedAgent;
        let task = Task::new("prop", "q");
        for trial in 0..300u64 {
            let j = 1 + (trial % 4) as usize;
            let steps = 1 + (trial % 3) as usize;
            let ideal = Arc::new(layered_ideal(j, steps).unwrap());
            let eval = OracleEval::new((*ideal).clone());
            let maker = SimulatedAgent::new(0, ideal.clone());
            let mut rng = substream(1234, &[trial, 0]);
            let (reference, _) = maker.generate(&task, None, &mut rng).unwrap();
            let state = state_of(reference);
            let m = 2 + (trial % 3) as usize;
            let candidates: Vec<TrajectoryGraph> = (0..m)
                .map(|i| {
                    let agent = SimulatedAgent::new(i + 1, ideal.clone());
                    let mut rng = substream(1234, &[trial, 1 + i as u64]);
                    agent.generate(&task, Some(&state), &mut rng).unwrap().0
                })
                .collect();
            let before = dist(&evaluate(&state.trajectory, &ideal).unwrap()).unwrap();
            let mut port = NoExternalVerifier;
            let out = refine(
                "mono",
                &state,
                &candidates,
                RefineMode::Oracle(&eval),
                &mut port,
                &Default::default(),
                trial,
            )
            .unwrap();
            let after = dist(&evaluate(&out.state.trajectory, &ideal).unwrap()).unwrap();
            assert!(after <= before + 1e-15, "trial {trial}: {after} > {before}");
        }
    }
}
