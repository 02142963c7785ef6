//! Property tests over the trajectory data model and the schedule analytics.

use std::collections::BTreeSet;

use proptest::prelude::*;

use marine_core::schedule::{batch_size, gain_per_invocation, success_prob, BatchSchedule};
use marine_core::trajectory::{
    align_nodes, dist, validate_graph, EvaluationVector, NodeId, NodeKind, SourceRef,
    TrajectoryGraph, TrajectoryNode,
};

fn node_kind() -> impl Strategy<Value = NodeKind> {
    prop_oneof![
        Just(NodeKind::Fact),
        Just(NodeKind::Reasoning),
        Just(NodeKind::Action),
    ]
}

/// Well-formed graph: unique ids, backward dependency edges, in-range fields.
fn well_formed_graph() -> impl Strategy<Value = TrajectoryGraph> {
    (1usize..=4, 0usize..=3).prop_flat_map(|(j, extra_steps)| {
        let steps = extra_steps + 1;
        let cells: Vec<(usize, usize)> = (1..=j)
            .flat_map(|d| (0..steps).map(move |s| (d, s)))
            .collect();
        let n = cells.len();
        (
            proptest::collection::vec(node_kind(), n),
            proptest::collection::vec(0.0f64..=1.0, n),
            proptest::collection::vec(0.0f64..=1.0, n),
            proptest::collection::vec(any::<bool>(), n),
            proptest::collection::vec(proptest::collection::vec(0usize..n.max(1), 0..3), n),
            proptest::collection::vec("[a-z]{1,8}", n),
        )
            .prop_map(
                move |(kinds, confidences, authorities, verifiables, deps, contents)| {
                    let nodes: Vec<TrajectoryNode> = cells
                        .iter()
                        .enumerate()
                        .map(|(i, &(dimension, step))| TrajectoryNode {
                            id: NodeId::new(format!("n{i}")),
                            kind: kinds[i],
                            content: contents[i].clone(),
                            depends_on: deps[i]
                                .iter()
                                .filter(|&&d| d < i)
                                .collect::<BTreeSet<_>>()
                                .into_iter()
                                .map(|&d| NodeId::new(format!("n{d}")))
                                .collect(),
                            dimension,
                            step_index: step,
                            confidence: confidences[i],
                            sources: vec![SourceRef {
                                authority: authorities[i],
                                verifiable: verifiables[i],
                            }],
                            origin: "prop".to_string(),
                        })
                        .collect();
                    TrajectoryGraph::new(j, nodes)
                },
            )
    })
}

/// The data model is shared across threads wholesale; these bounds are part
/// of the contract.
#[test]
fn core_types_are_send_and_sync() {
    fn assert_send_sync<T: Send + Sync>() {}
    assert_send_sync::<TrajectoryGraph>();
    assert_send_sync::<EvaluationVector>();
    assert_send_sync::<marine_core::trajectory::ReferenceState>();
    assert_send_sync::<marine_core::evaluator::IdealTrajectory>();
    assert_send_sync::<marine_core::refine::FactsLedger>();
    assert_send_sync::<marine_core::simulation::ScoreModel>();
    assert_send_sync::<marine_core::llm::EndpointSession>();
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, ..ProptestConfig::default() })]

    #[test]
    fn dist_stays_in_unit_interval(d in proptest::collection::vec(0.0f64..=1.0, 1..12)) {
        let e = EvaluationVector::new(d).unwrap();
        let v = dist(&e).unwrap();
        prop_assert!((0.0..=1.0).contains(&v));
    }

    #[test]
    fn dist_zero_iff_all_zero(d in proptest::collection::vec(0.0f64..=1.0, 1..12)) {
        let all_zero = d.iter().all(|x| *x == 0.0);
        let e = EvaluationVector::new(d).unwrap();
        prop_assert_eq!(dist(&e).unwrap() == 0.0, all_zero);
    }

    #[test]
    fn lowering_one_dimension_never_raises_dist(
        d in proptest::collection::vec(0.01f64..=1.0, 1..12),
        pick in any::<prop::sample::Index>(),
        shrink in 0.0f64..1.0,
    ) {
        let i = pick.index(d.len());
        let mut lowered = d.clone();
        lowered[i] *= shrink;
        let before = dist(&EvaluationVector::new(d).unwrap()).unwrap();
        let after = dist(&EvaluationVector::new(lowered).unwrap()).unwrap();
        prop_assert!(after <= before + 1e-15);
    }

    #[test]
    fn alignment_partitions_all_nodes(graphs in proptest::collection::vec(well_formed_graph(), 1..4)) {
        // Share one J across the set.
        let j = graphs[0].j;
        let graphs: Vec<TrajectoryGraph> = graphs
            .into_iter()
            .map(|mut g| {
                g.nodes.retain(|n| n.dimension <= j);
                g.j = j;
                g
            })
            .collect();
        let alignment = align_nodes(&graphs).unwrap();
        let total: usize = graphs.iter().map(|g| g.nodes.len()).sum();
        prop_assert_eq!(alignment.entry_count(), total);
        // Every node appears in exactly the cell it claims.
        for (gi, g) in graphs.iter().enumerate() {
            for node in &g.nodes {
                let members = &alignment.cells[&node.cell()];
                prop_assert_eq!(members.iter().filter(|(i, id)| *i == gi && id == &node.id).count(), 1);
            }
        }
    }

    #[test]
    fn well_formed_graphs_validate_clean_and_round_trip(g in well_formed_graph()) {
        prop_assert!(validate_graph(&g).is_empty());
        let text = g.to_canonical_json();
        let back = TrajectoryGraph::from_canonical_json(&text).unwrap();
        prop_assert_eq!(&g, &back);
        prop_assert_eq!(text, back.to_canonical_json());
    }

    #[test]
    fn validation_is_idempotent_even_on_broken_graphs(
        g in well_formed_graph(),
        corrupt_dim in any::<bool>(),
        corrupt_conf in any::<bool>(),
    ) {
        let mut g = g;
        if corrupt_dim {
            if let Some(n) = g.nodes.first_mut() {
                n.dimension = 99;
            }
        }
        if corrupt_conf {
            if let Some(n) = g.nodes.last_mut() {
                n.confidence = 2.0;
            }
        }
        prop_assert_eq!(validate_graph(&g), validate_graph(&g));
    }

    #[test]
    fn success_prob_bounds_and_monotonicity(p in 0.0f64..=1.0, m in 1usize..200) {
        let v = success_prob(p, m);
        prop_assert!((0.0..=1.0).contains(&v));
        prop_assert!(success_prob(p, m + 1) >= v - 1e-15);
    }

    #[test]
    fn gain_per_invocation_strictly_decreases_inside_unit(p in 0.01f64..=0.99, m in 1usize..100) {
        prop_assert!(gain_per_invocation(p, m + 1) < gain_per_invocation(p, m));
    }

    #[test]
    fn log_growth_batches_meet_the_failure_target(p in 0.05f64..0.95, k in 2usize..400) {
        let schedule = BatchSchedule::log_growth(p).unwrap();
        let m = batch_size(&schedule, k);
        prop_assert!(m >= 2);
        let target = 1.0 - 1.0 / (k as f64 * k as f64);
        prop_assert!(success_prob(p, m) >= target - 1e-12);
    }
}
