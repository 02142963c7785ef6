//! Shared fixtures for the benchmark targets.

use std::sync::Arc;

use marine_core::evaluator::IdealTrajectory;
use marine_core::orchestrator::{AgentPort, Task};
use marine_core::rng::substream;
use marine_core::simulation::graph_agent::{layered_ideal, SimulatedAgent};
use marine_core::trajectory::{ReferenceState, TrajectoryGraph};

/// A reference state plus a candidate batch over a `j x steps` ideal.
pub struct RefineFixture {
    pub ideal: Arc<IdealTrajectory>,
    pub state: ReferenceState,
    pub candidates: Vec<TrajectoryGraph>,
}

pub fn refine_fixture(j: usize, steps: usize, batch: usize, seed: u64) -> RefineFixture {
    let ideal = Arc::new(layered_ideal(j, steps).expect("fixture ideal"));
    let task = Task::new("bench", "q");
    let maker = SimulatedAgent::new(0, ideal.clone());
    let mut rng = substream(seed, &[0]);
    let (reference, _) = maker
        .generate(&task, None, &mut rng)
        .expect("fixture reference");
    let state = ReferenceState::initial(reference, Default::default());
    let candidates = (0..batch)
        .map(|i| {
            let agent = SimulatedAgent::new(i + 1, ideal.clone());
            let mut rng = substream(seed, &[1 + i as u64]);
            agent
                .generate(&task, Some(&state), &mut rng)
                .expect("fixture candidate")
                .0
        })
        .collect();
    RefineFixture {
        ideal,
        state,
        candidates,
    }
}
