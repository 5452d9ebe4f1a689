use super::{run_engine, RunObserver, RunOutput, SolverConfig, SolverKind};
use crate::error::Result;
use crate::priority::PriorityAssignment;
use crate::scene::Scene;

/// Plain NSGA-II: `(μ+λ)` elitism, binary tournaments on (front, crowding).
pub fn run_nsga2(
    scene: &Scene,
    config: &SolverConfig,
    observer: &mut dyn RunObserver,
) -> Result<RunOutput> {
    run_engine(
        scene,
        config,
        &PriorityAssignment::single_level(),
        SolverKind::Nsga2,
        observer,
    )
}
