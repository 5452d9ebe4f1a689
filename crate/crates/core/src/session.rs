//! One user's adaptation loop: initial layout, manual moves, and optimizer
//! adaptations, under one of three conditions.
//!
//! Every state transition either fully commits or leaves the session as it
//! was, so a cancelled [`Session::adapt`] keeps the last committed iteration.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moo::{self, MonteCarloOptions};
use crate::objectives::{ObjectiveId, ObjectiveVector, K};
use crate::preference::{
    aggregate_deltas, assign_priorities, AdjustmentRecord, DeltaConvention, DEFAULT_TAU_LOWER,
    DEFAULT_TAU_UPPER,
};
use crate::priority::PriorityAssignment;
use crate::scene::{Layout, LayoutMap, Scene};
use crate::seed::{self, Stream};
use crate::select::{make_reference, nearest, restricted_objectives, select_nearest, ReferencePoint};
use crate::solver::{run_nsga2, run_plnsga2, NoObserver, ParetoArchive, RunObserver, SolverConfig, SolverKind};

/// Upper bound on widgets moved per iteration in the optimizer conditions.
pub const MAX_OPTIMIZER_MOVES: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Moves are applied directly; no optimization.
    Manual,
    /// NSGA-II front, nearest candidate to the user's moves.
    ParetoSelect,
    /// Inferred priorities, priority-level front, nearest candidate.
    Ours,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Manual, Mode::ParetoSelect, Mode::Ours];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Manual => "manual",
            Mode::ParetoSelect => "pareto_select",
            Mode::Ours => "ours",
        }
    }

    pub fn is_optimizer(self) -> bool {
        self != Mode::Manual
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "manual" => Ok(Mode::Manual),
            "pareto_select" | "paretoselect" => Ok(Mode::ParetoSelect),
            "ours" => Ok(Mode::Ours),
            other => Err(Error::domain(format!("unknown mode `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    /// Solver settings; the seed is replaced by derived sub-seeds.
    pub solver: SolverConfig,
    pub tau_lower: f64,
    pub tau_upper: f64,
    #[serde(default)]
    pub convention: DeltaConvention,
    pub hypervolume_samples: usize,
    /// Collapse Ours to a single priority level (ablation).
    #[serde(default)]
    pub force_single_level: bool,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            solver: SolverConfig::default(),
            tau_lower: DEFAULT_TAU_LOWER,
            tau_upper: DEFAULT_TAU_UPPER,
            convention: DeltaConvention::default(),
            hypervolume_samples: moo::DEFAULT_MC_SAMPLES,
            force_single_level: false,
        }
    }
}

/// What one adapt call computed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptDiagnostics {
    /// Number of this adaptation, starting at 1.
    pub adaptation: usize,
    /// Adjustment count `t` at the time of the adaptation.
    pub iteration: usize,
    pub solver: SolverKind,
    pub solver_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assignment: Option<PriorityAssignment>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aggregated_delta: Option<[f64; K]>,
    pub reference: ReferencePoint,
    pub archive_size: usize,
    pub chosen_index: usize,
    pub chosen_distance: f64,
    /// Archive members evaluated on the moved widgets.
    pub restricted_front: Vec<ObjectiveVector>,
    /// Archive members evaluated on the full layout.
    pub archive_objectives: Vec<ObjectiveVector>,
    pub hypervolume: f64,
    pub hypervolume_std_error: f64,
}

impl AdaptDiagnostics {
    /// Distance from the reference to the nearest restricted candidate over
    /// `objectives`.
    pub fn distance_over(&self, objectives: &[ObjectiveId]) -> Option<f64> {
        if objectives.is_empty() {
            return None;
        }
        let idx: Vec<usize> = objectives.iter().map(|o| o.index()).collect();
        nearest(&self.restricted_front, &self.reference.values, &idx).map(|(_, d)| d)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TranscriptEvent {
    Moves { moves: LayoutMap },
    Adapt,
}

/// Seed plus ordered events; enough to replay a session exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub scene: String,
    pub mode: Mode,
    pub seed: u64,
    pub config: SessionConfig,
    pub events: Vec<TranscriptEvent>,
}

impl Transcript {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("transcripts always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// The move batches in order.
    pub fn moves(&self) -> impl Iterator<Item = &LayoutMap> {
        self.events.iter().filter_map(|e| match e {
            TranscriptEvent::Moves { moves } => Some(moves),
            TranscriptEvent::Adapt => None,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordSummary {
    pub t: usize,
    pub moved_ids: Vec<String>,
    pub delta: [f64; K],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationMetrics {
    pub adaptation: usize,
    pub iteration: usize,
    pub distance_all: f64,
    pub hypervolume: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assignment: Option<PriorityAssignment>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionReport {
    pub scene: String,
    pub mode: Mode,
    pub seed: u64,
    pub moved_elements: usize,
    pub move_batches: usize,
    pub adaptations: usize,
    pub records: Vec<RecordSummary>,
    pub iterations: Vec<IterationMetrics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hypervolume: Option<f64>,
    pub final_layout: LayoutMap,
}

impl SessionReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }
}

#[derive(Clone, Debug)]
pub struct Session {
    scene: Arc<Scene>,
    scene_ref: String,
    mode: Mode,
    seed: u64,
    config: SessionConfig,
    initial: Layout,
    current: Layout,
    history: Vec<AdjustmentRecord>,
    pending: usize,
    moved_elements: usize,
    move_batches: usize,
    last_assignment: Option<PriorityAssignment>,
    last_archive: Option<ParetoArchive>,
    diagnostics: Vec<AdaptDiagnostics>,
    events: Vec<TranscriptEvent>,
}

impl Session {
    /// Runs NSGA-II once and picks one front member uniformly as the initial
    /// layout. Both depend only on `seed`, so all modes start identically.
    pub fn start(scene: Arc<Scene>, mode: Mode, seed: u64, config: SessionConfig) -> Result<Self> {
        let scene_ref = scene.name().unwrap_or("inline").to_string();
        Self::start_with_ref(scene, scene_ref, mode, seed, config)
    }

    pub fn start_with_ref(
        scene: Arc<Scene>,
        scene_ref: String,
        mode: Mode,
        seed: u64,
        config: SessionConfig,
    ) -> Result<Self> {
        Self::start_observed(scene, scene_ref, mode, seed, config, &mut NoObserver)
    }

    /// Like [`Session::start_with_ref`], reporting on the initial front run,
    /// which the observer may cancel.
    pub fn start_observed(
        scene: Arc<Scene>,
        scene_ref: String,
        mode: Mode,
        seed: u64,
        config: SessionConfig,
        observer: &mut dyn RunObserver,
    ) -> Result<Self> {
        config.solver.validate()?;
        if config.tau_lower > config.tau_upper {
            return Err(Error::domain("tau_lower must not exceed tau_upper"));
        }
        let initial_cfg = config.solver.with_seed(seed::derive(seed, Stream::InitialFront, 0));
        let front = run_nsga2(&scene, &initial_cfg, observer)?.archive;
        let mut pick = ChaCha8Rng::seed_from_u64(seed::derive(seed, Stream::InitialPick, 0));
        let chosen = pick.random_range(0..front.len());
        let initial = front.solutions[chosen].decision.clone();
        Ok(Session {
            scene,
            scene_ref,
            mode,
            seed,
            config,
            current: initial.clone(),
            initial,
            history: Vec::new(),
            pending: 0,
            moved_elements: 0,
            move_batches: 0,
            last_assignment: None,
            last_archive: None,
            diagnostics: Vec::new(),
            events: Vec::new(),
        })
    }

    pub fn scene(&self) -> &Arc<Scene> {
        &self.scene
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    /// Number of recorded adjustments.
    pub fn iteration(&self) -> usize {
        self.history.len()
    }

    pub fn initial_layout(&self) -> &Layout {
        &self.initial
    }

    pub fn current(&self) -> &Layout {
        &self.current
    }

    pub fn history(&self) -> &[AdjustmentRecord] {
        &self.history
    }

    pub fn pending_adjustments(&self) -> usize {
        self.pending
    }

    pub fn last_assignment(&self) -> Option<&PriorityAssignment> {
        self.last_assignment.as_ref()
    }

    pub fn last_archive(&self) -> Option<&ParetoArchive> {
        self.last_archive.as_ref()
    }

    pub fn diagnostics(&self) -> &[AdaptDiagnostics] {
        &self.diagnostics
    }

    pub fn transcript(&self) -> Transcript {
        Transcript {
            scene: self.scene_ref.clone(),
            mode: self.mode,
            seed: self.seed,
            config: self.config.clone(),
            events: self.events.clone(),
        }
    }

    /// Applies a batch of moves. Optimizer modes accept one to three widgets
    /// and record an adjustment; manual mode applies positions directly.
    pub fn submit_moves(&mut self, moves: &LayoutMap) -> Result<()> {
        if moves.is_empty() {
            return Err(Error::MoveRejected("at least one widget must be moved".into()));
        }
        if self.mode.is_optimizer() && moves.len() > MAX_OPTIMIZER_MOVES {
            return Err(Error::MoveRejected(format!(
                "move between one and {MAX_OPTIMIZER_MOVES} elements per iteration; got {}",
                moves.len()
            )));
        }
        let mut after = self.current.clone();
        let mut moved = Vec::with_capacity(moves.len());
        for (id, p) in moves {
            let i = self
                .scene
                .widget_index(id)
                .ok_or_else(|| Error::UnknownWidget(id.clone()))?;
            if !p.is_finite() || !self.scene.region().contains(p) {
                return Err(Error::MoveRejected(format!(
                    "position {p} for `{id}` is outside the placement region"
                )));
            }
            after.set_position(i, *p);
            moved.push(i);
        }

        if self.mode.is_optimizer() {
            let record = AdjustmentRecord::new(
                &self.scene,
                self.history.len() + 1,
                self.current.clone(),
                after.clone(),
                &moved,
                self.config.convention,
            )?;
            self.history.push(record);
            self.pending += 1;
        }
        self.current = after;
        self.moved_elements += moves.len();
        self.move_batches += 1;
        self.events.push(TranscriptEvent::Moves { moves: moves.clone() });
        Ok(())
    }

    /// Seed of the solver run for the next adaptation.
    pub fn next_solver_seed(&self) -> u64 {
        seed::derive(self.seed, Stream::Adapt, self.diagnostics.len() as u64)
    }

    /// Infers priorities (Ours), reruns the solver from scratch and replaces
    /// the whole layout with the archive member nearest the final adjustment.
    pub fn adapt(&mut self, observer: &mut dyn RunObserver) -> Result<&AdaptDiagnostics> {
        if !self.mode.is_optimizer() {
            return Err(Error::UnsupportedMode("manual"));
        }
        if self.pending == 0 {
            return Err(Error::Precondition("no adjustments since the last adaptation".into()));
        }
        let last = self.history.last().expect("pending implies history");
        let solver_seed = self.next_solver_seed();
        let cfg = self.config.solver.with_seed(solver_seed);

        let (output, assignment, aggregated) = match self.mode {
            Mode::Ours => {
                let aggregated = aggregate_deltas(&self.history)?;
                let assignment = if self.config.force_single_level {
                    PriorityAssignment::single_level()
                } else {
                    assign_priorities(
                        &aggregated,
                        self.config.tau_lower,
                        self.config.tau_upper,
                        self.config.convention,
                    )?
                };
                let out = run_plnsga2(&self.scene, &assignment, &cfg, observer)?;
                (out, Some(assignment), Some(aggregated.values))
            }
            Mode::ParetoSelect => (run_nsga2(&self.scene, &cfg, observer)?, None, None),
            Mode::Manual => unreachable!("checked above"),
        };
        let archive = output.archive;

        let reference = make_reference(&self.scene, &last.after, &last.moved)?;
        let selection = select_nearest(&self.scene, &archive, &reference)?;
        let restricted_front = restricted_objectives(&self.scene, &archive, &reference.moved);
        let archive_objectives = archive.objectives();
        let hv = moo::hypervolume(
            &archive_objectives,
            &moo::default_reference(K),
            &MonteCarloOptions {
                samples: self.config.hypervolume_samples,
                seed: moo::DEFAULT_MC_SEED,
                lower: Some(vec![0.0; K]),
            },
        );

        let diagnostics = AdaptDiagnostics {
            adaptation: self.diagnostics.len() + 1,
            iteration: self.history.len(),
            solver: archive.provenance.solver,
            solver_seed,
            assignment: assignment.clone(),
            aggregated_delta: aggregated,
            reference,
            archive_size: archive.len(),
            chosen_index: selection.index,
            chosen_distance: selection.distance,
            restricted_front,
            archive_objectives,
            hypervolume: hv.value,
            hypervolume_std_error: hv.std_error,
        };

        self.current = selection.solution.decision;
        self.pending = 0;
        self.last_assignment = assignment;
        self.last_archive = Some(archive);
        self.diagnostics.push(diagnostics);
        self.events.push(TranscriptEvent::Adapt);
        Ok(self.diagnostics.last().expect("just pushed"))
    }

    pub fn report(&self) -> SessionReport {
        SessionReport {
            scene: self.scene_ref.clone(),
            mode: self.mode,
            seed: self.seed,
            moved_elements: self.moved_elements,
            move_batches: self.move_batches,
            adaptations: self.diagnostics.len(),
            records: self
                .history
                .iter()
                .map(|r| RecordSummary { t: r.t, moved_ids: r.moved_ids.clone(), delta: r.delta })
                .collect(),
            iterations: self
                .diagnostics
                .iter()
                .map(|d| IterationMetrics {
                    adaptation: d.adaptation,
                    iteration: d.iteration,
                    distance_all: d.chosen_distance,
                    hypervolume: d.hypervolume,
                    assignment: d.assignment.clone(),
                })
                .collect(),
            hypervolume: self.diagnostics.last().map(|d| d.hypervolume),
            final_layout: self.scene.layout_to_map(&self.current),
        }
    }

    /// Final layout plus report.
    pub fn finish(&self) -> (Layout, SessionReport) {
        (self.current.clone(), self.report())
    }
}

/// Replays a transcript against `scene`.
pub fn replay(scene: Arc<Scene>, transcript: &Transcript) -> Result<Session> {
    let mut session = Session::start_with_ref(
        scene,
        transcript.scene.clone(),
        transcript.mode,
        transcript.seed,
        transcript.config.clone(),
    )?;
    for event in &transcript.events {
        match event {
            TranscriptEvent::Moves { moves } => session.submit_moves(moves)?,
            TranscriptEvent::Adapt => {
                session.adapt(&mut NoObserver)?;
            }
        }
    }
    Ok(session)
}
