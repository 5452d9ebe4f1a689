//! Simulated users and batch comparisons of the three study conditions.
//!
//! A simulated user knows which objectives it cares about (its ground-truth
//! H group) and relocates widgets on a fixed lattice to improve them. Every
//! (user, condition, seed) cell starts from the same seeded initial layout,
//! so conditions are paired per seed.

use std::fs::File;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objectives::{evaluate, evaluate_layout, ObjectiveId};
use crate::priority::{PriorityAssignment, PriorityLevel};
use crate::scene::{LayoutMap, Scene, Vec3};
use crate::seed::{self, Stream};
use crate::session::{replay, Mode, Session, SessionConfig, Transcript, MAX_OPTIMIZER_MOVES};
use crate::solver::NoObserver;

/// Lattice resolution per box axis for the greedy move search.
pub const LATTICE_STEPS: usize = 5;

/// Improvements at or below this are treated as none.
const MIN_IMPROVEMENT: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Strategy {
    GreedyImprove,
    /// Greedy target plus zero-mean Gaussian noise per coordinate, clamped
    /// back into the region.
    NoisyGreedy { sigma: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StopRule {
    pub max_iterations: usize,
    /// Stop once the mean full-layout cost over the H objectives is at or
    /// below this value.
    #[serde(default)]
    pub satisfaction: Option<f64>,
}

impl Default for StopRule {
    fn default() -> Self {
        StopRule { max_iterations: 5, satisfaction: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulatedUser {
    pub name: String,
    pub ground_truth: PriorityAssignment,
    pub strategy: Strategy,
    pub moves_per_iteration: usize,
    pub stop_rule: StopRule,
    /// Mixed into the per-step noise seed.
    #[serde(default)]
    pub seed: u64,
}

impl SimulatedUser {
    pub fn new(
        name: impl Into<String>,
        ground_truth: PriorityAssignment,
        strategy: Strategy,
        moves_per_iteration: usize,
        stop_rule: StopRule,
    ) -> Result<Self> {
        if !(1..=MAX_OPTIMIZER_MOVES).contains(&moves_per_iteration) {
            return Err(Error::domain(format!(
                "moves_per_iteration must be between 1 and {MAX_OPTIMIZER_MOVES}"
            )));
        }
        if ground_truth.group(PriorityLevel::High).is_empty() {
            return Err(Error::domain("a simulated user needs at least one H objective"));
        }
        if let Strategy::NoisyGreedy { sigma } = strategy {
            if !(sigma.is_finite() && sigma >= 0.0) {
                return Err(Error::domain("noise sigma must be finite and non-negative"));
            }
        }
        Ok(SimulatedUser {
            name: name.into(),
            ground_truth,
            strategy,
            moves_per_iteration,
            stop_rule,
            seed: 0,
        })
    }

    /// Greedy user caring about `high`, one move per iteration.
    pub fn greedy(high: &[ObjectiveId]) -> Result<Self> {
        let name = high.iter().map(|o| o.as_str()).collect::<Vec<_>>().join("+");
        Self::new(
            name,
            PriorityAssignment::prioritizing(high)?,
            Strategy::GreedyImprove,
            1,
            StopRule::default(),
        )
    }

    pub fn high_objectives(&self) -> &[ObjectiveId] {
        self.ground_truth.group(PriorityLevel::High)
    }
}

/// `count` greedy users, cycling through every pair of objectives.
pub fn standard_users(count: usize) -> Vec<SimulatedUser> {
    let pairs: Vec<[ObjectiveId; 2]> = ObjectiveId::ALL
        .iter()
        .enumerate()
        .flat_map(|(i, &a)| ObjectiveId::ALL[i + 1..].iter().map(move |&b| [a, b]))
        .collect();
    (0..count)
        .map(|u| {
            let mut user = SimulatedUser::greedy(&pairs[u % pairs.len()]).expect("pairs are valid");
            user.seed = u as u64;
            user
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimulatedMoves {
    pub moves: LayoutMap,
    /// Nothing on the lattice improved the H objectives; the move re-submits
    /// the first widget at its current position.
    pub no_op: bool,
}

fn h_cost(scene: &Scene, layout: &crate::scene::Layout, widget: usize, high: &[ObjectiveId]) -> f64 {
    high.iter()
        .map(|&o| evaluate(o, scene, layout, &[widget]).expect("valid widget index"))
        .sum()
}

/// Picks up to `moves_per_iteration` distinct widgets, each relocated to the
/// lattice point that most lowers its summed H costs. Widgets are scanned in
/// scene order and lattice points in lattice order; the first strict best
/// wins.
pub fn simulate_step<R: Rng + ?Sized>(
    user: &SimulatedUser,
    session: &Session,
    rng: &mut R,
) -> Result<SimulatedMoves> {
    let scene = session.scene();
    let high = user.high_objectives();
    let lattice = scene.region().lattice(LATTICE_STEPS);
    let mut layout = session.current().clone();
    let mut taken = vec![false; scene.widget_count()];
    let mut targets: Vec<(usize, Vec3)> = Vec::new();

    for _ in 0..user.moves_per_iteration {
        let mut best: Option<(usize, Vec3, f64)> = None;
        for w in (0..scene.widget_count()).filter(|&w| !taken[w]) {
            let current = h_cost(scene, &layout, w, high);
            let mut probe = layout.clone();
            for p in &lattice {
                probe.set_position(w, *p);
                let gain = current - h_cost(scene, &probe, w, high);
                if gain > MIN_IMPROVEMENT && best.is_none_or(|(_, _, g)| gain > g) {
                    best = Some((w, *p, gain));
                }
            }
        }
        let Some((w, p, _)) = best else { break };
        taken[w] = true;
        layout.set_position(w, p);
        targets.push((w, p));
    }

    if targets.is_empty() {
        let w = 0;
        let id = scene.widgets()[w].id.clone();
        return Ok(SimulatedMoves {
            moves: [(id, session.current().position(w))].into(),
            no_op: true,
        });
    }

    let noise = match user.strategy {
        Strategy::NoisyGreedy { sigma } if sigma > 0.0 => {
            Some(Normal::new(0.0, sigma).map_err(|e| Error::domain(e.to_string()))?)
        }
        _ => None,
    };
    let moves = targets
        .into_iter()
        .map(|(w, p)| {
            let p = match &noise {
                Some(n) => {
                    let jittered = Vec3::new(
                        p.x() + n.sample(rng),
                        p.y() + n.sample(rng),
                        p.z() + n.sample(rng),
                    );
                    scene.region().clamp(&jittered)
                }
                None => p,
            };
            (scene.widgets()[w].id.clone(), p)
        })
        .collect();
    Ok(SimulatedMoves { moves, no_op: false })
}

/// Seed for the user's noise at `iteration`; shared by every condition.
pub fn user_step_seed(user: &SimulatedUser, session_seed: u64, iteration: usize) -> u64 {
    seed::derive(session_seed ^ seed::mix(user.seed), Stream::User, iteration as u64)
}

/// Mean full-layout cost over the user's H objectives.
pub fn satisfaction_cost(user: &SimulatedUser, session: &Session) -> f64 {
    let v = evaluate_layout(session.scene(), session.current());
    let high = user.high_objectives();
    high.iter().map(|&o| v.get(o)).sum::<f64>() / high.len() as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub session: SessionConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub user: String,
    pub condition: Mode,
    /// Condition whose moves were replayed; `None` for original runs.
    pub source_condition: Option<Mode>,
    pub seed: u64,
    pub moved_elements: usize,
    pub iterations: usize,
    /// Means over adaptations; empty for Manual.
    pub distance_all: Option<f64>,
    pub distance_h: Option<f64>,
    pub hypervolume: Option<f64>,
    pub wall_time_ms: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub rows: Vec<ExperimentRow>,
    /// Aligned with `rows`.
    pub transcripts: Vec<Transcript>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn session_row(
    user: &SimulatedUser,
    session: &Session,
    source_condition: Option<Mode>,
    wall_time_ms: f64,
) -> ExperimentRow {
    let report = session.report();
    let diagnostics = session.diagnostics();
    let high = user.high_objectives();
    ExperimentRow {
        user: user.name.clone(),
        condition: session.mode(),
        source_condition,
        seed: session.seed(),
        moved_elements: report.moved_elements,
        iterations: report.move_batches,
        distance_all: mean(diagnostics.iter().map(|d| d.chosen_distance)),
        distance_h: mean(diagnostics.iter().filter_map(|d| d.distance_over(high))),
        hypervolume: mean(diagnostics.iter().map(|d| d.hypervolume)),
        wall_time_ms,
    }
}

/// Runs one simulated user through one condition.
pub fn run_cell(
    scene: Arc<Scene>,
    scene_ref: &str,
    user: &SimulatedUser,
    mode: Mode,
    seed: u64,
    config: &ExperimentConfig,
) -> Result<(ExperimentRow, Transcript)> {
    let started = Instant::now();
    let mut session =
        Session::start_with_ref(scene, scene_ref.to_string(), mode, seed, config.session.clone())?;
    for iteration in 0..user.stop_rule.max_iterations {
        if let Some(threshold) = user.stop_rule.satisfaction {
            if satisfaction_cost(user, &session) <= threshold {
                break;
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(user_step_seed(user, seed, iteration));
        let step = simulate_step(user, &session, &mut rng)?;
        session.submit_moves(&step.moves)?;
        if mode.is_optimizer() {
            session.adapt(&mut NoObserver)?;
        }
    }
    let elapsed = started.elapsed().as_secs_f64() * 1e3;
    Ok((session_row(user, &session, None, elapsed), session.transcript()))
}

/// Full factorial over users × conditions × seeds, in that nesting order.
pub fn run_experiment(
    scene: Arc<Scene>,
    scene_ref: &str,
    users: &[SimulatedUser],
    conditions: &[Mode],
    seeds: &[u64],
    config: &ExperimentConfig,
) -> Result<ExperimentResult> {
    if users.is_empty() || conditions.is_empty() || seeds.is_empty() {
        return Err(Error::domain("users, conditions and seeds must be non-empty"));
    }
    let cells: Vec<(&SimulatedUser, Mode, u64)> = users
        .iter()
        .flat_map(|u| conditions.iter().flat_map(move |&c| seeds.iter().map(move |&s| (u, c, s))))
        .collect();
    let outcomes = cells
        .par_iter()
        .map(|&(u, c, s)| run_cell(scene.clone(), scene_ref, u, c, s, config))
        .collect::<Result<Vec<_>>>()?;
    let (rows, transcripts) = outcomes.into_iter().unzip();
    Ok(ExperimentResult { rows, transcripts })
}

fn swapped(mode: Mode) -> Option<Mode> {
    match mode {
        Mode::ParetoSelect => Some(Mode::Ours),
        Mode::Ours => Some(Mode::ParetoSelect),
        Mode::Manual => None,
    }
}

/// Re-runs each optimizer condition on the moves recorded under the other
/// one. Manual rows are skipped. Output rows keep the input order and are
/// tagged with the condition the moves came from.
pub fn cross_replay(
    scene: Arc<Scene>,
    users: &[SimulatedUser],
    result: &ExperimentResult,
) -> Result<ExperimentResult> {
    if result.rows.len() != result.transcripts.len() {
        return Err(Error::TranscriptMismatch("rows and transcripts differ in length".into()));
    }
    let mut jobs = Vec::new();
    for (row, transcript) in result.rows.iter().zip(&result.transcripts) {
        let Some(source_mode) = swapped(row.condition) else { continue };
        if transcript.mode != row.condition || transcript.seed != row.seed {
            return Err(Error::TranscriptMismatch(format!(
                "transcript for {} seed {} does not match its row",
                row.condition, row.seed
            )));
        }
        let source = result
            .rows
            .iter()
            .zip(&result.transcripts)
            .find(|(r, _)| r.user == row.user && r.seed == row.seed && r.condition == source_mode)
            .map(|(_, t)| t)
            .ok_or_else(|| {
                Error::TranscriptMismatch(format!(
                    "no {source_mode} transcript for user {} seed {}",
                    row.user, row.seed
                ))
            })?;
        if source.scene != transcript.scene {
            return Err(Error::TranscriptMismatch("transcripts refer to different scenes".into()));
        }
        let user = users
            .iter()
            .find(|u| u.name == row.user)
            .ok_or_else(|| Error::TranscriptMismatch(format!("unknown user {}", row.user)))?;
        let swapped_transcript = Transcript {
            mode: row.condition,
            config: transcript.config.clone(),
            ..source.clone()
        };
        jobs.push((user, source_mode, swapped_transcript));
    }

    let outcomes = jobs
        .par_iter()
        .map(|(user, source_mode, t)| {
            let started = Instant::now();
            let session = replay(scene.clone(), t)?;
            let elapsed = started.elapsed().as_secs_f64() * 1e3;
            Ok((session_row(user, &session, Some(*source_mode), elapsed), t.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    let (rows, transcripts) = outcomes.into_iter().unzip();
    Ok(ExperimentResult { rows, transcripts })
}

pub const CSV_HEADER: [&str; 10] = [
    "user",
    "condition",
    "source_condition",
    "seed",
    "moved_elements",
    "iterations",
    "distance_all",
    "distance_h",
    "hypervolume",
    "wall_time_ms",
];

/// Comma-separated rows with a fixed header; empty results produce only the
/// header line.
pub fn write_results<W: Write>(result: &ExperimentResult, out: W) -> Result<()> {
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    writer.write_record(CSV_HEADER)?;
    for row in &result.rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn export_results(result: &ExperimentResult, path: &Path) -> Result<()> {
    write_results(result, File::create(path)?)
}

pub fn import_results(path: &Path) -> Result<Vec<ExperimentRow>> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    if headers.iter().ne(CSV_HEADER) {
        return Err(Error::domain(format!("unexpected results header: {headers:?}")));
    }
    reader
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[mid] } else { 0.5 * (v[mid - 1] + v[mid]) })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionSummary {
    pub condition: Mode,
    pub source_condition: Option<Mode>,
    pub runs: usize,
    pub median_moved_elements: Option<f64>,
    pub median_distance_all: Option<f64>,
    pub median_distance_h: Option<f64>,
    pub median_hypervolume: Option<f64>,
}

/// Medians per (condition, source condition), in first-seen order.
pub fn summarize(rows: &[ExperimentRow]) -> Vec<ConditionSummary> {
    let mut keys: Vec<(Mode, Option<Mode>)> = Vec::new();
    for r in rows {
        if !keys.contains(&(r.condition, r.source_condition)) {
            keys.push((r.condition, r.source_condition));
        }
    }
    keys.into_iter()
        .map(|(condition, source_condition)| {
            let group: Vec<&ExperimentRow> = rows
                .iter()
                .filter(|r| r.condition == condition && r.source_condition == source_condition)
                .collect();
            let collect = |f: &dyn Fn(&ExperimentRow) -> Option<f64>| {
                median(&group.iter().filter_map(|r| f(r)).collect::<Vec<_>>())
            };
            ConditionSummary {
                condition,
                source_condition,
                runs: group.len(),
                median_moved_elements: collect(&|r| Some(r.moved_elements as f64)),
                median_distance_all: collect(&|r| r.distance_all),
                median_distance_h: collect(&|r| r.distance_h),
                median_hypervolume: collect(&|r| r.hypervolume),
            }
        })
        .collect()
}
