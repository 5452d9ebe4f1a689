//! Elitist evolutionary search over layouts.
//!
//! Both solvers share one generational loop. Plain NSGA-II is the special
//! case of the priority-level variant in which every objective sits on a
//! single level, so the two cannot drift apart.

mod nsga2;
pub mod operators;
mod plnsga2;

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::ops::ControlFlow;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use nsga2::run_nsga2;
pub use plnsga2::{pl_compare, pl_rank, run_plnsga2, select_survivors, PlRankVector, RankedSolution};

use crate::error::{Error, Result};
use crate::moo::{self, HypervolumeSampler};
use crate::objectives::{evaluate_layout, ObjectiveVector};
use crate::priority::PriorityAssignment;
use crate::scene::{Layout, Scene};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub population_size: usize,
    pub generations: usize,
    pub crossover_eta: f64,
    pub crossover_prob: f64,
    pub mutation_eta: f64,
    /// Per-coordinate mutation probability; `None` means `1 / (3N)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mutation_prob: Option<f64>,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            population_size: 100,
            generations: 80,
            crossover_eta: 15.0,
            crossover_prob: 0.9,
            mutation_eta: 20.0,
            mutation_prob: None,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn with_seed(&self, seed: u64) -> Self {
        SolverConfig { seed, ..self.clone() }
    }

    pub fn mutation_probability(&self, widgets: usize) -> f64 {
        self.mutation_prob
            .unwrap_or_else(|| 1.0 / (3 * widgets.max(1)) as f64)
    }

    pub fn validate(&self) -> Result<()> {
        if self.population_size == 0 || !self.population_size.is_multiple_of(2) {
            return Err(Error::domain(format!(
                "population_size must be positive and even, got {}",
                self.population_size
            )));
        }
        if !(self.crossover_eta > 0.0 && self.mutation_eta > 0.0) {
            return Err(Error::domain("distribution indices must be positive"));
        }
        let prob_ok = |p: f64| (0.0..=1.0).contains(&p);
        if !prob_ok(self.crossover_prob) || !self.mutation_prob.is_none_or(prob_ok) {
            return Err(Error::domain("probabilities must lie in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Nsga2,
    PlNsga2,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluatedSolution {
    pub decision: Layout,
    pub objectives: ObjectiveVector,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub solver: SolverKind,
    pub config: SolverConfig,
    pub generations_completed: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub priorities: Option<PriorityAssignment>,
}

/// Best solutions of a run: the first front for NSGA-II, the members sharing
/// the lexicographically smallest rank vector for the priority-level solver.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParetoArchive {
    pub solutions: Vec<EvaluatedSolution>,
    pub provenance: Provenance,
}

impl ParetoArchive {
    pub fn len(&self) -> usize {
        self.solutions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.solutions.is_empty()
    }

    pub fn objectives(&self) -> Vec<ObjectiveVector> {
        self.solutions.iter().map(|s| s.objectives).collect()
    }
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub archive: ParetoArchive,
    /// Every evaluated objective vector, in evaluation order.
    pub evaluations: Vec<ObjectiveVector>,
    /// `evaluations[..generation_ends[g]]` were evaluated by generation `g`
    /// (generation 0 is the initial population).
    pub generation_ends: Vec<usize>,
    pub final_population: Vec<EvaluatedSolution>,
}

impl RunOutput {
    /// Hypervolume of everything evaluated up to each generation, on a fixed
    /// sample set so consecutive values are directly comparable.
    pub fn cumulative_hypervolume(&self, sampler: &HypervolumeSampler) -> Vec<f64> {
        let mut covered = vec![false; sampler.len()];
        let mut hits = 0;
        let mut frontier: Vec<ObjectiveVector> = Vec::new();
        let mut start = 0;
        let mut series = Vec::with_capacity(self.generation_ends.len());
        for &end in &self.generation_ends {
            for v in &self.evaluations[start..end] {
                // A dominated point cannot cover anything its dominator missed.
                if frontier.iter().any(|f| moo::dominates_unchecked(&f.0, &v.0)) {
                    continue;
                }
                frontier.retain(|f| !moo::dominates_unchecked(&v.0, &f.0));
                frontier.push(*v);
                hits += sampler.cover(&v.0, &mut covered);
            }
            series.push(sampler.estimate_from_hits(hits).value);
            start = end;
        }
        series
    }
}

/// Per-generation snapshot handed to a [`RunObserver`].
pub struct GenerationReport<'a> {
    pub generation: usize,
    pub total_generations: usize,
    /// Parents followed by offspring (generation 0: the initial population).
    pub candidates: &'a [ObjectiveVector],
    /// Indices into `candidates` kept for the next generation.
    pub survivors: &'a [usize],
    /// Smallest rank vector among the survivors.
    pub best_ranks: &'a PlRankVector,
    /// Survivors carrying `best_ranks`.
    pub best_count: usize,
}

pub trait RunObserver {
    /// Returning `Break` cancels the run.
    fn on_generation(&mut self, _report: &GenerationReport<'_>) -> ControlFlow<()> {
        ControlFlow::Continue(())
    }
}

/// Observer that never interrupts.
pub struct NoObserver;

impl RunObserver for NoObserver {}

impl<F: FnMut(&GenerationReport<'_>) -> ControlFlow<()>> RunObserver for F {
    fn on_generation(&mut self, report: &GenerationReport<'_>) -> ControlFlow<()> {
        self(report)
    }
}

fn evaluate_population(scene: &Scene, layouts: &[Layout]) -> Vec<ObjectiveVector> {
    layouts.par_iter().map(|l| evaluate_layout(scene, l)).collect()
}

/// Rank vectors plus crowding, computed on full objective vectors within
/// each group of identical rank vectors.
pub(crate) fn rank_population(objs: &[ObjectiveVector], levels: &[Vec<usize>]) -> Vec<RankedSolution> {
    let ranks = plnsga2::rank_vectors(objs, levels);
    let mut groups: BTreeMap<&PlRankVector, Vec<usize>> = BTreeMap::new();
    for (i, r) in ranks.iter().enumerate() {
        groups.entry(r).or_default().push(i);
    }
    let mut crowding = vec![0.0; objs.len()];
    for members in groups.values() {
        let front: Vec<&[f64]> = members.iter().map(|&i| objs[i].as_ref()).collect();
        for (&i, d) in members.iter().zip(moo::crowding_distance(&front)) {
            crowding[i] = d;
        }
    }
    ranks
        .into_iter()
        .zip(crowding)
        .enumerate()
        .map(|(index, (ranks, crowding))| RankedSolution { ranks, crowding, index })
        .collect()
}

fn tournament<R: Rng + ?Sized>(ranked: &[RankedSolution], rng: &mut R) -> usize {
    let a = rng.random_range(0..ranked.len());
    let b = rng.random_range(0..ranked.len());
    match plnsga2::compare_keys(&ranked[a], &ranked[b]) {
        Ordering::Greater => b,
        _ => a,
    }
}

fn best_of(ranked: &[RankedSolution]) -> (PlRankVector, usize) {
    let best = ranked
        .iter()
        .map(|r| &r.ranks)
        .min()
        .expect("population is never empty")
        .clone();
    let count = ranked.iter().filter(|r| r.ranks == best).count();
    (best, count)
}

pub(crate) fn run_engine(
    scene: &Scene,
    config: &SolverConfig,
    assignment: &PriorityAssignment,
    kind: SolverKind,
    observer: &mut dyn RunObserver,
) -> Result<RunOutput> {
    config.validate()?;
    if scene.objects().is_empty() {
        return Err(Error::domain("scene needs at least one physical object"));
    }
    let levels = assignment.level_indices();
    let n = config.population_size;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut population = operators::initialize_population(scene, config, &mut rng);
    let mut objectives = evaluate_population(scene, &population);
    let mut evaluations = objectives.clone();
    let mut generation_ends = vec![evaluations.len()];
    let mut ranked = rank_population(&objectives, &levels);

    let all: Vec<usize> = (0..n).collect();
    let (best, count) = best_of(&ranked);
    let report = GenerationReport {
        generation: 0,
        total_generations: config.generations,
        candidates: &objectives,
        survivors: &all,
        best_ranks: &best,
        best_count: count,
    };
    if observer.on_generation(&report).is_break() {
        return Err(Error::Cancelled);
    }

    for generation in 1..=config.generations {
        let parents: Vec<usize> = (0..n).map(|_| tournament(&ranked, &mut rng)).collect();
        let mut offspring = Vec::with_capacity(n);
        for pair in parents.chunks_exact(2) {
            let (a, b) = operators::sbx_crossover(
                scene,
                &population[pair[0]],
                &population[pair[1]],
                config,
                &mut rng,
            );
            offspring.push(operators::polynomial_mutation(scene, &a, config, &mut rng));
            offspring.push(operators::polynomial_mutation(scene, &b, config, &mut rng));
        }
        let offspring_objectives = evaluate_population(scene, &offspring);
        evaluations.extend_from_slice(&offspring_objectives);
        generation_ends.push(evaluations.len());

        population.extend(offspring);
        objectives.extend(offspring_objectives);
        let survivors = plnsga2::survivors_by_levels(&objectives, &levels, n);

        population = survivors.iter().map(|&i| population[i].clone()).collect();
        let kept: Vec<ObjectiveVector> = survivors.iter().map(|&i| objectives[i]).collect();
        ranked = rank_population(&kept, &levels);

        let (best, count) = best_of(&ranked);
        let report = GenerationReport {
            generation,
            total_generations: config.generations,
            candidates: &objectives,
            survivors: &survivors,
            best_ranks: &best,
            best_count: count,
        };
        if observer.on_generation(&report).is_break() {
            return Err(Error::Cancelled);
        }
        objectives = kept;
    }

    let (best, _) = best_of(&ranked);
    let final_population: Vec<EvaluatedSolution> = population
        .into_iter()
        .zip(&objectives)
        .map(|(decision, &objectives)| EvaluatedSolution { decision, objectives })
        .collect();
    let solutions = final_population
        .iter()
        .zip(&ranked)
        .filter(|(_, r)| r.ranks == best)
        .map(|(s, _)| s.clone())
        .collect();

    Ok(RunOutput {
        archive: ParetoArchive {
            solutions,
            provenance: Provenance {
                solver: kind,
                config: config.clone(),
                generations_completed: config.generations,
                priorities: match kind {
                    SolverKind::Nsga2 => None,
                    SolverKind::PlNsga2 => Some(assignment.clone()),
                },
            },
        },
        evaluations,
        generation_ends,
        final_population,
    })
}
