//! Priority-level ranking: Pareto fronts inside each level, lexicographic
//! comparison across levels.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::{run_engine, RunObserver, RunOutput, SolverConfig, SolverKind};
use crate::error::{Error, Result};
use crate::moo;
use crate::objectives::ObjectiveVector;
use crate::priority::PriorityAssignment;
use crate::scene::Scene;

/// One front index per priority level, highest level first. The derived
/// ordering is lexicographic.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PlRankVector(pub Vec<usize>);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedSolution {
    pub ranks: PlRankVector,
    pub crowding: f64,
    /// Position in the population; final tie-breaker.
    pub index: usize,
}

pub(crate) fn rank_vectors(objs: &[ObjectiveVector], levels: &[Vec<usize>]) -> Vec<PlRankVector> {
    let mut ranks = vec![PlRankVector(Vec::with_capacity(levels.len())); objs.len()];
    for level in levels {
        let projected: Vec<Vec<f64>> = objs
            .iter()
            .map(|v| level.iter().map(|&j| v.0[j]).collect())
            .collect();
        for (r, front) in moo::sort_unchecked(&projected).ranks().into_iter().zip(&mut ranks) {
            front.0.push(r);
        }
    }
    ranks
}

/// Per-level front indices of every member of `pop`.
pub fn pl_rank(pop: &[ObjectiveVector], pa: &PriorityAssignment) -> Result<Vec<PlRankVector>> {
    if pop.is_empty() {
        return Err(Error::domain("cannot rank an empty population"));
    }
    Ok(rank_vectors(pop, &pa.level_indices()))
}

pub(crate) fn compare_keys(a: &RankedSolution, b: &RankedSolution) -> Ordering {
    a.ranks
        .cmp(&b.ranks)
        .then_with(|| b.crowding.total_cmp(&a.crowding))
        .then_with(|| a.index.cmp(&b.index))
}

/// `Less` means `a` is preferred: smaller rank vector, then larger crowding,
/// then smaller index.
pub fn pl_compare(a: &RankedSolution, b: &RankedSolution) -> Result<Ordering> {
    if a.ranks.0.len() != b.ranks.0.len() {
        return Err(Error::domain(format!(
            "rank vectors have {} and {} levels",
            a.ranks.0.len(),
            b.ranks.0.len()
        )));
    }
    Ok(compare_keys(a, b))
}

pub(crate) fn survivors_by_levels(
    objs: &[ObjectiveVector],
    levels: &[Vec<usize>],
    keep: usize,
) -> Vec<usize> {
    let mut ranked = super::rank_population(objs, levels);
    ranked.sort_by(compare_keys);
    let mut kept: Vec<usize> = ranked.iter().take(keep).map(|r| r.index).collect();
    kept.sort_unstable();
    kept
}

/// Indices (ascending) of the `keep` best members under the priority-level
/// ordering. This is the truncation step of the elitist loop.
pub fn select_survivors(
    objs: &[ObjectiveVector],
    pa: &PriorityAssignment,
    keep: usize,
) -> Result<Vec<usize>> {
    if objs.is_empty() {
        return Err(Error::domain("cannot truncate an empty population"));
    }
    Ok(survivors_by_levels(objs, &pa.level_indices(), keep))
}

pub fn run_plnsga2(
    scene: &Scene,
    pa: &PriorityAssignment,
    config: &SolverConfig,
    observer: &mut dyn RunObserver,
) -> Result<RunOutput> {
    run_engine(scene, config, pa, SolverKind::PlNsga2, observer)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::{ObjectiveId, K};
    use crate::priority::{PriorityGroup, PriorityLevel};

    fn ov(v: [f64; K]) -> ObjectiveVector {
        ObjectiveVector(v)
    }

    fn high_low(high: ObjectiveId, low: ObjectiveId) -> PriorityAssignment {
        let mid: Vec<ObjectiveId> = ObjectiveId::ALL
            .into_iter()
            .filter(|o| *o != high && *o != low)
            .collect();
        PriorityAssignment::new(
            vec![
                PriorityGroup { level: PriorityLevel::High, objectives: vec![high] },
                PriorityGroup { level: PriorityLevel::Mid, objectives: mid },
                PriorityGroup { level: PriorityLevel::Low, objectives: vec![low] },
            ],
            None,
        )
        .unwrap()
    }

    #[test]
    fn single_level_ranks_equal_plain_fronts() {
        let pop: Vec<ObjectiveVector> = (0..20)
            .map(|i| {
                let t = i as f64 / 19.0;
                ov([t, 1.0 - t, (t * 7.0).fract(), 0.5, (i % 3) as f64])
            })
            .collect();
        let ranks = pl_rank(&pop, &PriorityAssignment::single_level()).unwrap();
        let plain = moo::fast_nondominated_sort(&pop).unwrap().ranks();
        assert_eq!(ranks.iter().map(|r| r.0[0]).collect::<Vec<_>>(), plain);
    }

    #[test]
    fn two_level_example() {
        // H = {neck strain}, L = {shoulder load}; other terms tied.
        let pop = vec![ov([0.0, 9.0, 0.0, 0.0, 0.0]), ov([1.0, 0.0, 0.0, 0.0, 0.0])];
        let pa = high_low(ObjectiveId::NeckStrain, ObjectiveId::ShoulderLoad);
        let ranks = pl_rank(&pop, &pa).unwrap();
        assert_eq!(ranks[0], PlRankVector(vec![0, 0, 1]));
        assert_eq!(ranks[1], PlRankVector(vec![1, 0, 0]));
        let identical = vec![ov([0.3; K]); 4];
        assert!(pl_rank(&identical, &pa).unwrap().iter().all(|r| r.0.iter().all(|&x| x == 0)));
        assert!(pl_rank(&[], &pa).is_err());
    }

    #[test]
    fn compare_chain() {
        let key = |ranks: Vec<usize>, crowding: f64, index: usize| RankedSolution {
            ranks: PlRankVector(ranks),
            crowding,
            index,
        };
        assert_eq!(pl_compare(&key(vec![0, 5], 0.0, 1), &key(vec![1, 0], 9.0, 0)).unwrap(), Ordering::Less);
        assert_eq!(pl_compare(&key(vec![1, 1], 2.0, 1), &key(vec![1, 1], 1.0, 0)).unwrap(), Ordering::Less);
        assert_eq!(pl_compare(&key(vec![1, 1], 1.0, 3), &key(vec![1, 1], 1.0, 4)).unwrap(), Ordering::Less);
        assert_eq!(
            pl_compare(&key(vec![1, 1], f64::INFINITY, 4), &key(vec![1, 1], f64::INFINITY, 3)).unwrap(),
            Ordering::Greater
        );
        assert!(pl_compare(&key(vec![0], 0.0, 0), &key(vec![0, 0], 0.0, 1)).is_err());
    }

    #[test]
    fn h_winner_survives_over_l_winner() {
        // a: best in H, worst in L. b, c, d: worse in H but strong in L.
        let pa = high_low(ObjectiveId::SemanticAgreement, ObjectiveId::FieldOfView);
        let a = ov([0.5, 0.5, 0.5, 0.9, 0.1]);
        let b = ov([0.5, 0.5, 0.5, 0.0, 0.4]);
        let c = ov([0.5, 0.5, 0.5, 0.1, 0.5]);
        let d = ov([0.5, 0.5, 0.5, 0.2, 0.6]);
        let pop = vec![b, c, a, d];
        let kept = select_survivors(&pop, &pa, 1).unwrap();
        assert_eq!(kept, vec![2]);
        // Under a single level the H specialist has no special standing:
        // a and b are both on front 0, crowding decides.
        let plain = select_survivors(&pop, &PriorityAssignment::single_level(), 3).unwrap();
        assert!(plain.contains(&0));
        // Oracle: every kept member is H-ranked no worse than every dropped one.
        let kept = select_survivors(&pop, &pa, 2).unwrap();
        for &k in &kept {
            for dropped in (0..pop.len()).filter(|i| !kept.contains(i)) {
                assert!(pop[k].0[4] <= pop[dropped].0[4]);
            }
        }
    }
}
