//! Picking the archive layout closest to the user's demonstrated positions.
//!
//! Distances are Euclidean in objective space, with every candidate
//! evaluated only on the widgets the user moved.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objectives::{evaluate_all, evaluate_subset_unchecked, ObjectiveId, ObjectiveVector};
use crate::scene::{Layout, Scene};
use crate::solver::{EvaluatedSolution, ParetoArchive};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferencePoint {
    pub values: ObjectiveVector,
    /// Scene indices of the moved widgets.
    pub moved: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    /// Index into the archive.
    pub index: usize,
    pub solution: EvaluatedSolution,
    /// Restricted objective vector of the chosen candidate.
    pub restricted: ObjectiveVector,
    pub distance: f64,
}

pub fn make_reference(scene: &Scene, after: &Layout, moved: &[usize]) -> Result<ReferencePoint> {
    if moved.is_empty() {
        return Err(Error::domain("reference point needs at least one moved widget"));
    }
    Ok(ReferencePoint {
        values: evaluate_all(scene, after, moved)?,
        moved: moved.to_vec(),
    })
}

/// Every archive member evaluated on `moved` only.
pub fn restricted_objectives(
    scene: &Scene,
    archive: &ParetoArchive,
    moved: &[usize],
) -> Vec<ObjectiveVector> {
    archive
        .solutions
        .iter()
        .map(|s| evaluate_subset_unchecked(scene, &s.decision, moved))
        .collect()
}

fn subset_distance(a: &ObjectiveVector, b: &ObjectiveVector, objectives: &[usize]) -> f64 {
    objectives
        .iter()
        .map(|&j| (a.0[j] - b.0[j]).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Index and distance of the nearest vector over `objectives`; the first
/// index wins ties.
pub fn nearest(
    candidates: &[ObjectiveVector],
    reference: &ObjectiveVector,
    objectives: &[usize],
) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, c) in candidates.iter().enumerate() {
        let d = subset_distance(c, reference, objectives);
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((i, d));
        }
    }
    best
}

const ALL_OBJECTIVES: [usize; crate::objectives::K] = [0, 1, 2, 3, 4];

pub fn select_nearest(
    scene: &Scene,
    archive: &ParetoArchive,
    reference: &ReferencePoint,
) -> Result<Selection> {
    if archive.is_empty() {
        return Err(Error::domain("cannot select from an empty archive"));
    }
    if reference.moved.is_empty() {
        return Err(Error::domain("reference point has no moved widgets"));
    }
    let restricted = restricted_objectives(scene, archive, &reference.moved);
    let (index, distance) = nearest(&restricted, &reference.values, &ALL_OBJECTIVES)
        .expect("archive is non-empty");
    Ok(Selection {
        index,
        solution: archive.solutions[index].clone(),
        restricted: restricted[index],
        distance,
    })
}

/// Smallest restricted distance from the reference to any archive member,
/// measured over `objectives` only.
pub fn distance_to_front(
    scene: &Scene,
    archive: &ParetoArchive,
    reference: &ReferencePoint,
    objectives: &[ObjectiveId],
) -> Result<f64> {
    if archive.is_empty() || objectives.is_empty() || reference.moved.is_empty() {
        return Err(Error::domain("distance needs a non-empty archive, subset and reference"));
    }
    let idx: Vec<usize> = objectives.iter().map(|o| o.index()).collect();
    let restricted = restricted_objectives(scene, archive, &reference.moved);
    Ok(nearest(&restricted, &reference.values, &idx)
        .expect("archive is non-empty")
        .1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::solver::{run_nsga2, NoObserver, SolverConfig};
    use proptest::prelude::*;

    fn archive_of(scene: &Scene, seed: u64) -> ParetoArchive {
        let config = SolverConfig { population_size: 40, generations: 10, seed, ..SolverConfig::default() };
        run_nsga2(scene, &config, &mut NoObserver).unwrap().archive
    }

    /// Exhaustive argmin computed from scratch with full evaluations.
    fn brute_force(scene: &Scene, archive: &ParetoArchive, reference: &ReferencePoint) -> (usize, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        for (i, s) in archive.solutions.iter().enumerate() {
            let v = evaluate_all(scene, &s.decision, &reference.moved).unwrap();
            let d = v.0.iter().zip(&reference.values.0).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            if d < best.1 {
                best = (i, d);
            }
        }
        best
    }

    #[test]
    fn single_candidate_archive() {
        let scene = fixtures::coffee_shop();
        let mut archive = archive_of(&scene, 1);
        archive.solutions.truncate(1);
        let reference = make_reference(&scene, &archive.solutions[0].decision, &[0]).unwrap();
        let sel = select_nearest(&scene, &archive, &reference).unwrap();
        assert_eq!(sel.index, 0);
        assert_eq!(sel.distance, 0.0);
    }

    #[test]
    fn matches_brute_force_and_recovers_exact_member() {
        let scene = fixtures::home_office();
        let archive = archive_of(&scene, 2);
        let moved = vec![1, 4];
        let mut after = archive.solutions[0].decision.clone();
        after.set_position(1, scene.region().boxes[1].center());
        let reference = make_reference(&scene, &after, &moved).unwrap();
        let sel = select_nearest(&scene, &archive, &reference).unwrap();
        let (bi, bd) = brute_force(&scene, &archive, &reference);
        assert_eq!((sel.index, sel.distance), (bi, bd));

        let target = archive.len() / 2;
        let exact = make_reference(&scene, &archive.solutions[target].decision, &moved).unwrap();
        let sel = select_nearest(&scene, &archive, &exact).unwrap();
        assert_eq!(sel.distance, 0.0);
        let vals = restricted_objectives(&scene, &archive, &moved);
        assert_eq!(vals[sel.index], vals[target]);
        assert!(sel.index <= target);
    }

    #[test]
    fn reference_over_all_widgets_equals_full_evaluation() {
        let scene = fixtures::coffee_shop();
        let archive = archive_of(&scene, 3);
        let layout = &archive.solutions[0].decision;
        let r = make_reference(&scene, layout, &scene.all_widgets()).unwrap();
        assert_eq!(r.values, crate::objectives::evaluate_layout(&scene, layout));
        assert!(make_reference(&scene, layout, &[]).is_err());
    }

    #[test]
    fn distance_to_front_consistency() {
        let scene = fixtures::coffee_shop();
        let archive = archive_of(&scene, 4);
        let mut after = archive.solutions[0].decision.clone();
        after.set_position(6, scene.objects()[0].position + crate::scene::Vec3::new(0.0, 0.05, 0.0));
        let reference = make_reference(&scene, &after, &[6]).unwrap();
        let full = distance_to_front(&scene, &archive, &reference, &ObjectiveId::ALL).unwrap();
        assert_eq!(full, select_nearest(&scene, &archive, &reference).unwrap().distance);

        let single = distance_to_front(&scene, &archive, &reference, &[ObjectiveId::SemanticAgreement]).unwrap();
        let oracle = restricted_objectives(&scene, &archive, &[6])
            .iter()
            .map(|v| (v.get(ObjectiveId::SemanticAgreement) - reference.values.get(ObjectiveId::SemanticAgreement)).abs())
            .fold(f64::INFINITY, f64::min);
        assert_eq!(single, oracle);
        assert!(distance_to_front(&scene, &archive, &reference, &[]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn shrinking_subset_never_increases_distance(
            mask in 1u8..32, drop in 0usize..5, widget in 0usize..7
        ) {
            let scene = fixtures::coffee_shop();
            let archive = archive_of(&scene, 5);
            let after = archive.solutions[archive.len() - 1].decision.clone();
            let mut moved_layout = after.clone();
            moved_layout.set_position(widget, scene.region().boxes[0].min);
            let reference = make_reference(&scene, &moved_layout, &[widget]).unwrap();
            let subset: Vec<ObjectiveId> = ObjectiveId::ALL.into_iter().filter(|o| mask & (1 << o.index()) != 0).collect();
            let smaller: Vec<ObjectiveId> = subset.iter().copied().filter(|o| o.index() != drop).collect();
            prop_assume!(!smaller.is_empty());
            let a = distance_to_front(&scene, &archive, &reference, &subset).unwrap();
            let b = distance_to_front(&scene, &archive, &reference, &smaller).unwrap();
            prop_assert!(b <= a);
        }
    }
}
