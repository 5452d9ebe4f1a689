//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use preflex_core::objectives::{evaluate, ObjectiveId};
use preflex_core::scene::{Layout, Scene};
use preflex_core::solver::ParetoArchive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x <= y) && a.iter().zip(b).any(|(x, y)| x < y)
}

/// O(n²k) front peeling.
pub fn peel(pop: &[Vec<f64>]) -> Vec<Vec<usize>> {
    let mut remaining: Vec<usize> = (0..pop.len()).collect();
    let mut fronts = Vec::new();
    while !remaining.is_empty() {
        let front: Vec<usize> = remaining
            .iter()
            .copied()
            .filter(|&i| !remaining.iter().any(|&j| dominates(&pop[j], &pop[i])))
            .collect();
        remaining.retain(|i| !front.contains(i));
        fronts.push(front);
    }
    fronts
}

pub fn random_population(rng: &mut ChaCha8Rng, n: usize, k: usize, grid: Option<u32>) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            (0..k)
                .map(|_| match grid {
                    Some(g) => rng.random_range(0..g) as f64,
                    None => rng.random::<f64>(),
                })
                .collect()
        })
        .collect()
}

/// Cost vector on `subset` computed objective by objective.
pub fn costs(scene: &Scene, layout: &Layout, subset: &[usize]) -> Vec<f64> {
    ObjectiveId::ALL
        .iter()
        .map(|&o| evaluate(o, scene, layout, subset).unwrap())
        .collect()
}

/// Exhaustive argmin of restricted distance; lowest index on ties.
pub fn nearest_by_brute_force(
    scene: &Scene,
    archive: &ParetoArchive,
    after: &Layout,
    moved: &[usize],
) -> (usize, f64) {
    let target = costs(scene, after, moved);
    let mut best = (usize::MAX, f64::INFINITY);
    for (i, s) in archive.solutions.iter().enumerate() {
        let c = costs(scene, &s.decision, moved);
        let d = c.iter().zip(&target).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

/// `Σ t·δᵗ / Σ t` written out longhand.
pub fn tma(deltas: &[Vec<f64>]) -> Vec<f64> {
    let k = deltas[0].len();
    let mut num = vec![0.0; k];
    let mut den = 0.0;
    for (i, d) in deltas.iter().enumerate() {
        let t = (i + 1) as f64;
        den += t;
        for j in 0..k {
            num[j] += t * d[j];
        }
    }
    num.iter().map(|v| v / den).collect()
}

/// Hand partition into (H, M, L) index sets.
pub fn partition(delta: &[f64], tau_lower: f64, tau_upper: f64) -> [Vec<usize>; 3] {
    let mut out: [Vec<usize>; 3] = Default::default();
    for (j, &d) in delta.iter().enumerate() {
        let g = if d > tau_upper {
            0
        } else if d >= tau_lower {
            1
        } else {
            2
        };
        out[g].push(j);
    }
    out
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
