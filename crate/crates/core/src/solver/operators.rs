//! Real-coded variation operators over the flat `3N` position vector.

use rand::Rng;

use super::SolverConfig;
use crate::scene::{Layout, Scene};

/// `population_size` layouts with positions drawn uniformly from the region.
pub fn initialize_population<R: Rng + ?Sized>(
    scene: &Scene,
    config: &SolverConfig,
    rng: &mut R,
) -> Vec<Layout> {
    (0..config.population_size)
        .map(|_| {
            Layout::new(
                (0..scene.widget_count())
                    .map(|_| scene.region().sample(rng))
                    .collect(),
            )
        })
        .collect()
}

/// Spread factor of simulated binary crossover for a uniform draw `u`.
fn sbx_beta(u: f64, eta: f64) -> f64 {
    let e = 1.0 / (eta + 1.0);
    if u <= 0.5 {
        (2.0 * u).powf(e)
    } else {
        (1.0 / (2.0 * (1.0 - u))).powf(e)
    }
}

/// Simulated binary crossover. With probability `crossover_prob` every
/// coordinate pair is recombined and the two child values are exchanged with
/// probability one half. Children are clamped into the region.
pub fn sbx_crossover<R: Rng + ?Sized>(
    scene: &Scene,
    parent_a: &Layout,
    parent_b: &Layout,
    config: &SolverConfig,
    rng: &mut R,
) -> (Layout, Layout) {
    let a = parent_a.to_flat();
    let b = parent_b.to_flat();
    if rng.random::<f64>() >= config.crossover_prob {
        return (parent_a.clone(), parent_b.clone());
    }
    let mut c1 = a.clone();
    let mut c2 = b.clone();
    for i in 0..a.len() {
        let (lo, hi) = if a[i] <= b[i] { (a[i], b[i]) } else { (b[i], a[i]) };
        let beta = sbx_beta(rng.random::<f64>(), config.crossover_eta);
        let swap = rng.random::<bool>();
        if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
            continue;
        }
        let mid = 0.5 * (lo + hi);
        let half = 0.5 * beta * (hi - lo);
        let (x, y) = if swap { (mid + half, mid - half) } else { (mid - half, mid + half) };
        c1[i] = x;
        c2[i] = y;
    }
    let region = scene.region();
    (
        Layout::from_flat(&c1).clamped(region),
        Layout::from_flat(&c2).clamped(region),
    )
}

/// Bounded-scale polynomial mutation: each coordinate is perturbed with
/// probability `mutation_prob` by `δ·(upper − lower)` of the region's bounding
/// box on that axis, then the layout is clamped into the region.
pub fn polynomial_mutation<R: Rng + ?Sized>(
    scene: &Scene,
    layout: &Layout,
    config: &SolverConfig,
    rng: &mut R,
) -> Layout {
    let p = config.mutation_probability(scene.widget_count());
    let bounds = scene.region().bounds();
    let e = 1.0 / (config.mutation_eta + 1.0);
    let mut flat = layout.to_flat();
    for (i, x) in flat.iter_mut().enumerate() {
        if rng.random::<f64>() >= p {
            continue;
        }
        let axis = i % 3;
        let span = bounds.max.0[axis] - bounds.min.0[axis];
        let u: f64 = rng.random();
        let delta = if u < 0.5 {
            (2.0 * u).powf(e) - 1.0
        } else {
            1.0 - (2.0 * (1.0 - u)).powf(e)
        };
        *x += delta * span;
    }
    Layout::from_flat(&flat).clamped(scene.region())
}
