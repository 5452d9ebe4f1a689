//! Inferring objective priorities from manual adjustments.
//!
//! Each adjustment yields a per-objective delta measured on the moved widgets
//! only. Deltas are smoothed over the session with a triangular moving
//! average (iteration `t` weighted by `t`) and thresholded into H/M/L groups.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objectives::{evaluate_all, ObjectiveId, K};
use crate::priority::{AssignmentProvenance, PriorityAssignment, PriorityGroup, PriorityLevel};
use crate::scene::{Layout, Scene};

pub const DEFAULT_TAU_LOWER: f64 = 0.0;
pub const DEFAULT_TAU_UPPER: f64 = 0.2;

/// Sign of stored deltas.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaConvention {
    /// `before − after`: a cost reduction is positive and pushes the objective
    /// toward H.
    #[default]
    ImprovementPositive,
    /// `after − before` with mirrored thresholds (`δ < −τ_u` is H). Produces
    /// the same groups; kept for auditing the raw cost differences.
    CostIncreasePositive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdjustmentRecord {
    /// 1-based iteration index.
    pub t: usize,
    pub moved_ids: Vec<String>,
    /// Scene indices of `moved_ids`, ascending.
    pub moved: Vec<usize>,
    pub before: Layout,
    pub after: Layout,
    pub delta: [f64; K],
}

impl AdjustmentRecord {
    pub fn new(
        scene: &Scene,
        t: usize,
        before: Layout,
        after: Layout,
        moved: &[usize],
        convention: DeltaConvention,
    ) -> Result<Self> {
        if t == 0 {
            return Err(Error::domain("iteration indices start at 1"));
        }
        let mut moved = moved.to_vec();
        moved.sort_unstable();
        moved.dedup();
        for i in 0..scene.widget_count() {
            if !moved.contains(&i) && before.position(i) != after.position(i) {
                return Err(Error::domain(format!(
                    "widget `{}` changed but is not listed as moved",
                    scene.widgets()[i].id
                )));
            }
        }
        let delta = compute_delta(scene, &before, &after, &moved, convention)?;
        Ok(AdjustmentRecord {
            t,
            moved_ids: moved.iter().map(|&i| scene.widgets()[i].id.clone()).collect(),
            moved,
            before,
            after,
            delta,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregatedDelta {
    pub values: [f64; K],
}

/// Per-objective change on the moved subset. Objectives are normalized, so
/// the division by each term's maximum is the identity.
pub fn compute_delta(
    scene: &Scene,
    before: &Layout,
    after: &Layout,
    moved: &[usize],
    convention: DeltaConvention,
) -> Result<[f64; K]> {
    if moved.is_empty() {
        return Err(Error::domain("an adjustment must move at least one widget"));
    }
    let f_before = evaluate_all(scene, before, moved)?;
    let f_after = evaluate_all(scene, after, moved)?;
    Ok(std::array::from_fn(|j| match convention {
        DeltaConvention::ImprovementPositive => f_before.0[j] - f_after.0[j],
        DeltaConvention::CostIncreasePositive => f_after.0[j] - f_before.0[j],
    }))
}

/// Triangular moving average `Σ t·δᵗ / Σ t` over deltas for `t = 1..T`.
pub fn triangular_average(deltas: &[[f64; K]]) -> Result<[f64; K]> {
    if deltas.is_empty() {
        return Err(Error::domain("no adjustments to aggregate"));
    }
    let weight_sum: f64 = (1..=deltas.len()).map(|t| t as f64).sum();
    Ok(std::array::from_fn(|j| {
        deltas
            .iter()
            .enumerate()
            .map(|(i, d)| (i + 1) as f64 * d[j])
            .sum::<f64>()
            / weight_sum
    }))
}

pub fn aggregate_deltas(history: &[AdjustmentRecord]) -> Result<AggregatedDelta> {
    if history.is_empty() {
        return Err(Error::domain("no adjustments to aggregate"));
    }
    for (i, r) in history.iter().enumerate() {
        if r.t != i + 1 {
            return Err(Error::domain(format!(
                "adjustment indices must run 1..T contiguously; position {} has t = {}",
                i + 1,
                r.t
            )));
        }
    }
    let deltas: Vec<[f64; K]> = history.iter().map(|r| r.delta).collect();
    Ok(AggregatedDelta { values: triangular_average(&deltas)? })
}

/// `H = {δ > τ_u}`, `M = {τ_l ≤ δ ≤ τ_u}`, `L = {δ < τ_l}`; empty groups are
/// dropped.
pub fn assign_priorities(
    aggregated: &AggregatedDelta,
    tau_lower: f64,
    tau_upper: f64,
    convention: DeltaConvention,
) -> Result<PriorityAssignment> {
    if tau_lower.partial_cmp(&tau_upper).is_none_or(|o| o.is_gt()) {
        return Err(Error::domain(format!(
            "tau_lower ({tau_lower}) must not exceed tau_upper ({tau_upper})"
        )));
    }
    let mut high = Vec::new();
    let mut mid = Vec::new();
    let mut low = Vec::new();
    for id in ObjectiveId::ALL {
        let d = aggregated.values[id.index()];
        let level = match convention {
            DeltaConvention::ImprovementPositive => classify(d, tau_lower, tau_upper),
            DeltaConvention::CostIncreasePositive => classify(-d, tau_lower, tau_upper),
        };
        match level {
            PriorityLevel::High => high.push(id),
            PriorityLevel::Mid => mid.push(id),
            PriorityLevel::Low => low.push(id),
        }
    }
    PriorityAssignment::new(
        vec![
            PriorityGroup { level: PriorityLevel::High, objectives: high },
            PriorityGroup { level: PriorityLevel::Mid, objectives: mid },
            PriorityGroup { level: PriorityLevel::Low, objectives: low },
        ],
        Some(AssignmentProvenance {
            tau_lower,
            tau_upper,
            aggregated_delta: aggregated.values,
        }),
    )
}

fn classify(d: f64, tau_lower: f64, tau_upper: f64) -> PriorityLevel {
    if d > tau_upper {
        PriorityLevel::High
    } else if d >= tau_lower {
        PriorityLevel::Mid
    } else {
        PriorityLevel::Low
    }
}
