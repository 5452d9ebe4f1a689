//! The five layout cost terms. Each maps a layout, restricted to a subset of
//! widgets, to a cost in `[0, 1]`, so every term's maximum is 1.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::ops::Index;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::{Layout, Scene, Vec3};

/// Number of objectives.
pub const K: usize = 5;

/// Distance (m) at which the distance comfort cost vanishes.
pub const COMFORT_DISTANCE: f64 = 0.5;

/// Half-angle of the foveal cone within which field-of-view cost is zero.
pub const FOVEAL_HALF_ANGLE: f64 = 5.0 * PI / 180.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveId {
    NeckStrain,
    ShoulderLoad,
    DistanceComfort,
    FieldOfView,
    SemanticAgreement,
}

impl ObjectiveId {
    pub const ALL: [ObjectiveId; K] = [
        ObjectiveId::NeckStrain,
        ObjectiveId::ShoulderLoad,
        ObjectiveId::DistanceComfort,
        ObjectiveId::FieldOfView,
        ObjectiveId::SemanticAgreement,
    ];

    /// Zero-based position in [`ObjectiveVector`].
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<ObjectiveId> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ObjectiveId::NeckStrain => "neck_strain",
            ObjectiveId::ShoulderLoad => "shoulder_load",
            ObjectiveId::DistanceComfort => "distance_comfort",
            ObjectiveId::FieldOfView => "field_of_view",
            ObjectiveId::SemanticAgreement => "semantic_agreement",
        }
    }
}

impl fmt::Display for ObjectiveId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ObjectiveId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|o| o.as_str() == s)
            .ok_or_else(|| Error::domain(format!("unknown objective `{s}`")))
    }
}

/// Costs in [`ObjectiveId`] order.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveVector(pub [f64; K]);

impl ObjectiveVector {
    pub fn get(&self, id: ObjectiveId) -> f64 {
        self.0[id.index()]
    }

    pub fn values(&self) -> &[f64; K] {
        &self.0
    }
}

impl AsRef<[f64]> for ObjectiveVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

impl Index<usize> for ObjectiveVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

fn check_subset(scene: &Scene, subset: &[usize]) -> Result<()> {
    if subset.is_empty() {
        return Err(Error::domain("widget subset is empty"));
    }
    if let Some(&bad) = subset.iter().find(|&&i| i >= scene.widget_count()) {
        return Err(Error::domain(format!("widget index {bad} out of range")));
    }
    Ok(())
}

/// Elevation of `target` seen from `vertex`, relative to the horizontal plane.
fn elevation(vertex: Vec3, target: Vec3) -> f64 {
    let v = target - vertex;
    v.y().atan2(v.x().hypot(v.z()))
}

fn angle_between(unit: &Vec3, v: &Vec3) -> f64 {
    let n = v.norm();
    if n == 0.0 {
        return 0.0;
    }
    (unit.dot(v) / n).clamp(-1.0, 1.0).acos()
}

fn weighted_mean(terms: impl Iterator<Item = (f64, f64)>) -> f64 {
    let (num, den) = terms.fold((0.0, 0.0), |(n, d), (w, v)| (n + w * v, d + w));
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

fn neck_strain(scene: &Scene, layout: &Layout, subset: &[usize]) -> f64 {
    let eye = scene.user().eye_position;
    weighted_mean(subset.iter().map(|&i| {
        let pitch = elevation(eye, layout.position(i)).abs();
        (scene.widgets()[i].p_obs, pitch / FRAC_PI_2)
    }))
}

fn shoulder_load(scene: &Scene, layout: &Layout, subset: &[usize]) -> f64 {
    let shoulder = scene.user().shoulder_position;
    weighted_mean(subset.iter().map(|&i| {
        let pitch = elevation(shoulder, layout.position(i)).abs();
        (scene.widgets()[i].p_int, pitch / FRAC_PI_2)
    }))
}

/// Comfort cost of a viewing distance: zero at 0.5 m, tending to one at
/// zero and infinite distance.
pub fn comfort_cost(d: f64) -> f64 {
    if d <= 0.0 {
        return 1.0;
    }
    let x = d / COMFORT_DISTANCE + COMFORT_DISTANCE / d - 2.0;
    1.0 - (-x).exp()
}

fn distance_comfort(scene: &Scene, layout: &Layout, subset: &[usize]) -> f64 {
    let eye = scene.user().eye_position;
    let sum: f64 = subset
        .iter()
        .map(|&i| comfort_cost(layout.position(i).distance(&eye)))
        .sum();
    sum / subset.len() as f64
}

/// Cost of an angular offset from the gaze ray.
pub fn gaze_cost(theta: f64) -> f64 {
    if theta <= FOVEAL_HALF_ANGLE {
        0.0
    } else {
        (theta - FOVEAL_HALF_ANGLE) / (PI - FOVEAL_HALF_ANGLE)
    }
}

fn field_of_view(scene: &Scene, layout: &Layout, subset: &[usize]) -> f64 {
    let user = scene.user();
    weighted_mean(subset.iter().map(|&i| {
        let theta = angle_between(&user.gaze_direction, &(layout.position(i) - user.eye_position));
        (scene.widgets()[i].p_obs, gaze_cost(theta))
    }))
}

fn semantic_agreement(scene: &Scene, layout: &Layout, subset: &[usize]) -> f64 {
    let objects = scene.objects();
    let diameter = scene.diameter();
    let mut num = 0.0;
    let mut den = 0.0;
    for &i in subset {
        let p = layout.position(i);
        for (c, o) in scene.semantics().row(i).iter().zip(objects) {
            num += c * p.distance(&o.position);
            den += c * diameter;
        }
    }
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

pub fn evaluate_neck_strain(scene: &Scene, layout: &Layout, subset: &[usize]) -> Result<f64> {
    check_subset(scene, subset)?;
    Ok(neck_strain(scene, layout, subset))
}

pub fn evaluate_shoulder_load(scene: &Scene, layout: &Layout, subset: &[usize]) -> Result<f64> {
    check_subset(scene, subset)?;
    Ok(shoulder_load(scene, layout, subset))
}

pub fn evaluate_distance_comfort(scene: &Scene, layout: &Layout, subset: &[usize]) -> Result<f64> {
    check_subset(scene, subset)?;
    Ok(distance_comfort(scene, layout, subset))
}

pub fn evaluate_field_of_view(scene: &Scene, layout: &Layout, subset: &[usize]) -> Result<f64> {
    check_subset(scene, subset)?;
    Ok(field_of_view(scene, layout, subset))
}

pub fn evaluate_semantic_agreement(
    scene: &Scene,
    layout: &Layout,
    subset: &[usize],
) -> Result<f64> {
    check_subset(scene, subset)?;
    if scene.objects().is_empty() {
        return Err(Error::domain("semantic agreement needs at least one object"));
    }
    Ok(semantic_agreement(scene, layout, subset))
}

pub fn evaluate(id: ObjectiveId, scene: &Scene, layout: &Layout, subset: &[usize]) -> Result<f64> {
    match id {
        ObjectiveId::NeckStrain => evaluate_neck_strain(scene, layout, subset),
        ObjectiveId::ShoulderLoad => evaluate_shoulder_load(scene, layout, subset),
        ObjectiveId::DistanceComfort => evaluate_distance_comfort(scene, layout, subset),
        ObjectiveId::FieldOfView => evaluate_field_of_view(scene, layout, subset),
        ObjectiveId::SemanticAgreement => evaluate_semantic_agreement(scene, layout, subset),
    }
}

/// All five costs on `subset`.
pub fn evaluate_all(scene: &Scene, layout: &Layout, subset: &[usize]) -> Result<ObjectiveVector> {
    check_subset(scene, subset)?;
    if scene.objects().is_empty() {
        return Err(Error::domain("semantic agreement needs at least one object"));
    }
    Ok(evaluate_subset_unchecked(scene, layout, subset))
}

pub(crate) fn evaluate_subset_unchecked(
    scene: &Scene,
    layout: &Layout,
    subset: &[usize],
) -> ObjectiveVector {
    ObjectiveVector([
        neck_strain(scene, layout, subset),
        shoulder_load(scene, layout, subset),
        distance_comfort(scene, layout, subset),
        field_of_view(scene, layout, subset),
        semantic_agreement(scene, layout, subset),
    ])
}

/// Full-layout evaluation used by the solvers.
pub fn evaluate_layout(scene: &Scene, layout: &Layout) -> ObjectiveVector {
    let all = scene.all_widgets();
    evaluate_subset_unchecked(scene, layout, &all)
}
