//! Static world model: the seated user, the widgets to place, nearby physical
//! objects, their semantic association costs and the region widgets may occupy.
//!
//! Coordinates are meters with `y` pointing up.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::{Add, Mul, Sub};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point or direction in 3D, serialized as `[x, y, z]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec3(pub [f64; 3]);

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3([x, y, z])
    }

    pub fn x(&self) -> f64 {
        self.0[0]
    }

    pub fn y(&self) -> f64 {
        self.0[1]
    }

    pub fn z(&self) -> f64 {
        self.0[2]
    }

    pub fn dot(&self, other: &Vec3) -> f64 {
        self.0[0] * other.0[0] + self.0[1] * other.0[1] + self.0[2] * other.0[2]
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(&self, other: &Vec3) -> f64 {
        (*self - *other).norm()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, rhs: Vec3) -> Vec3 {
        Vec3([self.0[0] + rhs.0[0], self.0[1] + rhs.0[1], self.0[2] + rhs.0[2]])
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, rhs: Vec3) -> Vec3 {
        Vec3([self.0[0] - rhs.0[0], self.0[1] - rhs.0[1], self.0[2] - rhs.0[2]])
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, rhs: f64) -> Vec3 {
        Vec3([self.0[0] * rhs, self.0[1] * rhs, self.0[2] * rhs])
    }
}

impl fmt::Display for Vec3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.3}, {:.3}, {:.3})", self.0[0], self.0[1], self.0[2])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UserPose {
    pub eye_position: Vec3,
    /// Unit vector.
    pub gaze_direction: Vec3,
    pub shoulder_position: Vec3,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Widget {
    pub id: String,
    /// Width and height in meters. Fixed during optimization.
    pub extent: [f64; 2],
    pub p_obs: f64,
    pub p_int: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalObject {
    pub id: String,
    pub position: Vec3,
}

/// Axis-aligned box with `min < max` on every axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|a| p.0[a] >= self.min.0[a] && p.0[a] <= self.max.0[a])
    }

    /// Closest point of the box to `p` (`p` itself when inside).
    pub fn clamp(&self, p: &Vec3) -> Vec3 {
        Vec3(std::array::from_fn(|a| p.0[a].clamp(self.min.0[a], self.max.0[a])))
    }

    pub fn volume(&self) -> f64 {
        (0..3).map(|a| self.max.0[a] - self.min.0[a]).product()
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn corners(&self) -> impl Iterator<Item = Vec3> + '_ {
        (0..8u8).map(move |bits| {
            Vec3(std::array::from_fn(|a| {
                if bits & (1 << a) == 0 {
                    self.min.0[a]
                } else {
                    self.max.0[a]
                }
            }))
        })
    }
}

/// Union of axis-aligned boxes widgets may be placed in.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlacementRegion {
    pub boxes: Vec<Aabb>,
}

impl PlacementRegion {
    pub fn contains(&self, p: &Vec3) -> bool {
        self.boxes.iter().any(|b| b.contains(p))
    }

    /// Projects `p` onto the nearest box. Ties go to the earlier box.
    pub fn clamp(&self, p: &Vec3) -> Vec3 {
        let mut best = self.boxes[0].clamp(p);
        let mut best_d = best.distance(p);
        for b in &self.boxes[1..] {
            if best_d == 0.0 {
                break;
            }
            let q = b.clamp(p);
            let d = q.distance(p);
            if d < best_d {
                best = q;
                best_d = d;
            }
        }
        best
    }

    /// Per-axis extent of the bounding box of all region boxes.
    pub fn bounds(&self) -> Aabb {
        let mut min = self.boxes[0].min;
        let mut max = self.boxes[0].max;
        for b in &self.boxes[1..] {
            for a in 0..3 {
                min.0[a] = min.0[a].min(b.min.0[a]);
                max.0[a] = max.0[a].max(b.max.0[a]);
            }
        }
        Aabb { min, max }
    }

    pub fn volume(&self) -> f64 {
        self.boxes.iter().map(Aabb::volume).sum()
    }

    /// Uniform sample: box picked proportionally to its volume, then a
    /// uniform point inside it.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec3 {
        let total = self.volume();
        let mut pick = rng.random::<f64>() * total;
        let mut chosen = &self.boxes[self.boxes.len() - 1];
        for b in &self.boxes {
            let v = b.volume();
            if pick < v {
                chosen = b;
                break;
            }
            pick -= v;
        }
        Vec3(std::array::from_fn(|a| {
            let u: f64 = rng.random();
            chosen.min.0[a] + u * (chosen.max.0[a] - chosen.min.0[a])
        }))
    }

    /// Regular `steps`³ lattice in every box, boxes in declaration order.
    pub fn lattice(&self, steps: usize) -> Vec<Vec3> {
        assert!(steps >= 2, "lattice needs at least two steps per axis");
        let denom = (steps - 1) as f64;
        let mut points = Vec::with_capacity(self.boxes.len() * steps.pow(3));
        for b in &self.boxes {
            for i in 0..steps {
                for j in 0..steps {
                    for k in 0..steps {
                        let t = [i as f64 / denom, j as f64 / denom, k as f64 / denom];
                        points.push(Vec3(std::array::from_fn(|a| {
                            (b.min.0[a] + t[a] * (b.max.0[a] - b.min.0[a]))
                                .clamp(b.min.0[a], b.max.0[a])
                        })));
                    }
                }
            }
        }
        points
    }
}

/// Dense (widget × object) association costs, indexed in scene order.
#[derive(Clone, Debug, PartialEq)]
pub struct SemanticCostTable {
    costs: Vec<Vec<f64>>,
}

impl SemanticCostTable {
    pub fn cost(&self, widget: usize, object: usize) -> f64 {
        self.costs[widget][object]
    }

    pub fn row(&self, widget: usize) -> &[f64] {
        &self.costs[widget]
    }
}

/// On-disk scene schema. Semantic costs are keyed widget id → object id → cost.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub user: UserPose,
    pub widgets: Vec<Widget>,
    pub objects: Vec<PhysicalObject>,
    pub semantics: BTreeMap<String, BTreeMap<String, f64>>,
    pub region: PlacementRegion,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    name: Option<String>,
    user: UserPose,
    widgets: Vec<Widget>,
    objects: Vec<PhysicalObject>,
    semantics: SemanticCostTable,
    region: PlacementRegion,
    diameter: f64,
}

/// Widget positions in scene widget order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    positions: Vec<Vec3>,
}

/// Id-keyed view of a layout, used in files and on the wire.
pub type LayoutMap = BTreeMap<String, Vec3>;

fn invalid(invariant: &'static str, message: impl Into<String>) -> Error {
    Error::Validation {
        invariant,
        message: message.into(),
    }
}

fn check_unique<'a>(kind: &'static str, ids: impl Iterator<Item = &'a str>) -> Result<()> {
    let mut seen = BTreeSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(invalid("unique ids", format!("duplicate {kind} id `{id}`")));
        }
    }
    Ok(())
}

/// Parses and validates a JSON scene document.
pub fn load_scene(source: &str) -> Result<Scene> {
    let de = &mut serde_json::Deserializer::from_str(source);
    let doc: SceneDocument = serde_path_to_error::deserialize(de).map_err(|e| Error::Parse {
        field: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    Scene::from_document(doc)
}

impl Scene {
    pub fn from_document(doc: SceneDocument) -> Result<Scene> {
        let SceneDocument {
            name,
            user,
            widgets,
            objects,
            semantics,
            region,
        } = doc;

        let finite = [user.eye_position, user.gaze_direction, user.shoulder_position]
            .iter()
            .all(Vec3::is_finite);
        if !finite {
            return Err(invalid("finite coordinates", "user pose has non-finite values"));
        }
        let gaze_norm = user.gaze_direction.norm();
        if (gaze_norm - 1.0).abs() > 1e-9 {
            return Err(invalid(
                "gaze_direction unit norm",
                format!("user.gaze_direction has norm {gaze_norm}"),
            ));
        }
        if user.shoulder_position.y() >= user.eye_position.y() {
            return Err(invalid(
                "shoulder below eye",
                "user.shoulder_position.y must be below user.eye_position.y",
            ));
        }

        if widgets.is_empty() {
            return Err(invalid("at least one widget", "scene has no widgets"));
        }
        check_unique("widget", widgets.iter().map(|w| w.id.as_str()))?;
        check_unique("object", objects.iter().map(|o| o.id.as_str()))?;
        for w in &widgets {
            if !(0.0..=1.0).contains(&w.p_obs) {
                return Err(invalid(
                    "p_obs in [0,1]",
                    format!("widget `{}` has p_obs = {}", w.id, w.p_obs),
                ));
            }
            if !(0.0..=1.0).contains(&w.p_int) {
                return Err(invalid(
                    "p_int in [0,1]",
                    format!("widget `{}` has p_int = {}", w.id, w.p_int),
                ));
            }
            if !w.extent.iter().all(|e| e.is_finite() && *e > 0.0) {
                return Err(invalid(
                    "positive extent",
                    format!("widget `{}` has extent {:?}", w.id, w.extent),
                ));
            }
        }
        if let Some(o) = objects.iter().find(|o| !o.position.is_finite()) {
            return Err(invalid("finite coordinates", format!("object `{}`", o.id)));
        }

        if region.boxes.is_empty() {
            return Err(invalid("non-empty region", "region has no boxes"));
        }
        for (i, b) in region.boxes.iter().enumerate() {
            if !(b.min.is_finite() && b.max.is_finite()) || (0..3).any(|a| b.min.0[a] >= b.max.0[a])
            {
                return Err(invalid(
                    "box min < max",
                    format!("region.boxes[{i}] has min {} max {}", b.min, b.max),
                ));
            }
        }

        for wid in semantics.keys() {
            if !widgets.iter().any(|w| &w.id == wid) {
                return Err(invalid(
                    "semantics covers widget × object",
                    format!("semantics names unknown widget `{wid}`"),
                ));
            }
        }
        let mut costs = Vec::with_capacity(widgets.len());
        for w in &widgets {
            let row = semantics.get(&w.id).ok_or_else(|| {
                invalid(
                    "semantics covers widget × object",
                    format!("no semantic costs for widget `{}`", w.id),
                )
            })?;
            for oid in row.keys() {
                if !objects.iter().any(|o| &o.id == oid) {
                    return Err(invalid(
                        "semantics covers widget × object",
                        format!("semantics[{}] names unknown object `{oid}`", w.id),
                    ));
                }
            }
            let mut dense = Vec::with_capacity(objects.len());
            for o in &objects {
                let c = *row.get(&o.id).ok_or_else(|| {
                    invalid(
                        "semantics covers widget × object",
                        format!("missing cost for ({}, {})", w.id, o.id),
                    )
                })?;
                if !(0.0..=1.0).contains(&c) {
                    return Err(invalid(
                        "semantic cost in [0,1]",
                        format!("cost ({}, {}) = {c}", w.id, o.id),
                    ));
                }
                dense.push(c);
            }
            costs.push(dense);
        }

        let diameter = region
            .boxes
            .iter()
            .flat_map(|b| b.corners().collect::<Vec<_>>())
            .flat_map(|c| objects.iter().map(move |o| c.distance(&o.position)))
            .fold(0.0, f64::max);

        Ok(Scene {
            name,
            user,
            widgets,
            objects,
            semantics: SemanticCostTable { costs },
            region,
            diameter,
        })
    }

    pub fn to_document(&self) -> SceneDocument {
        let semantics = self
            .widgets
            .iter()
            .enumerate()
            .map(|(i, w)| {
                let row = self
                    .objects
                    .iter()
                    .enumerate()
                    .map(|(j, o)| (o.id.clone(), self.semantics.cost(i, j)))
                    .collect();
                (w.id.clone(), row)
            })
            .collect();
        SceneDocument {
            name: self.name.clone(),
            user: self.user.clone(),
            widgets: self.widgets.clone(),
            objects: self.objects.clone(),
            semantics,
            region: self.region.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("scene documents always serialize")
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn user(&self) -> &UserPose {
        &self.user
    }

    pub fn widgets(&self) -> &[Widget] {
        &self.widgets
    }

    pub fn widget_count(&self) -> usize {
        self.widgets.len()
    }

    pub fn objects(&self) -> &[PhysicalObject] {
        &self.objects
    }

    pub fn semantics(&self) -> &SemanticCostTable {
        &self.semantics
    }

    pub fn region(&self) -> &PlacementRegion {
        &self.region
    }

    /// Largest distance from any region corner to any object.
    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    pub fn widget_index(&self, id: &str) -> Option<usize> {
        self.widgets.iter().position(|w| w.id == id)
    }

    pub fn all_widgets(&self) -> Vec<usize> {
        (0..self.widgets.len()).collect()
    }

    /// Resolves widget ids to indices, preserving the given order.
    pub fn resolve_ids<'a>(&self, ids: impl IntoIterator<Item = &'a str>) -> Result<Vec<usize>> {
        ids.into_iter()
            .map(|id| {
                self.widget_index(id)
                    .ok_or_else(|| Error::UnknownWidget(id.to_string()))
            })
            .collect()
    }

    /// Builds a layout from an id map whose keys must equal the widget ids.
    pub fn layout_from_map(&self, map: &LayoutMap) -> Result<Layout> {
        let missing: Vec<String> = self
            .widgets
            .iter()
            .filter(|w| !map.contains_key(&w.id))
            .map(|w| w.id.clone())
            .collect();
        let extra: Vec<String> = map
            .keys()
            .filter(|k| self.widget_index(k).is_none())
            .cloned()
            .collect();
        if !missing.is_empty() || !extra.is_empty() {
            return Err(Error::KeyMismatch { missing, extra });
        }
        Ok(Layout {
            positions: self.widgets.iter().map(|w| map[&w.id]).collect(),
        })
    }

    pub fn layout_to_map(&self, layout: &Layout) -> LayoutMap {
        self.widgets
            .iter()
            .zip(&layout.positions)
            .map(|(w, p)| (w.id.clone(), *p))
            .collect()
    }

    /// Ids of widgets whose position lies outside every region box.
    /// An empty list means the layout is feasible.
    pub fn validate_layout(&self, layout: &Layout) -> Result<Vec<String>> {
        if layout.positions.len() != self.widgets.len() {
            return Err(Error::KeyMismatch {
                missing: self
                    .widgets
                    .iter()
                    .skip(layout.positions.len())
                    .map(|w| w.id.clone())
                    .collect(),
                extra: (self.widgets.len()..layout.positions.len())
                    .map(|i| format!("#{i}"))
                    .collect(),
            });
        }
        Ok(self
            .widgets
            .iter()
            .zip(&layout.positions)
            .filter(|(_, p)| !self.region.contains(p))
            .map(|(w, _)| w.id.clone())
            .collect())
    }

    /// Id-map form of [`Scene::validate_layout`].
    pub fn validate_layout_map(&self, map: &LayoutMap) -> Result<Vec<String>> {
        self.validate_layout(&self.layout_from_map(map)?)
    }

    pub fn is_feasible(&self, layout: &Layout) -> bool {
        matches!(self.validate_layout(layout), Ok(v) if v.is_empty())
    }
}

impl Layout {
    pub fn new(positions: Vec<Vec3>) -> Self {
        Layout { positions }
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    pub fn position(&self, widget: usize) -> Vec3 {
        self.positions[widget]
    }

    pub fn set_position(&mut self, widget: usize, p: Vec3) {
        self.positions[widget] = p;
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Flat `[x0, y0, z0, x1, ...]` decision vector.
    pub fn to_flat(&self) -> Vec<f64> {
        self.positions.iter().flat_map(|p| p.0).collect()
    }

    pub fn from_flat(flat: &[f64]) -> Self {
        assert_eq!(flat.len() % 3, 0, "flat layout length must be a multiple of 3");
        Layout {
            positions: flat
                .chunks_exact(3)
                .map(|c| Vec3([c[0], c[1], c[2]]))
                .collect(),
        }
    }

    /// Projects every position into the region.
    pub fn clamped(mut self, region: &PlacementRegion) -> Self {
        for p in &mut self.positions {
            *p = region.clamp(p);
        }
        self
    }
}
