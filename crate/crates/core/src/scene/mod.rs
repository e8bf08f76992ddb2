//! Deterministic 2.5D tabletop world.
//!
//! Objects live on a rectangular table with continuous `(x, y)` poses and
//! discrete z-layers derived from their containment/support chains. A static
//! robot arm sits at the near edge of the table; whatever it holds is shown
//! at a fixed gripper slot just in front of it.

mod layout;
mod oracle;
mod render;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::geometry::{Polygon, Rect, Vec2};

pub use layout::{class_catalog, init_world, ClassInfo, DISTRACTOR_CLASSES, DISTRACTOR_COLORS};
pub use oracle::{ground_truth_relations, task_oracle, TaskVerdict, MILESTONE_DROP_CUBE, MILESTONE_PNP_ONCE, MILESTONE_STAGE_CUP};
pub use render::{render_views, BACKGROUND, Proprioception, RawObservation, ViewObservation, VisibleObject};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObjectId(pub u32);

impl std::fmt::Display for ObjectId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Typed relation between two entities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    In,
    On,
    Near,
    Holding,
}

impl Relation {
    pub fn as_str(self) -> &'static str {
        match self {
            Relation::In => "in",
            Relation::On => "on",
            Relation::Near => "near",
            Relation::Holding => "holding",
        }
    }
}

/// Layer used for the held object (drawn above everything on the table).
pub const HELD_LAYER: u32 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub z_layer: u32,
}

impl Pose {
    pub fn xy(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimObject {
    pub id: ObjectId,
    pub class_name: String,
    pub attributes: BTreeMap<String, String>,
    pub pose: Pose,
    pub footprint: Polygon,
    /// Physical height in meters (drives the oblique image shift of things
    /// resting on top or inside).
    pub height: f64,
    pub container_of: Option<ObjectId>,
    pub support_of: Option<ObjectId>,
    pub appearance_seed: u64,
}

impl SimObject {
    pub fn parent(&self) -> Option<ObjectId> {
        self.container_of.or(self.support_of)
    }

    pub fn radius(&self) -> f64 {
        self.footprint.radius()
    }

    pub fn color(&self) -> Option<&str> {
        self.attributes.get("color").map(String::as_str)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "state", content = "object")]
pub enum GripperState {
    Free,
    Holding(ObjectId),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    /// Sorted by id.
    pub objects: Vec<SimObject>,
    pub gripper: GripperState,
    pub table_bounds: Rect,
    pub step_count: u64,
    /// Generator state left over from layout sampling.
    pub rng_state: u64,
    pub arm: ObjectId,
    /// Where a held object is shown.
    pub gripper_slot: Vec2,
    /// End-effector position (last pick/place location, or the slot).
    pub gripper_pos: Vec2,
    pub near_threshold_m: f64,
    pub overlap_tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "arg")]
pub enum PrimitiveKind {
    Pick(ObjectId),
    PlaceIn(ObjectId),
    PlaceOn(ObjectId),
    PlaceAt(Vec2),
    NoOp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Primitive {
    pub kind: PrimitiveKind,
    pub duration_steps: u32,
}

impl Primitive {
    pub fn new(kind: PrimitiveKind) -> Self {
        Self { kind, duration_steps: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "result", content = "reason")]
pub enum PrimitiveResult {
    Accepted,
    Rejected(String),
}

impl PrimitiveResult {
    pub fn is_accepted(&self) -> bool {
        matches!(self, PrimitiveResult::Accepted)
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum SceneError {
    #[error("layout infeasible: {0}")]
    LayoutInfeasible(String),
    #[error("unknown object {0}")]
    UnknownObject(ObjectId),
    #[error("no oracle for task `{0}`")]
    UnknownTask(String),
}

impl WorldState {
    pub fn get(&self, id: ObjectId) -> Option<&SimObject> {
        self.objects.binary_search_by_key(&id, |o| o.id).ok().map(|i| &self.objects[i])
    }

    fn get_mut(&mut self, id: ObjectId) -> Option<&mut SimObject> {
        self.objects.binary_search_by_key(&id, |o| o.id).ok().map(move |i| &mut self.objects[i])
    }

    pub fn object(&self, id: ObjectId) -> Result<&SimObject, SceneError> {
        self.get(id).ok_or(SceneError::UnknownObject(id))
    }

    pub fn held(&self) -> Option<ObjectId> {
        match self.gripper {
            GripperState::Free => None,
            GripperState::Holding(id) => Some(id),
        }
    }

    pub fn children(&self, id: ObjectId) -> impl Iterator<Item = &SimObject> + '_ {
        self.objects.iter().filter(move |o| o.parent() == Some(id))
    }

    pub fn contents(&self, id: ObjectId) -> impl Iterator<Item = &SimObject> + '_ {
        self.objects.iter().filter(move |o| o.container_of == Some(id))
    }

    /// Ids of `id` and everything transitively inside or on it.
    pub fn subtree(&self, id: ObjectId) -> Vec<ObjectId> {
        let mut out = vec![id];
        let mut i = 0;
        while i < out.len() {
            let cur = out[i];
            out.extend(self.children(cur).map(|c| c.id));
            i += 1;
        }
        out
    }

    /// Parent chain from `id` upwards (excluding `id`).
    pub fn ancestors(&self, id: ObjectId) -> Vec<ObjectId> {
        let mut out = Vec::new();
        let mut cur = self.get(id).and_then(SimObject::parent);
        while let Some(p) = cur {
            if out.contains(&p) {
                break;
            }
            out.push(p);
            cur = self.get(p).and_then(SimObject::parent);
        }
        out
    }

    /// True if the object sits (transitively) inside an opaque container.
    pub fn is_hidden(&self, id: ObjectId) -> bool {
        let mut cur = id;
        let mut guard = 0;
        while let Some(o) = self.get(cur) {
            match o.container_of {
                Some(c) => {
                    if self.get(c).map(|p| class_catalog(&p.class_name).opaque).unwrap_or(false) {
                        return true;
                    }
                    cur = c;
                }
                None => match o.support_of {
                    Some(s) => cur = s,
                    None => return false,
                },
            }
            guard += 1;
            if guard > self.objects.len() {
                return false;
            }
        }
        false
    }

    /// True if the object is held or carried by the held object.
    pub fn is_carried(&self, id: ObjectId) -> bool {
        match self.held() {
            Some(h) => h == id || self.ancestors(id).contains(&h),
            None => false,
        }
    }

    /// Elevation in meters of the object's base (for rendering).
    pub fn elevation(&self, id: ObjectId) -> f64 {
        let mut elev = 0.0;
        let mut cur = self.get(id).and_then(SimObject::parent);
        let mut guard = 0;
        while let Some(p) = cur {
            let po = match self.get(p) {
                Some(po) => po,
                None => break,
            };
            elev += po.height;
            cur = po.parent();
            guard += 1;
            if guard > self.objects.len() {
                break;
            }
        }
        elev
    }

    fn recompute_layers(&mut self) {
        let held = self.held();
        let layers: Vec<u32> = self
            .objects
            .iter()
            .map(|o| {
                let chain = self.ancestors(o.id);
                let depth = chain.len() as u32;
                let root = chain.last().copied().unwrap_or(o.id);
                if Some(root) == held {
                    HELD_LAYER + depth
                } else {
                    depth
                }
            })
            .collect();
        for (o, z) in self.objects.iter_mut().zip(layers) {
            o.pose.z_layer = z;
        }
    }

    fn move_subtree(&mut self, id: ObjectId, to: Vec2) {
        let from = match self.get(id) {
            Some(o) => o.pose.xy(),
            None => return,
        };
        let delta = to - from;
        for member in self.subtree(id) {
            if let Some(o) = self.get_mut(member) {
                o.pose.x += delta.x;
                o.pose.y += delta.y;
            }
        }
    }

    /// Table-resting objects (no parent, not held).
    pub fn table_objects(&self) -> impl Iterator<Item = &SimObject> + '_ {
        let held = self.held();
        self.objects.iter().filter(move |o| o.parent().is_none() && Some(o.id) != held)
    }

    /// Whether a footprint of radius `r` at `p` fits on the table without
    /// overlapping any table-resting object (beyond the tolerance).
    pub fn spot_is_free(&self, p: Vec2, r: f64, ignore: Option<ObjectId>) -> bool {
        let b = self.table_bounds;
        if p.x - r < b.min.x || p.x + r > b.max.x || p.y - r < b.min.y || p.y + r > b.max.y {
            return false;
        }
        if p.dist(self.gripper_slot) < r + 0.05 {
            return false;
        }
        self.table_objects()
            .filter(|o| Some(o.id) != ignore)
            .all(|o| p.dist(o.pose.xy()) >= r + o.radius() - self.overlap_tolerance)
    }

    /// Deterministic search for a free table spot near `near`.
    pub fn find_free_spot(&self, near: Vec2, r: f64, ignore: Option<ObjectId>) -> Option<Vec2> {
        let b = self.table_bounds;
        let step = 0.02;
        let mut best: Option<(f64, Vec2)> = None;
        let nx = (b.width() / step) as i64;
        let ny = (b.height() / step) as i64;
        for iy in 0..=ny {
            for ix in 0..=nx {
                let p = Vec2::new(b.min.x + ix as f64 * step, b.min.y + iy as f64 * step);
                if !self.spot_is_free(p, r, ignore) {
                    continue;
                }
                let d = p.dist(near);
                if best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, p));
                }
            }
        }
        best.map(|(_, p)| p)
    }

    /// Check the structural invariants. Returns a description of the first
    /// violation found.
    pub fn check_invariants(&self) -> Result<(), String> {
        for w in self.objects.windows(2) {
            if w[0].id >= w[1].id {
                return Err("objects not sorted by id".into());
            }
        }
        let mut seeds = std::collections::BTreeSet::new();
        for o in &self.objects {
            if o.container_of.is_some() && o.support_of.is_some() {
                return Err(format!("{} is both in and on something", o.id));
            }
            if let Some(p) = o.parent() {
                if self.get(p).is_none() {
                    return Err(format!("{} has missing parent {}", o.id, p));
                }
            }
            if self.ancestors(o.id).contains(&o.id) {
                return Err(format!("{} is in a parent cycle", o.id));
            }
            if Some(o.id) == self.held() && o.parent().is_some() {
                return Err(format!("held {} still has a parent", o.id));
            }
            if o.footprint.vertices.len() < 3 || !o.footprint.is_simple() {
                return Err(format!("{} has a degenerate footprint", o.id));
            }
            if !seeds.insert(o.appearance_seed) {
                return Err(format!("{} reuses an appearance seed", o.id));
            }
        }
        if let Some(h) = self.held() {
            if self.get(h).is_none() {
                return Err(format!("gripper holds missing {h}"));
            }
        }
        let table: Vec<&SimObject> = self.table_objects().collect();
        for (i, a) in table.iter().enumerate() {
            for b in &table[i + 1..] {
                let overlap = a.radius() + b.radius() - a.pose.xy().dist(b.pose.xy());
                if overlap > self.overlap_tolerance + 1e-9 {
                    return Err(format!("{} and {} overlap by {overlap:.4} m", a.id, b.id));
                }
            }
        }
        Ok(())
    }
}

fn reject(world: &WorldState, reason: impl Into<String>) -> (WorldState, PrimitiveResult) {
    (world.clone(), PrimitiveResult::Rejected(reason.into()))
}

/// Apply one manipulation primitive. Kinematically infeasible requests are
/// rejected with the world unchanged.
pub fn apply_primitive(world: &WorldState, p: &Primitive) -> Result<(WorldState, PrimitiveResult), SceneError> {
    let target = match &p.kind {
        PrimitiveKind::Pick(id) | PrimitiveKind::PlaceIn(id) | PrimitiveKind::PlaceOn(id) => Some(*id),
        _ => None,
    };
    if let Some(id) = target {
        world.object(id)?;
    }
    if p.duration_steps == 0 {
        return Ok(reject(world, "duration_steps must be >= 1"));
    }

    let mut next = world.clone();
    match &p.kind {
        PrimitiveKind::NoOp => {}
        PrimitiveKind::Pick(id) => {
            if world.held().is_some() {
                return Ok(reject(world, "gripper already holding"));
            }
            if *id == world.arm {
                return Ok(reject(world, "cannot pick the arm"));
            }
            if world.objects.iter().any(|o| o.support_of == Some(*id)) {
                return Ok(reject(world, "something is stacked on the target"));
            }
            let slot = world.gripper_slot;
            next.gripper_pos = world.object(*id)?.pose.xy();
            next.move_subtree(*id, slot);
            let o = next.get_mut(*id).expect("checked");
            o.container_of = None;
            o.support_of = None;
            next.gripper = GripperState::Holding(*id);
        }
        PrimitiveKind::PlaceIn(dst) | PrimitiveKind::PlaceOn(dst) => {
            let inside = matches!(p.kind, PrimitiveKind::PlaceIn(_));
            let held = match world.held() {
                Some(h) => h,
                None => return Ok(reject(world, "gripper is empty")),
            };
            if world.is_carried(*dst) {
                return Ok(reject(world, "target is carried by the gripper"));
            }
            if *dst == world.arm {
                return Ok(reject(world, "cannot place onto the arm"));
            }
            let dst_obj = world.object(*dst)?;
            let held_obj = world.object(held)?;
            if world.objects.iter().any(|o| o.support_of == Some(*dst)) {
                return Ok(reject(world, "target already supports an object"));
            }
            if inside {
                let info = class_catalog(&dst_obj.class_name);
                if !info.container {
                    return Ok(reject(world, "target is not a container"));
                }
                if world.contents(*dst).next().is_some() {
                    return Ok(reject(world, "container is occupied"));
                }
                if held_obj.radius() >= dst_obj.radius() {
                    return Ok(reject(world, "object does not fit in container"));
                }
            }
            let at = dst_obj.pose.xy();
            next.move_subtree(held, at);
            let o = next.get_mut(held).expect("checked");
            if inside {
                o.container_of = Some(*dst);
            } else {
                o.support_of = Some(*dst);
            }
            next.gripper = GripperState::Free;
            next.gripper_pos = at;
        }
        PrimitiveKind::PlaceAt(at) => {
            let held = match world.held() {
                Some(h) => h,
                None => return Ok(reject(world, "gripper is empty")),
            };
            let r = world.object(held)?.radius();
            if !world.spot_is_free(*at, r, Some(held)) {
                return Ok(reject(world, "spot is occupied or off the table"));
            }
            next.move_subtree(held, *at);
            next.gripper = GripperState::Free;
            next.gripper_pos = *at;
        }
    }
    next.step_count += u64::from(p.duration_steps);
    next.recompute_layers();
    Ok((next, PrimitiveResult::Accepted))
}
