//! Object catalog and seeded task layouts.

use std::collections::{BTreeMap, BTreeSet};

use crate::config::{CustomObject, SceneConfig, TaskId};
use crate::geometry::{Polygon, Vec2};
use crate::rng::{mix64, SimRng};

use super::{GripperState, ObjectId, Pose, SceneError, SimObject, WorldState};

pub const DISTRACTOR_CLASSES: [&str; 5] = ["sponge", "marker", "bottle", "tape", "block"];
pub const DISTRACTOR_COLORS: [&str; 7] = ["red", "green", "yellow", "orange", "purple", "pink", "gray"];

const ATTEMPTS: usize = 1000;
/// Minimum center distance between task-relevant table objects. Kept well
/// above every near threshold so ground-truth and image-space proximity agree.
const RELEVANT_SEPARATION: f64 = 0.25;
/// Clearance between footprints of any two table objects.
const FOOTPRINT_GAP: f64 = 0.02;
/// Keep-out radius around the arm and the gripper slot.
const ARM_CLEARANCE: f64 = 0.3;
const EDGE_MARGIN: f64 = 0.02;

#[derive(Debug, Clone)]
pub struct ClassInfo {
    pub footprint: Polygon,
    pub height: f64,
    pub container: bool,
    /// Contents of an opaque container are not visible.
    pub opaque: bool,
}

pub fn class_catalog(class: &str) -> ClassInfo {
    let (footprint, height, container, opaque) = match class {
        "plate" => (Polygon::regular(8, 0.08), 0.02, true, false),
        "cup" => (Polygon::regular(8, 0.04), 0.09, true, true),
        "cube" => (Polygon::rect(0.025, 0.025), 0.05, false, false),
        "arm" => (Polygon::rect(0.1, 0.04), 0.1, false, false),
        "sponge" => (Polygon::rect(0.035, 0.022), 0.03, false, false),
        "marker" => (Polygon::rect(0.045, 0.009), 0.015, false, false),
        "bottle" => (Polygon::regular(8, 0.03), 0.2, false, false),
        "tape" => (Polygon::regular(6, 0.035), 0.03, false, false),
        "block" => (Polygon::rect(0.02, 0.02), 0.04, false, false),
        _ => (Polygon::regular(6, 0.03), 0.04, false, false),
    };
    ClassInfo { footprint, height, container, opaque }
}

struct Builder<'a> {
    cfg: &'a SceneConfig,
    rng: SimRng,
    seed: u64,
    objects: Vec<SimObject>,
    used_seeds: BTreeSet<u64>,
    arm_pos: Vec2,
    slot: Vec2,
}

impl<'a> Builder<'a> {
    fn new(cfg: &'a SceneConfig, seed: u64) -> Self {
        let b = cfg.table_bounds;
        let cx = (b.min.x + b.max.x) / 2.0;
        let arm_pos = Vec2::new(cx, b.min.y + 0.05);
        let slot = Vec2::new(cx, b.min.y + 0.18);
        let mut builder = Self {
            cfg,
            rng: SimRng::substream(seed, "layout"),
            seed,
            objects: Vec::new(),
            used_seeds: BTreeSet::new(),
            arm_pos,
            slot,
        };
        builder.add("arm", BTreeMap::new(), arm_pos, None, None);
        builder
    }

    fn add(
        &mut self,
        class: &str,
        attributes: BTreeMap<String, String>,
        at: Vec2,
        container_of: Option<ObjectId>,
        support_of: Option<ObjectId>,
    ) -> ObjectId {
        let id = ObjectId(self.objects.len() as u32 + 1);
        let info = class_catalog(class);
        let mut appearance_seed = mix64(self.seed ^ (u64::from(id.0) << 40) ^ 0x5eed);
        while !self.used_seeds.insert(appearance_seed) {
            appearance_seed = mix64(appearance_seed);
        }
        self.objects.push(SimObject {
            id,
            class_name: class.to_string(),
            attributes,
            pose: Pose { x: at.x, y: at.y, z_layer: 0 },
            footprint: info.footprint,
            height: info.height,
            container_of,
            support_of,
            appearance_seed,
        });
        id
    }

    fn table_objects(&self) -> impl Iterator<Item = &SimObject> {
        self.objects.iter().filter(|o| o.container_of.is_none() && o.support_of.is_none())
    }

    fn fits(&self, p: Vec2, r: f64, relevant: bool) -> bool {
        let b = self.cfg.table_bounds;
        let m = r + EDGE_MARGIN;
        if p.x < b.min.x + m || p.x > b.max.x - m || p.y < b.min.y + m || p.y > b.max.y - m {
            return false;
        }
        if p.dist(self.slot) < ARM_CLEARANCE || p.dist(self.arm_pos) < ARM_CLEARANCE {
            return false;
        }
        let relevant_classes = ["plate", "cup", "cube"];
        self.table_objects().filter(|o| o.class_name != "arm").all(|o| {
            let d = p.dist(o.pose.xy());
            let both_relevant = relevant && relevant_classes.contains(&o.class_name.as_str());
            let min = if both_relevant {
                RELEVANT_SEPARATION.max(r + o.radius() + FOOTPRINT_GAP)
            } else {
                r + o.radius() + FOOTPRINT_GAP
            };
            d >= min - self.cfg.overlap_tolerance
        })
    }

    fn sample_spot(&mut self, r: f64, relevant: bool, what: &str) -> Result<Vec2, SceneError> {
        self.sample_in(r, relevant, what, None)
    }

    fn sample_in(
        &mut self,
        r: f64,
        relevant: bool,
        what: &str,
        x_range: Option<(f64, f64)>,
    ) -> Result<Vec2, SceneError> {
        let b = self.cfg.table_bounds;
        let (x_lo, x_hi) = x_range.unwrap_or((b.min.x, b.max.x));
        for _ in 0..ATTEMPTS {
            let p = Vec2::new(self.rng.range_f64(x_lo, x_hi), self.rng.range_f64(b.min.y, b.max.y));
            if self.fits(p, r, relevant) {
                return Ok(p);
            }
        }
        Err(SceneError::LayoutInfeasible(format!("no room for {what} after {ATTEMPTS} attempts")))
    }

    fn distractors(&mut self, n: u32) -> Result<(), SceneError> {
        let taken: BTreeSet<(String, String)> = self
            .objects
            .iter()
            .filter_map(|o| o.color().map(|c| (o.class_name.clone(), c.to_string())))
            .collect();
        for k in 0..n {
            let class = DISTRACTOR_CLASSES[self.rng.index(DISTRACTOR_CLASSES.len())];
            let mut color = DISTRACTOR_COLORS[self.rng.index(DISTRACTOR_COLORS.len())];
            while taken.contains(&(class.to_string(), color.to_string())) {
                color = DISTRACTOR_COLORS[self.rng.index(DISTRACTOR_COLORS.len())];
            }
            let r = class_catalog(class).footprint.radius();
            let p = self.sample_spot(r, false, &format!("distractor {k}"))?;
            self.add(class, attrs(&[("color", color)]), p, None, None);
        }
        Ok(())
    }

    fn finish(self) -> WorldState {
        let mut sm = self.rng.state()[0];
        let rng_state = crate::rng::splitmix64(&mut sm);
        let mut world = WorldState {
            objects: self.objects,
            gripper: GripperState::Free,
            table_bounds: self.cfg.table_bounds,
            step_count: 0,
            rng_state,
            arm: ObjectId(1),
            gripper_slot: self.slot,
            gripper_pos: self.slot,
            near_threshold_m: self.cfg.near_threshold_m,
            overlap_tolerance: self.cfg.overlap_tolerance,
        };
        world.recompute_layers();
        world
    }
}

fn attrs(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
}

/// Build the initial world for a task. Placement randomness is a pure
/// function of `seed`.
pub fn init_world(cfg: &SceneConfig, seed: u64) -> Result<WorldState, SceneError> {
    let mut b = Builder::new(cfg, seed);
    let plate_r = class_catalog("plate").footprint.radius();
    let cup_r = class_catalog("cup").footprint.radius();
    match cfg.task {
        TaskId::SwapCups => {
            let mut plates = Vec::new();
            for k in 0..3 {
                let p = b.sample_spot(plate_r, true, &format!("plate {k}"))?;
                plates.push(b.add("plate", BTreeMap::new(), p, None, None));
            }
            let mut order = plates.clone();
            b.rng.shuffle(&mut order);
            for (color, plate) in [("black", order[0]), ("blue", order[1])] {
                let at = b.objects[plate.0 as usize - 1].pose.xy();
                b.add("cup", attrs(&[("color", color)]), at, Some(plate), None);
            }
        }
        TaskId::PnpTwice => {
            let mut plates = Vec::new();
            for k in 0..2 {
                let p = b.sample_spot(plate_r, true, &format!("plate {k}"))?;
                plates.push(b.add("plate", BTreeMap::new(), p, None, None));
            }
            let home = plates[b.rng.index(2)];
            let at = b.objects[home.0 as usize - 1].pose.xy();
            b.add("cube", BTreeMap::new(), at, Some(home), None);
        }
        TaskId::PlaceAndStack => {
            let t = cfg.table_bounds;
            let w = t.width();
            let left = (t.min.x, t.min.x + 0.4 * w);
            let right = (t.min.x + 0.6 * w, t.max.x);
            let white = attrs(&[("color", "white")]);
            let mut cups = Vec::new();
            for (k, range) in [left, right].into_iter().enumerate() {
                let p = b.sample_in(cup_r, true, &format!("cup {k}"), Some(range))?;
                cups.push(b.add("cup", white.clone(), p, None, None));
            }
            let near = cups[b.rng.index(2)];
            let c = b.objects[near.0 as usize - 1].pose.xy();
            let cube_r = class_catalog("cube").footprint.radius();
            let mut placed = None;
            for _ in 0..ATTEMPTS {
                let angle = b.rng.range_f64(0.0, 2.0 * std::f64::consts::PI);
                let dist = b.rng.range_f64(0.085, 0.105);
                let p = Vec2::new(c.x + dist * libm::cos(angle), c.y + dist * libm::sin(angle));
                // The cube may sit close to its cup but nowhere else.
                let ok_bounds = {
                    let m = cube_r + EDGE_MARGIN;
                    p.x >= t.min.x + m && p.x <= t.max.x - m && p.y >= t.min.y + m && p.y <= t.max.y - m
                };
                let far_from_arm = p.dist(b.slot) >= ARM_CLEARANCE && p.dist(b.arm_pos) >= ARM_CLEARANCE;
                let other_ok = cups
                    .iter()
                    .filter(|&&id| id != near)
                    .all(|&id| p.dist(b.objects[id.0 as usize - 1].pose.xy()) >= RELEVANT_SEPARATION);
                if ok_bounds && far_from_arm && other_ok {
                    placed = Some(p);
                    break;
                }
            }
            let p = placed.ok_or_else(|| SceneError::LayoutInfeasible("no room for cube".into()))?;
            b.add("cube", BTreeMap::new(), p, None, None);
        }
        TaskId::Custom => {
            custom(&mut b, &cfg.custom_objects)?;
        }
    }
    b.distractors(cfg.distractors)?;
    Ok(b.finish())
}

fn custom(b: &mut Builder<'_>, objects: &[CustomObject]) -> Result<(), SceneError> {
    let first = b.objects.len() as u32 + 1;
    for (i, o) in objects.iter().enumerate() {
        let parent = |k: Option<usize>| -> Result<Option<ObjectId>, SceneError> {
            match k {
                None => Ok(None),
                Some(k) if k < i => Ok(Some(ObjectId(first + k as u32))),
                Some(k) => Err(SceneError::LayoutInfeasible(format!(
                    "custom object {i} refers to later parent {k}"
                ))),
            }
        };
        let inside = parent(o.inside)?;
        let on = parent(o.on)?;
        if inside.is_some() && on.is_some() {
            return Err(SceneError::LayoutInfeasible(format!("custom object {i} is both in and on")));
        }
        let at = match inside.or(on) {
            Some(p) => b.objects[p.0 as usize - 1].pose.xy(),
            None => Vec2::new(o.x, o.y),
        };
        b.add(&o.class_name, o.attributes.clone(), at, inside, on);
    }
    Ok(())
}
