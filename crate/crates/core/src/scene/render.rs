//! Label-map rendering of the world from each camera.

use crate::bitmap::Mask;
use crate::config::CameraSpec;
use crate::perception::base_vector;

use super::{ObjectId, SimObject, WorldState};
use crate::geometry::Vec2;

/// Label value of pixels not covered by any object.
pub const BACKGROUND: u32 = 0;

#[derive(Debug, Clone, PartialEq)]
pub struct VisibleObject {
    pub id: ObjectId,
    pub class_name: String,
    pub attributes: std::collections::BTreeMap<String, String>,
    pub mask: Mask,
    /// Pixel count the object would cover with nothing in front of it.
    pub full_area: u64,
    /// Noise-free appearance feature.
    pub feature: Vec<f64>,
}

impl VisibleObject {
    pub fn visible_fraction(&self) -> f64 {
        if self.full_area == 0 {
            0.0
        } else {
            self.mask.count() as f64 / self.full_area as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViewObservation {
    pub view_id: String,
    pub width: u32,
    pub height: u32,
    /// Row-major object ids, `BACKGROUND` where the table shows.
    pub labels: Vec<u32>,
    /// Sorted by object id.
    pub objects: Vec<VisibleObject>,
}

impl ViewObservation {
    pub fn label(&self, x: i32, y: i32) -> u32 {
        if x < 0 || y < 0 || x >= self.width as i32 || y >= self.height as i32 {
            BACKGROUND
        } else {
            self.labels[(y as u32 * self.width + x as u32) as usize]
        }
    }

    pub fn object(&self, id: ObjectId) -> Option<&VisibleObject> {
        self.objects.binary_search_by_key(&id, |o| o.id).ok().map(|i| &self.objects[i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Proprioception {
    pub holding: Option<ObjectId>,
    /// Where the end effector last picked or released something.
    pub gripper_pos: Vec2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawObservation {
    pub step: u64,
    pub views: Vec<ViewObservation>,
    pub proprio: Proprioception,
}

impl RawObservation {
    pub fn view(&self, view_id: &str) -> Option<&ViewObservation> {
        self.views.iter().find(|v| v.view_id == view_id)
    }
}

/// Pixels covered by `o` in `cam`, ignoring other objects.
fn footprint_pixels(world: &WorldState, o: &SimObject, cam: &CameraSpec) -> Vec<(i32, i32)> {
    let (w, h) = cam.image_size;
    let center = o.pose.xy();
    let shift = world.elevation(o.id) * cam.oblique * cam.scale();
    let corners: Vec<(f64, f64)> = o
        .footprint
        .vertices
        .iter()
        .map(|v| {
            let (px, py) = cam.project(center + *v);
            (px, py - shift)
        })
        .collect();
    let min_x = corners.iter().map(|c| c.0).fold(f64::INFINITY, f64::min).floor().max(0.0) as i32;
    let max_x = corners.iter().map(|c| c.0).fold(f64::NEG_INFINITY, f64::max).ceil().min(w as f64 - 1.0) as i32;
    let min_y = corners.iter().map(|c| c.1).fold(f64::INFINITY, f64::min).floor().max(0.0) as i32;
    let max_y = corners.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max).ceil().min(h as f64 - 1.0) as i32;
    let mut out = Vec::new();
    for y in min_y..=max_y {
        for x in min_x..=max_x {
            let p = cam.unproject(x as f64 + 0.5, y as f64 + 0.5 + shift);
            if o.footprint.contains(center, p) {
                out.push((x, y));
            }
        }
    }
    out
}

fn render_view(world: &WorldState, cam: &CameraSpec) -> ViewObservation {
    let (w, h) = cam.image_size;
    let mut labels = vec![BACKGROUND; (w * h) as usize];
    let mut order: Vec<&SimObject> = world.objects.iter().filter(|o| !world.is_hidden(o.id)).collect();
    order.sort_by_key(|o| (o.pose.z_layer, o.id));
    let mut full: Vec<(ObjectId, u64)> = Vec::with_capacity(order.len());
    for o in &order {
        let px = footprint_pixels(world, o, cam);
        full.push((o.id, px.len() as u64));
        for (x, y) in px {
            labels[(y as u32 * w + x as u32) as usize] = o.id.0;
        }
    }
    full.sort();
    let mut pixels: std::collections::BTreeMap<u32, Vec<(i32, i32)>> = Default::default();
    for y in 0..h {
        for x in 0..w {
            let l = labels[(y * w + x) as usize];
            if l != BACKGROUND {
                pixels.entry(l).or_default().push((x as i32, y as i32));
            }
        }
    }
    let objects = pixels
        .into_iter()
        .map(|(l, px)| {
            let id = ObjectId(l);
            let o = world.get(id).expect("labels come from world objects");
            let full_area = full.binary_search_by_key(&id, |f| f.0).map(|i| full[i].1).unwrap_or(0);
            VisibleObject {
                id,
                class_name: o.class_name.clone(),
                attributes: o.attributes.clone(),
                mask: Mask::from_pixels(px),
                full_area,
                feature: base_vector(o.appearance_seed),
            }
        })
        .collect();
    ViewObservation { view_id: cam.view_id.clone(), width: w, height: h, labels, objects }
}

/// Render every camera. Objects inside opaque containers are not drawn;
/// everything else is painted in ascending (z-layer, id) order.
pub fn render_views(world: &WorldState, cameras: &[CameraSpec]) -> RawObservation {
    RawObservation {
        step: world.step_count,
        views: cameras.iter().map(|c| render_view(world, c)).collect(),
        proprio: Proprioception { holding: world.held(), gripper_pos: world.gripper_pos },
    }
}
