//! Synthetic perception: instance segmentation with appearance features,
//! task-relevance filtering, and a drifting mask tracker.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::bitmap::Mask;
use crate::config::{TaskId, TaskSetup};
use crate::rng::SimRng;
use crate::scene::{ObjectId, RawObservation, DISTRACTOR_CLASSES};

pub const FEATURE_DIM: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseConfig {
    /// Norm of the Gaussian perturbation added to a feature before
    /// renormalization (each of the 16 components gets `sigma / 4`).
    pub feature_sigma: f64,
    /// Detections whose visible fraction is below this are dropped.
    pub mask_dropout_occlusion: f64,
    pub class_confusion_p: f64,
    pub tracker_drift_px_per_step: f64,
    pub tracker_loss_p: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            feature_sigma: 0.0,
            mask_dropout_occlusion: 0.0,
            class_confusion_p: 0.0,
            tracker_drift_px_per_step: 0.0,
            tracker_loss_p: 0.0,
        }
    }
}

impl NoiseConfig {
    /// Moderate noise on every axis.
    pub fn default_profile() -> Self {
        Self {
            feature_sigma: 0.05,
            mask_dropout_occlusion: 0.25,
            class_confusion_p: 0.02,
            tracker_drift_px_per_step: 1.0,
            tracker_loss_p: 0.05,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(format!("perception_noise.{name} must be in [0, 1], got {v}"))
            }
        };
        if !(self.feature_sigma >= 0.0) || !(self.tracker_drift_px_per_step >= 0.0) {
            return Err("perception_noise sigma and drift must be >= 0".into());
        }
        unit("mask_dropout_occlusion", self.mask_dropout_occlusion)?;
        unit("class_confusion_p", self.class_confusion_p)?;
        unit("tracker_loss_p", self.tracker_loss_p)
    }
}

/// Deterministic unit vector for an appearance seed.
pub fn base_vector(appearance_seed: u64) -> Vec<f64> {
    let mut rng = SimRng::substream(appearance_seed, "appearance");
    loop {
        let v: Vec<f64> = (0..FEATURE_DIM).map(|_| rng.gaussian()).collect();
        if let Some(u) = normalize(v) {
            return u;
        }
    }
}

fn normalize(mut v: Vec<f64>) -> Option<Vec<f64>> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n < 1e-12 {
        return None;
    }
    for x in &mut v {
        *x /= n;
    }
    Some(v)
}

pub fn cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    1.0 - a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub view_id: String,
    pub mask: Mask,
    pub centroid: (f64, f64),
    pub class_name: String,
    pub feature: Vec<f64>,
    pub area_px: u64,
    /// Attribute record of the object under the mask.
    pub attributes: BTreeMap<String, String>,
    /// Label id under the mask in the raw label map.
    pub source: ObjectId,
}

/// What the task instruction says is relevant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub task_id: String,
    pub instruction: String,
    pub relevant_classes: BTreeSet<String>,
    /// A detection of class C passes if no filter names C, or if some filter
    /// naming C (under key "class") matches all of its other keys.
    pub relevant_attribute_filters: Vec<BTreeMap<String, String>>,
    pub robot_arm_class: String,
}

fn filter(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
}

impl TaskSpec {
    pub fn for_task(setup: TaskSetup) -> Self {
        let (instruction, classes, filters): (String, &[&str], Vec<_>) = match setup.task {
            TaskId::SwapCups => (
                format!("swap the two cups, starting with the {} cup", setup.first_cup.as_str()),
                &["plate", "cup", "arm"],
                vec![
                    filter(&[("class", "cup"), ("color", "black")]),
                    filter(&[("class", "cup"), ("color", "blue")]),
                ],
            ),
            TaskId::PnpTwice => (
                "move the cube to the other plate, then bring it back".into(),
                &["plate", "cube", "arm"],
                Vec::new(),
            ),
            TaskId::PlaceAndStack => (
                "put the cube into the nearest cup, then stack the other cup on it".into(),
                &["cup", "cube", "arm"],
                vec![filter(&[("class", "cup"), ("color", "white")])],
            ),
            TaskId::Custom => ("".into(), &["plate", "cup", "cube", "arm"], Vec::new()),
        };
        Self {
            task_id: setup.task.as_str().into(),
            instruction,
            relevant_classes: classes.iter().map(|c| c.to_string()).collect(),
            relevant_attribute_filters: filters,
            robot_arm_class: "arm".into(),
        }
    }

    pub fn is_relevant(&self, class: &str, attributes: &BTreeMap<String, String>) -> bool {
        if !self.relevant_classes.contains(class) {
            return false;
        }
        let mut named = self
            .relevant_attribute_filters
            .iter()
            .filter(|f| f.get("class").map(String::as_str) == Some(class))
            .peekable();
        if named.peek().is_none() {
            return true;
        }
        named.any(|f| f.iter().filter(|(k, _)| *k != "class").all(|(k, v)| attributes.get(k) == Some(v)))
    }
}

/// One detection per sufficiently visible object per view, ordered by
/// centroid (row, then column). Randomness is drawn in (view, object id)
/// order.
pub fn segment(raw: &RawObservation, noise: &NoiseConfig, rng: &mut SimRng) -> Vec<Vec<Detection>> {
    raw.views
        .iter()
        .map(|view| {
            let mut dets = Vec::new();
            for o in &view.objects {
                let confused = noise.class_confusion_p > 0.0 && rng.chance(noise.class_confusion_p);
                let class_name = if confused {
                    DISTRACTOR_CLASSES[rng.index(DISTRACTOR_CLASSES.len())].to_string()
                } else {
                    o.class_name.clone()
                };
                let feature = if noise.feature_sigma > 0.0 {
                    let s = noise.feature_sigma / (FEATURE_DIM as f64).sqrt();
                    let v: Vec<f64> = o.feature.iter().map(|x| x + s * rng.gaussian()).collect();
                    normalize(v).unwrap_or_else(|| o.feature.clone())
                } else {
                    o.feature.clone()
                };
                if o.visible_fraction() < noise.mask_dropout_occlusion {
                    continue;
                }
                let centroid = o.mask.centroid().expect("visible objects have pixels");
                dets.push(Detection {
                    view_id: view.view_id.clone(),
                    area_px: o.mask.count(),
                    mask: o.mask.clone(),
                    centroid,
                    class_name,
                    feature,
                    attributes: o.attributes.clone(),
                    source: o.id,
                });
            }
            dets.sort_by(|a, b| {
                (a.centroid.1, a.centroid.0)
                    .partial_cmp(&(b.centroid.1, b.centroid.0))
                    .expect("finite centroids")
            });
            dets
        })
        .collect()
}

/// Keep detections whose (possibly confused) class and attributes pass the
/// task filter. Arm detections pass whenever the arm class is relevant.
pub fn identify_relevant(dets: &[Detection], spec: &TaskSpec) -> Vec<Detection> {
    dets.iter().filter(|d| spec.is_relevant(&d.class_name, &d.attributes)).cloned().collect()
}

/// Tracker state of one graph node.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrackState {
    /// Object the tracker is locked onto.
    pub target: Option<ObjectId>,
    /// Accumulated drift per view, pixels.
    pub drift: BTreeMap<String, (f64, f64)>,
}

impl TrackState {
    pub fn locked(target: ObjectId) -> Self {
        Self { target: Some(target), drift: BTreeMap::new() }
    }

    /// Integer pixel offset currently applied in `view`, rounded toward zero
    /// so it never exceeds the accumulated drift.
    pub fn offset(&self, view: &str) -> (i32, i32) {
        let (dx, dy) = self.drift.get(view).copied().unwrap_or((0.0, 0.0));
        (dx.trunc() as i32, dy.trunc() as i32)
    }
}

/// Propagated masks of one node, `None` where the tracker has nothing.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackedMasks {
    pub masks: BTreeMap<String, Option<Mask>>,
}

/// Propagate every node's masks to the new observation. Masks are
/// re-rendered from the locked object and shifted by an accumulated drift
/// that grows by at most `tracker_drift_px_per_step * steps` per call; each
/// (node, view) mask is lost with probability `tracker_loss_p`.
pub fn track(
    states: &mut [TrackState],
    raw: &RawObservation,
    steps: u64,
    noise: &NoiseConfig,
    rng: &mut SimRng,
) -> Vec<TrackedMasks> {
    let step_bound = noise.tracker_drift_px_per_step * steps.max(1) as f64;
    states
        .iter_mut()
        .map(|st| {
            let mut masks = BTreeMap::new();
            for view in &raw.views {
                if step_bound > 0.0 {
                    let angle = rng.range_f64(0.0, 2.0 * std::f64::consts::PI);
                    let mag = rng.range_f64(0.0, step_bound);
                    let d = st.drift.entry(view.view_id.clone()).or_insert((0.0, 0.0));
                    d.0 += mag * libm::cos(angle);
                    d.1 += mag * libm::sin(angle);
                }
                let lost = noise.tracker_loss_p > 0.0 && rng.chance(noise.tracker_loss_p);
                let mask = match st.target.and_then(|t| view.object(t)) {
                    Some(o) if !lost => {
                        let (dx, dy) = st.offset(&view.view_id);
                        let m = o.mask.translate(dx, dy).clip(view.width, view.height);
                        (!m.is_empty()).then_some(m)
                    }
                    _ => None,
                };
                masks.insert(view.view_id.clone(), mask);
            }
            TrackedMasks { masks }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{default_cameras, CupColor, SceneConfig};
    use crate::scene::{init_world, render_views};

    fn swap_obs(distractors: u32) -> RawObservation {
        let w = init_world(&SceneConfig::perfect(TaskId::SwapCups).with_distractors(distractors), 11).unwrap();
        render_views(&w, &default_cameras())
    }

    #[test]
    fn base_vector_is_unit_and_stable() {
        let a = base_vector(42);
        assert_eq!(a.len(), FEATURE_DIM);
        assert!((a.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(a, base_vector(42));
        assert_ne!(a, base_vector(43));
    }

    #[test]
    fn noise_free_segmentation_is_lossless() {
        let raw = swap_obs(3);
        let dets = segment(&raw, &NoiseConfig::default(), &mut SimRng::from_seed(0));
        for (view, ds) in raw.views.iter().zip(&dets) {
            assert_eq!(ds.len(), view.objects.len());
            for d in ds {
                let o = view.object(d.source).unwrap();
                assert_eq!(d.mask, o.mask);
                assert_eq!(d.feature, o.feature);
                assert_eq!(d.area_px, o.mask.count());
            }
        }
    }

    #[test]
    fn cross_view_features_identical_without_noise() {
        let raw = swap_obs(0);
        let dets = segment(&raw, &NoiseConfig::default(), &mut SimRng::from_seed(0));
        for d in &dets[0] {
            let other = dets[1].iter().find(|e| e.source == d.source).unwrap();
            assert!(cosine_distance(&d.feature, &other.feature).abs() < 1e-12);
        }
    }

    #[test]
    fn noisy_features_stay_unit_norm() {
        let raw = swap_obs(2);
        let noise = NoiseConfig { feature_sigma: 0.3, ..NoiseConfig::default() };
        let dets = segment(&raw, &noise, &mut SimRng::from_seed(5));
        for d in dets.iter().flatten() {
            let n = d.feature.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn relevance_filter_keeps_task_objects() {
        let raw = swap_obs(5);
        let dets = segment(&raw, &NoiseConfig::default(), &mut SimRng::from_seed(0));
        let spec = TaskSpec::for_task(TaskSetup { task: TaskId::SwapCups, first_cup: CupColor::Black });
        for ds in &dets {
            let kept = identify_relevant(ds, &spec);
            let mut classes: Vec<&str> = kept.iter().map(|d| d.class_name.as_str()).collect();
            classes.sort();
            assert_eq!(classes, ["arm", "cup", "cup", "plate", "plate", "plate"]);
        }
    }

    #[test]
    fn full_confusion_drops_everything() {
        let raw = swap_obs(0);
        let noise = NoiseConfig { class_confusion_p: 1.0, ..NoiseConfig::default() };
        let dets = segment(&raw, &noise, &mut SimRng::from_seed(1));
        let spec = TaskSpec::for_task(TaskSetup { task: TaskId::SwapCups, first_cup: CupColor::Black });
        for ds in &dets {
            assert!(identify_relevant(ds, &spec).is_empty());
        }
    }

    #[test]
    fn tracker_without_noise_matches_render() {
        let raw = swap_obs(0);
        let ids: Vec<ObjectId> = raw.views[0].objects.iter().map(|o| o.id).collect();
        let mut states: Vec<TrackState> = ids.iter().map(|&i| TrackState::locked(i)).collect();
        let out = track(&mut states, &raw, 1, &NoiseConfig::default(), &mut SimRng::from_seed(0));
        for (id, t) in ids.iter().zip(&out) {
            for view in &raw.views {
                assert_eq!(t.masks[&view.view_id].as_ref(), view.object(*id).map(|o| &o.mask));
            }
        }
    }

    #[test]
    fn tracker_loss_one_drops_all() {
        let raw = swap_obs(0);
        let mut states: Vec<TrackState> = raw.views[0].objects.iter().map(|o| TrackState::locked(o.id)).collect();
        let noise = NoiseConfig { tracker_loss_p: 1.0, ..NoiseConfig::default() };
        let out = track(&mut states, &raw, 1, &noise, &mut SimRng::from_seed(0));
        assert!(out.iter().all(|t| t.masks.values().all(Option::is_none)));
    }

    #[test]
    fn drift_is_bounded_by_rate_times_steps() {
        let raw = swap_obs(0);
        let cup = raw.views[0].objects.iter().find(|o| o.class_name == "cup").unwrap();
        let noise = NoiseConfig { tracker_drift_px_per_step: 3.0, ..NoiseConfig::default() };
        let mut rng = SimRng::from_seed(9);
        let mut states = vec![TrackState::locked(cup.id)];
        for _ in 0..5 {
            track(&mut states, &raw, 1, &noise, &mut rng);
        }
        for view in &raw.views {
            let (dx, dy) = states[0].offset(&view.view_id);
            assert!(((dx * dx + dy * dy) as f64).sqrt() <= 15.0);
        }
    }
}
