//! Scene configuration (the `SceneConfig` JSON file).
//!
//! Every field has a default, so `{"task": "swap_cups"}` is a complete
//! config. Dimensions are meters, image sizes are pixels.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::executor::GroundingErrorModel;
use crate::geometry::{Rect, Vec2};
use crate::graph::AssocThresholds;
use crate::perception::NoiseConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskId {
    SwapCups,
    PnpTwice,
    PlaceAndStack,
    /// Explicit object list from `custom_objects`; no task oracle.
    Custom,
}

impl TaskId {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskId::SwapCups => "swap_cups",
            TaskId::PnpTwice => "pnp_twice",
            TaskId::PlaceAndStack => "place_and_stack",
            TaskId::Custom => "custom",
        }
    }
}

impl std::fmt::Display for TaskId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for TaskId {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "swap_cups" => Ok(TaskId::SwapCups),
            "pnp_twice" => Ok(TaskId::PnpTwice),
            "place_and_stack" => Ok(TaskId::PlaceAndStack),
            "custom" => Ok(TaskId::Custom),
            other => Err(format!("unknown task `{other}`")),
        }
    }
}

/// Which cup the swap task must move first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CupColor {
    #[default]
    Black,
    Blue,
}

impl CupColor {
    pub fn as_str(self) -> &'static str {
        match self {
            CupColor::Black => "black",
            CupColor::Blue => "blue",
        }
    }
}

/// Task identity plus its instruction variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TaskSetup {
    pub task: TaskId,
    pub first_cup: CupColor,
}

/// Camera model: an affine world-to-pixel map plus an oblique elevation
/// shift (elevated things appear higher in the image).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraSpec {
    pub view_id: String,
    pub image_size: (u32, u32),
    /// Row-major 2x3 matrix: `[px, py] = M * [x, y, 1]`.
    pub projection: [[f64; 3]; 2],
    /// Image rows of upward shift per meter of elevation, as a fraction of
    /// the projection scale.
    #[serde(default = "default_oblique")]
    pub oblique: f64,
}

fn default_oblique() -> f64 {
    0.5
}

impl CameraSpec {
    pub fn project(&self, p: Vec2) -> (f64, f64) {
        let m = &self.projection;
        (
            m[0][0] * p.x + m[0][1] * p.y + m[0][2],
            m[1][0] * p.x + m[1][1] * p.y + m[1][2],
        )
    }

    pub fn unproject(&self, px: f64, py: f64) -> Vec2 {
        let m = &self.projection;
        let det = self.determinant();
        let (u, v) = (px - m[0][2], py - m[1][2]);
        Vec2::new((m[1][1] * u - m[0][1] * v) / det, (-m[1][0] * u + m[0][0] * v) / det)
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.projection;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    /// Pixels per meter.
    pub fn scale(&self) -> f64 {
        self.determinant().abs().sqrt()
    }

    pub fn diagonal_px(&self) -> f64 {
        let (w, h) = self.image_size;
        ((w as f64).powi(2) + (h as f64).powi(2)).sqrt()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let (w, h) = self.image_size;
        if w < 64 || h < 64 {
            return Err(ConfigError::Invalid(format!(
                "camera `{}`: image {}x{} is below 64x64",
                self.view_id, w, h
            )));
        }
        if self.determinant().abs() < 1e-9 {
            return Err(ConfigError::Invalid(format!(
                "camera `{}`: projection is not invertible",
                self.view_id
            )));
        }
        Ok(())
    }
}

pub fn default_cameras() -> Vec<CameraSpec> {
    vec![
        CameraSpec {
            view_id: "overhead".into(),
            image_size: (240, 180),
            projection: [[200.0, 0.0, 0.0], [0.0, -200.0, 180.0]],
            oblique: 0.5,
        },
        // Opposite side of the table, closer and mirrored in both axes.
        CameraSpec {
            view_id: "wrist".into(),
            image_size: (336, 252),
            projection: [[-280.0, 0.0, 336.0], [0.0, 280.0, 0.0]],
            oblique: 0.5,
        },
    ]
}

/// One object of a `custom` layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CustomObject {
    pub class_name: String,
    #[serde(default)]
    pub attributes: std::collections::BTreeMap<String, String>,
    pub x: f64,
    pub y: f64,
    /// Optional parent index (into `custom_objects`) the object sits in.
    #[serde(default)]
    pub inside: Option<usize>,
    #[serde(default)]
    pub on: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub task: TaskId,
    #[serde(default)]
    pub first_cup: CupColor,
    #[serde(default)]
    pub distractors: u32,
    #[serde(default = "default_table")]
    pub table_bounds: Rect,
    #[serde(default = "default_cameras")]
    pub cameras: Vec<CameraSpec>,
    #[serde(default = "default_near")]
    pub near_threshold_m: f64,
    #[serde(default)]
    pub overlap_tolerance: f64,
    #[serde(default = "NoiseConfig::default_profile")]
    pub perception_noise: NoiseConfig,
    #[serde(default = "GroundingErrorModel::default_profile")]
    pub executor_error: GroundingErrorModel,
    #[serde(default)]
    pub thresholds: AssocThresholds,
    /// Primitives per action chunk before replanning.
    #[serde(default = "default_horizon")]
    pub horizon: u32,
    /// Primitive budget per episode.
    #[serde(default = "default_budget")]
    pub step_budget: u32,
    /// Simulated per-call latency of the mock VLM planners, seconds.
    #[serde(default = "default_mock_latency")]
    pub mock_latency_s: f64,
    #[serde(default)]
    pub custom_objects: Vec<CustomObject>,
}

fn default_table() -> Rect {
    Rect::new(Vec2::new(0.0, 0.0), Vec2::new(1.2, 0.9))
}
fn default_near() -> f64 {
    0.15
}
fn default_horizon() -> u32 {
    10
}
fn default_budget() -> u32 {
    200
}
fn default_mock_latency() -> f64 {
    3.0
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

impl SceneConfig {
    /// Defaults for `task`, including the default perception and executor
    /// noise profiles.
    pub fn new(task: TaskId) -> Self {
        Self {
            task,
            first_cup: CupColor::Black,
            distractors: 0,
            table_bounds: default_table(),
            cameras: default_cameras(),
            near_threshold_m: default_near(),
            overlap_tolerance: 0.0,
            perception_noise: NoiseConfig::default_profile(),
            executor_error: GroundingErrorModel::default_profile(),
            thresholds: AssocThresholds::default(),
            horizon: default_horizon(),
            step_budget: default_budget(),
            mock_latency_s: default_mock_latency(),
            custom_objects: Vec::new(),
        }
    }

    /// Zero perception noise and zero executor error.
    pub fn perfect(task: TaskId) -> Self {
        Self {
            perception_noise: NoiseConfig::default(),
            executor_error: GroundingErrorModel::default(),
            ..Self::new(task)
        }
    }

    pub fn with_distractors(mut self, d: u32) -> Self {
        self.distractors = d;
        self
    }

    pub fn with_first_cup(mut self, c: CupColor) -> Self {
        self.first_cup = c;
        self
    }

    pub fn setup(&self) -> TaskSetup {
        TaskSetup { task: self.task, first_cup: self.first_cup }
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: SceneConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.cameras.is_empty() {
            return Err(ConfigError::Invalid("at least one camera is required".into()));
        }
        let mut ids = std::collections::BTreeSet::new();
        for cam in &self.cameras {
            cam.validate()?;
            if !ids.insert(cam.view_id.as_str()) {
                return Err(ConfigError::Invalid(format!("duplicate view id `{}`", cam.view_id)));
            }
        }
        if self.table_bounds.width() <= 0.0 || self.table_bounds.height() <= 0.0 {
            return Err(ConfigError::Invalid("table_bounds must have positive extent".into()));
        }
        if self.near_threshold_m <= 0.0 || self.overlap_tolerance < 0.0 {
            return Err(ConfigError::Invalid("near_threshold_m > 0 and overlap_tolerance >= 0".into()));
        }
        if self.horizon == 0 || self.step_budget == 0 {
            return Err(ConfigError::Invalid("horizon and step_budget must be positive".into()));
        }
        if !(self.mock_latency_s >= 0.0) {
            return Err(ConfigError::Invalid("mock_latency_s must be >= 0".into()));
        }
        self.perception_noise.validate().map_err(ConfigError::Invalid)?;
        self.executor_error.validate().map_err(ConfigError::Invalid)?;
        self.thresholds.validate().map_err(ConfigError::Invalid)?;
        if self.task == TaskId::Custom && self.custom_objects.is_empty() {
            return Err(ConfigError::Invalid("custom task needs custom_objects".into()));
        }
        Ok(())
    }

    /// Canonical JSON used for the config hash in episode logs.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn hash_hex(&self) -> String {
        use sha2::{Digest, Sha256};
        let digest = Sha256::digest(self.canonical_json().as_bytes());
        hex::encode(&digest[..16])
    }
}
