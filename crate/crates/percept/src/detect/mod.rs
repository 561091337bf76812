//! Detection post-processing: everything between a raw inference-backend
//! output and a final list of scored, class-labeled boxes in original-image
//! coordinates.
//!
//! The stages are pure functions over immutable inputs:
//!
//! 1. [`LetterboxTransform`] — geometry between image and network input.
//! 2. [`decode_predictions`] — sigmoid/exponential grid decode at each scale.
//! 3. [`nms`] — class-wise greedy non-maximum suppression.
//! 4. [`assign_targets`] — ground-truth-to-grid assignment used by training.
//!
//! Convolutional inference itself is out of scope; backends hand over
//! [`RawGridOutput`] tensors and everything downstream is testable math.

mod decode;
mod grid;
mod letterbox;
mod output;
mod target;

pub use decode::{decode_predictions, encode_detections, sigmoid, sigmoid_inverse};
pub use grid::{
    read_raw_grid_fixture, write_raw_grid_fixture, GridSpec, RawGridOutput, ScaleSpec,
    INERT_OBJECTNESS,
};
pub use letterbox::LetterboxTransform;
pub use output::{read_detections_json, write_detections_json, ImageDetections};
pub use target::{assign_targets, CellAssignment, ScaleTargets, TargetGrid};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DetectError {
    #[error("non-positive dimension: {width}x{height} at input size {input_size}")]
    NonPositiveDimension {
        width: u32,
        height: u32,
        input_size: u32,
    },
    #[error("value tensor has {actual} entries, expected {expected} for a {grid_w}x{grid_h} grid")]
    ShapeMismatch {
        grid_w: usize,
        grid_h: usize,
        expected: usize,
        actual: usize,
    },
    #[error("input size {0} is not divisible by the coarsest stride 32")]
    InvalidInputSize(u32),
    #[error("raw grid fixture: {0}")]
    FixtureFormat(String),
    #[error("detection JSON: {0}")]
    DetectionJson(String),
    #[error("inference backend: {0}")]
    Backend(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// The neural-inference boundary: everything upstream of [`RawGridOutput`]
/// lives behind this trait, real or mock.
pub trait InferenceBackend {
    /// Run inference for one image reference, returning the letterbox
    /// transform the backend applied and its per-scale raw outputs.
    fn infer(&self, image_ref: &str) -> Result<(LetterboxTransform, Vec<RawGridOutput>), DetectError>;
}

/// Axis-aligned box in original-image pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BoundingBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Self {
        Self {
            x_min,
            y_min,
            x_max,
            y_max,
        }
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        (self.width()).max(0.0) * (self.height()).max(0.0)
    }

    pub fn center(&self) -> (f64, f64) {
        (
            (self.x_min + self.x_max) / 2.0,
            (self.y_min + self.y_max) / 2.0,
        )
    }
}

/// A decoded, scored, class-labeled detection in original-image pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub class_index: usize,
    pub confidence: f64,
    pub box_: BoundingBox,
}

/// Intersection over union of two boxes. Degenerate (zero-area) inputs and
/// disjoint pairs both yield 0.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let ix = (a.x_max.min(b.x_max) - a.x_min.max(b.x_min)).max(0.0);
    let iy = (a.y_max.min(b.y_max) - a.y_min.max(b.y_min)).max(0.0);
    let inter = ix * iy;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// Total order used everywhere a "confidence order" is required: confidence
/// descending, then class index ascending, then x_min ascending. Deterministic
/// across platforms so suppressed sets and golden files are reproducible.
pub(crate) fn confidence_order(a: &Detection, b: &Detection) -> std::cmp::Ordering {
    b.confidence
        .partial_cmp(&a.confidence)
        .unwrap_or(std::cmp::Ordering::Equal)
        .then(a.class_index.cmp(&b.class_index))
        .then(
            a.box_
                .x_min
                .partial_cmp(&b.box_.x_min)
                .unwrap_or(std::cmp::Ordering::Equal),
        )
}

/// Greedy class-wise non-maximum suppression.
///
/// Detections are sorted by [`confidence_order`]; a detection is kept iff its
/// IoU with every already-kept detection of the same class stays below
/// `iou_threshold`. The output preserves that sorted order, so it is a
/// confidence-descending subset of the input.
pub fn nms(detections: &[Detection], iou_threshold: f64) -> Vec<Detection> {
    let mut sorted: Vec<&Detection> = detections.iter().collect();
    sorted.sort_by(|a, b| confidence_order(a, b));

    let mut kept: Vec<Detection> = Vec::new();
    for cand in sorted {
        let suppressed = kept
            .iter()
            .filter(|k| k.class_index == cand.class_index)
            .any(|k| iou(&k.box_, &cand.box_) >= iou_threshold);
        if !suppressed {
            kept.push(cand.clone());
        }
    }
    kept
}
