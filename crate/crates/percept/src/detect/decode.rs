//! Grid decode: raw anchor-slot tuples to boxes in original-image pixels,
//! plus the exact inverse used by mock backends and round-trip tests.
//!
//! Per anchor slot the decode is the usual sigmoid-offset / exponential-size
//! form: center `(sigma(tx)+cx)*stride`, size `anchor*exp(tw)` with `tw,th`
//! clamped to +-10, confidence `sigma(t_obj) * max_k sigma(t_class_k)` and
//! class by argmax. Boxes map back through the inverse letterbox and are
//! clipped to the original image bounds.

use super::grid::{GridSpec, RawGridOutput};
use super::letterbox::LetterboxTransform;
use super::{BoundingBox, Detection};

/// `exp` argument clamp for the size channels, preventing overflow on
/// adversarial raw inputs.
const SIZE_LOGIT_CLAMP: f64 = 10.0;

/// Logit magnitude used by the encoder where an exact 0 or 1 probability is
/// called for; `sigmoid(+-40)` is 0/1 to within 4e-18.
const SATURATED_LOGIT: f64 = 40.0;

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Inverse sigmoid (logit). `p` must lie strictly inside (0, 1).
pub fn sigmoid_inverse(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

impl LetterboxTransform {
    /// Original image bounds recovered from the padding, used for clipping.
    pub(crate) fn image_bounds(&self) -> (f64, f64) {
        (
            (f64::from(self.input_size) - 2.0 * self.pad_x) / self.scale,
            (f64::from(self.input_size) - 2.0 * self.pad_y) / self.scale,
        )
    }
}

/// Decode every anchor slot of every scale, keeping detections whose
/// confidence reaches `conf_threshold`. Boxes clipped to nothing are dropped.
///
/// Tensor shape validity is guaranteed by [`RawGridOutput`] construction;
/// `conf_threshold` is expected in [0, 1].
pub fn decode_predictions(
    raw: &[RawGridOutput],
    transform: &LetterboxTransform,
    conf_threshold: f64,
) -> Vec<Detection> {
    debug_assert!((0.0..=1.0).contains(&conf_threshold));
    let (image_w, image_h) = transform.image_bounds();
    let input = f64::from(transform.input_size);
    let mut out = Vec::new();

    for grid in raw {
        let stride_x = input / grid.grid_w as f64;
        let stride_y = input / grid.grid_h as f64;
        for cell_y in 0..grid.grid_h {
            for cell_x in 0..grid.grid_w {
                for (a, &(anchor_w, anchor_h)) in grid.anchors.iter().enumerate() {
                    let slot = grid.slot(cell_y, cell_x, a);
                    // Objectness alone already bounds the confidence, so most
                    // slots skip the class scan.
                    if sigmoid(slot[4]) < conf_threshold {
                        continue;
                    }
                    let (best_class, best_score) = slot[5..]
                        .iter()
                        .map(|&t| sigmoid(t))
                        .enumerate()
                        .fold((0, f64::NEG_INFINITY), |acc, (k, p)| {
                            if p > acc.1 {
                                (k, p)
                            } else {
                                acc
                            }
                        });
                    let confidence = sigmoid(slot[4]) * best_score;
                    // NaN-safe: a NaN confidence never satisfies `>=`.
                    let keep = confidence >= conf_threshold;
                    if !keep {
                        continue;
                    }

                    let center_x = (sigmoid(slot[0]) + cell_x as f64) * stride_x;
                    let center_y = (sigmoid(slot[1]) + cell_y as f64) * stride_y;
                    let w = anchor_w * slot[2].clamp(-SIZE_LOGIT_CLAMP, SIZE_LOGIT_CLAMP).exp();
                    let h = anchor_h * slot[3].clamp(-SIZE_LOGIT_CLAMP, SIZE_LOGIT_CLAMP).exp();

                    let (x_min, y_min) =
                        transform.input_to_image(center_x - w / 2.0, center_y - h / 2.0);
                    let (x_max, y_max) =
                        transform.input_to_image(center_x + w / 2.0, center_y + h / 2.0);
                    let clipped = BoundingBox::new(
                        x_min.clamp(0.0, image_w),
                        y_min.clamp(0.0, image_h),
                        x_max.clamp(0.0, image_w),
                        y_max.clamp(0.0, image_h),
                    );
                    if clipped.x_min >= clipped.x_max || clipped.y_min >= clipped.y_max {
                        continue;
                    }
                    out.push(Detection {
                        class_index: best_class,
                        confidence,
                        box_: clipped,
                    });
                }
            }
        }
    }
    out
}

/// Invert the decode equations: place each `(class, box, confidence)` triple
/// into the one anchor slot that best matches it, so that
/// [`decode_predictions`] recovers the boxes. This is how mock inference
/// backends fabricate raw outputs from ground truth.
///
/// The best slot is the center cell at the scale whose anchor has the highest
/// width/height IoU with the box. Each confidence (in (0, 1)) is split evenly
/// between objectness and class score so the decoded confidence equals it.
/// Boxes whose size differs from every anchor by more than `exp(10)` cannot
/// be represented and will not round-trip; triples colliding on the same slot
/// follow the last-writer rule.
pub fn encode_detections(
    items: &[(usize, BoundingBox, f64)],
    spec: &GridSpec,
    transform: &LetterboxTransform,
) -> Vec<RawGridOutput> {
    let mut grids = spec.empty_outputs();
    let input = f64::from(spec.input_size);

    for &(class_index, box_, confidence) in items {
        debug_assert!(class_index < spec.num_classes);
        debug_assert!(confidence > 0.0 && confidence < 1.0);
        let channel_logit = sigmoid_inverse(confidence.sqrt());
        let (ix_min, iy_min) = transform.image_to_input(box_.x_min, box_.y_min);
        let (ix_max, iy_max) = transform.image_to_input(box_.x_max, box_.y_max);
        let (center_x, center_y) = ((ix_min + ix_max) / 2.0, (iy_min + iy_max) / 2.0);
        let (w, h) = (ix_max - ix_min, iy_max - iy_min);

        let (best_scale, best_anchor) = best_slot_for_size(spec, w, h);
        let grid = &mut grids[best_scale];
        let stride_x = input / grid.grid_w as f64;
        let stride_y = input / grid.grid_h as f64;
        let cell_x = ((center_x / stride_x).floor() as usize).min(grid.grid_w - 1);
        let cell_y = ((center_y / stride_y).floor() as usize).min(grid.grid_h - 1);
        let (anchor_w, anchor_h) = grid.anchors[best_anchor];

        let slot = grid.slot_mut(cell_y, cell_x, best_anchor);
        slot[0] = offset_logit(center_x / stride_x - cell_x as f64);
        slot[1] = offset_logit(center_y / stride_y - cell_y as f64);
        slot[2] = (w / anchor_w).ln();
        slot[3] = (h / anchor_h).ln();
        slot[4] = channel_logit;
        for (k, t) in slot[5..].iter_mut().enumerate() {
            *t = if k == class_index {
                channel_logit
            } else {
                -SATURATED_LOGIT
            };
        }
    }
    grids
}

fn offset_logit(frac: f64) -> f64 {
    let lo = sigmoid(-SATURATED_LOGIT);
    let hi = sigmoid(SATURATED_LOGIT);
    if frac <= lo {
        -SATURATED_LOGIT
    } else if frac >= hi {
        SATURATED_LOGIT
    } else {
        sigmoid_inverse(frac)
    }
}

/// Highest width/height IoU between the box size and any anchor, across
/// scales; the same criterion `assign_targets` uses within one scale.
fn best_slot_for_size(spec: &GridSpec, w: f64, h: f64) -> (usize, usize) {
    let mut best = (0, 0);
    let mut best_iou = f64::NEG_INFINITY;
    for (si, scale) in spec.scales.iter().enumerate() {
        for (ai, &(aw, ah)) in scale.anchors.iter().enumerate() {
            let iou = size_iou(w, h, aw, ah);
            if iou > best_iou {
                best_iou = iou;
                best = (si, ai);
            }
        }
    }
    best
}

pub(crate) fn size_iou(w1: f64, h1: f64, w2: f64, h2: f64) -> f64 {
    let inter = w1.min(w2) * h1.min(h2);
    let union = w1 * h1 + w2 * h2 - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}
