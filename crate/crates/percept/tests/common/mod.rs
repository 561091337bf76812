//! Independent reference implementations used to cross-check the library.
//!
//! Everything here is written longhand from the documented contracts and
//! stays off the library's code paths (own IoU, own cosine, own envelope
//! integral), so agreement is evidence rather than tautology.

#![allow(dead_code)]

use std::collections::BTreeMap;

use percept::detect::{BoundingBox, Detection};
use percept::metrics::TruthInstance;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn oracle_iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let w = f64::min(a.x_max, b.x_max) - f64::max(a.x_min, b.x_min);
    let h = f64::min(a.y_max, b.y_max) - f64::max(a.y_min, b.y_min);
    let inter = if w > 0.0 && h > 0.0 { w * h } else { 0.0 };
    let area_a = (a.x_max - a.x_min).max(0.0) * (a.y_max - a.y_min).max(0.0);
    let area_b = (b.x_max - b.x_min).max(0.0) * (b.y_max - b.y_min).max(0.0);
    let union = area_a + area_b - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// The total order every "confidence order" uses: confidence descending,
/// class ascending, x_min ascending, stable on full ties.
fn outranks(a: &Detection, b: &Detection) -> bool {
    if a.confidence != b.confidence {
        return a.confidence > b.confidence;
    }
    if a.class_index != b.class_index {
        return a.class_index < b.class_index;
    }
    a.box_.x_min < b.box_.x_min
}

/// Reference suppressor: repeatedly scan the unsuppressed pool for the
/// highest-ranked detection, keep it, and mark every same-class detection
/// overlapping it at or above the threshold as suppressed.
pub fn oracle_nms(detections: &[Detection], iou_threshold: f64) -> Vec<Detection> {
    let mut suppressed = vec![false; detections.len()];
    let mut kept = Vec::new();
    loop {
        let mut best: Option<usize> = None;
        for i in 0..detections.len() {
            if suppressed[i] {
                continue;
            }
            let better = match best {
                Some(j) => outranks(&detections[i], &detections[j]),
                None => true,
            };
            if better {
                best = Some(i);
            }
        }
        let Some(winner) = best else {
            break;
        };
        suppressed[winner] = true;
        kept.push(detections[winner].clone());
        for i in 0..detections.len() {
            if suppressed[i] || detections[i].class_index != detections[winner].class_index {
                continue;
            }
            if oracle_iou(&detections[i].box_, &detections[winner].box_) >= iou_threshold {
                suppressed[i] = true;
            }
        }
    }
    kept
}

/// Per-detection `(class, is_true_positive)` flags in confidence order, plus
/// the count of unmatched truths, via the greedy one-truth-per-detection
/// protocol.
pub fn oracle_match(
    detections: &[Detection],
    truths: &[TruthInstance],
    iou_threshold: f64,
) -> (Vec<(usize, bool)>, usize) {
    let mut order: Vec<usize> = (0..detections.len()).collect();
    order.sort_by(|&a, &b| {
        if outranks(&detections[a], &detections[b]) {
            std::cmp::Ordering::Less
        } else if outranks(&detections[b], &detections[a]) {
            std::cmp::Ordering::Greater
        } else {
            a.cmp(&b)
        }
    });

    let mut taken = vec![false; truths.len()];
    let mut flags = Vec::new();
    for &d in &order {
        let det = &detections[d];
        let mut best_iou = f64::NEG_INFINITY;
        let mut best_truth = None;
        for (t, truth) in truths.iter().enumerate() {
            if taken[t] || truth.class_index != det.class_index {
                continue;
            }
            let overlap = oracle_iou(&det.box_, &truth.box_);
            if overlap > best_iou {
                best_iou = overlap;
                best_truth = Some(t);
            }
        }
        let is_tp = best_truth.is_some() && best_iou >= iou_threshold;
        if is_tp {
            taken[best_truth.unwrap()] = true;
        }
        flags.push((det.class_index, is_tp));
    }
    let missed = taken.iter().filter(|t| !**t).count();
    (flags, missed)
}

/// All-points average precision via an explicit O(n^2) suffix-max envelope.
pub fn oracle_average_precision(flags: &[bool], total_truths: usize) -> Option<f64> {
    if total_truths == 0 {
        return None;
    }
    if flags.is_empty() {
        return Some(0.0);
    }
    let n = flags.len();
    let mut precision = vec![0.0; n];
    let mut recall = vec![0.0; n];
    let mut tp = 0.0;
    for i in 0..n {
        if flags[i] {
            tp += 1.0;
        }
        precision[i] = tp / (i as f64 + 1.0);
        recall[i] = tp / total_truths as f64;
    }
    let mut ap = 0.0;
    for i in 0..n {
        let mut envelope = 0.0f64;
        for p in &precision[i..] {
            envelope = envelope.max(*p);
        }
        let prev = if i == 0 { 0.0 } else { recall[i - 1] };
        ap += (recall[i] - prev) * envelope;
    }
    Some(ap)
}

/// Class-agnostic greedy confusion counting; rows are truth classes, columns
/// predictions, index `num_classes` is background.
pub fn oracle_confusion(
    detections: &[Detection],
    truths: &[TruthInstance],
    num_classes: usize,
    iou_threshold: f64,
) -> Vec<Vec<u64>> {
    let side = num_classes + 1;
    let mut matrix = vec![vec![0u64; side]; side];
    let mut order: Vec<usize> = (0..detections.len()).collect();
    order.sort_by(|&a, &b| {
        if outranks(&detections[a], &detections[b]) {
            std::cmp::Ordering::Less
        } else if outranks(&detections[b], &detections[a]) {
            std::cmp::Ordering::Greater
        } else {
            a.cmp(&b)
        }
    });
    let mut taken = vec![false; truths.len()];
    for &d in &order {
        let det = &detections[d];
        let mut best_iou = f64::NEG_INFINITY;
        let mut best_truth = None;
        for (t, truth) in truths.iter().enumerate() {
            if taken[t] {
                continue;
            }
            let overlap = oracle_iou(&det.box_, &truth.box_);
            if overlap > best_iou {
                best_iou = overlap;
                best_truth = Some(t);
            }
        }
        match best_truth {
            Some(t) if best_iou >= iou_threshold => {
                taken[t] = true;
                matrix[truths[t].class_index][det.class_index] += 1;
            }
            _ => matrix[num_classes][det.class_index] += 1,
        }
    }
    for (t, truth) in truths.iter().enumerate() {
        if !taken[t] {
            matrix[truth.class_index][num_classes] += 1;
        }
    }
    matrix
}

fn oracle_cosine(a: &[f64], b: &[f64]) -> f64 {
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for i in 0..a.len() {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    dot / (na.sqrt() * nb.sqrt())
}

/// Exhaustive identification scan over `(person, backend, embedding)`
/// triples. `people` maps person id to per-backend embedding lists in the
/// same backend order as `probe`.
pub fn oracle_identify(
    people: &BTreeMap<String, Vec<Vec<Vec<f64>>>>,
    probe: &[Vec<f64>],
) -> Option<(String, f64)> {
    let mut best: Option<(String, f64)> = None;
    for (person, backends) in people {
        let mut fused = 0.0;
        for (backend_index, stored_list) in backends.iter().enumerate() {
            let mut backend_best = f64::NEG_INFINITY;
            for stored in stored_list {
                let score = oracle_cosine(&probe[backend_index], stored);
                if score > backend_best {
                    backend_best = score;
                }
            }
            fused += backend_best;
        }
        fused /= backends.len() as f64;
        let better = match &best {
            Some((_, best_fused)) => fused > *best_fused,
            None => true,
        };
        if better {
            best = Some((person.clone(), fused));
        }
    }
    best
}

/// One random detection/truth instance: up to `max_boxes` of each over
/// `num_classes` classes, in a 100x100 pixel frame.
pub fn random_instance(
    rng: &mut ChaCha8Rng,
    max_boxes: usize,
    num_classes: usize,
) -> (Vec<Detection>, Vec<TruthInstance>) {
    let random_box = |rng: &mut ChaCha8Rng| {
        let x_min = rng.gen_range(0.0..90.0);
        let y_min = rng.gen_range(0.0..90.0);
        BoundingBox::new(
            x_min,
            y_min,
            x_min + rng.gen_range(2.0..40.0),
            y_min + rng.gen_range(2.0..40.0),
        )
    };
    let n_det = rng.gen_range(0..=max_boxes);
    let n_truth = rng.gen_range(0..=max_boxes);
    let mut confidences: Vec<f64> = Vec::new();
    let detections = (0..n_det)
        .map(|_| {
            // Occasionally reuse a confidence to exercise tie-breaking.
            let confidence = if !confidences.is_empty() && rng.gen_bool(0.2) {
                confidences[rng.gen_range(0..confidences.len())]
            } else {
                rng.gen_range(0.05..1.0)
            };
            confidences.push(confidence);
            Detection {
                class_index: rng.gen_range(0..num_classes),
                confidence,
                box_: random_box(rng),
            }
        })
        .collect();
    let truths = (0..n_truth)
        .map(|_| TruthInstance {
            class_index: rng.gen_range(0..num_classes),
            box_: random_box(rng),
        })
        .collect();
    (detections, truths)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
