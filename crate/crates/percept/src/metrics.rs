//! Detection and classification evaluation: precision, recall, per-class
//! average precision, mAP, and confusion matrices.
//!
//! Matching follows the standard greedy protocol: detections are visited in
//! confidence order and each ground truth is consumable once. AP uses
//! all-points interpolation (the precision envelope integrated over recall).

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use crate::dataset::ClassMap;
use crate::detect::{confidence_order, iou, BoundingBox, Detection};

/// Outcome counts for a binary decision task. `true_negatives` is `None` for
/// box detection, where the negative class is unbounded and the count is
/// undefined.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MatchCounts {
    pub true_positives: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
    pub true_negatives: Option<u64>,
}

/// `tp / (tp + fp)`, defined as 1.0 when nothing was predicted: an absent
/// prediction set is vacuously precise.
pub fn precision(counts: &MatchCounts) -> f64 {
    let denom = counts.true_positives + counts.false_positives;
    if denom == 0 {
        1.0
    } else {
        counts.true_positives as f64 / denom as f64
    }
}

/// `tp / (tp + fn)`, defined as 1.0 when there was nothing to find.
pub fn recall(counts: &MatchCounts) -> f64 {
    let denom = counts.true_positives + counts.false_negatives;
    if denom == 0 {
        1.0
    } else {
        counts.true_positives as f64 / denom as f64
    }
}

/// A ground-truth instance in the same pixel space as the detections.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthInstance {
    pub class_index: usize,
    pub box_: BoundingBox,
}

/// Match verdict for one detection, in confidence order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionMatch {
    /// Index into the original detection slice.
    pub detection_index: usize,
    pub class_index: usize,
    pub confidence: f64,
    pub is_true_positive: bool,
    /// Index of the consumed ground truth, for true positives.
    pub matched_truth: Option<usize>,
}

/// Result of greedy per-class matching for one image.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Matches {
    /// Per-detection verdicts, ordered by descending confidence.
    pub per_detection: Vec<DetectionMatch>,
    /// Ground-truth indices no detection claimed.
    pub unmatched_truths: Vec<usize>,
}

impl Matches {
    pub fn counts(&self) -> MatchCounts {
        let tp = self
            .per_detection
            .iter()
            .filter(|m| m.is_true_positive)
            .count() as u64;
        MatchCounts {
            true_positives: tp,
            false_positives: self.per_detection.len() as u64 - tp,
            false_negatives: self.unmatched_truths.len() as u64,
            true_negatives: None,
        }
    }
}

/// Greedy matching in confidence order: a detection is a true positive iff
/// its best-IoU unmatched same-class ground truth reaches `iou_threshold`.
/// Each truth is consumed by at most one detection; leftover truths are the
/// false negatives.
pub fn match_detections(
    detections: &[Detection],
    truths: &[TruthInstance],
    iou_threshold: f64,
) -> Matches {
    let mut order: Vec<usize> = (0..detections.len()).collect();
    order.sort_by(|&a, &b| confidence_order(&detections[a], &detections[b]));

    let mut truth_taken = vec![false; truths.len()];
    let mut per_detection = Vec::with_capacity(detections.len());

    for det_index in order {
        let det = &detections[det_index];
        let mut best: Option<(usize, f64)> = None;
        for (ti, truth) in truths.iter().enumerate() {
            if truth_taken[ti] || truth.class_index != det.class_index {
                continue;
            }
            let overlap = iou(&det.box_, &truth.box_);
            let better = match best {
                Some((_, best_iou)) => overlap > best_iou,
                None => true,
            };
            if better {
                best = Some((ti, overlap));
            }
        }
        let matched = best.filter(|&(_, overlap)| overlap >= iou_threshold);
        if let Some((ti, _)) = matched {
            truth_taken[ti] = true;
        }
        per_detection.push(DetectionMatch {
            detection_index: det_index,
            class_index: det.class_index,
            confidence: det.confidence,
            is_true_positive: matched.is_some(),
            matched_truth: matched.map(|(ti, _)| ti),
        });
    }

    let unmatched_truths = truth_taken
        .iter()
        .enumerate()
        .filter(|(_, taken)| !**taken)
        .map(|(ti, _)| ti)
        .collect();

    Matches {
        per_detection,
        unmatched_truths,
    }
}

/// Area under the precision-recall curve with all-points interpolation.
///
/// `flags` are true-positive markers ordered by descending confidence. A
/// class with no ground truths has no defined AP and yields `None`; a class
/// with truths but no detections scores 0.
pub fn average_precision(flags: &[bool], total_truths: usize) -> Option<f64> {
    if total_truths == 0 {
        return None;
    }
    if flags.is_empty() {
        return Some(0.0);
    }
    let mut tp = 0u64;
    let mut fp = 0u64;
    let mut points = Vec::with_capacity(flags.len());
    for &flag in flags {
        if flag {
            tp += 1;
        } else {
            fp += 1;
        }
        points.push((
            tp as f64 / total_truths as f64,
            tp as f64 / (tp + fp) as f64,
        ));
    }

    // Monotone precision envelope, integrated right to left.
    let mut ap = 0.0;
    let mut envelope = 0.0_f64;
    for i in (0..points.len()).rev() {
        envelope = envelope.max(points[i].1);
        let prev_recall = if i == 0 { 0.0 } else { points[i - 1].0 };
        ap += (points[i].0 - prev_recall) * envelope;
    }
    Some(ap)
}

/// Unweighted mean over classes with a defined AP.
pub fn mean_average_precision(per_class_ap: &BTreeMap<usize, f64>) -> Option<f64> {
    if per_class_ap.is_empty() {
        return None;
    }
    Some(per_class_ap.values().sum::<f64>() / per_class_ap.len() as f64)
}

/// Square confusion matrix over `num_classes` plus one background row and
/// column. Rows are truth classes, columns predicted classes; the background
/// row collects unmatched detections and the background column unmatched
/// truths.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    num_classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(num_classes: usize) -> Self {
        let side = num_classes + 1;
        Self {
            num_classes,
            counts: vec![0; side * side],
        }
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Index of the background row/column.
    pub fn background(&self) -> usize {
        self.num_classes
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * (self.num_classes + 1) + predicted]
    }

    pub fn increment(&mut self, truth: usize, predicted: usize) {
        self.counts[truth * (self.num_classes + 1) + predicted] += 1;
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        assert_eq!(self.num_classes, other.num_classes);
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..=self.num_classes).map(|i| self.get(i, i)).sum()
    }

    pub fn row_sum(&self, truth: usize) -> u64 {
        (0..=self.num_classes).map(|p| self.get(truth, p)).sum()
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        (0..=self.num_classes)
            .map(|t| (0..=self.num_classes).map(|p| self.get(t, p)).collect())
            .collect()
    }

    /// CSV with one header row and one labeled row per truth class, the
    /// final row/column being background.
    pub fn write_csv<W: Write>(&self, mut w: W, class_map: &ClassMap) -> std::io::Result<()> {
        let label = |i: usize| {
            if i == self.num_classes {
                "background".to_string()
            } else {
                class_map.label(i).unwrap_or("?").to_string()
            }
        };
        let header: Vec<String> = (0..=self.num_classes).map(label).collect();
        writeln!(w, "truth\\predicted,{}", header.join(","))?;
        for t in 0..=self.num_classes {
            let row: Vec<String> = (0..=self.num_classes)
                .map(|p| self.get(t, p).to_string())
                .collect();
            writeln!(w, "{},{}", label(t), row.join(","))?;
        }
        Ok(())
    }
}

/// Build the detection confusion matrix for one image.
///
/// Matching here is class-agnostic: detections greedily claim the unmatched
/// truth with the highest IoU at or above the threshold, and the matched pair
/// increments `(truth_class, predicted_class)`. Unmatched detections land in
/// the background row, unmatched truths in the background column.
pub fn confusion_matrix(
    detections: &[Detection],
    truths: &[TruthInstance],
    num_classes: usize,
    iou_threshold: f64,
) -> ConfusionMatrix {
    let mut matrix = ConfusionMatrix::new(num_classes);
    let mut order: Vec<usize> = (0..detections.len()).collect();
    order.sort_by(|&a, &b| confidence_order(&detections[a], &detections[b]));

    let mut truth_taken = vec![false; truths.len()];
    for det_index in order {
        let det = &detections[det_index];
        let mut best: Option<(usize, f64)> = None;
        for (ti, truth) in truths.iter().enumerate() {
            if truth_taken[ti] {
                continue;
            }
            let overlap = iou(&det.box_, &truth.box_);
            let better = match best {
                Some((_, best_iou)) => overlap > best_iou,
                None => true,
            };
            if better {
                best = Some((ti, overlap));
            }
        }
        match best.filter(|&(_, overlap)| overlap >= iou_threshold) {
            Some((ti, _)) => {
                truth_taken[ti] = true;
                matrix.increment(truths[ti].class_index, det.class_index);
            }
            None => matrix.increment(matrix.background(), det.class_index),
        }
    }
    for (ti, taken) in truth_taken.iter().enumerate() {
        if !taken {
            matrix.increment(truths[ti].class_index, matrix.background());
        }
    }
    matrix
}

/// Dataset-level evaluation report.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// AP per class index, only for classes with defined AP.
    pub per_class_ap: BTreeMap<usize, f64>,
    pub map_score: f64,
    pub precision: f64,
    pub recall: f64,
    pub confusion: ConfusionMatrix,
    pub counts: MatchCounts,
}

/// Evaluate detections against ground truth over a whole dataset.
///
/// `images` pairs each image's detections with its truths, all in pixel
/// space. Per-class AP flags are ordered by confidence descending with ties
/// broken by image order, matching the per-image match ordering.
pub fn evaluate_detections(
    images: &[(Vec<Detection>, Vec<TruthInstance>)],
    num_classes: usize,
    iou_threshold: f64,
) -> EvalReport {
    let mut confusion = ConfusionMatrix::new(num_classes);
    let mut totals = MatchCounts::default();
    // (class, confidence, image index, is_tp) for the dataset-wide PR curve.
    let mut flagged: Vec<(usize, f64, usize, bool)> = Vec::new();
    let mut truths_per_class = vec![0usize; num_classes];

    for (image_index, (detections, truths)) in images.iter().enumerate() {
        for t in truths {
            truths_per_class[t.class_index] += 1;
        }
        let matches = match_detections(detections, truths, iou_threshold);
        let counts = matches.counts();
        totals.true_positives += counts.true_positives;
        totals.false_positives += counts.false_positives;
        totals.false_negatives += counts.false_negatives;
        for m in &matches.per_detection {
            flagged.push((m.class_index, m.confidence, image_index, m.is_true_positive));
        }
        confusion.merge(&confusion_matrix(
            detections,
            truths,
            num_classes,
            iou_threshold,
        ));
    }

    flagged.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.2.cmp(&b.2))
    });

    let mut per_class_ap = BTreeMap::new();
    for (class, &class_truths) in truths_per_class.iter().enumerate() {
        let flags: Vec<bool> = flagged
            .iter()
            .filter(|(c, ..)| *c == class)
            .map(|&(.., tp)| tp)
            .collect();
        if flags.is_empty() && class_truths == 0 {
            continue;
        }
        if let Some(ap) = average_precision(&flags, class_truths) {
            per_class_ap.insert(class, ap);
        }
    }

    let map_score = mean_average_precision(&per_class_ap).unwrap_or(0.0);
    EvalReport {
        map_score,
        precision: precision(&totals),
        recall: recall(&totals),
        per_class_ap,
        confusion,
        counts: totals,
    }
}

#[derive(Serialize)]
struct EvalReportJson {
    map_score: f64,
    precision: f64,
    recall: f64,
    true_positives: u64,
    false_positives: u64,
    false_negatives: u64,
    per_class_ap: BTreeMap<String, f64>,
    confusion_labels: Vec<String>,
    confusion: Vec<Vec<u64>>,
}

impl EvalReport {
    /// Serialize with stable key ordering (struct order plus sorted label
    /// maps), suitable for golden files.
    pub fn to_json(&self, class_map: &ClassMap) -> String {
        let per_class_ap = self
            .per_class_ap
            .iter()
            .map(|(&c, &ap)| {
                (
                    class_map.label(c).unwrap_or("?").to_string(),
                    ap,
                )
            })
            .collect();
        let mut confusion_labels: Vec<String> = (0..self.confusion.num_classes())
            .map(|i| class_map.label(i).unwrap_or("?").to_string())
            .collect();
        confusion_labels.push("background".to_string());
        let view = EvalReportJson {
            map_score: self.map_score,
            precision: self.precision,
            recall: self.recall,
            true_positives: self.counts.true_positives,
            false_positives: self.counts.false_positives,
            false_negatives: self.counts.false_negatives,
            per_class_ap,
            confusion_labels,
            confusion: self.confusion.rows(),
        };
        serde_json::to_string_pretty(&view).expect("report serializes") + "\n"
    }
}
