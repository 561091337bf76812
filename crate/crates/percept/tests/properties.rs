//! Property tests for the documented invariants, plus randomized
//! comparisons against the straight-line oracles in `common`.

mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;

use common::{oracle_average_precision, oracle_match, oracle_nms, random_instance, rng};
use percept::dataset::{split_dataset, GroundTruthBox, SplitSpec};
use percept::detect::{
    assign_targets, iou, nms, sigmoid, BoundingBox, GridSpec, RawGridOutput,
};
use percept::face::cosine_similarity;
use percept::metrics::{average_precision, match_detections, precision, recall, MatchCounts};
use percept::optim::{
    detection_loss, sgd_momentum_step, sgd_step, OptimizerConfig, ParamVector, PredictionGrid,
};
use percept::orchestrator::{FeedbackMessage, FeedbackQueue, Priority};
use percept::synthetic::{default_class_map, synthetic_manifest};
use rand::Rng;

fn arb_box() -> impl Strategy<Value = BoundingBox> {
    (0.0..80.0f64, 0.0..80.0f64, 1.0..40.0f64, 1.0..40.0f64)
        .prop_map(|(x, y, w, h)| BoundingBox::new(x, y, x + w, y + h))
}

proptest! {
    #[test]
    fn iou_is_symmetric_and_bounded(a in arb_box(), b in arb_box()) {
        let ab = iou(&a, &b);
        let ba = iou(&b, &a);
        prop_assert_eq!(ab.to_bits(), ba.to_bits());
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert!((iou(&a, &a) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn nms_equals_reference_suppressor(seed in 0u64..2000) {
        let mut r = rng(seed);
        let (detections, _) = random_instance(&mut r, 50, 5);
        let threshold = r.gen_range(0.05..0.95);
        let ours = nms(&detections, threshold);
        let reference = oracle_nms(&detections, threshold);
        prop_assert_eq!(ours, reference);
    }

    #[test]
    fn nms_keeps_a_subset_with_no_overlapping_pair(seed in 0u64..500) {
        let mut r = rng(seed);
        let (detections, _) = random_instance(&mut r, 30, 4);
        let threshold = 0.45;
        let kept = nms(&detections, threshold);
        prop_assert!(kept.len() <= detections.len());
        for k in &kept {
            prop_assert!(detections.contains(k));
        }
        for i in 0..kept.len() {
            prop_assert!(kept.get(i + 1).is_none_or(|n| n.confidence <= kept[i].confidence));
            for j in i + 1..kept.len() {
                if kept[i].class_index == kept[j].class_index {
                    prop_assert!(iou(&kept[i].box_, &kept[j].box_) < threshold);
                }
            }
        }
    }

    #[test]
    fn matching_satisfies_count_identities(seed in 0u64..500) {
        let mut r = rng(seed);
        let (detections, truths) = random_instance(&mut r, 10, 5);
        let matches = match_detections(&detections, &truths, 0.5);
        let counts = matches.counts();
        prop_assert_eq!(
            counts.true_positives + counts.false_negatives,
            truths.len() as u64
        );
        prop_assert_eq!(
            counts.true_positives + counts.false_positives,
            detections.len() as u64
        );
        // Per class, TP + FN covers exactly that class's truths.
        for class in 0..5 {
            let class_tp = matches
                .per_detection
                .iter()
                .filter(|m| m.class_index == class && m.is_true_positive)
                .count();
            let class_fn = matches
                .unmatched_truths
                .iter()
                .filter(|&&t| truths[t].class_index == class)
                .count();
            let class_truths = truths.iter().filter(|t| t.class_index == class).count();
            prop_assert_eq!(class_tp + class_fn, class_truths);
        }
    }

    #[test]
    fn appending_a_false_positive_never_raises_ap(
        flags in proptest::collection::vec(any::<bool>(), 1..30),
        total in 1usize..20,
    ) {
        let base = average_precision(&flags, total).unwrap();
        let mut extended = flags.clone();
        extended.push(false);
        let appended = average_precision(&extended, total).unwrap();
        prop_assert!(appended <= base + 1e-12);
    }

    #[test]
    fn ap_matches_oracle(seed in 0u64..500) {
        let mut r = rng(seed);
        let n = r.gen_range(1..25);
        let flags: Vec<bool> = (0..n).map(|_| r.gen_bool(0.5)).collect();
        let total = r.gen_range(1..15usize);
        let ours = average_precision(&flags, total).unwrap();
        let reference = oracle_average_precision(&flags, total).unwrap();
        prop_assert!((ours - reference).abs() < 1e-9);
    }

    #[test]
    fn match_flags_equal_oracle(seed in 0u64..500) {
        let mut r = rng(seed);
        let (detections, truths) = random_instance(&mut r, 10, 5);
        let threshold = r.gen_range(0.05..0.95);
        let ours = match_detections(&detections, &truths, threshold);
        let our_flags: Vec<bool> = ours.per_detection.iter().map(|m| m.is_true_positive).collect();
        let (oracle_flags, oracle_missed) = oracle_match(&detections, &truths, threshold);
        let oracle_bools: Vec<bool> = oracle_flags.iter().map(|&(_, tp)| tp).collect();
        prop_assert_eq!(our_flags, oracle_bools);
        prop_assert_eq!(ours.unmatched_truths.len(), oracle_missed);
    }

    #[test]
    fn split_partitions_exactly(n in 1usize..150, a in 0.0..1.0f64, b in 0.0..1.0f64, seed in any::<u64>()) {
        let total = a + b + 1.0;
        let spec = SplitSpec::new(a / total, b / total, 1.0 / total, seed).unwrap();
        let map = default_class_map();
        let manifest = synthetic_manifest(n, &map, seed ^ 0x5eed);
        let (train, val, test) = split_dataset(&manifest, &spec).unwrap();
        prop_assert_eq!(train.len() + val.len() + test.len(), manifest.len());
        let mut ids = BTreeSet::new();
        for part in [&train, &val, &test] {
            for s in &part.samples {
                prop_assert!(ids.insert(s.image_id.clone()), "duplicate id across splits");
            }
        }
    }

    #[test]
    fn cosine_is_symmetric_bounded_and_scale_invariant(
        a in proptest::collection::vec(-10.0..10.0f64, 2..32),
        seed in any::<u64>(),
        k in 1e-3..1e3f64,
    ) {
        let mut r = rng(seed);
        let b: Vec<f64> = (0..a.len()).map(|_| r.gen_range(-10.0..10.0)).collect();
        prop_assume!(a.iter().map(|v| v * v).sum::<f64>().sqrt() > 1e-6);
        prop_assume!(b.iter().map(|v| v * v).sum::<f64>().sqrt() > 1e-6);

        let ab = cosine_similarity(&a, &b).unwrap();
        let ba = cosine_similarity(&b, &a).unwrap();
        prop_assert!((ab - ba).abs() < 1e-15);
        prop_assert!(ab.abs() <= 1.0 + 1e-12);

        let scaled: Vec<f64> = a.iter().map(|v| v * k).collect();
        let s = cosine_similarity(&scaled, &b).unwrap();
        prop_assert!((s - ab).abs() < 1e-9);
    }

    #[test]
    fn momentum_zero_is_bitwise_plain_sgd(
        weights in proptest::collection::vec(-100.0..100.0f64, 1..16),
        seed in any::<u64>(),
        lr in 1e-4..1.0f64,
    ) {
        let mut r = rng(seed);
        let grad: Vec<f64> = (0..weights.len()).map(|_| r.gen_range(-50.0..50.0)).collect();
        let cfg = OptimizerConfig::new(lr, 0.0, 1).unwrap();
        let mut plain = ParamVector::new(weights.clone());
        let mut momentum = ParamVector::new(weights);
        sgd_step(&mut plain, &grad, &cfg).unwrap();
        sgd_momentum_step(&mut momentum, &grad, &cfg).unwrap();
        for (x, y) in plain.weights().iter().zip(momentum.weights()) {
            prop_assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn f1_lies_between_precision_and_recall(tp in 0u64..50, fp in 0u64..50, fn_ in 0u64..50) {
        let counts = MatchCounts {
            true_positives: tp,
            false_positives: fp,
            false_negatives: fn_,
            true_negatives: None,
        };
        let p = precision(&counts);
        let r = recall(&counts);
        let f1 = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
        prop_assert!(f1 >= p.min(r) - 1e-12);
        prop_assert!(f1 <= p.max(r) + 1e-12);
        prop_assert!((0.0..=1.0).contains(&f1));
    }

    #[test]
    fn detection_loss_components_are_non_negative(seed in 0u64..300) {
        let mut r = rng(seed);
        let spec = GridSpec::standard(64, 3).unwrap();
        let boxes: Vec<GroundTruthBox> = (0..r.gen_range(0..4))
            .map(|_| {
                let cx = r.gen_range(0.2..0.8);
                let cy = r.gen_range(0.2..0.8);
                let w = r.gen_range(0.05..0.3);
                let h = r.gen_range(0.05..0.3);
                GroundTruthBox::new(
                    r.gen_range(0..3),
                    cx - w / 2.0,
                    cy - h / 2.0,
                    cx + w / 2.0,
                    cy + h / 2.0,
                )
                .unwrap()
            })
            .collect();
        let targets = assign_targets(&boxes, &spec);
        let raw = random_raw(&spec, &mut r);
        let preds = PredictionGrid::from_raw(&raw, spec.input_size);
        let loss = detection_loss(&preds, &targets).unwrap();
        prop_assert!(loss.box_loss >= 0.0 && loss.box_loss.is_finite());
        prop_assert!(loss.object_loss >= 0.0 && loss.object_loss.is_finite());
        prop_assert!(loss.class_loss >= 0.0 && loss.class_loss.is_finite());
    }

    #[test]
    fn queue_drains_alerts_before_descriptions(seed in 0u64..500) {
        let mut r = rng(seed);
        let mut queue = FeedbackQueue::new(8);
        let mut now = 0u64;
        for _ in 0..r.gen_range(1..40) {
            if r.gen_bool(0.3) {
                check_drain_order(queue.drain());
            } else {
                now += r.gen_range(0..100);
                let priority = match r.gen_range(0..3) {
                    0 => Priority::Description,
                    1 => Priority::Navigation,
                    _ => Priority::Alert,
                };
                queue.push(FeedbackMessage {
                    priority,
                    text: format!("m{now}"),
                    created_at_ms: now,
                });
            }
        }
        check_drain_order(queue.drain());
    }
}

fn check_drain_order(messages: Vec<FeedbackMessage>) {
    // Priorities must be non-increasing; within one priority, timestamps
    // non-decreasing. In particular every alert precedes every description,
    // regardless of creation order.
    for pair in messages.windows(2) {
        assert!(pair[0].priority >= pair[1].priority);
        if pair[0].priority == pair[1].priority {
            assert!(pair[0].created_at_ms <= pair[1].created_at_ms);
        }
    }
}

fn random_raw(spec: &GridSpec, r: &mut rand_chacha::ChaCha8Rng) -> Vec<RawGridOutput> {
    let mut grids = spec.empty_outputs();
    for grid in &mut grids {
        for cy in 0..grid.grid_h {
            for cx in 0..grid.grid_w {
                for a in 0..grid.anchors.len() {
                    let slot = grid.slot_mut(cy, cx, a);
                    for v in slot.iter_mut() {
                        *v = r.gen_range(-20.0..20.0);
                    }
                }
            }
        }
    }
    grids
}

/// Straight-line reimplementation of the loss decomposition, compared on
/// randomized grids.
#[test]
fn detection_loss_matches_straight_line_oracle() {
    let spec = GridSpec::standard(64, 4).unwrap();
    let mut r = rng(77);
    for _ in 0..25 {
        let boxes: Vec<GroundTruthBox> = (0..r.gen_range(1..5))
            .map(|_| {
                let cx = r.gen_range(0.15..0.85);
                let cy = r.gen_range(0.15..0.85);
                let w = r.gen_range(0.05..0.25);
                let h = r.gen_range(0.05..0.25);
                GroundTruthBox::new(
                    r.gen_range(0..4),
                    cx - w / 2.0,
                    cy - h / 2.0,
                    cx + w / 2.0,
                    cy + h / 2.0,
                )
                .unwrap()
            })
            .collect();
        let targets = assign_targets(&boxes, &spec);
        let raw = random_raw(&spec, &mut r);
        let preds = PredictionGrid::from_raw(&raw, spec.input_size);

        let loss = detection_loss(&preds, &targets).unwrap();
        let (box_ref, obj_ref, class_ref) = oracle_loss(&preds, &targets);
        assert!((loss.box_loss - box_ref).abs() < 1e-9, "box loss");
        assert!((loss.object_loss - obj_ref).abs() < 1e-9, "object loss");
        assert!((loss.class_loss - class_ref).abs() < 1e-9, "class loss");
    }
}

fn oracle_loss(
    preds: &PredictionGrid,
    targets: &percept::detect::TargetGrid,
) -> (f64, f64, f64) {
    let clamp = |z: f64| z.clamp(-15.0, 15.0);
    let bce = |z: f64, y: f64| {
        let p = sigmoid(clamp(z));
        -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
    };
    let norm_iou = |a: (f64, f64, f64, f64), b: (f64, f64, f64, f64)| {
        let w = f64::min(a.2, b.2) - f64::max(a.0, b.0);
        let h = f64::min(a.3, b.3) - f64::max(a.1, b.1);
        let inter = if w > 0.0 && h > 0.0 { w * h } else { 0.0 };
        let union = (a.2 - a.0) * (a.3 - a.1) + (b.2 - b.0) * (b.3 - b.1) - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    };

    let mut box_sum = 0.0;
    let mut box_n = 0;
    let mut obj_sum = 0.0;
    let mut obj_n = 0;
    let mut class_sum = 0.0;
    let mut class_n = 0;
    for (pred_scale, target_scale) in preds.scales.iter().zip(&targets.scales) {
        for cy in 0..pred_scale.grid_h {
            for cx in 0..pred_scale.grid_w {
                for a in 0..pred_scale.num_anchors {
                    let p = pred_scale.slot(cy, cx, a);
                    match target_scale.get(cy, cx, a) {
                        Some(t) => {
                            obj_sum += bce(p.objectness_logit, 1.0);
                            let center_x = (cx as f64 + t.offset_x) / target_scale.grid_w as f64;
                            let center_y = (cy as f64 + t.offset_y) / target_scale.grid_h as f64;
                            let gt = (
                                center_x - t.width / 2.0,
                                center_y - t.height / 2.0,
                                center_x + t.width / 2.0,
                                center_y + t.height / 2.0,
                            );
                            let pb = (p.box_.x_min, p.box_.y_min, p.box_.x_max, p.box_.y_max);
                            box_sum += 1.0 - norm_iou(pb, gt);
                            box_n += 1;
                            let mut cell = 0.0;
                            for (k, &z) in p.class_logits.iter().enumerate() {
                                cell += bce(z, if k == t.class_index { 1.0 } else { 0.0 });
                            }
                            class_sum += cell / p.class_logits.len() as f64;
                            class_n += 1;
                        }
                        None => obj_sum += bce(p.objectness_logit, 0.0),
                    }
                    obj_n += 1;
                }
            }
        }
    }
    let mean = |s: f64, n: usize| if n == 0 { 0.0 } else { s / n as f64 };
    (
        mean(box_sum, box_n),
        mean(obj_sum, obj_n),
        mean(class_sum, class_n),
    )
}
