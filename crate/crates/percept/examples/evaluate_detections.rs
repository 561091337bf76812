//! Score a small batch of detections against ground truth: matching,
//! per-class AP, mAP, micro precision/recall, and the confusion matrix.
//!
//! ```bash
//! cargo run --example evaluate_detections
//! ```

use percept::dataset::ClassMap;
use percept::detect::{BoundingBox, Detection};
use percept::metrics::{evaluate_detections, TruthInstance};

fn det(class: usize, conf: f64, b: [f64; 4]) -> Detection {
    Detection {
        class_index: class,
        confidence: conf,
        box_: BoundingBox::new(b[0], b[1], b[2], b[3]),
    }
}

fn truth(class: usize, b: [f64; 4]) -> TruthInstance {
    TruthInstance {
        class_index: class,
        box_: BoundingBox::new(b[0], b[1], b[2], b[3]),
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let class_map = ClassMap::from_entries(vec![
        (0, "Person".into()),
        (1, "Chair".into()),
        (2, "Dog".into()),
    ])?;

    // Image 1: both objects found, one with a slightly loose box.
    // Image 2: one hit, one miss, one false alarm of the wrong class.
    let images = vec![
        (
            vec![
                det(0, 0.95, [10.0, 10.0, 50.0, 90.0]),
                det(1, 0.80, [60.0, 30.0, 95.0, 75.0]),
            ],
            vec![
                truth(0, [12.0, 11.0, 49.0, 88.0]),
                truth(1, [58.0, 28.0, 96.0, 78.0]),
            ],
        ),
        (
            vec![
                det(0, 0.90, [20.0, 20.0, 60.0, 95.0]),
                det(2, 0.40, [70.0, 10.0, 90.0, 30.0]),
            ],
            vec![
                truth(0, [21.0, 19.0, 61.0, 96.0]),
                truth(1, [40.0, 40.0, 80.0, 80.0]),
            ],
        ),
    ];

    let report = evaluate_detections(&images, class_map.len(), 0.5);
    println!(
        "mAP {:.4}  precision {:.4}  recall {:.4}",
        report.map_score, report.precision, report.recall
    );
    for (class, ap) in &report.per_class_ap {
        println!(
            "  AP[{}] = {ap:.4}",
            class_map.label(*class).unwrap_or("?")
        );
    }

    let mut csv = Vec::new();
    report.confusion.write_csv(&mut csv, &class_map)?;
    println!("confusion matrix:\n{}", String::from_utf8(csv)?);
    println!("report JSON:\n{}", report.to_json(&class_map));
    Ok(())
}
