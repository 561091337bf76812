//! Walk a frame through the full post-processing pipeline: letterbox
//! geometry, raw grid outputs from a mock backend, sigmoid decode, NMS, and
//! the detection JSON format.
//!
//! ```bash
//! cargo run --example detect_pipeline
//! ```

use percept::detect::{
    decode_predictions, encode_detections, nms, write_detections_json, BoundingBox, GridSpec,
    ImageDetections, LetterboxTransform,
};
use percept::synthetic::default_class_map;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let class_map = default_class_map();
    let spec = GridSpec::standard(640, class_map.len())?;
    println!(
        "head geometry: input {} px, grids {:?}",
        spec.input_size,
        spec.scales.iter().map(|s| s.grid_w).collect::<Vec<_>>()
    );

    // A 1280x720 frame letterboxed into the square input.
    let transform = LetterboxTransform::compute(1280, 720, 640)?;
    println!(
        "letterbox: scale {:.4}, pad ({:.1}, {:.1})",
        transform.scale, transform.pad_x, transform.pad_y
    );

    // The mock backend inverts the decode equations, so these boxes come
    // back out exactly.
    let truth = vec![
        (3, BoundingBox::new(100.0, 80.0, 380.0, 500.0), 0.92),
        (0, BoundingBox::new(700.0, 120.0, 950.0, 680.0), 0.81),
        (8, BoundingBox::new(1000.0, 400.0, 1240.0, 560.0), 0.67),
    ];
    let raw = encode_detections(&truth, &spec, &transform);

    let decoded = decode_predictions(&raw, &transform, 0.25);
    let kept = nms(&decoded, 0.45);
    println!("decoded {} slots into {} detections", decoded.len(), kept.len());
    for d in &kept {
        println!(
            "  {:>12} conf {:.2} box [{:7.2} {:7.2} {:7.2} {:7.2}]",
            class_map.label(d.class_index).unwrap_or("?"),
            d.confidence,
            d.box_.x_min,
            d.box_.y_min,
            d.box_.x_max,
            d.box_.y_max
        );
    }

    let mut json = Vec::new();
    write_detections_json(
        &mut json,
        &[ImageDetections {
            image_id: "frame_000".into(),
            detections: kept,
        }],
        &class_map,
    )?;
    println!("detection JSON:\n{}", String::from_utf8(json)?);
    Ok(())
}
