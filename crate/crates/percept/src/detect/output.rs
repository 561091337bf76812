//! Detection output JSON: a flat array of labeled boxes with 4-decimal fixed
//! number formatting so golden files stay byte-stable across platforms.

use std::io::{Read, Write};

use serde::Deserialize;

use super::{Detection, DetectError};
use crate::dataset::ClassMap;

/// Detections for one image, in the order the pipeline produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageDetections {
    pub image_id: String,
    pub detections: Vec<Detection>,
}

fn json_escape(s: &str) -> String {
    serde_json::to_string(s).expect("string serializes")
}

/// Write the detection array. Numbers are emitted with exactly four decimal
/// places, one detection object per line.
pub fn write_detections_json<W: Write>(
    mut w: W,
    images: &[ImageDetections],
    class_map: &ClassMap,
) -> Result<(), DetectError> {
    let mut lines = Vec::new();
    for image in images {
        for d in &image.detections {
            let label = class_map.label(d.class_index).unwrap_or("?");
            lines.push(format!(
                "{{\"image_id\":{},\"class_index\":{},\"label\":{},\"confidence\":{:.4},\"box\":[{:.4},{:.4},{:.4},{:.4}]}}",
                json_escape(&image.image_id),
                d.class_index,
                json_escape(label),
                d.confidence,
                d.box_.x_min,
                d.box_.y_min,
                d.box_.x_max,
                d.box_.y_max,
            ));
        }
    }
    if lines.is_empty() {
        writeln!(w, "[]")?;
        return Ok(());
    }
    writeln!(w, "[")?;
    for (i, line) in lines.iter().enumerate() {
        let sep = if i + 1 == lines.len() { "" } else { "," };
        writeln!(w, "{line}{sep}")?;
    }
    writeln!(w, "]")?;
    Ok(())
}

#[derive(Deserialize)]
struct DetectionRow {
    image_id: String,
    class_index: usize,
    #[allow(dead_code)]
    label: String,
    confidence: f64,
    #[serde(rename = "box")]
    box_: [f64; 4],
}

/// Read a detection array back, grouping rows by image id in first-seen order.
pub fn read_detections_json<R: Read>(mut r: R) -> Result<Vec<ImageDetections>, DetectError> {
    let mut text = String::new();
    r.read_to_string(&mut text)?;
    let rows: Vec<DetectionRow> =
        serde_json::from_str(&text).map_err(|e| DetectError::DetectionJson(e.to_string()))?;

    let mut images: Vec<ImageDetections> = Vec::new();
    for row in rows {
        let det = Detection {
            class_index: row.class_index,
            confidence: row.confidence,
            box_: super::BoundingBox::new(row.box_[0], row.box_[1], row.box_[2], row.box_[3]),
        };
        match images.iter_mut().find(|i| i.image_id == row.image_id) {
            Some(entry) => entry.detections.push(det),
            None => images.push(ImageDetections {
                image_id: row.image_id,
                detections: vec![det],
            }),
        }
    }
    Ok(images)
}
