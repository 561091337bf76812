//! Deterministic synthetic fixtures: the default 35-class vocabulary and a
//! seeded manifest generator.
//!
//! The vocabulary is configuration, not a claim about any particular trained
//! model; it ships as an editable fixture (`index,label_name` file) and this
//! module mirrors it for programmatic use. Generated boxes stay well inside
//! the unit square so encode/decode round trips are exact.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::{ClassMap, DatasetManifest, GroundTruthBox, Sample};

/// Labels for the default 35-class everyday-object vocabulary.
pub const DEFAULT_CLASS_LABELS: [&str; 35] = [
    "Person",
    "Human face",
    "Banknote",
    "Chair",
    "Table",
    "Door",
    "Window",
    "Stairs",
    "Car",
    "Bicycle",
    "Bus",
    "Traffic light",
    "Traffic sign",
    "Tree",
    "Bench",
    "Dog",
    "Cat",
    "Cup",
    "Bottle",
    "Plate",
    "Fork",
    "Spoon",
    "Knife",
    "Laptop",
    "Mobile phone",
    "Television",
    "Book",
    "Backpack",
    "Umbrella",
    "Shoe",
    "Clock",
    "Bed",
    "Couch",
    "Sink",
    "Toilet",
];

/// The default vocabulary as a [`ClassMap`].
pub fn default_class_map() -> ClassMap {
    ClassMap::from_entries(
        DEFAULT_CLASS_LABELS
            .iter()
            .enumerate()
            .map(|(i, l)| (i, (*l).to_string()))
            .collect(),
    )
    .expect("default vocabulary is valid")
}

/// Generate a deterministic manifest of `n_samples` images with one to three
/// boxes each. Class indices cycle through the vocabulary so every class is
/// represented once the total box count reaches the class count; with the
/// default sizes that holds for any `n_samples >= 35`.
///
/// Box centers within an image are spaced at least 0.18 apart in x, so no two
/// boxes of one image ever share a grid cell at any supported detection
/// scale. Mock backends built on this manifest therefore decode back to
/// exactly one detection per box.
pub fn synthetic_manifest(n_samples: usize, class_map: &ClassMap, seed: u64) -> DatasetManifest {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = [(640u32, 480u32), (1280, 720), (1024, 768), (800, 600)];
    let mut class_cursor = 0usize;

    let samples = (0..n_samples)
        .map(|i| {
            let (image_width, image_height) = dims[rng.gen_range(0..dims.len())];
            let n_boxes = rng.gen_range(1..=3);
            let boxes = (0..n_boxes)
                .map(|slot| {
                    let class_index = class_cursor % class_map.len();
                    class_cursor += 1;
                    let w = rng.gen_range(0.05..0.2);
                    let h = rng.gen_range(0.05..0.2);
                    let cx = 0.2 + 0.22 * slot as f64 + rng.gen_range(-0.02..0.02);
                    let cy = rng.gen_range(0.2..0.8);
                    GroundTruthBox::new(
                        class_index,
                        cx - w / 2.0,
                        cy - h / 2.0,
                        cx + w / 2.0,
                        cy + h / 2.0,
                    )
                    .expect("generated box within bounds")
                })
                .collect();
            Sample {
                image_id: format!("img_{i:04}"),
                image_width,
                image_height,
                boxes,
            }
        })
        .collect();

    DatasetManifest { samples }
}
