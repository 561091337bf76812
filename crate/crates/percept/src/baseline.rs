//! Reference operating points reported for the full-scale wearable system
//! this crate models at desk scale.
//!
//! None of these are reproducible here — they require the trained networks
//! and the original datasets — so they are documentation constants for
//! plotting comparisons and sanity context, never test assertions.

/// Mean average precision of the full-scale detector on its 1,661-sample
/// validation split.
pub const REFERENCE_DETECTION_MAP: f64 = 0.682;

/// Training-split loss triple (object, box, class) of the full-scale
/// detector.
pub const REFERENCE_TRAIN_LOSSES: (f64, f64, f64) = (0.0185, 0.0286, 0.0063);

/// Test-split loss triple (object, box, class) of the full-scale detector.
pub const REFERENCE_TEST_LOSSES: (f64, f64, f64) = (0.0141, 0.0327, 0.0155);

/// Reported currency-identification metrics: accuracy, F1, recall, precision.
pub const REFERENCE_CURRENCY_METRICS: (f64, f64, f64, f64) = (0.9975, 0.9986, 1.0, 0.9972);

/// Reported facial-recognition metrics: accuracy, F1, recall, precision.
/// Published figures for the face and currency columns disagree between
/// sources; these follow the tabulated results.
pub const REFERENCE_FACE_METRICS: (f64, f64, f64, f64) = (0.945, 0.9421, 0.8960, 0.9934);

/// Sample counts of the full-scale training corpus and its validation split.
pub const REFERENCE_TRAIN_SAMPLES: usize = 13_200;
pub const REFERENCE_VALIDATION_SAMPLES: usize = 1_661;
