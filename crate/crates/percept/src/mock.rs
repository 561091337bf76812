//! Deterministic stand-ins for every neural backend.
//!
//! Two families:
//!
//! * truth-driven mocks, built from a dataset manifest, whose outputs decode
//!   back to the ground truth exactly (the encode path inverts the decode
//!   equations);
//! * seeded mocks, keyed by a stable FNV-1a hash of their inputs, so the same
//!   reference always yields the same embedding or denomination on every
//!   platform.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::currency::{CurrencyBackend, CurrencyError, DenominationSet};
use crate::dataset::DatasetManifest;
use crate::detect::{
    encode_detections, BoundingBox, DetectError, GridSpec, InferenceBackend, LetterboxTransform,
    RawGridOutput,
};
use crate::face::{
    BackendSpec, Embedding, EmbeddingBackend, FaceCrop, FaceDetectorBackend, FaceError, Probe,
    RegistryConfig,
};

/// Stable 64-bit FNV-1a, used to seed the mock RNGs. `DefaultHasher` is not
/// stable across releases, so it cannot back golden files.
fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Dimensions and encodable `(class, box, confidence)` triples of one image.
type TruthImage = (u32, u32, Vec<(usize, BoundingBox, f64)>);

/// Inference backend that fabricates raw grids from a manifest's ground
/// truth: decoding its output recovers the annotated boxes. Per-box
/// confidences step down by 0.05 from `base_confidence` in annotation order,
/// so downstream confidence ordering is actually exercised.
pub struct TruthInferenceBackend {
    images: BTreeMap<String, TruthImage>,
    spec: GridSpec,
}

impl TruthInferenceBackend {
    pub fn new(manifest: &DatasetManifest, spec: GridSpec, base_confidence: f64) -> Self {
        let images = manifest
            .samples
            .iter()
            .map(|s| {
                let boxes = s
                    .boxes
                    .iter()
                    .enumerate()
                    .map(|(i, b)| {
                        let confidence = (base_confidence - 0.05 * i as f64).max(0.3);
                        (
                            b.class_index,
                            b.to_pixels(s.image_width, s.image_height),
                            confidence,
                        )
                    })
                    .collect();
                (s.image_id.clone(), (s.image_width, s.image_height, boxes))
            })
            .collect();
        Self { images, spec }
    }
}

impl InferenceBackend for TruthInferenceBackend {
    fn infer(
        &self,
        image_ref: &str,
    ) -> Result<(LetterboxTransform, Vec<RawGridOutput>), DetectError> {
        let (w, h, boxes) = self
            .images
            .get(image_ref)
            .ok_or_else(|| DetectError::Backend(format!("unknown image `{image_ref}`")))?;
        let transform = LetterboxTransform::compute(*w, *h, self.spec.input_size)?;
        let grids = encode_detections(boxes, &self.spec, &transform);
        Ok((transform, grids))
    }
}

/// Face-detector mock scripted from a manifest: the crops for an image are
/// its face-class ground-truth boxes, with five synthetic landmarks each.
pub struct ManifestFaceDetector {
    crops: BTreeMap<String, Vec<FaceCrop>>,
}

impl ManifestFaceDetector {
    pub fn new(manifest: &DatasetManifest, face_classes: &[usize]) -> Self {
        let crops = manifest
            .samples
            .iter()
            .map(|s| {
                let faces = s
                    .boxes
                    .iter()
                    .filter(|b| face_classes.contains(&b.class_index))
                    .map(|b| {
                        let bounds = b.to_pixels(s.image_width, s.image_height);
                        FaceCrop {
                            landmarks: synthetic_landmarks(&bounds),
                            bounds,
                            clipped: false,
                        }
                    })
                    .collect();
                (s.image_id.clone(), faces)
            })
            .collect();
        Self { crops }
    }
}

fn synthetic_landmarks(b: &BoundingBox) -> Vec<(f64, f64)> {
    let at = |fx: f64, fy: f64| (b.x_min + fx * b.width(), b.y_min + fy * b.height());
    vec![
        at(0.3, 0.35),
        at(0.7, 0.35),
        at(0.5, 0.55),
        at(0.35, 0.75),
        at(0.65, 0.75),
    ]
}

impl FaceDetectorBackend for ManifestFaceDetector {
    fn detect(&self, image_ref: &str) -> Result<Vec<FaceCrop>, FaceError> {
        Ok(self.crops.get(image_ref).cloned().unwrap_or_default())
    }
}

/// Unit-norm embedding derived deterministically from `(backend, key)`.
/// The same key always produces the same vector, so enrolling with one key
/// and probing with it later scores a cosine of exactly 1.
pub fn seeded_embedding(backend: &BackendSpec, key: &str) -> Embedding {
    let mut seed_bytes = Vec::with_capacity(backend.id.len() + key.len() + 1);
    seed_bytes.extend_from_slice(backend.id.as_bytes());
    seed_bytes.push(0);
    seed_bytes.extend_from_slice(key.as_bytes());
    let mut rng = ChaCha8Rng::seed_from_u64(fnv1a64(&seed_bytes));
    let mut vector: Vec<f64> = (0..backend.dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let norm = vector.iter().map(|v| v * v).sum::<f64>().sqrt();
    for v in &mut vector {
        *v /= norm;
    }
    Embedding::new(backend.id.clone(), vector)
}

/// A full per-backend probe for a key.
pub fn seeded_probe(config: &RegistryConfig, key: &str) -> Probe {
    Probe {
        embeddings: config
            .backends
            .iter()
            .map(|b| seeded_embedding(b, key))
            .collect(),
        attributes: None,
    }
}

/// Embedding backend keyed by `image_ref#crop_index`, matching the keys the
/// enrollment CLI uses for its mock embeddings.
pub struct SeededEmbedder {
    config: RegistryConfig,
}

impl SeededEmbedder {
    pub fn new(config: RegistryConfig) -> Self {
        Self { config }
    }

    pub fn key_for(image_ref: &str, crop_index: usize) -> String {
        format!("{image_ref}#{crop_index}")
    }
}

impl EmbeddingBackend for SeededEmbedder {
    fn embed(
        &self,
        image_ref: &str,
        crop_index: usize,
        _crop: &FaceCrop,
    ) -> Result<Probe, FaceError> {
        Ok(seeded_probe(
            &self.config,
            &Self::key_for(image_ref, crop_index),
        ))
    }
}

/// Currency backend that picks a denomination by hashing the image
/// reference. Confidence is fixed at 0.99.
pub struct SeededCurrencyBackend {
    denominations: DenominationSet,
}

impl SeededCurrencyBackend {
    pub fn new(denominations: DenominationSet) -> Self {
        Self { denominations }
    }
}

impl CurrencyBackend for SeededCurrencyBackend {
    fn classify(&self, image_ref: &str) -> Result<(String, f64), CurrencyError> {
        let labels = self.denominations.labels();
        let index = (fnv1a64(image_ref.as_bytes()) % labels.len() as u64) as usize;
        Ok((labels[index].clone(), 0.99))
    }
}

/// Currency backend with a scripted answer per image reference.
pub struct ScriptedCurrencyBackend {
    outcomes: BTreeMap<String, (String, f64)>,
}

impl ScriptedCurrencyBackend {
    pub fn new(outcomes: BTreeMap<String, (String, f64)>) -> Self {
        Self { outcomes }
    }
}

impl CurrencyBackend for ScriptedCurrencyBackend {
    fn classify(&self, image_ref: &str) -> Result<(String, f64), CurrencyError> {
        self.outcomes
            .get(image_ref)
            .cloned()
            .ok_or_else(|| CurrencyError::BackendUnavailable(format!("no script for {image_ref}")))
    }
}
