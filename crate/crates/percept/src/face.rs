//! Face enrollment and identification over embedding vectors from two
//! pluggable embedding backends, fused by mean of per-backend best cosine
//! scores.
//!
//! The registry is the durable state: a line-oriented, append-friendly file
//! with a versioned header (`FACEREG v1|dim1|dim2`) and one
//! `person_id|backend_id|base64(f32-le vector)` record per embedding.
//! Identification is read-only and safe to run concurrently; enrollment
//! takes `&mut self` and is therefore serialized by construction.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use thiserror::Error;

use crate::detect::BoundingBox;

#[derive(Debug, Error)]
pub enum FaceError {
    #[error("vectors have different dimensions ({0} vs {1})")]
    DimensionMismatch(usize, usize),
    #[error("vector norm below 1e-9")]
    ZeroNorm,
    #[error("person id must be non-empty")]
    EmptyPersonId,
    #[error("backend `{0}` is not configured")]
    UnknownBackend(String),
    #[error("embedding for backend `{backend}` has dimension {actual}, expected {expected}")]
    WrongDimension {
        backend: String,
        expected: usize,
        actual: usize,
    },
    #[error("missing backend coverage: no embedding for `{0}`")]
    MissingBackend(String),
    #[error("registry file: {0}")]
    Format(String),
    #[error("face detector backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Cosine similarity `(a . b) / (|a| |b|)` of two equal-dimension vectors.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64, FaceError> {
    if a.len() != b.len() {
        return Err(FaceError::DimensionMismatch(a.len(), b.len()));
    }
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    let (na, nb) = (na.sqrt(), nb.sqrt());
    if na <= 1e-9 || nb <= 1e-9 {
        return Err(FaceError::ZeroNorm);
    }
    Ok(dot / (na * nb))
}

/// One embedding vector tagged with the backend that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub backend_id: String,
    pub vector: Vec<f64>,
}

impl Embedding {
    pub fn new(backend_id: impl Into<String>, vector: Vec<f64>) -> Self {
        Self {
            backend_id: backend_id.into(),
            vector,
        }
    }
}

/// Identity and dimension of one embedding backend.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BackendSpec {
    pub id: String,
    pub dim: usize,
}

/// The ordered pair of embedding backends a registry is built on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegistryConfig {
    pub backends: [BackendSpec; 2],
}

impl RegistryConfig {
    pub fn new(first: (&str, usize), second: (&str, usize)) -> Self {
        Self {
            backends: [
                BackendSpec {
                    id: first.0.to_string(),
                    dim: first.1,
                },
                BackendSpec {
                    id: second.0.to_string(),
                    dim: second.1,
                },
            ],
        }
    }

    fn spec_for(&self, backend_id: &str) -> Option<&BackendSpec> {
        self.backends.iter().find(|b| b.id == backend_id)
    }
}

/// An enrolled person: at least one embedding per configured backend.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceRecord {
    pub person_id: String,
    pub embeddings: BTreeMap<String, Vec<Vec<f64>>>,
    pub enrolled_at_ms: u64,
}

/// Attribute strings passed through from the embedding backend, never
/// computed locally.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FaceAttributes {
    pub gender: String,
    pub race: String,
    pub age_bracket: String,
    pub expression: String,
}

/// A probe observation: per-backend embeddings plus optional attributes.
#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub embeddings: Vec<Embedding>,
    pub attributes: Option<FaceAttributes>,
}

/// Identification outcome. `person_id` is `None` below threshold or on an
/// empty registry; `fused_score` still reports the best candidate's score
/// (-1.0 when there were no candidates at all).
#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    pub person_id: Option<String>,
    pub fused_score: f64,
    pub per_backend_scores: BTreeMap<String, f64>,
    pub attributes: Option<FaceAttributes>,
}

/// In-memory registry of enrolled identities.
#[derive(Debug, Clone, PartialEq)]
pub struct Registry {
    config: RegistryConfig,
    records: BTreeMap<String, FaceRecord>,
}

impl Registry {
    pub fn new(config: RegistryConfig) -> Self {
        Self {
            config,
            records: BTreeMap::new(),
        }
    }

    pub fn config(&self) -> &RegistryConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn record(&self, person_id: &str) -> Option<&FaceRecord> {
        self.records.get(person_id)
    }

    pub fn people(&self) -> impl Iterator<Item = &FaceRecord> {
        self.records.values()
    }

    fn validate_embedding(&self, e: &Embedding) -> Result<(), FaceError> {
        let spec = self
            .config
            .spec_for(&e.backend_id)
            .ok_or_else(|| FaceError::UnknownBackend(e.backend_id.clone()))?;
        if e.vector.len() != spec.dim {
            return Err(FaceError::WrongDimension {
                backend: e.backend_id.clone(),
                expected: spec.dim,
                actual: e.vector.len(),
            });
        }
        let norm: f64 = e.vector.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm <= 1e-9 {
            return Err(FaceError::ZeroNorm);
        }
        Ok(())
    }

    /// Enroll `person_id` with one batch of embeddings. Every configured
    /// backend must be covered; re-enrolling an existing person appends.
    pub fn enroll(
        &mut self,
        person_id: &str,
        embeddings: &[Embedding],
        enrolled_at_ms: u64,
    ) -> Result<(), FaceError> {
        if person_id.is_empty() {
            return Err(FaceError::EmptyPersonId);
        }
        for e in embeddings {
            self.validate_embedding(e)?;
        }
        for spec in &self.config.backends {
            if !embeddings.iter().any(|e| e.backend_id == spec.id) {
                return Err(FaceError::MissingBackend(spec.id.clone()));
            }
        }

        let record = self
            .records
            .entry(person_id.to_string())
            .or_insert_with(|| FaceRecord {
                person_id: person_id.to_string(),
                embeddings: BTreeMap::new(),
                enrolled_at_ms,
            });
        for e in embeddings {
            record
                .embeddings
                .entry(e.backend_id.clone())
                .or_default()
                .push(e.vector.clone());
        }
        Ok(())
    }

    /// Identify a probe against every enrolled person.
    ///
    /// Per backend, a candidate's score is the best cosine over all pairs of
    /// probe and stored embeddings for that backend; the fused score is the
    /// mean of the two backend scores. The best fused score wins, ties broken
    /// by ascending person id; below `threshold` the result is a no-match.
    pub fn identify(&self, probe: &Probe, threshold: f64) -> Result<MatchResult, FaceError> {
        for spec in &self.config.backends {
            if !probe.embeddings.iter().any(|e| e.backend_id == spec.id) {
                return Err(FaceError::MissingBackend(spec.id.clone()));
            }
        }
        for e in &probe.embeddings {
            self.validate_embedding(e)?;
        }

        let mut best: Option<(&FaceRecord, f64, BTreeMap<String, f64>)> = None;
        for record in self.records.values() {
            let mut per_backend = BTreeMap::new();
            for spec in &self.config.backends {
                let stored = record
                    .embeddings
                    .get(&spec.id)
                    .map(Vec::as_slice)
                    .unwrap_or(&[]);
                let mut backend_best = f64::NEG_INFINITY;
                for probe_emb in probe.embeddings.iter().filter(|e| e.backend_id == spec.id) {
                    for vector in stored {
                        let score = cosine_similarity(&probe_emb.vector, vector)?;
                        backend_best = backend_best.max(score);
                    }
                }
                per_backend.insert(spec.id.clone(), backend_best);
            }
            let fused = per_backend.values().sum::<f64>() / per_backend.len() as f64;
            let better = match &best {
                Some((_, best_fused, _)) => fused > *best_fused,
                None => true,
            };
            if better {
                best = Some((record, fused, per_backend));
            }
        }

        Ok(match best {
            Some((record, fused, per_backend)) => MatchResult {
                person_id: (fused >= threshold).then(|| record.person_id.clone()),
                fused_score: fused,
                per_backend_scores: per_backend,
                attributes: probe.attributes.clone(),
            },
            None => MatchResult {
                person_id: None,
                fused_score: -1.0,
                per_backend_scores: BTreeMap::new(),
                attributes: probe.attributes.clone(),
            },
        })
    }

    fn header_line(config: &RegistryConfig) -> String {
        format!(
            "FACEREG v1|{}|{}",
            config.backends[0].dim, config.backends[1].dim
        )
    }

    /// Load a registry file, validating the header against `config`.
    /// The file format carries no timestamps, so loaded records report
    /// `enrolled_at_ms == 0`.
    pub fn load(path: &Path, config: RegistryConfig) -> Result<Self, FaceError> {
        let file = File::open(path)?;
        let mut lines = BufReader::new(file).lines();
        let header = lines
            .next()
            .transpose()?
            .ok_or_else(|| FaceError::Format("empty registry file".into()))?;
        let expected = Self::header_line(&config);
        if header.trim() != expected {
            return Err(FaceError::Format(format!(
                "header `{header}` does not match expected `{expected}`"
            )));
        }

        let mut registry = Self::new(config);
        for (idx, line) in lines.enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.splitn(3, '|');
            let (person, backend, payload) = match (parts.next(), parts.next(), parts.next()) {
                (Some(p), Some(b), Some(v)) => (p, b, v),
                _ => {
                    return Err(FaceError::Format(format!(
                        "record {}: expected `person|backend|base64`",
                        idx + 2
                    )))
                }
            };
            let vector = decode_vector(payload)
                .map_err(|e| FaceError::Format(format!("record {}: {e}", idx + 2)))?;
            let embedding = Embedding::new(backend, vector);
            registry.validate_embedding(&embedding)?;
            let record = registry
                .records
                .entry(person.to_string())
                .or_insert_with(|| FaceRecord {
                    person_id: person.to_string(),
                    embeddings: BTreeMap::new(),
                    enrolled_at_ms: 0,
                });
            record
                .embeddings
                .entry(embedding.backend_id)
                .or_default()
                .push(embedding.vector);
        }

        for record in registry.records.values() {
            for spec in &registry.config.backends {
                if !record.embeddings.contains_key(&spec.id) {
                    return Err(FaceError::MissingBackend(spec.id.clone()));
                }
            }
        }
        Ok(registry)
    }

    /// Write the whole registry (header plus one record line per embedding).
    pub fn save(&self, path: &Path) -> Result<(), FaceError> {
        let mut file = File::create(path)?;
        writeln!(file, "{}", Self::header_line(&self.config))?;
        for record in self.records.values() {
            for (backend, vectors) in &record.embeddings {
                for v in vectors {
                    writeln!(file, "{}|{}|{}", record.person_id, backend, encode_vector(v))?;
                }
            }
        }
        Ok(())
    }

    /// Append one enrollment batch to an existing file, creating it with a
    /// header when absent. This is the durable-enrollment path: the file only
    /// ever grows.
    pub fn append_to_file(
        path: &Path,
        config: &RegistryConfig,
        person_id: &str,
        embeddings: &[Embedding],
    ) -> Result<(), FaceError> {
        // Validate through a scratch registry before touching the file.
        let mut scratch = Registry::new(config.clone());
        scratch.enroll(person_id, embeddings, 0)?;

        let exists = path.exists();
        if exists {
            // Validate header compatibility.
            Registry::load(path, config.clone())?;
        }
        let mut file = OpenOptions::new().create(true).append(true).open(path)?;
        if !exists {
            writeln!(file, "{}", Self::header_line(config))?;
        }
        for e in embeddings {
            writeln!(
                file,
                "{}|{}|{}",
                person_id,
                e.backend_id,
                encode_vector(&e.vector)
            )?;
        }
        Ok(())
    }
}

fn encode_vector(v: &[f64]) -> String {
    let mut bytes = Vec::with_capacity(v.len() * 4);
    for &x in v {
        bytes.extend_from_slice(&(x as f32).to_le_bytes());
    }
    BASE64.encode(bytes)
}

fn decode_vector(payload: &str) -> Result<Vec<f64>, String> {
    let bytes = BASE64
        .decode(payload.trim())
        .map_err(|e| format!("bad base64: {e}"))?;
    if bytes.len() % 4 != 0 {
        return Err("payload length not a multiple of 4".into());
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
        .collect())
}

/// A face crop reported by the detector-stage backend.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceCrop {
    pub bounds: BoundingBox,
    /// Landmark points in frame pixels (eyes, nose, mouth corners for a
    /// five-point detector).
    pub landmarks: Vec<(f64, f64)>,
    /// Set when the reported bounds had to be clipped to the frame.
    pub clipped: bool,
}

/// The pluggable face-detector stage.
pub trait FaceDetectorBackend {
    fn detect(&self, image_ref: &str) -> Result<Vec<FaceCrop>, FaceError>;
}

/// The pluggable embedding stage: turns one face crop into a [`Probe`]
/// covering every configured backend, optionally with attribute strings.
pub trait EmbeddingBackend {
    fn embed(
        &self,
        image_ref: &str,
        crop_index: usize,
        crop: &FaceCrop,
    ) -> Result<Probe, FaceError>;
}

/// Run the detector backend and sanitize its output: crops are clipped to
/// the `frame_w x frame_h` bounds and flagged when clipping changed them;
/// crops left without area are dropped.
pub fn detect_faces(
    backend: &dyn FaceDetectorBackend,
    image_ref: &str,
    frame_w: u32,
    frame_h: u32,
) -> Result<Vec<FaceCrop>, FaceError> {
    let (w, h) = (f64::from(frame_w), f64::from(frame_h));
    let crops = backend.detect(image_ref)?;
    Ok(crops
        .into_iter()
        .filter_map(|crop| {
            let clipped_bounds = BoundingBox::new(
                crop.bounds.x_min.clamp(0.0, w),
                crop.bounds.y_min.clamp(0.0, h),
                crop.bounds.x_max.clamp(0.0, w),
                crop.bounds.y_max.clamp(0.0, h),
            );
            if clipped_bounds.x_min >= clipped_bounds.x_max
                || clipped_bounds.y_min >= clipped_bounds.y_max
            {
                return None;
            }
            let changed = clipped_bounds != crop.bounds;
            Some(FaceCrop {
                bounds: clipped_bounds,
                landmarks: crop.landmarks,
                clipped: crop.clipped || changed,
            })
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use tempfile::TempDir;

    fn test_config() -> RegistryConfig {
        RegistryConfig::new(("facenet", 4), ("vggface", 3))
    }

    fn embeddings_for(seedling: f64) -> Vec<Embedding> {
        vec![
            Embedding::new("facenet", vec![seedling, 1.0, -0.5, 0.25]),
            Embedding::new("vggface", vec![0.5, seedling, 2.0]),
        ]
    }

    #[test]
    fn cosine_of_a_vector_with_itself_is_one() {
        let v = vec![0.3, -1.2, 4.5];
        assert_abs_diff_eq!(cosine_similarity(&v, &v).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn cosine_of_orthogonal_vectors_is_zero() {
        assert_abs_diff_eq!(
            cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(),
            0.0
        );
    }

    #[test]
    fn cosine_hand_computed_example() {
        // (1,2,3).(4,5,6) = 32; norms sqrt(14), sqrt(77).
        let got = cosine_similarity(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
        assert_abs_diff_eq!(got, 32.0 / (14.0f64.sqrt() * 77.0f64.sqrt()), epsilon = 1e-15);
        assert_abs_diff_eq!(got, 0.9746318461970762, epsilon = 1e-12);
    }

    #[test]
    fn cosine_rejects_mismatch_and_zero_norm() {
        assert!(matches!(
            cosine_similarity(&[1.0], &[1.0, 2.0]),
            Err(FaceError::DimensionMismatch(1, 2))
        ));
        assert!(matches!(
            cosine_similarity(&[0.0, 0.0], &[1.0, 2.0]),
            Err(FaceError::ZeroNorm)
        ));
    }

    #[test]
    fn enroll_creates_and_appends() {
        let mut reg = Registry::new(test_config());
        reg.enroll("alice", &embeddings_for(1.0), 1_000).unwrap();
        assert_eq!(reg.len(), 1);
        reg.enroll("alice", &embeddings_for(2.0), 2_000).unwrap();
        assert_eq!(reg.len(), 1);
        let record = reg.record("alice").unwrap();
        assert_eq!(record.embeddings["facenet"].len(), 2);
        assert_eq!(record.embeddings["vggface"].len(), 2);
    }

    #[test]
    fn enroll_requires_backend_coverage() {
        let mut reg = Registry::new(test_config());
        let only_first = vec![Embedding::new("facenet", vec![1.0, 0.0, 0.0, 0.0])];
        assert!(matches!(
            reg.enroll("alice", &only_first, 0),
            Err(FaceError::MissingBackend(b)) if b == "vggface"
        ));
    }

    #[test]
    fn enroll_rejects_zero_norm_and_wrong_dimension() {
        let mut reg = Registry::new(test_config());
        let zero = vec![
            Embedding::new("facenet", vec![0.0; 4]),
            Embedding::new("vggface", vec![1.0, 0.0, 0.0]),
        ];
        assert!(matches!(
            reg.enroll("alice", &zero, 0),
            Err(FaceError::ZeroNorm)
        ));
        let wrong = vec![
            Embedding::new("facenet", vec![1.0; 3]),
            Embedding::new("vggface", vec![1.0, 0.0, 0.0]),
        ];
        assert!(matches!(
            reg.enroll("alice", &wrong, 0),
            Err(FaceError::WrongDimension { .. })
        ));
    }

    #[test]
    fn identify_exact_enrollment_scores_one() {
        let mut reg = Registry::new(test_config());
        reg.enroll("alice", &embeddings_for(1.0), 0).unwrap();
        let probe = Probe {
            embeddings: embeddings_for(1.0),
            attributes: None,
        };
        let result = reg.identify(&probe, 0.5).unwrap();
        assert_eq!(result.person_id.as_deref(), Some("alice"));
        assert_abs_diff_eq!(result.fused_score, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn identify_on_empty_registry_is_no_match() {
        let reg = Registry::new(test_config());
        let probe = Probe {
            embeddings: embeddings_for(1.0),
            attributes: None,
        };
        let result = reg.identify(&probe, -1.0).unwrap();
        assert_eq!(result.person_id, None);
        assert_eq!(result.fused_score, -1.0);
    }

    #[test]
    fn identify_below_threshold_reports_score_without_identity() {
        let mut reg = Registry::new(test_config());
        reg.enroll("alice", &embeddings_for(1.0), 0).unwrap();
        let probe = Probe {
            embeddings: vec![
                Embedding::new("facenet", vec![-1.0, 0.2, 0.5, -0.25]),
                Embedding::new("vggface", vec![-0.5, 1.0, -2.0]),
            ],
            attributes: None,
        };
        let result = reg.identify(&probe, 0.99).unwrap();
        assert_eq!(result.person_id, None);
        assert!(result.fused_score < 0.99);
        assert_eq!(result.per_backend_scores.len(), 2);
    }

    #[test]
    fn threshold_of_minus_one_always_matches_non_empty_registry() {
        let mut reg = Registry::new(test_config());
        reg.enroll("alice", &embeddings_for(1.0), 0).unwrap();
        let probe = Probe {
            embeddings: vec![
                Embedding::new("facenet", vec![-1.0, -1.0, 0.5, 0.25]),
                Embedding::new("vggface", vec![-0.5, -1.0, -2.0]),
            ],
            attributes: None,
        };
        let result = reg.identify(&probe, -1.0).unwrap();
        assert!(result.person_id.is_some());
    }

    #[test]
    fn fused_argmax_follows_agreement_of_both_backends() {
        // Alice outranks bob on both backends, so the fused mean must pick
        // alice no matter the margin.
        let config = RegistryConfig::new(("facenet", 2), ("vggface", 2));
        let mut reg = Registry::new(config);
        reg.enroll(
            "alice",
            &[
                Embedding::new("facenet", vec![1.0, 0.1]),
                Embedding::new("vggface", vec![0.2, 1.0]),
            ],
            0,
        )
        .unwrap();
        reg.enroll(
            "bob",
            &[
                Embedding::new("facenet", vec![-1.0, 0.3]),
                Embedding::new("vggface", vec![1.0, -0.8]),
            ],
            0,
        )
        .unwrap();
        let probe = Probe {
            embeddings: vec![
                Embedding::new("facenet", vec![1.0, 0.0]),
                Embedding::new("vggface", vec![0.0, 1.0]),
            ],
            attributes: None,
        };
        let result = reg.identify(&probe, -1.0).unwrap();
        assert_eq!(result.person_id.as_deref(), Some("alice"));
        assert!(result.per_backend_scores.values().all(|s| *s > 0.0));
    }

    #[test]
    fn probe_must_cover_both_backends() {
        let mut reg = Registry::new(test_config());
        reg.enroll("alice", &embeddings_for(1.0), 0).unwrap();
        let probe = Probe {
            embeddings: vec![Embedding::new("facenet", vec![1.0, 1.0, -0.5, 0.25])],
            attributes: None,
        };
        assert!(matches!(
            reg.identify(&probe, 0.5),
            Err(FaceError::MissingBackend(_))
        ));
    }

    #[test]
    fn attributes_pass_through_identify() {
        let mut reg = Registry::new(test_config());
        reg.enroll("alice", &embeddings_for(1.0), 0).unwrap();
        let attrs = FaceAttributes {
            gender: "female".into(),
            race: "unspecified".into(),
            age_bracket: "30-40".into(),
            expression: "neutral".into(),
        };
        let probe = Probe {
            embeddings: embeddings_for(1.0),
            attributes: Some(attrs.clone()),
        };
        let result = reg.identify(&probe, 0.5).unwrap();
        assert_eq!(result.attributes, Some(attrs));
    }

    #[test]
    fn registry_file_round_trip() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("people.reg");
        let mut reg = Registry::new(test_config());
        // Values representable in f32 so the f32-on-disk format is lossless.
        reg.enroll("alice", &embeddings_for(1.0), 0).unwrap();
        reg.enroll("bob", &embeddings_for(-2.5), 0).unwrap();
        reg.save(&path).unwrap();

        let loaded = Registry::load(&path, test_config()).unwrap();
        assert_eq!(loaded, reg);
    }

    #[test]
    fn append_to_file_builds_a_loadable_registry() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("people.reg");
        let config = test_config();
        Registry::append_to_file(&path, &config, "alice", &embeddings_for(1.0)).unwrap();
        Registry::append_to_file(&path, &config, "bob", &embeddings_for(0.5)).unwrap();
        let loaded = Registry::load(&path, config).unwrap();
        assert_eq!(loaded.len(), 2);
    }

    #[test]
    fn load_rejects_mismatched_header() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("people.reg");
        std::fs::write(&path, "FACEREG v1|9|9\n").unwrap();
        assert!(matches!(
            Registry::load(&path, test_config()),
            Err(FaceError::Format(_))
        ));
    }

    struct ScriptedDetector(Vec<FaceCrop>);

    impl FaceDetectorBackend for ScriptedDetector {
        fn detect(&self, _image_ref: &str) -> Result<Vec<FaceCrop>, FaceError> {
            Ok(self.0.clone())
        }
    }

    #[test]
    fn detect_faces_passes_through_scripted_crops() {
        let empty = ScriptedDetector(vec![]);
        assert!(detect_faces(&empty, "img", 100, 100).unwrap().is_empty());

        let crops = vec![
            FaceCrop {
                bounds: BoundingBox::new(10.0, 10.0, 40.0, 40.0),
                landmarks: vec![(20.0, 20.0)],
                clipped: false,
            },
            FaceCrop {
                bounds: BoundingBox::new(50.0, 50.0, 90.0, 80.0),
                landmarks: vec![],
                clipped: false,
            },
        ];
        let two = ScriptedDetector(crops.clone());
        assert_eq!(detect_faces(&two, "img", 100, 100).unwrap(), crops);
    }

    #[test]
    fn detect_faces_clips_and_flags_out_of_bounds_crops() {
        let faulty = ScriptedDetector(vec![
            FaceCrop {
                bounds: BoundingBox::new(80.0, -10.0, 130.0, 50.0),
                landmarks: vec![],
                clipped: false,
            },
            // Entirely outside: dropped.
            FaceCrop {
                bounds: BoundingBox::new(200.0, 200.0, 250.0, 260.0),
                landmarks: vec![],
                clipped: false,
            },
        ]);
        let crops = detect_faces(&faulty, "img", 100, 100).unwrap();
        assert_eq!(crops.len(), 1);
        assert!(crops[0].clipped);
        assert_eq!(crops[0].bounds, BoundingBox::new(80.0, 0.0, 100.0, 50.0));
    }
}
