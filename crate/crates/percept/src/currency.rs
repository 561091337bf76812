//! Denomination classification behind a pluggable backend, plus the
//! classification-metrics evaluation (accuracy, one-vs-rest precision,
//! recall, F1, and a confusion matrix).

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::metrics::{precision, recall, MatchCounts};

#[derive(Debug, Error)]
pub enum CurrencyError {
    #[error("denomination set must be non-empty with unique labels")]
    BadDenominationSet,
    #[error("unknown denomination `{0}` from backend")]
    UnknownDenomination(String),
    #[error("confidence {0} outside [0, 1]")]
    ConfidenceRange(f64),
    #[error("outcome at index {0} is missing its truth label")]
    MissingTruth(usize),
    #[error("unknown truth label `{0}`")]
    UnknownTruth(String),
    #[error("cannot evaluate an empty outcome list")]
    EmptyOutcomes,
    #[error("classification backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: u64,
        message: String,
    },
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
}

/// Ordered, unique denomination labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DenominationSet {
    labels: Vec<String>,
}

impl DenominationSet {
    pub fn new(labels: Vec<String>) -> Result<Self, CurrencyError> {
        if labels.is_empty() {
            return Err(CurrencyError::BadDenominationSet);
        }
        let mut seen = std::collections::BTreeSet::new();
        for l in &labels {
            if !seen.insert(l) {
                return Err(CurrencyError::BadDenominationSet);
            }
        }
        Ok(Self { labels })
    }

    /// Default fixture set; the real set is configuration, not a claim.
    pub fn default_fixture() -> Self {
        Self::new(
            ["10", "20", "50", "100", "200", "500", "2000"]
                .iter()
                .map(|s| (*s).to_string())
                .collect(),
        )
        .expect("fixture set is valid")
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn contains(&self, label: &str) -> bool {
        self.labels.iter().any(|l| l == label)
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

/// One classification: predicted label, confidence, optional truth.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationOutcome {
    pub predicted: String,
    pub confidence: f64,
    pub truth: Option<String>,
}

/// The pluggable denomination classifier.
pub trait CurrencyBackend {
    fn classify(&self, image_ref: &str) -> Result<(String, f64), CurrencyError>;
}

/// Run the backend and validate its output against the denomination set and
/// the [0, 1] confidence range.
pub fn classify(
    image_ref: &str,
    backend: &dyn CurrencyBackend,
    denominations: &DenominationSet,
) -> Result<ClassificationOutcome, CurrencyError> {
    let (label, confidence) = backend.classify(image_ref)?;
    if !denominations.contains(&label) {
        return Err(CurrencyError::UnknownDenomination(label));
    }
    if !(0.0..=1.0).contains(&confidence) {
        return Err(CurrencyError::ConfidenceRange(confidence));
    }
    Ok(ClassificationOutcome {
        predicted: label,
        confidence,
        truth: None,
    })
}

/// Per-class one-vs-rest scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Full classification evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierReport {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub per_class: BTreeMap<String, ClassScores>,
    /// Rows are truth labels, columns predictions, in denomination order.
    pub confusion: Vec<Vec<u64>>,
    pub labels: Vec<String>,
    pub total: usize,
}

/// Evaluate labeled outcomes: accuracy, one-vs-rest precision/recall/F1 per
/// class, macro-F1, and the confusion matrix. Every outcome needs a truth
/// label drawn from the denomination set.
pub fn evaluate_classifier(
    outcomes: &[ClassificationOutcome],
    denominations: &DenominationSet,
) -> Result<ClassifierReport, CurrencyError> {
    if outcomes.is_empty() {
        return Err(CurrencyError::EmptyOutcomes);
    }
    let n = denominations.len();
    let mut confusion = vec![vec![0u64; n]; n];
    for (i, o) in outcomes.iter().enumerate() {
        let truth = o
            .truth
            .as_deref()
            .ok_or(CurrencyError::MissingTruth(i))?;
        let t = denominations
            .index_of(truth)
            .ok_or_else(|| CurrencyError::UnknownTruth(truth.to_string()))?;
        let p = denominations
            .index_of(&o.predicted)
            .ok_or_else(|| CurrencyError::UnknownDenomination(o.predicted.clone()))?;
        confusion[t][p] += 1;
    }

    let total = outcomes.len();
    let correct: u64 = (0..n).map(|i| confusion[i][i]).sum();
    let accuracy = correct as f64 / total as f64;

    let mut per_class = BTreeMap::new();
    let mut f1_sum = 0.0;
    for (c, label) in denominations.labels().iter().enumerate() {
        let tp: u64 = confusion[c][c];
        let fp: u64 = (0..n).filter(|&t| t != c).map(|t| confusion[t][c]).sum();
        let fn_: u64 = (0..n).filter(|&p| p != c).map(|p| confusion[c][p]).sum();
        let tn = total as u64 - tp - fp - fn_;
        let counts = MatchCounts {
            true_positives: tp,
            false_positives: fp,
            false_negatives: fn_,
            true_negatives: Some(tn),
        };
        let p = precision(&counts);
        let r = recall(&counts);
        let f1 = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
        f1_sum += f1;
        per_class.insert(
            label.clone(),
            ClassScores {
                precision: p,
                recall: r,
                f1,
            },
        );
    }

    Ok(ClassifierReport {
        accuracy,
        macro_f1: f1_sum / n as f64,
        per_class,
        confusion,
        labels: denominations.labels().to_vec(),
        total,
    })
}

#[derive(Serialize)]
struct ClassifierReportJson<'a> {
    accuracy: f64,
    macro_f1: f64,
    total: usize,
    per_class: &'a BTreeMap<String, ClassScores>,
    labels: &'a [String],
    confusion: &'a [Vec<u64>],
}

impl ClassifierReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ClassifierReportJson {
            accuracy: self.accuracy,
            macro_f1: self.macro_f1,
            total: self.total,
            per_class: &self.per_class,
            labels: &self.labels,
            confusion: &self.confusion,
        })
        .expect("report serializes")
            + "\n"
    }
}

/// Read a labeled outcome CSV (`image_id,truth,predicted,confidence`),
/// validating labels against the denomination set.
pub fn read_outcomes_csv(
    path: &Path,
    denominations: &DenominationSet,
) -> Result<Vec<ClassificationOutcome>, CurrencyError> {
    let path_str = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| CurrencyError::Csv {
            path: path_str.clone(),
            source: e,
        })?;
    let mut outcomes = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CurrencyError::Csv {
            path: path_str.clone(),
            source: e,
        })?;
        let line = record
            .position()
            .map(csv::Position::line)
            .unwrap_or_default();
        if record.len() != 4 {
            return Err(CurrencyError::Parse {
                path: path_str.clone(),
                line,
                message: format!("expected 4 fields, found {}", record.len()),
            });
        }
        let truth = record.get(1).unwrap_or("").trim().to_string();
        let predicted = record.get(2).unwrap_or("").trim().to_string();
        let confidence: f64 =
            record
                .get(3)
                .unwrap_or("")
                .trim()
                .parse()
                .map_err(|_| CurrencyError::Parse {
                    path: path_str.clone(),
                    line,
                    message: "bad confidence value".into(),
                })?;
        if !denominations.contains(&truth) {
            return Err(CurrencyError::UnknownTruth(truth));
        }
        if !denominations.contains(&predicted) {
            return Err(CurrencyError::UnknownDenomination(predicted));
        }
        if !(0.0..=1.0).contains(&confidence) {
            return Err(CurrencyError::ConfidenceRange(confidence));
        }
        outcomes.push(ClassificationOutcome {
            predicted,
            confidence,
            truth: Some(truth),
        });
    }
    Ok(outcomes)
}

/// Write the labeled outcome CSV format.
pub fn write_outcomes_csv<W: Write>(
    mut w: W,
    rows: &[(String, ClassificationOutcome)],
) -> std::io::Result<()> {
    writeln!(w, "image_id,truth,predicted,confidence")?;
    for (image_id, o) in rows {
        writeln!(
            w,
            "{},{},{},{}",
            image_id,
            o.truth.as_deref().unwrap_or(""),
            o.predicted,
            o.confidence
        )?;
    }
    Ok(())
}
