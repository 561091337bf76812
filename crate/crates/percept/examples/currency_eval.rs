//! Classify banknote images through a scripted backend and evaluate the
//! outcome stream.
//!
//! ```bash
//! cargo run --example currency_eval
//! ```

use std::collections::BTreeMap;

use percept::currency::{classify, evaluate_classifier, DenominationSet};
use percept::mock::ScriptedCurrencyBackend;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let denominations = DenominationSet::default_fixture();

    let script: BTreeMap<String, (String, f64)> = [
        ("note_a", ("100", 0.99)),
        ("note_b", ("50", 0.97)),
        ("note_c", ("100", 0.72)),
        ("note_d", ("500", 0.95)),
    ]
    .into_iter()
    .map(|(k, (l, c))| (k.to_string(), (l.to_string(), c)))
    .collect();
    let backend = ScriptedCurrencyBackend::new(script);

    // Classify each image and attach the known truth for evaluation.
    let truths = [
        ("note_a", "100"),
        ("note_b", "50"),
        ("note_c", "50"),
        ("note_d", "500"),
    ];
    let mut outcomes = Vec::new();
    for (image, truth) in truths {
        let mut outcome = classify(image, &backend, &denominations)?;
        println!(
            "{image}: predicted {} at {:.0}% (truth {truth})",
            outcome.predicted,
            outcome.confidence * 100.0
        );
        outcome.truth = Some(truth.to_string());
        outcomes.push(outcome);
    }

    let report = evaluate_classifier(&outcomes, &denominations)?;
    println!(
        "\naccuracy {:.4}, macro-F1 {:.4} over {} notes",
        report.accuracy, report.macro_f1, report.total
    );
    for (label, scores) in &report.per_class {
        if scores.precision < 1.0 || scores.recall < 1.0 {
            println!(
                "  {label}: P {:.2} R {:.2} F1 {:.2}",
                scores.precision, scores.recall, scores.f1
            );
        }
    }
    Ok(())
}
