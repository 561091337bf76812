//! Replay the bundled sensor trace through the event loop: a proximity
//! alert, two described frames (one routing through face identification and
//! currency classification), and turn-by-turn navigation.
//!
//! ```bash
//! cargo run --example simulate_wearable
//! ```

use std::fs::File;
use std::path::Path;

use percept::currency::DenominationSet;
use percept::dataset::{load_manifest, ClassMap};
use percept::detect::GridSpec;
use percept::face::{Registry, RegistryConfig};
use percept::mock::{
    ManifestFaceDetector, SeededCurrencyBackend, SeededEmbedder, TruthInferenceBackend,
};
use percept::orchestrator::{
    parse_route, parse_trace, replay_trace, write_feedback_log, Orchestrator,
    OrchestratorConfig, PerceptionPipeline,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let class_map = ClassMap::load(&fixtures.join("class_map.csv"))?;
    let manifest = load_manifest(
        &fixtures.join("sim_manifest.csv"),
        &fixtures.join("sim_sizes.csv"),
        &class_map,
    )?;
    let events = parse_trace(
        File::open(fixtures.join("trace_six_events.txt"))?,
        "trace_six_events.txt",
    )?;
    println!("loaded {} events over {} images", events.len(), manifest.len());

    let registry_config = RegistryConfig::new(("facenet", 128), ("vggface", 256));
    let registry = Registry::load(&fixtures.join("registry_demo.reg"), registry_config.clone())?;
    let config = OrchestratorConfig::default();
    let face_classes: Vec<usize> = config
        .face_labels
        .iter()
        .filter_map(|l| class_map.index_of(l))
        .collect();

    let mut pipeline = PerceptionPipeline {
        detector: Box::new(TruthInferenceBackend::new(
            &manifest,
            GridSpec::standard(640, class_map.len())?,
            0.9,
        )),
        face_detector: Box::new(ManifestFaceDetector::new(&manifest, &face_classes)),
        embedder: Box::new(SeededEmbedder::new(registry_config)),
        currency: Box::new(SeededCurrencyBackend::new(DenominationSet::default_fixture())),
        registry,
        class_map,
        denominations: DenominationSet::default_fixture(),
    };

    let mut orchestrator = Orchestrator::new(config);
    let route = parse_route(
        File::open(fixtures.join("route_demo.txt"))?,
        "route_demo.txt",
        10.0,
    )?;
    orchestrator.set_route(route);

    let messages = replay_trace(&mut orchestrator, &events, &mut pipeline)?;
    println!("feedback log:");
    let mut log = Vec::new();
    write_feedback_log(&mut log, &messages)?;
    print!("{}", String::from_utf8(log)?);
    Ok(())
}
