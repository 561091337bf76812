//! Command-line front end: one subcommand per pipeline stage, all running on
//! deterministic mock backends.
//!
//! Option precedence is flags > config file > built-in defaults. The config
//! file is UTF-8 `key=value` lines (keys match the long flag names with
//! underscores, e.g. `conf_threshold=0.3`); `#` starts a comment.
//!
//! Exit codes: 0 success, 1 validation error, 2 I/O error, 64 usage error.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind as ClapErrorKind;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::currency::{evaluate_classifier, read_outcomes_csv, CurrencyError, DenominationSet};
use crate::dataset::{
    load_manifest, split_dataset, write_manifest, ClassMap, DatasetError, DatasetManifest,
    SplitSpec,
};
use crate::detect::{
    decode_predictions, nms, write_detections_json, DetectError, GridSpec, ImageDetections,
    InferenceBackend,
};
use crate::face::{Embedding, FaceError, Registry, RegistryConfig};
use crate::metrics::{evaluate_detections, TruthInstance};
use crate::mock::{
    seeded_probe, ManifestFaceDetector, SeededCurrencyBackend, SeededEmbedder,
    TruthInferenceBackend,
};
use crate::optim::{
    train_toy, write_loss_history, EpochRecord, LeastSquaresModel, OptimError, OptimizerConfig,
    ParamVector,
};
use crate::orchestrator::{
    parse_route, parse_trace, replay_trace, write_feedback_log, Orchestrator, OrchestratorConfig,
    OrchestratorError, PerceptionPipeline,
};

/// Process exit code for successful runs.
pub const EXIT_OK: i32 = 0;
/// Validation failure (bad data, out-of-range flag).
pub const EXIT_VALIDATION: i32 = 1;
/// I/O failure (missing or unwritable file).
pub const EXIT_IO: i32 = 2;
/// Usage error (unknown subcommand or flag).
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug)]
enum CliError {
    Validation(String),
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Io(_) => EXIT_IO,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Io(m) => m,
        }
    }
}

fn io_error(context: &str, e: std::io::Error) -> CliError {
    CliError::Io(format!("{context}: {e}"))
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        match &e {
            DatasetError::Io { .. } => CliError::Io(e.to_string()),
            DatasetError::Csv { source, .. } if source.is_io_error() => {
                CliError::Io(e.to_string())
            }
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<DetectError> for CliError {
    fn from(e: DetectError) -> Self {
        match &e {
            DetectError::Io(_) => CliError::Io(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<FaceError> for CliError {
    fn from(e: FaceError) -> Self {
        match &e {
            FaceError::Io(_) => CliError::Io(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<CurrencyError> for CliError {
    fn from(e: CurrencyError) -> Self {
        match &e {
            CurrencyError::Csv { source, .. } if source.is_io_error() => {
                CliError::Io(e.to_string())
            }
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<OptimError> for CliError {
    fn from(e: OptimError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<OrchestratorError> for CliError {
    fn from(e: OrchestratorError) -> Self {
        match e {
            OrchestratorError::Io(inner) => CliError::Io(inner.to_string()),
            OrchestratorError::Detect(inner) => inner.into(),
            OrchestratorError::Face(inner) => inner.into(),
            OrchestratorError::Currency(inner) => inner.into(),
            other => CliError::Validation(other.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "percept",
    version,
    about = "Assistive-perception pipeline with deterministic mock backends",
    disable_help_subcommand = true
)]
struct Cli {
    /// Config file with key=value lines; flags override file values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a manifest and split it into train/val/test.
    Ingest(IngestArgs),
    /// Run the mock detector over a manifest and write detection JSON.
    Detect(DetectArgs),
    /// Score detection JSON against ground truth.
    Eval(EvalArgs),
    /// Train the toy least-squares model and write a loss-history CSV.
    TrainToy(TrainToyArgs),
    /// Enroll or identify faces in a registry file.
    Face(FaceCmd),
    /// Evaluate currency-classification outcomes.
    Currency(CurrencyCmd),
    /// Replay a sensor trace through the event loop.
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct IngestArgs {
    /// Box manifest CSV (ImageID,LabelName,XMin,XMax,YMin,YMax).
    #[arg(long, value_name = "FILE")]
    manifest: PathBuf,
    /// Image-size sidecar CSV (ImageID,Width,Height).
    #[arg(long, value_name = "FILE")]
    sizes: PathBuf,
    /// Class map file (index,label_name per line).
    #[arg(long, value_name = "FILE")]
    class_map: PathBuf,
    /// Split fractions train,val,test [default: 0.8,0.1,0.1].
    #[arg(long, value_name = "T,V,T")]
    split: Option<String>,
    /// Shuffle seed [default: 7].
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Directory for the six split files.
    #[arg(long, value_name = "DIR")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct DetectArgs {
    #[arg(long, value_name = "FILE")]
    manifest: PathBuf,
    #[arg(long, value_name = "FILE")]
    sizes: PathBuf,
    #[arg(long, value_name = "FILE")]
    class_map: PathBuf,
    /// Square network input size, divisible by 32 [default: 640].
    #[arg(long, value_name = "PX")]
    input_size: Option<u32>,
    /// Confidence threshold in [0,1] [default: 0.25].
    #[arg(long, value_name = "T")]
    conf_threshold: Option<f64>,
    /// NMS IoU threshold in [0,1] [default: 0.45].
    #[arg(long, value_name = "T")]
    nms_iou: Option<f64>,
    /// Confidence the mock backend encodes for the first box of each image
    /// [default: 0.9].
    #[arg(long, value_name = "C")]
    mock_confidence: Option<f64>,
    /// Output detection JSON path.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Detection JSON produced by `detect`.
    #[arg(long, value_name = "FILE")]
    detections: PathBuf,
    #[arg(long, value_name = "FILE")]
    manifest: PathBuf,
    #[arg(long, value_name = "FILE")]
    sizes: PathBuf,
    #[arg(long, value_name = "FILE")]
    class_map: PathBuf,
    /// Matching IoU threshold in [0,1] [default: 0.5].
    #[arg(long, value_name = "T")]
    eval_iou: Option<f64>,
    /// Output report JSON path.
    #[arg(long, value_name = "FILE")]
    report: PathBuf,
    /// Optional confusion-matrix CSV path.
    #[arg(long, value_name = "FILE")]
    confusion_csv: Option<PathBuf>,
}

#[derive(Args)]
struct TrainToyArgs {
    /// Number of epochs [default: 25].
    #[arg(long, value_name = "N")]
    epochs: Option<usize>,
    /// Learning rate [default: 0.05].
    #[arg(long, value_name = "ETA")]
    learning_rate: Option<f64>,
    /// Momentum decay in [0,1] [default: 0.5].
    #[arg(long, value_name = "ALPHA")]
    momentum: Option<f64>,
    /// Mini-batch size [default: 4].
    #[arg(long, value_name = "N")]
    batch_size: Option<usize>,
    /// Shuffle seed [default: 7].
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Number of generated samples [default: 40].
    #[arg(long, value_name = "N")]
    samples: Option<usize>,
    /// Output loss-history CSV path. The toy model's loss occupies the
    /// box_loss column; the remaining columns read 0.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Args)]
struct FaceCmd {
    #[command(subcommand)]
    action: FaceAction,
}

#[derive(Subcommand)]
enum FaceAction {
    /// Add embeddings for a person (appends to the registry file).
    Enroll(FaceEnrollArgs),
    /// Identify a probe against the registry.
    Identify(FaceIdentifyArgs),
}

#[derive(Args)]
struct FaceEnrollArgs {
    /// Registry file (created with a header if absent).
    #[arg(long, value_name = "FILE")]
    registry: PathBuf,
    #[arg(long, value_name = "ID")]
    person: String,
    /// Derive deterministic mock embeddings from this key.
    #[arg(long, value_name = "KEY", conflicts_with = "embeddings")]
    mock_key: Option<String>,
    /// Embeddings file: one `backend_id v1,v2,...` line per embedding.
    #[arg(long, value_name = "FILE")]
    embeddings: Option<PathBuf>,
    /// Backend pair as `id:dim,id:dim` [default: facenet:128,vggface:256].
    #[arg(long, value_name = "SPEC")]
    backends: Option<String>,
}

#[derive(Args)]
struct FaceIdentifyArgs {
    #[arg(long, value_name = "FILE")]
    registry: PathBuf,
    /// Derive the probe from this deterministic mock key.
    #[arg(long, value_name = "KEY", conflicts_with = "embeddings")]
    mock_key: Option<String>,
    /// Probe embeddings file: one `backend_id v1,v2,...` line per embedding.
    #[arg(long, value_name = "FILE")]
    embeddings: Option<PathBuf>,
    /// Fused-score match threshold in [-1,1] [default: 0.5].
    #[arg(long, value_name = "T")]
    threshold: Option<f64>,
    /// Backend pair as `id:dim,id:dim` [default: facenet:128,vggface:256].
    #[arg(long, value_name = "SPEC")]
    backends: Option<String>,
}

#[derive(Args)]
struct CurrencyCmd {
    #[command(subcommand)]
    action: CurrencyAction,
}

#[derive(Subcommand)]
enum CurrencyAction {
    /// Score a labeled outcome CSV.
    Eval(CurrencyEvalArgs),
}

#[derive(Args)]
struct CurrencyEvalArgs {
    /// Outcome CSV (image_id,truth,predicted,confidence).
    #[arg(long, value_name = "FILE")]
    outcomes: PathBuf,
    /// Comma-separated denomination labels
    /// [default: 10,20,50,100,200,500,2000].
    #[arg(long, value_name = "LIST")]
    denominations: Option<String>,
    /// Output report JSON path.
    #[arg(long, value_name = "FILE")]
    report: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    /// Sensor trace file (timestamp_ms kind args per line).
    #[arg(long, value_name = "FILE")]
    trace: PathBuf,
    #[arg(long, value_name = "FILE")]
    manifest: PathBuf,
    #[arg(long, value_name = "FILE")]
    sizes: PathBuf,
    #[arg(long, value_name = "FILE")]
    class_map: PathBuf,
    /// Optional registry for the face branch.
    #[arg(long, value_name = "FILE")]
    registry: Option<PathBuf>,
    /// Optional route file (lat lon per line); first waypoint is the origin.
    #[arg(long, value_name = "FILE")]
    route: Option<PathBuf>,
    /// Waypoint arrival radius in meters [default: 10].
    #[arg(long, value_name = "M")]
    arrival_radius: Option<f64>,
    /// Proximity alert threshold in meters [default: 1.5].
    #[arg(long, value_name = "M")]
    proximity_threshold: Option<f64>,
    /// Comma-separated labels routed to the face branch
    /// [default: Human face].
    #[arg(long, value_name = "LIST")]
    face_labels: Option<String>,
    /// Comma-separated labels routed to the currency branch
    /// [default: Banknote].
    #[arg(long, value_name = "LIST")]
    currency_labels: Option<String>,
    /// Square network input size [default: 640].
    #[arg(long, value_name = "PX")]
    input_size: Option<u32>,
    /// Confidence threshold in [0,1] [default: 0.25].
    #[arg(long, value_name = "T")]
    conf_threshold: Option<f64>,
    /// NMS IoU threshold in [0,1] [default: 0.45].
    #[arg(long, value_name = "T")]
    nms_iou: Option<f64>,
    /// Face match threshold in [-1,1] [default: 0.5].
    #[arg(long, value_name = "T")]
    face_threshold: Option<f64>,
    /// Backend pair as `id:dim,id:dim` [default: facenet:128,vggface:256].
    #[arg(long, value_name = "SPEC")]
    backends: Option<String>,
    /// Output feedback log path.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

/// key=value settings loaded from the optional config file.
struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path)
                .map_err(|e| io_error(&path.display().to_string(), e))?;
            for (idx, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (key, value) = line.split_once('=').ok_or_else(|| {
                    CliError::Validation(format!(
                        "{}:{}: expected key=value",
                        path.display(),
                        idx + 1
                    ))
                })?;
                values.insert(key.trim().to_string(), value.trim().to_string());
            }
        }
        Ok(Self { values })
    }

    fn resolve<T: Clone + std::str::FromStr>(
        &self,
        key: &str,
        flag: Option<T>,
        default: T,
    ) -> Result<T, CliError> {
        if let Some(v) = flag {
            return Ok(v);
        }
        match self.values.get(key) {
            Some(raw) => raw.parse().map_err(|_| {
                CliError::Validation(format!("config key `{key}`: cannot parse `{raw}`"))
            }),
            None => Ok(default),
        }
    }

    fn resolve_string(&self, key: &str, flag: Option<String>, default: &str) -> String {
        flag.or_else(|| self.values.get(key).cloned())
            .unwrap_or_else(|| default.to_string())
    }
}

fn check_range(name: &str, value: f64, lo: f64, hi: f64) -> Result<f64, CliError> {
    if !(lo..=hi).contains(&value) {
        return Err(CliError::Validation(format!("{name} out of range")));
    }
    Ok(value)
}

/// Run the CLI against `argv`; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ClapErrorKind::DisplayHelp | ClapErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };

    let settings = match Settings::load(cli.config.as_deref()) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {}", e.message());
            return e.exit_code();
        }
    };

    let result = match cli.command {
        Command::Ingest(args) => cmd_ingest(args, &settings),
        Command::Detect(args) => cmd_detect(args, &settings),
        Command::Eval(args) => cmd_eval(args, &settings),
        Command::TrainToy(args) => cmd_train_toy(args, &settings),
        Command::Face(cmd) => match cmd.action {
            FaceAction::Enroll(args) => cmd_face_enroll(args, &settings),
            FaceAction::Identify(args) => cmd_face_identify(args, &settings),
        },
        Command::Currency(cmd) => match cmd.action {
            CurrencyAction::Eval(args) => cmd_currency_eval(args, &settings),
        },
        Command::Simulate(args) => cmd_simulate(args, &settings),
    };

    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}

fn create_file(path: &Path) -> Result<File, CliError> {
    File::create(path).map_err(|e| io_error(&path.display().to_string(), e))
}

fn cmd_ingest(args: IngestArgs, settings: &Settings) -> Result<(), CliError> {
    let split_text = settings.resolve_string("split", args.split, "0.8,0.1,0.1");
    let fractions: Vec<f64> = split_text
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Validation(format!("cannot parse split `{split_text}`")))?;
    if fractions.len() != 3 {
        return Err(CliError::Validation(
            "split needs exactly three fractions".into(),
        ));
    }
    let seed = settings.resolve("seed", args.seed, 7u64)?;
    let spec = SplitSpec::new(fractions[0], fractions[1], fractions[2], seed)
        .map_err(CliError::from)?;

    let class_map = ClassMap::load(&args.class_map)?;
    let manifest = load_manifest(&args.manifest, &args.sizes, &class_map)?;
    let (train, val, test) = split_dataset(&manifest, &spec)?;

    std::fs::create_dir_all(&args.out_dir)
        .map_err(|e| io_error(&args.out_dir.display().to_string(), e))?;
    for (name, part) in [("train", &train), ("val", &val), ("test", &test)] {
        let boxes = args.out_dir.join(format!("{name}.csv"));
        let sizes = args.out_dir.join(format!("{name}_sizes.csv"));
        write_manifest(part, &boxes, &sizes, &class_map)?;
    }

    println!(
        "loaded {} samples, {} boxes, {} classes",
        manifest.len(),
        manifest.total_boxes(),
        manifest.distinct_classes()
    );
    println!(
        "split train {} / val {} / test {} (seed {seed})",
        train.len(),
        val.len(),
        test.len()
    );
    Ok(())
}

fn build_detections(
    manifest: &DatasetManifest,
    backend: &dyn InferenceBackend,
    conf_threshold: f64,
    nms_iou: f64,
) -> Result<Vec<ImageDetections>, CliError> {
    manifest
        .samples
        .iter()
        .map(|sample| {
            let (transform, raw) = backend.infer(&sample.image_id)?;
            let detections = nms(&decode_predictions(&raw, &transform, conf_threshold), nms_iou);
            Ok(ImageDetections {
                image_id: sample.image_id.clone(),
                detections,
            })
        })
        .collect()
}

fn cmd_detect(args: DetectArgs, settings: &Settings) -> Result<(), CliError> {
    let conf = check_range(
        "confidence threshold",
        settings.resolve("conf_threshold", args.conf_threshold, 0.25)?,
        0.0,
        1.0,
    )?;
    let nms_iou = check_range(
        "nms iou threshold",
        settings.resolve("nms_iou", args.nms_iou, 0.45)?,
        0.0,
        1.0,
    )?;
    let mock_confidence = check_range(
        "mock confidence",
        settings.resolve("mock_confidence", args.mock_confidence, 0.9)?,
        0.01,
        0.99,
    )?;
    let input_size = settings.resolve("input_size", args.input_size, 640u32)?;

    let class_map = ClassMap::load(&args.class_map)?;
    let manifest = load_manifest(&args.manifest, &args.sizes, &class_map)?;
    let spec = GridSpec::standard(input_size, class_map.len())?;
    let backend = TruthInferenceBackend::new(&manifest, spec, mock_confidence);

    let images = build_detections(&manifest, &backend, conf, nms_iou)?;
    let total: usize = images.iter().map(|i| i.detections.len()).sum();
    let file = create_file(&args.out)?;
    write_detections_json(file, &images, &class_map)?;
    println!(
        "wrote {total} detections for {} images to {}",
        images.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_eval(args: EvalArgs, settings: &Settings) -> Result<(), CliError> {
    let eval_iou = check_range(
        "eval iou threshold",
        settings.resolve("eval_iou", args.eval_iou, 0.5)?,
        0.0,
        1.0,
    )?;
    let class_map = ClassMap::load(&args.class_map)?;
    let manifest = load_manifest(&args.manifest, &args.sizes, &class_map)?;
    let file = File::open(&args.detections)
        .map_err(|e| io_error(&args.detections.display().to_string(), e))?;
    let detected = crate::detect::read_detections_json(file)?;

    for image in &detected {
        if !manifest.samples.iter().any(|s| s.image_id == image.image_id) {
            return Err(CliError::Validation(format!(
                "detections reference unknown image `{}`",
                image.image_id
            )));
        }
    }

    let images: Vec<(Vec<crate::detect::Detection>, Vec<TruthInstance>)> = manifest
        .samples
        .iter()
        .map(|sample| {
            let detections = detected
                .iter()
                .find(|i| i.image_id == sample.image_id)
                .map(|i| i.detections.clone())
                .unwrap_or_default();
            let truths = sample
                .boxes
                .iter()
                .map(|b| TruthInstance {
                    class_index: b.class_index,
                    box_: b.to_pixels(sample.image_width, sample.image_height),
                })
                .collect();
            (detections, truths)
        })
        .collect();

    let report = evaluate_detections(&images, class_map.len(), eval_iou);
    let mut file = create_file(&args.report)?;
    file.write_all(report.to_json(&class_map).as_bytes())
        .map_err(|e| io_error(&args.report.display().to_string(), e))?;
    if let Some(path) = &args.confusion_csv {
        let file = create_file(path)?;
        report
            .confusion
            .write_csv(file, &class_map)
            .map_err(|e| io_error(&path.display().to_string(), e))?;
    }
    println!(
        "mAP {:.4} precision {:.4} recall {:.4} over {} images",
        report.map_score,
        report.precision,
        report.recall,
        images.len()
    );
    Ok(())
}

fn cmd_train_toy(args: TrainToyArgs, settings: &Settings) -> Result<(), CliError> {
    let epochs = settings.resolve("epochs", args.epochs, 25usize)?;
    let learning_rate = settings.resolve("learning_rate", args.learning_rate, 0.05)?;
    let momentum = settings.resolve("momentum", args.momentum, 0.5)?;
    let batch_size = settings.resolve("batch_size", args.batch_size, 4usize)?;
    let seed = settings.resolve("seed", args.seed, 7u64)?;
    let samples = settings.resolve("samples", args.samples, 40usize)?;
    if samples < 2 {
        return Err(CliError::Validation("samples must be at least 2".into()));
    }

    let config = OptimizerConfig::new(learning_rate, momentum, batch_size)?;
    let data: Vec<(f64, f64)> = (0..samples)
        .map(|i| {
            let x = -1.0 + 2.0 * (i as f64) / (samples as f64 - 1.0);
            (x, 2.0 * x + 1.0)
        })
        .collect();

    let mut params = ParamVector::new(vec![0.0, 0.0]);
    let history = train_toy(&LeastSquaresModel, &data, &mut params, &config, epochs, seed)?;

    let rows: Vec<EpochRecord> = history
        .iter()
        .enumerate()
        .map(|(i, &loss)| EpochRecord {
            epoch: i + 1,
            box_loss: loss,
            object_loss: 0.0,
            class_loss: 0.0,
            precision: 0.0,
            recall: 0.0,
        })
        .collect();
    let file = create_file(&args.out)?;
    write_loss_history(file, &rows).map_err(|e| io_error(&args.out.display().to_string(), e))?;

    let (w_star, b_star) = LeastSquaresModel::closed_form(&data);
    println!(
        "trained {epochs} epochs: loss {:.3e} -> {:.3e}",
        history.first().unwrap(),
        history.last().unwrap()
    );
    println!(
        "final params ({:.6}, {:.6}); closed form ({:.6}, {:.6})",
        params.weights()[0],
        params.weights()[1],
        w_star,
        b_star
    );
    Ok(())
}

fn parse_backends(spec: &str) -> Result<RegistryConfig, CliError> {
    let parts: Vec<&str> = spec.split(',').map(str::trim).collect();
    if parts.len() != 2 {
        return Err(CliError::Validation(
            "backends spec needs exactly two `id:dim` entries".into(),
        ));
    }
    let mut specs = Vec::new();
    for part in parts {
        let (id, dim) = part.split_once(':').ok_or_else(|| {
            CliError::Validation(format!("backend `{part}` must be `id:dim`"))
        })?;
        let dim: usize = dim
            .parse()
            .map_err(|_| CliError::Validation(format!("bad backend dimension `{dim}`")))?;
        if dim == 0 {
            return Err(CliError::Validation("backend dimension must be > 0".into()));
        }
        specs.push((id.to_string(), dim));
    }
    Ok(RegistryConfig::new(
        (&specs[0].0, specs[0].1),
        (&specs[1].0, specs[1].1),
    ))
}

const DEFAULT_BACKENDS: &str = "facenet:128,vggface:256";

fn read_embeddings_file(path: &Path) -> Result<Vec<Embedding>, CliError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| io_error(&path.display().to_string(), e))?;
    let mut embeddings = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (backend, values) = line.split_once(char::is_whitespace).ok_or_else(|| {
            CliError::Validation(format!(
                "{}:{}: expected `backend_id v1,v2,...`",
                path.display(),
                idx + 1
            ))
        })?;
        let vector: Vec<f64> = values
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| {
                CliError::Validation(format!(
                    "{}:{}: bad embedding component",
                    path.display(),
                    idx + 1
                ))
            })?;
        embeddings.push(Embedding::new(backend.trim(), vector));
    }
    if embeddings.is_empty() {
        return Err(CliError::Validation(format!(
            "{}: no embeddings found",
            path.display()
        )));
    }
    Ok(embeddings)
}

fn probe_embeddings(
    mock_key: Option<&str>,
    embeddings: Option<&Path>,
    config: &RegistryConfig,
) -> Result<Vec<Embedding>, CliError> {
    match (mock_key, embeddings) {
        (Some(key), None) => Ok(seeded_probe(config, key).embeddings),
        (None, Some(path)) => read_embeddings_file(path),
        _ => Err(CliError::Validation(
            "exactly one of --mock-key or --embeddings is required".into(),
        )),
    }
}

fn cmd_face_enroll(args: FaceEnrollArgs, settings: &Settings) -> Result<(), CliError> {
    let backends = settings.resolve_string("backends", args.backends, DEFAULT_BACKENDS);
    let config = parse_backends(&backends)?;
    let embeddings = probe_embeddings(
        args.mock_key.as_deref(),
        args.embeddings.as_deref(),
        &config,
    )?;
    Registry::append_to_file(&args.registry, &config, &args.person, &embeddings)?;
    println!(
        "enrolled {} ({} embeddings) into {}",
        args.person,
        embeddings.len(),
        args.registry.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct IdentifyView {
    person_id: Option<String>,
    fused_score: f64,
    per_backend_scores: BTreeMap<String, f64>,
}

fn cmd_face_identify(args: FaceIdentifyArgs, settings: &Settings) -> Result<(), CliError> {
    let backends = settings.resolve_string("backends", args.backends, DEFAULT_BACKENDS);
    let config = parse_backends(&backends)?;
    let threshold = check_range(
        "face match threshold",
        settings.resolve("face_threshold", args.threshold, 0.5)?,
        -1.0,
        1.0,
    )?;
    if !args.registry.exists() {
        return Err(CliError::Io(format!(
            "{}: registry file not found",
            args.registry.display()
        )));
    }
    let registry = Registry::load(&args.registry, config.clone())?;
    let embeddings = probe_embeddings(
        args.mock_key.as_deref(),
        args.embeddings.as_deref(),
        &config,
    )?;
    let probe = crate::face::Probe {
        embeddings,
        attributes: None,
    };
    let result = registry.identify(&probe, threshold)?;
    let view = IdentifyView {
        person_id: result.person_id,
        fused_score: result.fused_score,
        per_backend_scores: result.per_backend_scores,
    };
    println!(
        "{}",
        serde_json::to_string_pretty(&view).expect("result serializes")
    );
    Ok(())
}

fn cmd_currency_eval(args: CurrencyEvalArgs, settings: &Settings) -> Result<(), CliError> {
    let list = settings.resolve_string(
        "denominations",
        args.denominations,
        "10,20,50,100,200,500,2000",
    );
    let denominations = DenominationSet::new(
        list.split(',').map(|s| s.trim().to_string()).collect(),
    )?;
    let outcomes = read_outcomes_csv(&args.outcomes, &denominations)?;
    let report = evaluate_classifier(&outcomes, &denominations)?;
    let mut file = create_file(&args.report)?;
    file.write_all(report.to_json().as_bytes())
        .map_err(|e| io_error(&args.report.display().to_string(), e))?;
    println!(
        "accuracy {:.4} macro-F1 {:.4} over {} outcomes",
        report.accuracy, report.macro_f1, report.total
    );
    Ok(())
}

fn cmd_simulate(args: SimulateArgs, settings: &Settings) -> Result<(), CliError> {
    let proximity = settings.resolve("proximity_threshold", args.proximity_threshold, 1.5)?;
    if proximity <= 0.0 {
        return Err(CliError::Validation(
            "proximity threshold out of range".into(),
        ));
    }
    let arrival_radius = settings.resolve("arrival_radius", args.arrival_radius, 10.0)?;
    let input_size = settings.resolve("input_size", args.input_size, 640u32)?;
    let conf = check_range(
        "confidence threshold",
        settings.resolve("conf_threshold", args.conf_threshold, 0.25)?,
        0.0,
        1.0,
    )?;
    let nms_iou = check_range(
        "nms iou threshold",
        settings.resolve("nms_iou", args.nms_iou, 0.45)?,
        0.0,
        1.0,
    )?;
    let face_threshold = check_range(
        "face match threshold",
        settings.resolve("face_threshold", args.face_threshold, 0.5)?,
        -1.0,
        1.0,
    )?;
    let face_labels = settings.resolve_string("face_labels", args.face_labels, "Human face");
    let currency_labels =
        settings.resolve_string("currency_labels", args.currency_labels, "Banknote");
    let backends = settings.resolve_string("backends", args.backends, DEFAULT_BACKENDS);
    let registry_config = parse_backends(&backends)?;
    let queue_capacity = settings.resolve("queue_capacity", None, 32usize)?;
    if queue_capacity == 0 {
        return Err(CliError::Validation("queue capacity out of range".into()));
    }

    let class_map = ClassMap::load(&args.class_map)?;
    let manifest = load_manifest(&args.manifest, &args.sizes, &class_map)?;
    let trace_file =
        File::open(&args.trace).map_err(|e| io_error(&args.trace.display().to_string(), e))?;
    let events = parse_trace(trace_file, &args.trace.display().to_string())?;

    let registry = match &args.registry {
        Some(path) => Registry::load(path, registry_config.clone())?,
        None => Registry::new(registry_config.clone()),
    };

    let to_set = |list: &str| {
        list.split(',')
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect::<std::collections::BTreeSet<String>>()
    };
    let face_label_set = to_set(&face_labels);
    let face_classes: Vec<usize> = face_label_set
        .iter()
        .filter_map(|l| class_map.index_of(l))
        .collect();

    let config = OrchestratorConfig {
        proximity_threshold_m: proximity,
        queue_capacity,
        face_labels: face_label_set,
        currency_labels: to_set(&currency_labels),
        conf_threshold: conf,
        nms_iou_threshold: nms_iou,
        face_match_threshold: face_threshold,
    };

    let spec = GridSpec::standard(input_size, class_map.len())?;
    let mut pipeline = PerceptionPipeline {
        detector: Box::new(TruthInferenceBackend::new(&manifest, spec, 0.9)),
        face_detector: Box::new(ManifestFaceDetector::new(&manifest, &face_classes)),
        embedder: Box::new(SeededEmbedder::new(registry_config)),
        currency: Box::new(SeededCurrencyBackend::new(DenominationSet::default_fixture())),
        registry,
        class_map,
        denominations: DenominationSet::default_fixture(),
    };

    let mut orchestrator = Orchestrator::new(config);
    if let Some(route_path) = &args.route {
        let file = File::open(route_path)
            .map_err(|e| io_error(&route_path.display().to_string(), e))?;
        let route = parse_route(file, &route_path.display().to_string(), arrival_radius)?;
        orchestrator.set_route(route);
    }

    let messages = replay_trace(&mut orchestrator, &events, &mut pipeline)?;
    let file = create_file(&args.out)?;
    write_feedback_log(file, &messages)
        .map_err(|e| io_error(&args.out.display().to_string(), e))?;
    println!(
        "replayed {} events, wrote {} feedback messages to {}",
        events.len(),
        messages.len(),
        args.out.display()
    );
    Ok(())
}
