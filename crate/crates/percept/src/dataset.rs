//! Loading, validation, and splitting of detection manifests.
//!
//! Formats follow the Open Images boxable convention:
//!
//! * box manifest CSV with header `ImageID,LabelName,XMin,XMax,YMin,YMax`,
//!   one box per row, coordinates as normalized fractions;
//! * image-size sidecar CSV `ImageID,Width,Height`;
//! * class map file with one `index,label_name` line per class, indices
//!   ascending from 0.
//!
//! Coordinates stay normalized here; pixel conversion happens only in the
//! detection pipeline, so manifests remain resolution-independent.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: u64,
        message: String,
    },
    #[error("{path}:{line}: unknown label `{label}`")]
    UnknownLabel {
        path: String,
        line: u64,
        label: String,
    },
    #[error("{path}:{line}: inverted coordinates ({axis}_min >= {axis}_max)")]
    InvertedCoordinates {
        path: String,
        line: u64,
        axis: char,
    },
    #[error("{path}:{line}: coordinate out of [0,1] range")]
    CoordinateRange { path: String, line: u64 },
    #[error("class map: {0}")]
    ClassMap(String),
    #[error("image `{0}` has no entry in the size sidecar")]
    MissingSize(String),
    #[error("duplicate image id `{0}` in size sidecar")]
    DuplicateImage(String),
    #[error("split fractions ({train}, {val}, {test}) do not sum to 1")]
    BadFractions { train: f64, val: f64, test: f64 },
    #[error("manifest is empty")]
    EmptyManifest,
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
}

fn io_err(path: &Path, source: std::io::Error) -> DatasetError {
    DatasetError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Ordered class vocabulary: contiguous 0-based indices to unique labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassMap {
    labels: Vec<String>,
    by_label: HashMap<String, usize>,
}

impl ClassMap {
    pub fn from_entries(entries: Vec<(usize, String)>) -> Result<Self, DatasetError> {
        let mut labels = Vec::with_capacity(entries.len());
        let mut by_label = HashMap::new();
        for (i, (index, label)) in entries.into_iter().enumerate() {
            if index != i {
                return Err(DatasetError::ClassMap(format!(
                    "indices must be contiguous from 0; entry {i} has index {index}"
                )));
            }
            if by_label.insert(label.clone(), index).is_some() {
                return Err(DatasetError::ClassMap(format!("duplicate label `{label}`")));
            }
            labels.push(label);
        }
        if labels.is_empty() {
            return Err(DatasetError::ClassMap("class map is empty".into()));
        }
        Ok(Self { labels, by_label })
    }

    /// Parse the `index,label_name` line format.
    pub fn load(path: &Path) -> Result<Self, DatasetError> {
        let file = File::open(path).map_err(|e| io_err(path, e))?;
        let mut entries = Vec::new();
        for (idx, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| io_err(path, e))?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (index, label) = line.split_once(',').ok_or_else(|| DatasetError::ClassMap(
                format!("line {}: expected `index,label_name`", idx + 1),
            ))?;
            let index: usize = index.trim().parse().map_err(|_| {
                DatasetError::ClassMap(format!("line {}: bad index `{index}`", idx + 1))
            })?;
            entries.push((index, label.trim().to_string()));
        }
        Self::from_entries(entries)
    }

    pub fn save(&self, path: &Path) -> Result<(), DatasetError> {
        let mut file = File::create(path).map_err(|e| io_err(path, e))?;
        for (i, label) in self.labels.iter().enumerate() {
            writeln!(file, "{i},{label}").map_err(|e| io_err(path, e))?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label(&self, index: usize) -> Option<&str> {
        self.labels.get(index).map(String::as_str)
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.by_label.get(label).copied()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }
}

/// A validated ground-truth box in normalized [0,1] coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundTruthBox {
    pub class_index: usize,
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl GroundTruthBox {
    pub fn new(
        class_index: usize,
        x_min: f64,
        y_min: f64,
        x_max: f64,
        y_max: f64,
    ) -> Result<Self, String> {
        for v in [x_min, y_min, x_max, y_max] {
            if !(0.0..=1.0).contains(&v) {
                return Err(format!("coordinate {v} outside [0,1]"));
            }
        }
        if x_min >= x_max {
            return Err("inverted x coordinates".into());
        }
        if y_min >= y_max {
            return Err("inverted y coordinates".into());
        }
        Ok(Self {
            class_index,
            x_min,
            y_min,
            x_max,
            y_max,
        })
    }

    /// Scale to pixel coordinates for a `width x height` image.
    pub fn to_pixels(&self, width: u32, height: u32) -> crate::detect::BoundingBox {
        crate::detect::BoundingBox::new(
            self.x_min * f64::from(width),
            self.y_min * f64::from(height),
            self.x_max * f64::from(width),
            self.y_max * f64::from(height),
        )
    }
}

/// One image entry: id, pixel dimensions, and its ground-truth boxes.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub image_id: String,
    pub image_width: u32,
    pub image_height: u32,
    pub boxes: Vec<GroundTruthBox>,
}

/// An ordered set of samples with unique image ids.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DatasetManifest {
    pub samples: Vec<Sample>,
}

impl DatasetManifest {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Number of distinct classes appearing in any box.
    pub fn distinct_classes(&self) -> usize {
        self.samples
            .iter()
            .flat_map(|s| s.boxes.iter().map(|b| b.class_index))
            .collect::<BTreeSet<_>>()
            .len()
    }

    pub fn total_boxes(&self) -> usize {
        self.samples.iter().map(|s| s.boxes.len()).sum()
    }
}

/// Fractional three-way split with a shuffle seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub test_fraction: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train: f64, val: f64, test: f64, seed: u64) -> Result<Self, DatasetError> {
        let in_range = |f: f64| (0.0..=1.0).contains(&f);
        if !in_range(train) || !in_range(val) || !in_range(test)
            || (train + val + test - 1.0).abs() > 1e-9
        {
            return Err(DatasetError::BadFractions {
                train,
                val,
                test,
            });
        }
        Ok(Self {
            train_fraction: train,
            val_fraction: val,
            test_fraction: test,
            seed,
        })
    }
}

/// Load and validate a manifest from the box CSV and its size sidecar,
/// resolving labels through `class_map`. Every box is checked against the
/// normalized-coordinate invariants; offending rows are reported with their
/// line number.
pub fn load_manifest(
    boxes_path: &Path,
    sizes_path: &Path,
    class_map: &ClassMap,
) -> Result<DatasetManifest, DatasetError> {
    let sizes = load_sizes(sizes_path)?;

    let path_str = boxes_path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(boxes_path)
        .map_err(|e| DatasetError::Csv {
            path: path_str.clone(),
            source: e,
        })?;

    {
        let headers = reader.headers().map_err(|e| DatasetError::Csv {
            path: path_str.clone(),
            source: e,
        })?;
        let expected = ["ImageID", "LabelName", "XMin", "XMax", "YMin", "YMax"];
        let actual: Vec<&str> = headers.iter().collect();
        if actual != expected {
            return Err(DatasetError::Parse {
                path: path_str,
                line: 1,
                message: format!("header must be `{}`", expected.join(",")),
            });
        }
    }

    // Boxes are grouped by image id in first-seen order.
    let mut order: Vec<String> = Vec::new();
    let mut boxes_by_image: HashMap<String, Vec<GroundTruthBox>> = HashMap::new();

    for record in reader.records() {
        let record = record.map_err(|e| DatasetError::Csv {
            path: path_str.clone(),
            source: e,
        })?;
        let line = record
            .position()
            .map(csv::Position::line)
            .unwrap_or_default();
        let field = |i: usize| record.get(i).unwrap_or("").trim();

        if record.len() != 6 {
            return Err(DatasetError::Parse {
                path: path_str.clone(),
                line,
                message: format!("expected 6 fields, found {}", record.len()),
            });
        }

        let image_id = field(0).to_string();
        let label = field(1);
        let class_index =
            class_map
                .index_of(label)
                .ok_or_else(|| DatasetError::UnknownLabel {
                    path: path_str.clone(),
                    line,
                    label: label.to_string(),
                })?;

        let coord = |i: usize, name: &str| -> Result<f64, DatasetError> {
            field(i).parse().map_err(|_| DatasetError::Parse {
                path: path_str.clone(),
                line,
                message: format!("bad {name} value `{}`", field(i)),
            })
        };
        let x_min = coord(2, "XMin")?;
        let x_max = coord(3, "XMax")?;
        let y_min = coord(4, "YMin")?;
        let y_max = coord(5, "YMax")?;

        for v in [x_min, x_max, y_min, y_max] {
            if !(0.0..=1.0).contains(&v) {
                return Err(DatasetError::CoordinateRange {
                    path: path_str.clone(),
                    line,
                });
            }
        }
        if x_min >= x_max {
            return Err(DatasetError::InvertedCoordinates {
                path: path_str.clone(),
                line,
                axis: 'x',
            });
        }
        if y_min >= y_max {
            return Err(DatasetError::InvertedCoordinates {
                path: path_str.clone(),
                line,
                axis: 'y',
            });
        }

        let gt = GroundTruthBox {
            class_index,
            x_min,
            y_min,
            x_max,
            y_max,
        };
        if !boxes_by_image.contains_key(&image_id) {
            order.push(image_id.clone());
        }
        boxes_by_image.entry(image_id).or_default().push(gt);
    }

    let samples = order
        .into_iter()
        .map(|image_id| {
            let &(width, height) = sizes
                .get(&image_id)
                .ok_or_else(|| DatasetError::MissingSize(image_id.clone()))?;
            let boxes = boxes_by_image.remove(&image_id).unwrap_or_default();
            Ok(Sample {
                image_id,
                image_width: width,
                image_height: height,
                boxes,
            })
        })
        .collect::<Result<Vec<_>, DatasetError>>()?;

    Ok(DatasetManifest { samples })
}

fn load_sizes(path: &Path) -> Result<BTreeMap<String, (u32, u32)>, DatasetError> {
    let path_str = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| DatasetError::Csv {
            path: path_str.clone(),
            source: e,
        })?;
    let mut sizes = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| DatasetError::Csv {
            path: path_str.clone(),
            source: e,
        })?;
        let line = record
            .position()
            .map(csv::Position::line)
            .unwrap_or_default();
        let image_id = record.get(0).unwrap_or("").trim().to_string();
        let parse_dim = |i: usize, name: &str| -> Result<u32, DatasetError> {
            let raw = record.get(i).unwrap_or("").trim();
            let v: u32 = raw.parse().map_err(|_| DatasetError::Parse {
                path: path_str.clone(),
                line,
                message: format!("bad {name} `{raw}`"),
            })?;
            if v == 0 {
                return Err(DatasetError::Parse {
                    path: path_str.clone(),
                    line,
                    message: format!("{name} must be positive"),
                });
            }
            Ok(v)
        };
        let width = parse_dim(1, "Width")?;
        let height = parse_dim(2, "Height")?;
        if sizes.insert(image_id.clone(), (width, height)).is_some() {
            return Err(DatasetError::DuplicateImage(image_id));
        }
    }
    Ok(sizes)
}

/// Write a manifest back out in the same two-file format `load_manifest`
/// reads, so that write-then-load is the identity on valid manifests.
pub fn write_manifest(
    manifest: &DatasetManifest,
    boxes_path: &Path,
    sizes_path: &Path,
    class_map: &ClassMap,
) -> Result<(), DatasetError> {
    let mut boxes = File::create(boxes_path).map_err(|e| io_err(boxes_path, e))?;
    writeln!(boxes, "ImageID,LabelName,XMin,XMax,YMin,YMax").map_err(|e| io_err(boxes_path, e))?;
    for sample in &manifest.samples {
        for b in &sample.boxes {
            let label = class_map.label(b.class_index).ok_or_else(|| {
                DatasetError::ClassMap(format!("class index {} not in map", b.class_index))
            })?;
            writeln!(
                boxes,
                "{},{},{:?},{:?},{:?},{:?}",
                sample.image_id, label, b.x_min, b.x_max, b.y_min, b.y_max
            )
            .map_err(|e| io_err(boxes_path, e))?;
        }
    }

    let mut sizes = File::create(sizes_path).map_err(|e| io_err(sizes_path, e))?;
    writeln!(sizes, "ImageID,Width,Height").map_err(|e| io_err(sizes_path, e))?;
    for sample in &manifest.samples {
        writeln!(
            sizes,
            "{},{},{}",
            sample.image_id, sample.image_width, sample.image_height
        )
        .map_err(|e| io_err(sizes_path, e))?;
    }
    Ok(())
}

/// Deterministic seeded three-way split. Sizes follow largest-remainder
/// rounding of the requested fractions, assigned in train/val/test order on
/// remainder ties; the partition is disjoint and exhaustive.
pub fn split_dataset(
    manifest: &DatasetManifest,
    spec: &SplitSpec,
) -> Result<(DatasetManifest, DatasetManifest, DatasetManifest), DatasetError> {
    if manifest.is_empty() {
        return Err(DatasetError::EmptyManifest);
    }
    let n = manifest.len();
    let counts = largest_remainder(
        n,
        [spec.train_fraction, spec.val_fraction, spec.test_fraction],
    );

    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    indices.shuffle(&mut rng);

    let mut parts = Vec::with_capacity(3);
    let mut cursor = 0;
    for count in counts {
        let mut chosen: Vec<usize> = indices[cursor..cursor + count].to_vec();
        cursor += count;
        // Keep manifest order within each part for stable output.
        chosen.sort_unstable();
        parts.push(DatasetManifest {
            samples: chosen
                .into_iter()
                .map(|i| manifest.samples[i].clone())
                .collect(),
        });
    }
    let test = parts.pop().expect("three parts");
    let val = parts.pop().expect("three parts");
    let train = parts.pop().expect("three parts");
    Ok((train, val, test))
}

fn largest_remainder(n: usize, fractions: [f64; 3]) -> [usize; 3] {
    let exact: Vec<f64> = fractions.iter().map(|f| f * n as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    for &i in order.iter().take(n - assigned) {
        counts[i] += 1;
    }
    [counts[0], counts[1], counts[2]]
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::TempDir;

    fn class_map_35() -> ClassMap {
        crate::synthetic::default_class_map()
    }

    fn write_files(dir: &TempDir, boxes: &str, sizes: &str) -> (std::path::PathBuf, std::path::PathBuf) {
        let boxes_path = dir.path().join("boxes.csv");
        let sizes_path = dir.path().join("sizes.csv");
        File::create(&boxes_path)
            .unwrap()
            .write_all(boxes.as_bytes())
            .unwrap();
        File::create(&sizes_path)
            .unwrap()
            .write_all(sizes.as_bytes())
            .unwrap();
        (boxes_path, sizes_path)
    }

    #[test]
    fn row_maps_to_ground_truth_box() {
        let dir = TempDir::new().unwrap();
        let (boxes, sizes) = write_files(
            &dir,
            "ImageID,LabelName,XMin,XMax,YMin,YMax\nimg1,Chair,0.1,0.5,0.2,0.6\n",
            "ImageID,Width,Height\nimg1,640,480\n",
        );
        let map = class_map_35();
        let manifest = load_manifest(&boxes, &sizes, &map).unwrap();
        assert_eq!(manifest.len(), 1);
        let b = &manifest.samples[0].boxes[0];
        assert_eq!(b.class_index, map.index_of("Chair").unwrap());
        assert_eq!(map.index_of("Chair"), Some(3));
        assert_eq!((b.x_min, b.y_min, b.x_max, b.y_max), (0.1, 0.2, 0.5, 0.6));
    }

    #[test]
    fn inverted_coordinates_are_rejected_with_line() {
        let dir = TempDir::new().unwrap();
        let (boxes, sizes) = write_files(
            &dir,
            "ImageID,LabelName,XMin,XMax,YMin,YMax\nimg1,Chair,0.7,0.2,0.2,0.6\n",
            "ImageID,Width,Height\nimg1,640,480\n",
        );
        let err = load_manifest(&boxes, &sizes, &class_map_35()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("inverted"), "{msg}");
        assert!(msg.contains(":2:"), "{msg}");
    }

    #[test]
    fn unknown_label_is_rejected() {
        let dir = TempDir::new().unwrap();
        let (boxes, sizes) = write_files(
            &dir,
            "ImageID,LabelName,XMin,XMax,YMin,YMax\nimg1,Zeppelin,0.1,0.5,0.2,0.6\n",
            "ImageID,Width,Height\nimg1,640,480\n",
        );
        let err = load_manifest(&boxes, &sizes, &class_map_35()).unwrap_err();
        assert!(matches!(err, DatasetError::UnknownLabel { .. }));
    }

    #[test]
    fn out_of_range_coordinate_is_rejected() {
        let dir = TempDir::new().unwrap();
        let (boxes, sizes) = write_files(
            &dir,
            "ImageID,LabelName,XMin,XMax,YMin,YMax\nimg1,Chair,0.1,1.5,0.2,0.6\n",
            "ImageID,Width,Height\nimg1,640,480\n",
        );
        let err = load_manifest(&boxes, &sizes, &class_map_35()).unwrap_err();
        assert!(matches!(err, DatasetError::CoordinateRange { .. }));
    }

    #[test]
    fn missing_size_is_rejected() {
        let dir = TempDir::new().unwrap();
        let (boxes, sizes) = write_files(
            &dir,
            "ImageID,LabelName,XMin,XMax,YMin,YMax\nimg1,Chair,0.1,0.5,0.2,0.6\n",
            "ImageID,Width,Height\nother,640,480\n",
        );
        let err = load_manifest(&boxes, &sizes, &class_map_35()).unwrap_err();
        assert!(matches!(err, DatasetError::MissingSize(_)));
    }

    #[test]
    fn split_sizes_match_exact_fractions() {
        let manifest = crate::synthetic::synthetic_manifest(100, &class_map_35(), 11);
        let spec = SplitSpec::new(0.8, 0.1, 0.1, 7).unwrap();
        let (train, val, test) = split_dataset(&manifest, &spec).unwrap();
        assert_eq!((train.len(), val.len(), test.len()), (80, 10, 10));
    }

    #[test]
    fn degenerate_split_puts_everything_in_train() {
        let manifest = crate::synthetic::synthetic_manifest(10, &class_map_35(), 3);
        let spec = SplitSpec::new(1.0, 0.0, 0.0, 0).unwrap();
        let (train, val, test) = split_dataset(&manifest, &spec).unwrap();
        assert_eq!((train.len(), val.len(), test.len()), (10, 0, 0));
    }

    #[test]
    fn split_is_deterministic_for_a_seed() {
        let manifest = crate::synthetic::synthetic_manifest(37, &class_map_35(), 5);
        let spec = SplitSpec::new(0.6, 0.2, 0.2, 42).unwrap();
        let a = split_dataset(&manifest, &spec).unwrap();
        let b = split_dataset(&manifest, &spec).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fractions_must_sum_to_one() {
        assert!(SplitSpec::new(0.8, 0.1, 0.2, 0).is_err());
        assert!(SplitSpec::new(0.8, 0.1, 0.1, 0).is_ok());
    }

    #[test]
    fn empty_manifest_cannot_be_split() {
        let spec = SplitSpec::new(0.8, 0.1, 0.1, 0).unwrap();
        let err = split_dataset(&DatasetManifest::default(), &spec).unwrap_err();
        assert!(matches!(err, DatasetError::EmptyManifest));
    }

    #[test]
    fn write_then_load_is_identity() {
        let dir = TempDir::new().unwrap();
        let map = class_map_35();
        let manifest = crate::synthetic::synthetic_manifest(24, &map, 9);
        let boxes = dir.path().join("out.csv");
        let sizes = dir.path().join("out_sizes.csv");
        write_manifest(&manifest, &boxes, &sizes, &map).unwrap();
        let reloaded = load_manifest(&boxes, &sizes, &map).unwrap();
        assert_eq!(reloaded, manifest);
    }
}
