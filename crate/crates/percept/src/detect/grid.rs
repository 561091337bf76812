//! Raw predictor-output tensors and the grid geometry they live on.
//!
//! A detector head emits one tensor per scale. Each grid cell carries, per
//! anchor slot, the raw tuple `(tx, ty, tw, th, t_obj, t_class[0..N-1])` of
//! unbounded reals. Decoding these into boxes is `decode.rs`'s job; this
//! module owns the shapes and the line-oriented fixture format mock backends
//! use to drive decode tests bit-exactly.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};

use super::DetectError;

/// Objectness logit low enough that its sigmoid is exactly 0.0, used as the
/// default for unpopulated anchor slots.
pub const INERT_OBJECTNESS: f64 = -1.0e4;

/// One detection scale: grid dimensions plus the anchor priors (in
/// network-input pixels) attached to every cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleSpec {
    pub grid_w: usize,
    pub grid_h: usize,
    pub anchors: Vec<(f64, f64)>,
}

/// Full head geometry: input size, per-scale grids, and class count.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub input_size: u32,
    pub num_classes: usize,
    pub scales: Vec<ScaleSpec>,
}

impl GridSpec {
    /// Three-scale head at strides 32/16/8. A 640 input yields 20/40/80
    /// grids; a 416 input yields 13/26/52. Anchor priors are synthetic
    /// fixtures sized relative to each stride, not tuned values.
    pub fn standard(input_size: u32, num_classes: usize) -> Result<Self, DetectError> {
        if input_size == 0 || !input_size.is_multiple_of(32) {
            return Err(DetectError::InvalidInputSize(input_size));
        }
        let scales = [32u32, 16, 8]
            .iter()
            .map(|&stride| {
                let g = (input_size / stride) as usize;
                let s = f64::from(stride);
                ScaleSpec {
                    grid_w: g,
                    grid_h: g,
                    anchors: vec![(1.5 * s, 2.0 * s), (3.0 * s, 2.5 * s), (4.0 * s, 5.0 * s)],
                }
            })
            .collect();
        Ok(Self {
            input_size,
            num_classes,
            scales,
        })
    }

    /// Zeroed raw outputs for every scale, all slots inert.
    pub fn empty_outputs(&self) -> Vec<RawGridOutput> {
        self.scales
            .iter()
            .map(|s| RawGridOutput::inert(s.grid_w, s.grid_h, s.anchors.clone(), self.num_classes))
            .collect()
    }
}

/// Per-scale raw predictor output: a dense `grid_h x grid_w x anchors x (5+N)`
/// tensor of unbounded reals.
#[derive(Debug, Clone, PartialEq)]
pub struct RawGridOutput {
    pub grid_w: usize,
    pub grid_h: usize,
    pub anchors: Vec<(f64, f64)>,
    pub num_classes: usize,
    values: Vec<f64>,
}

impl RawGridOutput {
    pub fn slot_len(num_classes: usize) -> usize {
        5 + num_classes
    }

    /// All slots at `(tx, ty, tw, th) = 0` with inert objectness, so decoding
    /// yields nothing until slots are populated.
    pub fn inert(
        grid_w: usize,
        grid_h: usize,
        anchors: Vec<(f64, f64)>,
        num_classes: usize,
    ) -> Self {
        let slot = Self::slot_len(num_classes);
        let mut values = vec![0.0; grid_w * grid_h * anchors.len() * slot];
        for s in values.chunks_mut(slot) {
            s[4] = INERT_OBJECTNESS;
        }
        Self {
            grid_w,
            grid_h,
            anchors,
            num_classes,
            values,
        }
    }

    /// Wrap an existing value tensor, checking its shape.
    pub fn from_values(
        grid_w: usize,
        grid_h: usize,
        anchors: Vec<(f64, f64)>,
        num_classes: usize,
        values: Vec<f64>,
    ) -> Result<Self, DetectError> {
        let expected = grid_w * grid_h * anchors.len() * Self::slot_len(num_classes);
        if values.len() != expected {
            return Err(DetectError::ShapeMismatch {
                grid_w,
                grid_h,
                expected,
                actual: values.len(),
            });
        }
        Ok(Self {
            grid_w,
            grid_h,
            anchors,
            num_classes,
            values,
        })
    }

    fn offset(&self, cell_y: usize, cell_x: usize, anchor: usize) -> usize {
        ((cell_y * self.grid_w + cell_x) * self.anchors.len() + anchor)
            * Self::slot_len(self.num_classes)
    }

    /// Raw tuple `(tx, ty, tw, th, t_obj, t_class..)` for one anchor slot.
    pub fn slot(&self, cell_y: usize, cell_x: usize, anchor: usize) -> &[f64] {
        let o = self.offset(cell_y, cell_x, anchor);
        &self.values[o..o + Self::slot_len(self.num_classes)]
    }

    pub fn slot_mut(&mut self, cell_y: usize, cell_x: usize, anchor: usize) -> &mut [f64] {
        let o = self.offset(cell_y, cell_x, anchor);
        let len = Self::slot_len(self.num_classes);
        &mut self.values[o..o + len]
    }

    fn is_inert_slot(slot: &[f64]) -> bool {
        slot[4] == INERT_OBJECTNESS
            && slot[..4].iter().all(|&v| v == 0.0)
            && slot[5..].iter().all(|&v| v == 0.0)
    }
}

/// Serialize a set of per-scale raw outputs as the line-oriented mock-backend
/// fixture format. Only non-inert slots are listed; floats use the shortest
/// round-trip representation so parsing reproduces them bit-exactly.
///
/// ```text
/// rawgrid v1
/// input_size 640
/// classes 2
/// scale 20 20 anchors 48x64 96x80 128x160
/// slot 0 10 10 0 0.0 0.0 0.0 0.0 5.0 9.0 -9.0
/// ```
///
/// `slot` fields are `scale_index cell_y cell_x anchor_index` followed by the
/// `5 + classes` raw values.
pub fn write_raw_grid_fixture<W: Write>(
    mut w: W,
    input_size: u32,
    grids: &[RawGridOutput],
) -> Result<(), DetectError> {
    let mut out = String::new();
    writeln!(out, "rawgrid v1").expect("string write");
    writeln!(out, "input_size {input_size}").expect("string write");
    let classes = grids.first().map_or(0, |g| g.num_classes);
    writeln!(out, "classes {classes}").expect("string write");
    for g in grids {
        write!(out, "scale {} {} anchors", g.grid_w, g.grid_h).expect("string write");
        for (aw, ah) in &g.anchors {
            write!(out, " {aw:?}x{ah:?}").expect("string write");
        }
        out.push('\n');
    }
    for (si, g) in grids.iter().enumerate() {
        for cy in 0..g.grid_h {
            for cx in 0..g.grid_w {
                for a in 0..g.anchors.len() {
                    let slot = g.slot(cy, cx, a);
                    if RawGridOutput::is_inert_slot(slot) {
                        continue;
                    }
                    write!(out, "slot {si} {cy} {cx} {a}").expect("string write");
                    for v in slot {
                        write!(out, " {v:?}").expect("string write");
                    }
                    out.push('\n');
                }
            }
        }
    }
    w.write_all(out.as_bytes())?;
    Ok(())
}

/// Parse the fixture format emitted by [`write_raw_grid_fixture`].
/// Returns the declared input size and the per-scale raw outputs.
pub fn read_raw_grid_fixture<R: Read>(r: R) -> Result<(u32, Vec<RawGridOutput>), DetectError> {
    let reader = BufReader::new(r);
    let bad = |line: usize, msg: &str| DetectError::FixtureFormat(format!("line {line}: {msg}"));

    let mut input_size: Option<u32> = None;
    let mut classes: Option<usize> = None;
    let mut grids: Vec<RawGridOutput> = Vec::new();

    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("rawgrid") => {
                if parts.next() != Some("v1") {
                    return Err(bad(lineno, "unsupported fixture version"));
                }
            }
            Some("input_size") => {
                let v = parts
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| bad(lineno, "expected `input_size <pixels>`"))?;
                input_size = Some(v);
            }
            Some("classes") => {
                let v = parts
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| bad(lineno, "expected `classes <count>`"))?;
                classes = Some(v);
            }
            Some("scale") => {
                let gw: usize = parts
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| bad(lineno, "expected `scale <w> <h> anchors ...`"))?;
                let gh: usize = parts
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| bad(lineno, "expected grid height"))?;
                if parts.next() != Some("anchors") {
                    return Err(bad(lineno, "expected `anchors` keyword"));
                }
                let mut anchors = Vec::new();
                for tok in parts {
                    let (aw, ah) = tok
                        .split_once('x')
                        .ok_or_else(|| bad(lineno, "anchor must be `WxH`"))?;
                    let aw: f64 = aw.parse().map_err(|_| bad(lineno, "bad anchor width"))?;
                    let ah: f64 = ah.parse().map_err(|_| bad(lineno, "bad anchor height"))?;
                    anchors.push((aw, ah));
                }
                if anchors.is_empty() {
                    return Err(bad(lineno, "scale declares no anchors"));
                }
                let nc = classes.ok_or_else(|| bad(lineno, "`classes` must precede `scale`"))?;
                grids.push(RawGridOutput::inert(gw, gh, anchors, nc));
            }
            Some("slot") => {
                let mut next_usize = |what: &str| -> Result<usize, DetectError> {
                    parts
                        .next()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| bad(lineno, what))
                };
                let si = next_usize("expected scale index")?;
                let cy = next_usize("expected cell y")?;
                let cx = next_usize("expected cell x")?;
                let a = next_usize("expected anchor index")?;
                let g = grids
                    .get_mut(si)
                    .ok_or_else(|| bad(lineno, "scale index out of range"))?;
                if cy >= g.grid_h || cx >= g.grid_w || a >= g.anchors.len() {
                    return Err(bad(lineno, "slot coordinates out of range"));
                }
                let values: Result<Vec<f64>, _> = parts.map(str::parse::<f64>).collect();
                let values = values.map_err(|_| bad(lineno, "bad slot value"))?;
                let expected = RawGridOutput::slot_len(g.num_classes);
                if values.len() != expected {
                    return Err(bad(
                        lineno,
                        &format!("slot has {} values, expected {expected}", values.len()),
                    ));
                }
                g.slot_mut(cy, cx, a).copy_from_slice(&values);
            }
            Some(other) => return Err(bad(lineno, &format!("unknown directive `{other}`"))),
            None => {}
        }
    }

    let input_size = input_size
        .ok_or_else(|| DetectError::FixtureFormat("missing `input_size` header".into()))?;
    Ok((input_size, grids))
}
