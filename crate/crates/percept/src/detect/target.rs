//! Ground-truth-to-grid assignment used by training: each box lands in the
//! cell containing its center, at every scale, under the best-matching anchor.

use super::decode::size_iou;
use super::grid::GridSpec;
use crate::dataset::GroundTruthBox;

/// One assigned ground-truth box inside a grid cell. Offsets are the center
/// position within the cell in [0, 1); width/height are normalized image
/// fractions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellAssignment {
    pub class_index: usize,
    pub offset_x: f64,
    pub offset_y: f64,
    pub width: f64,
    pub height: f64,
}

impl CellAssignment {
    /// Reconstruct the normalized box corners for a slot at `(cell_x, cell_y)`
    /// on a `grid_w x grid_h` grid.
    pub fn to_box(
        &self,
        cell_x: usize,
        cell_y: usize,
        grid_w: usize,
        grid_h: usize,
    ) -> (f64, f64, f64, f64) {
        let cx = (cell_x as f64 + self.offset_x) / grid_w as f64;
        let cy = (cell_y as f64 + self.offset_y) / grid_h as f64;
        (
            cx - self.width / 2.0,
            cy - self.height / 2.0,
            cx + self.width / 2.0,
            cy + self.height / 2.0,
        )
    }
}

/// Assignments for one scale, indexed by `(cell_y, cell_x, anchor)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleTargets {
    pub grid_w: usize,
    pub grid_h: usize,
    pub num_anchors: usize,
    cells: Vec<Option<CellAssignment>>,
}

impl ScaleTargets {
    fn empty(grid_w: usize, grid_h: usize, num_anchors: usize) -> Self {
        Self {
            grid_w,
            grid_h,
            num_anchors,
            cells: vec![None; grid_w * grid_h * num_anchors],
        }
    }

    fn index(&self, cell_y: usize, cell_x: usize, anchor: usize) -> usize {
        (cell_y * self.grid_w + cell_x) * self.num_anchors + anchor
    }

    pub fn get(&self, cell_y: usize, cell_x: usize, anchor: usize) -> Option<&CellAssignment> {
        self.cells[self.index(cell_y, cell_x, anchor)].as_ref()
    }

    pub fn set(&mut self, cell_y: usize, cell_x: usize, anchor: usize, value: CellAssignment) {
        let i = self.index(cell_y, cell_x, anchor);
        self.cells[i] = Some(value);
    }

    /// Iterate over assigned slots as `(cell_y, cell_x, anchor, assignment)`.
    pub fn assigned(&self) -> impl Iterator<Item = (usize, usize, usize, &CellAssignment)> {
        self.cells.iter().enumerate().filter_map(|(i, c)| {
            c.as_ref().map(|a| {
                let anchor = i % self.num_anchors;
                let cell = i / self.num_anchors;
                (cell / self.grid_w, cell % self.grid_w, anchor, a)
            })
        })
    }

    pub fn assigned_count(&self) -> usize {
        self.cells.iter().filter(|c| c.is_some()).count()
    }

    pub fn slot_count(&self) -> usize {
        self.cells.len()
    }
}

/// Per-scale target grids for one image's ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetGrid {
    pub scales: Vec<ScaleTargets>,
}

/// Assign every ground-truth box to the cell containing its center at each
/// scale, under the anchor with the best width/height IoU at that scale.
///
/// Centers landing exactly on a cell boundary belong to the higher cell.
/// Boxes colliding on the same `(cell, anchor)` slot follow the last-writer
/// rule, so callers wanting every box represented must keep centers distinct.
pub fn assign_targets(boxes: &[GroundTruthBox], spec: &GridSpec) -> TargetGrid {
    let input = f64::from(spec.input_size);
    let scales = spec
        .scales
        .iter()
        .map(|scale| {
            let mut targets = ScaleTargets::empty(scale.grid_w, scale.grid_h, scale.anchors.len());
            for b in boxes {
                let center_x = (b.x_min + b.x_max) / 2.0;
                let center_y = (b.y_min + b.y_max) / 2.0;
                let gx = center_x * scale.grid_w as f64;
                let gy = center_y * scale.grid_h as f64;
                let cell_x = (gx.floor() as usize).min(scale.grid_w - 1);
                let cell_y = (gy.floor() as usize).min(scale.grid_h - 1);

                let w_px = (b.x_max - b.x_min) * input;
                let h_px = (b.y_max - b.y_min) * input;
                let anchor = scale
                    .anchors
                    .iter()
                    .enumerate()
                    .max_by(|(_, a), (_, c)| {
                        size_iou(w_px, h_px, a.0, a.1)
                            .partial_cmp(&size_iou(w_px, h_px, c.0, c.1))
                            .unwrap_or(std::cmp::Ordering::Equal)
                    })
                    .map(|(i, _)| i)
                    .unwrap_or(0);

                targets.set(
                    cell_y,
                    cell_x,
                    anchor,
                    CellAssignment {
                        class_index: b.class_index,
                        offset_x: gx - cell_x as f64,
                        offset_y: gy - cell_y as f64,
                        width: b.x_max - b.x_min,
                        height: b.y_max - b.y_min,
                    },
                );
            }
            targets
        })
        .collect();
    TargetGrid { scales }
}
