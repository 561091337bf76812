//! Training mathematics: plain and momentum SGD over flat parameter vectors,
//! empirical risk, the box/object/class loss decomposition, and a toy
//! differentiable model that verifies the update rules end to end.
//!
//! The momentum update keeps a velocity alongside the weights:
//! `v' = alpha * v - eta * grad`, `w' = w + v'`. With `alpha = 0` the step is
//! computed exactly as the plain rule `w' = w - eta * grad`, so the two paths
//! are bit-compatible.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::detect::{iou, sigmoid, BoundingBox, RawGridOutput, TargetGrid};

/// Logit clamp applied before every binary cross-entropy evaluation, keeping
/// losses finite under saturated mock inputs.
pub const BCE_LOGIT_CLAMP: f64 = 15.0;

#[derive(Debug, Error)]
pub enum OptimError {
    #[error("gradient has {grad} entries, parameters have {params}")]
    DimensionMismatch { grad: usize, params: usize },
    #[error("non-finite gradient entry at index {0}")]
    NonFiniteGradient(usize),
    #[error("empirical risk of an empty sample list is undefined")]
    EmptySamples,
    #[error("non-finite sample loss at index {0}")]
    NonFiniteSample(usize),
    #[error("learning rate must be positive, got {0}")]
    BadLearningRate(f64),
    #[error("momentum must lie in [0, 1], got {0}")]
    BadMomentum(f64),
    #[error("batch size must be at least 1")]
    BadBatchSize,
    #[error("prediction and target grids disagree: {0}")]
    GeometryMismatch(String),
    #[error("epochs must be at least 1")]
    BadEpochs,
}

/// Flat weight vector paired with its momentum velocity and an optional
/// freeze mask. Frozen entries and their velocities never change, which is
/// how a frozen-backbone configuration is modeled.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    weights: Vec<f64>,
    velocity: Vec<f64>,
    frozen: Vec<bool>,
}

impl ParamVector {
    pub fn new(weights: Vec<f64>) -> Self {
        let n = weights.len();
        Self {
            weights,
            velocity: vec![0.0; n],
            frozen: vec![false; n],
        }
    }

    /// Replace the freeze mask. Must match the parameter length.
    pub fn with_frozen(mut self, frozen: Vec<bool>) -> Self {
        assert_eq!(frozen.len(), self.weights.len());
        self.frozen = frozen;
        self
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn velocity(&self) -> &[f64] {
        &self.velocity
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Step hyperparameters: learning rate, momentum decay, and batch size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
}

impl Default for OptimizerConfig {
    /// Conventional operating point: learning rate 0.01, momentum 0.9, and
    /// samples aggregated into batches of 32.
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            momentum: 0.9,
            batch_size: 32,
        }
    }
}

impl OptimizerConfig {
    pub fn new(learning_rate: f64, momentum: f64, batch_size: usize) -> Result<Self, OptimError> {
        if learning_rate <= 0.0 || !learning_rate.is_finite() {
            return Err(OptimError::BadLearningRate(learning_rate));
        }
        if !(0.0..=1.0).contains(&momentum) {
            return Err(OptimError::BadMomentum(momentum));
        }
        if batch_size == 0 {
            return Err(OptimError::BadBatchSize);
        }
        Ok(Self {
            learning_rate,
            momentum,
            batch_size,
        })
    }
}

fn check_gradient(params: &ParamVector, grad: &[f64]) -> Result<(), OptimError> {
    if grad.len() != params.weights.len() {
        return Err(OptimError::DimensionMismatch {
            grad: grad.len(),
            params: params.weights.len(),
        });
    }
    if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
        return Err(OptimError::NonFiniteGradient(i));
    }
    Ok(())
}

/// Plain gradient step: `w' = w - eta * grad`. Velocity is left untouched.
pub fn sgd_step(
    params: &mut ParamVector,
    grad: &[f64],
    config: &OptimizerConfig,
) -> Result<(), OptimError> {
    check_gradient(params, grad)?;
    #[allow(clippy::needless_range_loop)]
    for i in 0..params.weights.len() {
        if params.frozen[i] {
            continue;
        }
        params.weights[i] -= config.learning_rate * grad[i];
    }
    Ok(())
}

/// Momentum step: `v' = momentum * v - eta * grad`, `w' = w + v'`.
///
/// With `momentum == 0` the weight update is evaluated exactly as
/// [`sgd_step`] evaluates it, so the two functions agree bit for bit.
pub fn sgd_momentum_step(
    params: &mut ParamVector,
    grad: &[f64],
    config: &OptimizerConfig,
) -> Result<(), OptimError> {
    check_gradient(params, grad)?;
    let eta = config.learning_rate;
    #[allow(clippy::needless_range_loop)]
    for i in 0..params.weights.len() {
        if params.frozen[i] {
            continue;
        }
        if config.momentum == 0.0 {
            params.velocity[i] = -(eta * grad[i]);
            params.weights[i] -= eta * grad[i];
        } else {
            params.velocity[i] = config.momentum * params.velocity[i] - eta * grad[i];
            params.weights[i] += params.velocity[i];
        }
    }
    Ok(())
}

/// Arithmetic mean of per-sample losses.
pub fn empirical_risk(sample_losses: &[f64]) -> Result<f64, OptimError> {
    if sample_losses.is_empty() {
        return Err(OptimError::EmptySamples);
    }
    if let Some(i) = sample_losses.iter().position(|l| !l.is_finite()) {
        return Err(OptimError::NonFiniteSample(i));
    }
    Ok(sample_losses.iter().sum::<f64>() / sample_losses.len() as f64)
}

/// The three-way training loss decomposition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossTriple {
    pub box_loss: f64,
    pub object_loss: f64,
    pub class_loss: f64,
}

/// One decoded anchor slot viewed by the loss: a normalized box plus raw
/// objectness and class logits.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotPrediction {
    /// Box in normalized coordinates, same space as the target grid.
    pub box_: BoundingBox,
    pub objectness_logit: f64,
    pub class_logits: Vec<f64>,
}

/// Dense per-slot predictions for one scale.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalePredictions {
    pub grid_w: usize,
    pub grid_h: usize,
    pub num_anchors: usize,
    pub num_classes: usize,
    slots: Vec<SlotPrediction>,
}

impl ScalePredictions {
    pub fn slot(&self, cell_y: usize, cell_x: usize, anchor: usize) -> &SlotPrediction {
        &self.slots[(cell_y * self.grid_w + cell_x) * self.num_anchors + anchor]
    }

    pub fn slots(&self) -> &[SlotPrediction] {
        &self.slots
    }
}

/// Per-scale decoded predictions mirroring a [`TargetGrid`]'s geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionGrid {
    pub scales: Vec<ScalePredictions>,
}

impl PredictionGrid {
    /// Decode raw outputs into normalized-coordinate slot predictions. The
    /// box math matches the detection decode; logits pass through untouched.
    pub fn from_raw(raw: &[RawGridOutput], input_size: u32) -> Self {
        let input = f64::from(input_size);
        let scales = raw
            .iter()
            .map(|grid| {
                let mut slots = Vec::with_capacity(
                    grid.grid_w * grid.grid_h * grid.anchors.len(),
                );
                for cell_y in 0..grid.grid_h {
                    for cell_x in 0..grid.grid_w {
                        for (a, &(anchor_w, anchor_h)) in grid.anchors.iter().enumerate() {
                            let t = grid.slot(cell_y, cell_x, a);
                            let cx = (sigmoid(t[0]) + cell_x as f64) / grid.grid_w as f64;
                            let cy = (sigmoid(t[1]) + cell_y as f64) / grid.grid_h as f64;
                            let w = anchor_w * t[2].clamp(-10.0, 10.0).exp() / input;
                            let h = anchor_h * t[3].clamp(-10.0, 10.0).exp() / input;
                            slots.push(SlotPrediction {
                                box_: BoundingBox::new(
                                    cx - w / 2.0,
                                    cy - h / 2.0,
                                    cx + w / 2.0,
                                    cy + h / 2.0,
                                ),
                                objectness_logit: t[4],
                                class_logits: t[5..].to_vec(),
                            });
                        }
                    }
                }
                ScalePredictions {
                    grid_w: grid.grid_w,
                    grid_h: grid.grid_h,
                    num_anchors: grid.anchors.len(),
                    num_classes: grid.num_classes,
                    slots,
                }
            })
            .collect();
        Self { scales }
    }

    /// Saturated predictions that reproduce a target grid exactly: assigned
    /// slots carry the target box with +clamp logits on objectness and the
    /// true class, everything else at -clamp.
    pub fn from_targets(targets: &TargetGrid, num_classes: usize) -> Self {
        let scales = targets
            .scales
            .iter()
            .map(|scale| {
                let mut slots =
                    Vec::with_capacity(scale.grid_w * scale.grid_h * scale.num_anchors);
                for cell_y in 0..scale.grid_h {
                    for cell_x in 0..scale.grid_w {
                        for anchor in 0..scale.num_anchors {
                            let slot = match scale.get(cell_y, cell_x, anchor) {
                                Some(t) => {
                                    let (x_min, y_min, x_max, y_max) =
                                        t.to_box(cell_x, cell_y, scale.grid_w, scale.grid_h);
                                    let mut class_logits = vec![-BCE_LOGIT_CLAMP; num_classes];
                                    class_logits[t.class_index] = BCE_LOGIT_CLAMP;
                                    SlotPrediction {
                                        box_: BoundingBox::new(x_min, y_min, x_max, y_max),
                                        objectness_logit: BCE_LOGIT_CLAMP,
                                        class_logits,
                                    }
                                }
                                None => SlotPrediction {
                                    box_: BoundingBox::new(0.0, 0.0, 0.0, 0.0),
                                    objectness_logit: -BCE_LOGIT_CLAMP,
                                    class_logits: vec![-BCE_LOGIT_CLAMP; num_classes],
                                },
                            };
                            slots.push(slot);
                        }
                    }
                }
                ScalePredictions {
                    grid_w: scale.grid_w,
                    grid_h: scale.grid_h,
                    num_anchors: scale.num_anchors,
                    num_classes,
                    slots,
                }
            })
            .collect();
        Self { scales }
    }
}

/// Numerically stable binary cross-entropy from a logit, after clamping the
/// logit to `+-BCE_LOGIT_CLAMP`.
fn bce_from_logit(logit: f64, label: f64) -> f64 {
    let z = logit.clamp(-BCE_LOGIT_CLAMP, BCE_LOGIT_CLAMP);
    z.max(0.0) - z * label + (-z.abs()).exp().ln_1p()
}

/// Box, object, and class losses of a prediction grid against a target grid.
///
/// * box: mean `1 - IoU(pred, target)` over assigned slots;
/// * object: mean BCE of objectness against the assignment indicator over
///   every slot of every scale;
/// * class: mean (over assigned slots) of the mean per-class BCE against the
///   one-hot target.
///
/// A term whose denominator set is empty is 0.
pub fn detection_loss(
    predictions: &PredictionGrid,
    targets: &TargetGrid,
) -> Result<LossTriple, OptimError> {
    if predictions.scales.len() != targets.scales.len() {
        return Err(OptimError::GeometryMismatch(format!(
            "{} prediction scales vs {} target scales",
            predictions.scales.len(),
            targets.scales.len()
        )));
    }

    let mut box_sum = 0.0;
    let mut box_n = 0usize;
    let mut obj_sum = 0.0;
    let mut obj_n = 0usize;
    let mut class_sum = 0.0;
    let mut class_n = 0usize;

    for (pred, target) in predictions.scales.iter().zip(&targets.scales) {
        if pred.grid_w != target.grid_w
            || pred.grid_h != target.grid_h
            || pred.num_anchors != target.num_anchors
        {
            return Err(OptimError::GeometryMismatch(format!(
                "{}x{}x{} predictions vs {}x{}x{} targets",
                pred.grid_w, pred.grid_h, pred.num_anchors,
                target.grid_w, target.grid_h, target.num_anchors
            )));
        }
        for cell_y in 0..pred.grid_h {
            for cell_x in 0..pred.grid_w {
                for anchor in 0..pred.num_anchors {
                    let p = pred.slot(cell_y, cell_x, anchor);
                    let assignment = target.get(cell_y, cell_x, anchor);

                    let indicator = if assignment.is_some() { 1.0 } else { 0.0 };
                    obj_sum += bce_from_logit(p.objectness_logit, indicator);
                    obj_n += 1;

                    if let Some(t) = assignment {
                        if t.class_index >= p.class_logits.len() {
                            return Err(OptimError::GeometryMismatch(format!(
                                "target class {} outside {} prediction classes",
                                t.class_index,
                                p.class_logits.len()
                            )));
                        }
                        let (x_min, y_min, x_max, y_max) =
                            t.to_box(cell_x, cell_y, target.grid_w, target.grid_h);
                        let target_box = BoundingBox::new(x_min, y_min, x_max, y_max);
                        box_sum += 1.0 - iou(&p.box_, &target_box);
                        box_n += 1;

                        let per_class: f64 = p
                            .class_logits
                            .iter()
                            .enumerate()
                            .map(|(k, &z)| {
                                bce_from_logit(z, if k == t.class_index { 1.0 } else { 0.0 })
                            })
                            .sum();
                        class_sum += per_class / p.class_logits.len() as f64;
                        class_n += 1;
                    }
                }
            }
        }
    }

    let mean = |sum: f64, n: usize| if n == 0 { 0.0 } else { sum / n as f64 };
    Ok(LossTriple {
        box_loss: mean(box_sum, box_n),
        object_loss: mean(obj_sum, obj_n),
        class_loss: mean(class_sum, class_n),
    })
}

/// A model exposing loss and analytic gradient over a flat weight vector,
/// enough to drive the optimizer on labeled `(x, y)` pairs.
pub trait DifferentiableModel {
    fn num_params(&self) -> usize;
    fn loss(&self, weights: &[f64], batch: &[(f64, f64)]) -> f64;
    fn gradient(&self, weights: &[f64], batch: &[(f64, f64)]) -> Vec<f64>;
}

/// One-dimensional least squares `y = w * x + b` under mean squared error.
#[derive(Debug, Clone, Copy, Default)]
pub struct LeastSquaresModel;

impl LeastSquaresModel {
    /// Closed-form minimizer `(w, b)` from the normal equations.
    pub fn closed_form(data: &[(f64, f64)]) -> (f64, f64) {
        let n = data.len() as f64;
        let sx: f64 = data.iter().map(|(x, _)| x).sum();
        let sy: f64 = data.iter().map(|(_, y)| y).sum();
        let sxx: f64 = data.iter().map(|(x, _)| x * x).sum();
        let sxy: f64 = data.iter().map(|(x, y)| x * y).sum();
        let denom = n * sxx - sx * sx;
        let w = (n * sxy - sx * sy) / denom;
        let b = (sy - w * sx) / n;
        (w, b)
    }
}

impl DifferentiableModel for LeastSquaresModel {
    fn num_params(&self) -> usize {
        2
    }

    fn loss(&self, weights: &[f64], batch: &[(f64, f64)]) -> f64 {
        let (w, b) = (weights[0], weights[1]);
        batch
            .iter()
            .map(|&(x, y)| {
                let r = w * x + b - y;
                r * r
            })
            .sum::<f64>()
            / batch.len() as f64
    }

    fn gradient(&self, weights: &[f64], batch: &[(f64, f64)]) -> Vec<f64> {
        let (w, b) = (weights[0], weights[1]);
        let n = batch.len() as f64;
        let mut gw = 0.0;
        let mut gb = 0.0;
        for &(x, y) in batch {
            let r = w * x + b - y;
            gw += 2.0 * r * x;
            gb += 2.0 * r;
        }
        vec![gw / n, gb / n]
    }
}

/// Run seeded mini-batch momentum SGD for `epochs` passes over `data`,
/// returning the full-dataset loss recorded at the end of each epoch.
pub fn train_toy<M: DifferentiableModel>(
    model: &M,
    data: &[(f64, f64)],
    params: &mut ParamVector,
    config: &OptimizerConfig,
    epochs: usize,
    seed: u64,
) -> Result<Vec<f64>, OptimError> {
    if epochs == 0 {
        return Err(OptimError::BadEpochs);
    }
    if data.is_empty() {
        return Err(OptimError::EmptySamples);
    }
    debug_assert_eq!(params.len(), model.num_params());

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut history = Vec::with_capacity(epochs);
    let mut indices: Vec<usize> = (0..data.len()).collect();

    for _ in 0..epochs {
        indices.shuffle(&mut rng);
        for batch_indices in indices.chunks(config.batch_size) {
            let batch: Vec<(f64, f64)> = batch_indices.iter().map(|&i| data[i]).collect();
            let grad = model.gradient(params.weights(), &batch);
            sgd_momentum_step(params, &grad, config)?;
        }
        let epoch_loss = model.loss(params.weights(), data);
        if !epoch_loss.is_finite() {
            return Err(OptimError::NonFiniteSample(history.len()));
        }
        history.push(epoch_loss);
    }
    Ok(history)
}

/// One row of the loss-history CSV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub box_loss: f64,
    pub object_loss: f64,
    pub class_loss: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Emit `epoch,box_loss,object_loss,class_loss,precision,recall` rows.
pub fn write_loss_history<W: Write>(mut w: W, rows: &[EpochRecord]) -> std::io::Result<()> {
    writeln!(w, "epoch,box_loss,object_loss,class_loss,precision,recall")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.epoch, r.box_loss, r.object_loss, r.class_loss, r.precision, r.recall
        )?;
    }
    Ok(())
}
