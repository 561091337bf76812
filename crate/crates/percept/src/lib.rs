//! Desk-scale assistive-perception pipeline.
//!
//! The crate covers the deterministic, testable parts of a wearable vision
//! assistant; neural inference is isolated behind pluggable backends so every
//! formula downstream of a network stays independently verifiable.
//!
//! * [`dataset`] — detection manifests: loading, validation, seeded splits.
//! * [`detect`] — letterbox geometry, multi-scale grid decode, NMS, and
//!   ground-truth target assignment.
//! * [`optim`] — SGD with and without momentum, empirical risk, the
//!   box/object/class loss decomposition, and a toy training loop.
//! * [`metrics`] — precision, recall, per-class AP, mAP, confusion matrices.
//! * [`face`] — embedding enrollment and two-backend fused identification.
//! * [`currency`] — denomination classification behind a backend, plus the
//!   classification metrics report.
//! * [`orchestrator`] — the wearable's event loop: triggers, branch dispatch,
//!   prioritized audio-text feedback, and turn-by-turn navigation.
//! * [`mock`] — deterministic stand-ins for every backend.
//!
//! The `percept` binary exposes each stage as a subcommand; the `examples/`
//! directory holds one runnable walkthrough per capability.

pub mod baseline;
pub mod cli;
pub mod currency;
pub mod dataset;
pub mod detect;
pub mod face;
pub mod metrics;
pub mod mock;
pub mod optim;
pub mod orchestrator;
pub mod synthetic;
