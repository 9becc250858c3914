//! Differentially private SGD with dynamic noise, Gaussian random projection
//! and automatic per-sample clipping, plus a Rényi-divergence accountant.
//!
//! Modules map onto the stages of one optimizer step:
//! [`model`] evaluates per-sample gradients, [`clip`] normalizes them,
//! [`project`] and [`noise`] privatize the averaged gradient, [`accountant`]
//! tracks the composed privacy loss and [`optimizer`] ties it together.

pub mod accountant;
pub mod clip;
pub mod error;
pub mod model;
pub mod noise;
pub mod optimizer;
pub mod project;
pub mod rng;

pub use accountant::{MechanismParams, PrivacyLedger};
pub use clip::{ClipConfig, ClipMode};
pub use error::{Error, Result};
pub use model::{Dataset, Objective, ParamVector};
pub use noise::{NoiseSchedule, ScheduleMode};
pub use optimizer::{train, EpochMetrics, MetricsSeries, OptimizerConfig, Trainer, Variant};
pub use project::{ProjectionMode, ProjectionOperator};
