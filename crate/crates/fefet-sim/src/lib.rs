//! Temperature- and variation-aware simulator for ferroelectric-FinFET
//! crossbar inference.
//!
//! The pipeline trains a quantized-weight MLP in software, maps the weights
//! onto differential Fe-FinFET pairs through a compact device model, and
//! measures inference accuracy across junction temperatures and read
//! biases without retraining.

pub mod checkpoint;
pub mod config;
pub mod crossbar;
pub mod data;
pub mod device;
pub mod experiments;
pub mod network;
pub mod report;
pub mod rng;

pub use config::RunConfig;
pub use device::{GateStackId, GateStackParams, OperatingPoint};
pub use experiments::{AccuracyReport, BiasMode, SensingMode, SweepConfig};
pub use network::{MLPModel, TrainConfig};
