//! Command-line pipeline: synthetic data, derived datasets, baseline
//! scoring, fusion and cross-validated evaluation.

pub mod app;
pub mod config;
pub mod derive;
pub mod evaluate;
pub mod score;
pub mod synth;
pub mod tools;
pub mod util;
