//! Saliency detection, zoning, score fusion and grouped evaluation for
//! FSCV dopamine-release color plots.

pub mod baseline;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod fusion;
pub mod imaging;
pub mod region;
pub mod saliency;
pub mod synth;

pub use dataset::{Background, Label, MethodId, SampleRecord};
pub use error::{Error, Result};
pub use fusion::{DetectionBox, EnsembleConfig, ScoreVector};
pub use imaging::{BinaryMask, ImageMatrix, SaliencyMap};
