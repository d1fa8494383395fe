//! Leaf disease classification: synthetic or loaded datasets, stratified
//! split, augmentation, a small CNN with a freezable backbone, evaluation and
//! reporting to the greenhouse telemetry.

pub mod augment;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod imaging;
pub mod model;
pub mod publish;
pub mod sessions;
pub mod split;
pub mod synth;
pub mod train;

pub use error::VisionError;
pub use eval::{evaluate, EvalReport};
pub use imaging::LabeledImage;
pub use model::{Architecture, ClassifierModel, Prediction};
pub use split::{split, DatasetSplit};
pub use train::{train, TrainConfig, TrainReport};
