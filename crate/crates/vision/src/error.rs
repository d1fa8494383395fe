use thiserror::Error;

#[derive(Debug, Error)]
pub enum VisionError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("image format: {0}")]
    Format(String),
    #[error("dataset: {0}")]
    Dataset(String),
    #[error("input is {got:?}, model expects {expected:?}")]
    Dimension { expected: (usize, usize), got: (usize, usize) },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("non-finite loss at epoch {epoch}, batch {batch} (gradient norm {grad_norm})")]
    NonFinite { epoch: usize, batch: usize, grad_norm: f64 },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}
