use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value at index {index}")]
    InvalidValue { index: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("mask covers {masked} pixel(s); at least {required} required")]
    DegenerateMask { masked: usize, required: usize },

    #[error("initialization image must cover the whole canvas")]
    MaskNotFull,

    #[error("invalid weight at pixel {index}: weights must be finite and > 0 inside the mask")]
    InvalidWeight { index: usize },

    #[error("degenerate quad: {0}")]
    DegenerateQuad(&'static str),

    #[error("need at least 4 stars, got {0}")]
    TooFewStars(usize),

    #[error("state file format error: {0}")]
    Format(String),

    #[error("state integrity error: {0}")]
    Integrity(String),

    #[error("cannot decode {path}: {reason}")]
    Decode { path: PathBuf, reason: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("no registration found for {0}")]
    Unregistered(String),

    #[error("no input image survived registration")]
    EmptyRun,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
