//! Presentation-attack detection instruments: image-quality-measure based
//! face PAD and a one-class GMM voice PAD.

pub mod face;
pub mod iqm;
pub mod voice;

use thiserror::Error;

use crate::audio::AudioError;
use crate::gmm::GmmError;

#[derive(Debug, Error)]
pub enum PadError {
    #[error("image dimension mismatch: {a_w}x{a_h} vs {b_w}x{b_h}")]
    DimensionMismatch {
        a_w: usize,
        a_h: usize,
        b_w: usize,
        b_h: usize,
    },
    #[error("training data contains a single class")]
    SingleClassData,
    #[error("too few training examples: class {class} has {got}, need {needed}")]
    TooFewExamples {
        class: &'static str,
        got: usize,
        needed: usize,
    },
    #[error("no frames to classify")]
    EmptyInput,
    #[error("front-end digest mismatch: model trained with a different configuration")]
    DigestMismatch,
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error(transparent)]
    Gmm(#[from] GmmError),
}
