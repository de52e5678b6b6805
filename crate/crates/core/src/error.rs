use alloc::string::String;

use crate::tensor::Shape;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in {op}: expected {expected}, got {got}")]
    Shape {
        op: &'static str,
        expected: Shape,
        got: Shape,
    },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("non-finite {component} at step {step}")]
    NonFinite { component: &'static str, step: u64 },
    #[error("degenerate calibration: mean {stream} patch score on training data is zero")]
    DegenerateCalibration { stream: &'static str },
    #[error("undefined metric: {0}")]
    Undefined(&'static str),
}

impl Error {
    pub(crate) fn shape(op: &'static str, expected: Shape, got: Shape) -> Self {
        Error::Shape { op, expected, got }
    }
}
