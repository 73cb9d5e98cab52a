use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("tensor contains non-finite values")]
    NonFiniteData,
    #[error("pixel values must lie in [0, 1]")]
    PixelOutOfRange,
    #[error("bad dimensions: {0}")]
    BadDims(String),
    #[error("blur kernel must be odd and >= 3, got {0}")]
    BadKernel(usize),
    #[error("k = {k} outside [0, {max}]")]
    BadK { k: usize, max: usize },
    #[error("confidence must be in (0, 1], got {0}")]
    BadP(f64),
    #[error("beta must be in [0, 1], got {0}")]
    BadBeta(f64),
    #[error("oracle does not expose gradients")]
    NoGradient,
    #[error("class {class} has {available} images, {required} required")]
    ClassTooSmall {
        class: usize,
        available: usize,
        required: usize,
    },
    #[error("reference confidence is zero")]
    ZeroConfidence,
    #[error("correlation needs at least 2 steps, got {0}")]
    TooFewSteps(usize),
    #[error("expected disagreement is zero: all values identical")]
    DegenerateData,
    #[error("sample too small: {0}")]
    SampleTooSmall(String),
    #[error("sample is constant")]
    ConstantSample,
    #[error("best method is tied")]
    TiedBest,
    #[error("no benchmark size reaches the target probability (P_N = {p_full})")]
    NoSolution { p_full: f64 },
    #[error("1/p_samp must be a positive integer, got p_samp = {0}")]
    NonIntegralStep(f64),
    #[error("need at least {bins} samples, got {n}")]
    TooFewSamples { n: usize, bins: usize },
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("oracle failure: {0}")]
    Oracle(String),
    #[error("image {image}, method {method}: {source}")]
    Cell {
        image: String,
        method: String,
        #[source]
        source: alloc::boxed::Box<Error>,
    },
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
