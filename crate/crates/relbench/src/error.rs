use std::path::PathBuf;
use std::time::Duration;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] relbench_core::Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed TNSR header: {0}")]
    MalformedHeader(String),
    #[error("{}: {msg}", path.display())]
    Manifest { path: PathBuf, msg: String },
    #[error("sample too small: {0}")]
    SampleTooSmall(String),
    #[error("sample is constant")]
    ConstantSample,
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error("scoring bridge did not answer within {0:?}")]
    BridgeTimeout(Duration),
    #[error("scoring bridge protocol violation: {0}")]
    ProtocolViolation(String),
    #[error("scoring bridge returned a vector summing to {sum} for request {id}")]
    NonStochasticVector { id: u64, sum: f64 },
    #[error("configuration: {0}")]
    Config(String),
    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// 1 for problems with the user's input, 2 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Stage { source, .. } => source.exit_code(),
            Error::Io { .. } | Error::Manifest { .. } | Error::Config(_) | Error::MalformedHeader(_) => 1,
            Error::Core(
                relbench_core::Error::Invalid(_)
                | relbench_core::Error::BadDims(_)
                | relbench_core::Error::DimMismatch(_)
                | relbench_core::Error::ClassTooSmall { .. }
                | relbench_core::Error::NoGradient,
            ) => 1,
            _ => 2,
        }
    }
}

/// Attaches a stage name to errors from a pipeline step.
pub trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T, E: Into<Error>> StageExt<T> for std::result::Result<T, E> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| Error::Stage {
            stage,
            source: Box::new(e.into()),
        })
    }
}
