use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("handshake parity violated: n = {n}, degree = {degree} has odd product")]
    Parity { n: usize, degree: usize },

    #[error("invalid graph parameters: {0}")]
    InvalidGraphParams(String),

    #[error("no simple connected graph after {attempts} attempts")]
    GenerationFailed { attempts: usize },

    #[error("vertex {vertex} out of range for graph with {n} vertices")]
    InvalidVertex { vertex: usize, n: usize },

    #[error("vertices {x} and {y} are not connected")]
    Disconnected { x: usize, y: usize },

    #[error("malformed graph: {0}")]
    MalformedGraph(String),

    #[error("edge-list parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("unsupported disorder family `{0}`")]
    UnsupportedFamily(String),

    #[error("invalid disorder specification: {0}")]
    InvalidDisorder(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("empty support set")]
    EmptySupport,

    #[error("eigensolver failed to converge at index {index} after {iterations} iterations")]
    NoConvergence { index: usize, iterations: usize },

    #[error("eigen residual {residual:.3e} exceeds tolerance {bound:.3e}")]
    Inaccurate { residual: f64, bound: f64 },

    #[error("linear solve failed: {0}")]
    SolveFailed(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("envelope violated at vertex {vertex}: |phi| = {value:.3e} exceeds bound {bound:.3e}")]
    EnvelopeViolated { vertex: usize, value: f64, bound: f64 },

    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("degenerate regression design: {0}")]
    DegenerateDesign(String),

    #[error("invalid schedule: {0}")]
    Schedule(String),

    #[error("missing pair estimate for ({x}, {y})")]
    MissingPair { x: usize, y: usize },

    #[error("vertex {vertex}: {source}")]
    AtVertex {
        vertex: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("realization {index}: {source}")]
    AtRealization {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn at_vertex(vertex: usize) -> impl FnOnce(Error) -> Error {
        move |e| Error::AtVertex {
            vertex,
            source: Box::new(e),
        }
    }

    pub(crate) fn at_realization(index: usize) -> impl FnOnce(Error) -> Error {
        move |e| Error::AtRealization {
            index,
            source: Box::new(e),
        }
    }
}
