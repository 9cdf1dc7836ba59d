use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Input with no meaningful answer (all-zero operator, empty stack, ...).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// A linear system whose 1-norm condition estimate exceeds the guard.
    #[error("singular matrix (condition estimate {cond:.3e})")]
    SingularMatrix { cond: f64 },

    #[error("singular network: {0}")]
    SingularNetwork(String),

    /// `I - Θ` is singular, so no finite impedance matrix exists.
    #[error("open-circuit degenerate scattering matrix: I - Θ is singular")]
    OpenCircuit,

    #[error("singular branch: {0}")]
    SingularBranch(String),

    #[error("rank-deficient channel matrix at BS {bs}")]
    DegenerateChannel { bs: usize },

    #[error("invalid group assignment: {0}")]
    InvalidAssignment(String),

    #[error("group {group}: {source}")]
    InGroup {
        group: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn in_group(self, group: usize) -> Error {
        Error::InGroup {
            group,
            source: Box::new(self),
        }
    }

    /// True when the error (or its wrapped cause) is a rank-deficient channel draw.
    pub fn is_degenerate_channel(&self) -> bool {
        match self {
            Error::DegenerateChannel { .. } => true,
            Error::InGroup { source, .. } => source.is_degenerate_channel(),
            _ => false,
        }
    }
}
