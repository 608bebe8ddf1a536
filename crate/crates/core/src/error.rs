use thiserror::Error;

/// Errors raised by the numerical engine.
///
/// Singular determinants are not errors (they are reported through
/// [`crate::fredholm::DetResult::singular`]); only conditions that make a
/// requested quantity undefined end up here.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("kernel returned a non-finite value {value} at node pair ({i}, {j}) = ({x}, {y})")]
    NonFiniteKernel {
        i: usize,
        j: usize,
        x: f64,
        y: f64,
        value: f64,
    },

    #[error(
        "I + A is singular on the grid (pivot {pivot}); the correction operator is not \
         invertible, equivalently I + K_- (or I + K_+) has a nontrivial kernel"
    )]
    SingularWienerHopf { pivot: usize },

    #[error("resolvent is singular at coupling {coupling}")]
    SingularResolvent { coupling: f64 },

    #[error(
        "coupling path to {target} crosses a resolvent singularity near coupling {near} \
         (condition estimate {condition:.3e})"
    )]
    SingularPath {
        target: f64,
        near: f64,
        condition: f64,
    },

    #[error("phase jump of {jump:.3} rad at xi = {xi} exceeds pi/2; increase the sample count (m = {m})")]
    CoarseSampling { xi: f64, jump: f64, m: usize },

    #[error("index condition fails: {0}")]
    IndexFailure(String),

    #[error("determinant did not converge at alpha = {alpha} (last refinement delta {delta:.3e})")]
    NotConverged { alpha: f64, delta: f64 },

    #[error("config: {0}")]
    Config(String),

    #[error("i/o: {0}")]
    Io(String),
}

impl Error {
    /// Process exit status for this error: 2 index failure, 3 non-convergence,
    /// 4 I/O, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::IndexFailure(_) => 2,
            Error::NotConverged { .. } => 3,
            Error::Io(_) => 4,
            _ => 1,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
