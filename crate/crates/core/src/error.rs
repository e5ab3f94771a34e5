use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },

    #[error("matrix entries must be finite")]
    NonFinite,

    #[error("matrix is not Hermitian (asymmetry {asymmetry:.3e})")]
    NotHermitian { asymmetry: f64 },

    #[error("matrix is not positive semidefinite (minimum eigenvalue {min_eigenvalue:.3e})")]
    MatrixNotPsd { min_eigenvalue: f64 },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("function has imaginary part {imag:.3e} at atom {atom}")]
    ComplexValued { atom: usize, imag: f64 },

    #[error("total masses differ: {left} vs {right}")]
    MassMismatch { left: f64, right: f64 },

    #[error("measure space masses are not uniform")]
    NotUniform,

    #[error("matrix is not bistochastic: {0}")]
    NotDoublyStochastic(String),

    #[error("atom {atom} has effect of norm {effect_norm:.3e} but induced mass {mass:.3e} under a full-rank state")]
    InconsistentNullSet {
        atom: usize,
        mass: f64,
        effect_norm: f64,
    },

    #[error("the inducing state must be full rank (minimum eigenvalue {min_eigenvalue:.3e})")]
    FullRankRequired { min_eigenvalue: f64 },

    #[error("atom {atom} has zero induced mass")]
    DivisionByZeroMass { atom: usize },

    #[error("quantum random variable is not self-adjoint at atom {atom}")]
    NotSelfAdjoint { atom: usize },

    #[error("functions live on different measure spaces")]
    SpaceMismatch,

    #[error("solver stalled with gap {gap:.3e} (tolerance {tol:.3e})")]
    SolverStall { gap: f64, tol: f64 },

    #[error("simplex iteration limit reached")]
    CycleLimit,

    #[error("solver start point is not strictly feasible")]
    InfeasibleStart,

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    /// Whether the error stems from malformed or inconsistent input data
    /// rather than from a computation.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::SolverStall { .. } | Error::CycleLimit | Error::Numerical(_)
        )
    }
}
