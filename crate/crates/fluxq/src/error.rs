//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse classification used by callers that map errors to exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad input: config text, CSV, parameter values, state tokens.
    Validation,
    /// A numerical routine failed or was asked for something singular.
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("missing key `{0}`")]
    MissingKey(&'static str),
    #[error("unknown key `{0}` on line {1}")]
    UnknownKey(String, usize),
    #[error("duplicate key `{0}` on line {1}")]
    DuplicateKey(String, usize),
    #[error("malformed number `{value}` for key `{key}` on line {line}")]
    MalformedNumber { key: String, value: String, line: usize },
    #[error("non-positive value {value} for key `{key}`")]
    NonPositive { key: &'static str, value: f64 },
    #[error("missing or wrong unit for key `{key}`: expected `{expected}`, got `{got}`")]
    WrongUnit { key: String, expected: &'static str, got: String },
    #[error("line {line}: expected `key = value unit`, got `{text}`")]
    MalformedLine { line: usize, text: String },

    #[error("modes unresolvable: eigenfrequencies degenerate within {rel:.3e} relative")]
    ModesUnresolvable { rel: f64 },
    #[error("normal-mode matrices not positive definite")]
    NotPositiveDefinite,

    #[error("truncation cutoffs must satisfy n0 >= 1 and m0 >= 1, got ({n0}, {m0})")]
    BadTruncation { n0: usize, m0: usize },
    #[error("operator matrix dimension {got} does not match truncation dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("eigensolver did not converge for a {dim}x{dim} matrix (QL iteration budget exhausted)")]
    NonConvergence { dim: usize },
    #[error("eigensolver residual {residual:.3e} exceeds tolerance {tol:.3e} for a {dim}x{dim} matrix")]
    ResidualTooLarge { dim: usize, residual: f64, tol: f64 },
    #[error("level (n={n}, mu={mu}) outside the truncated window")]
    LevelOutOfRange { n: usize, mu: usize },
    #[error("kerr needs n0 >= 2, truncation has n0 = {n0}")]
    KerrNeedsPhotons { n0: usize },

    #[error("probe frequency {freq} GHz is resonant with the {from} -> {to} transition; offset it by at least 1e-6 GHz")]
    ResonantProbe { freq: f64, from: String, to: String },
    #[error("scattering solve singular: |det(W + I)| = {det:.3e}")]
    SingularScattering { det: f64 },
    #[error("quality factors must be positive, got Q_R = {qr}, Q_Q = {qq}")]
    BadQualityFactor { qr: f64, qq: f64 },
    #[error("populations must be non-negative and sum to 1, got sum {sum}")]
    BadPopulations { sum: f64 },

    #[error("csv line {line}: {msg}")]
    Csv { line: usize, msg: String },
    #[error("unknown observable `{0}`; expected f_ge, f_01, or chi")]
    UnknownObservable(String),
    #[error("sigma must be positive, got {sigma} on line {line}")]
    BadSigma { sigma: f64, line: usize },
    #[error("dataset has no rows")]
    EmptyDataset,
    #[error("unknown parameter name `{0}`; expected one of C_r, L_r, C_q, L_q, E_J, L_s")]
    UnknownParameter(String),
    #[error("unknown state token `{0}`; expected forms like 0g, 1e, 0q4")]
    BadStateToken(String),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        use Error::*;
        match self {
            ModesUnresolvable { .. }
            | NotPositiveDefinite
            | NonConvergence { .. }
            | ResidualTooLarge { .. }
            | ResonantProbe { .. }
            | SingularScattering { .. } => ErrorKind::Numerical,
            _ => ErrorKind::Validation,
        }
    }
}
