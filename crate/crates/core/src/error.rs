use thiserror::Error;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum PellError {
    #[error("matrix is not uniformly elliptic: lower bound {0:.3e}")]
    NotElliptic(f64),
    #[error("invalid exponent p = {0} (must be finite and > 1)")]
    InvalidExponent(f64),
    #[error("bilinear pairing <A xi, conj(xi)> vanishes on the whole sphere")]
    DegenerateDenominator,
    #[error("imaginary part of the matrix is not symmetric (asymmetry {0:.3e})")]
    NotSymmetricImaginaryPart(f64),
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("pullback map is not bijective: min d0 rho0 = {0:.3e}")]
    NotBijective(f64),
    #[error("singular Jacobian (det = {0:.3e})")]
    SingularJacobian(f64),
    #[error("coefficient field is not elliptic at node {node}: lower bound {lambda:.3e}")]
    FieldNotElliptic { node: usize, lambda: f64 },
    #[error("A00 is too close to zero ({0:.3e})")]
    A00NearZero(f64),
    #[error("Krylov solver did not converge: {iterations} iterations, relative residual {residual:.3e}")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("exponent {p} outside the admissible range ({lo}, {hi})")]
    ExponentOutOfRange { p: f64, lo: f64, hi: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("formula error: {0}")]
    Formula(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, PellError>;
