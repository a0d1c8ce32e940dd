use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Crate-wide error type. Variants are grouped roughly by pipeline stage:
/// mesh construction, assembly, factorization, operator algebra, optimization
/// and configuration handling.
#[derive(Debug, Error)]
pub enum Error {
    #[error("interface amplitude {amplitude} does not fit strictly inside [{x_left}, {x_right}]")]
    AmplitudeTooLarge {
        amplitude: f64,
        x_left: f64,
        x_right: f64,
    },

    #[error("mapped cell {cell} is degenerate (signed area {area:.3e})")]
    DegenerateCell { cell: usize, area: f64 },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("non-positive diffusion coefficient {value:.3e} at quadrature point ({x:.4}, {y:.4})")]
    NonPositiveDiffusion { value: f64, x: f64, y: f64 },

    #[error("subdomain {side} has no interior unknowns")]
    EmptySubdomain { side: u8 },

    #[error("matrix is structurally singular: row {row} has no entries")]
    StructurallySingular { row: usize },

    #[error("matrix is numerically singular: pivot {pivot:.3e} at elimination step {step}")]
    NumericallySingular { step: usize, pivot: f64 },

    #[error("Neumann subdomain operator on side {side} is singular: {detail}")]
    SingularNeumannOperator { side: u8, detail: String },

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("refusing to materialize an operator of dimension {dim} (guard is {guard})")]
    MaterializeGuard { dim: usize, guard: usize },

    #[error("objective is non-finite at every vertex of the initial simplex")]
    ObjectiveNotFinite,

    #[error("{what} did not converge within {iterations} iterations")]
    NotConverged { what: &'static str, iterations: usize },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the CLI: 2 for problems in user-supplied input
    /// (configuration, JSON, argument shapes), 3 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Json(_) | Error::DimensionMismatch { .. } => 2,
            _ => 3,
        }
    }
}
