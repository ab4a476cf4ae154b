use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Operands with incompatible variable counts, degree bounds or dimensions.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// An argument outside the domain where the quantity is defined.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Input data violating a structural invariant (tensor symmetries, table consistency).
    #[error("validation error: {0}")]
    Validation(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    /// Right-hand side with a component in the kernel of the Jacobi operator.
    #[error("solvability error: kernel component {kernel:?} exceeds tolerance {tolerance:e}")]
    Solvability { kernel: Vec<f64>, tolerance: f64 },

    /// The perturbed hemisphere stopped being an embedded graph.
    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    /// An iteration exhausted its budget; usually cured by a smaller step in r.
    #[error("continuation error: {message} (residual {residual:e} after {iterations} iterations)")]
    Continuation {
        message: String,
        residual: f64,
        iterations: usize,
    },

    /// The boundary mean-curvature Hessian is singular at the requested point.
    #[error("nondegeneracy error: {0}")]
    Nondegeneracy(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[cfg(feature = "cli")]
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable machine-readable tag used in CLI reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Shape(_) => "shape",
            Error::Domain(_) => "domain",
            Error::Precondition(_) => "precondition",
            Error::Validation(_) => "validation",
            Error::Configuration(_) => "configuration",
            Error::Solvability { .. } => "solvability",
            Error::Geometry(_) => "geometry",
            Error::Numerical(_) => "numerical",
            Error::Continuation { .. } => "continuation",
            Error::Nondegeneracy(_) => "nondegeneracy",
            Error::InsufficientData(_) => "insufficient_data",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            #[cfg(feature = "cli")]
            Error::Csv(_) => "csv",
        }
    }
}
