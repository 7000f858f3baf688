use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("square root of zero is not defined on the chosen branch")]
    ZeroInput,
    #[error("block with eigenvalue 0 has no {0}")]
    ZeroEigenvalue(&'static str),
    #[error("kernel constraint violated: {0}")]
    KernelConstraint(String),
    #[error("degenerate bordered matrix (|det| = {0:e})")]
    DegenerateBordered(f64),
    #[error("z = {z} crosses a branch cut of the square root")]
    BranchCut { z: Complex64 },
    #[error("z = {z} lies on the singular set (1/z is an eigenvalue)")]
    Resonance { z: Complex64 },
    #[error("singular matrix in {0}")]
    Singular(&'static str),
    #[error("multiple elliptic coordinate detected (|N_z|^2 = {0:e}): point on the isotropic-normal locus")]
    MultipleRoots(f64),
    #[error("quadric is not general: eigenvalue {0} carries more than one block")]
    NotGeneral(Complex64),
    #[error("root finding failed: {0}")]
    RootFinding(String),
    #[error("no ruling found after {0} restarts")]
    RulingNotFound(usize),
    #[error("cannot complete to a complex rotation: {0}")]
    Completion(String),
    #[error("Gram-Schmidt breakdown: {0}")]
    GramSchmidt(String),
    #[error("missing axes: {0}")]
    MissingAxes(String),
    #[error("inconsistent matching system: {0}")]
    Inconsistent(String),
    #[error("input fields are not integrable: plaquette residual {residual:e} exceeds {threshold:e}")]
    NonIntegrable { residual: f64, threshold: f64 },
    #[error("Riccati flow blew up (norm {0:e})")]
    BlowUp(f64),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("{masked} of {total} grid points masked (limit 1%)")]
    TooManyMasked { masked: usize, total: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
