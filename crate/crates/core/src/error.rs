use thiserror::Error;

/// Coarse classification used by the command-line exit-code contract.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// A structural hypothesis of the construction does not hold for the input.
    Guard,
    /// Malformed input or misuse of the API.
    Usage,
    /// A numerical consistency check failed.
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("structure constants are not antisymmetric at ({i}, {j}, {k})")]
    NotAntisymmetric { i: usize, j: usize, k: usize },

    #[error("Jacobi identity violated: residual {residual:.3e}")]
    JacobiViolated { residual: f64 },

    #[error("algebra is not solvable")]
    NotSolvable,

    #[error("algebra is not nilpotent")]
    NotNilpotent,

    #[error("nilpotency class {class} exceeds the supported maximum {max}")]
    ClassTooLarge { class: usize, max: usize },

    #[error("triangularization failed: {0}")]
    TriangularizationFailed(String),

    #[error("candidate nilradical rejected: {0}")]
    InvalidNilradical(String),

    #[error("subspace is not an ideal: residual {residual:.3e}")]
    NotAnIdeal { residual: f64 },

    #[error("matrix is not a derivation: Leibniz residual {residual:.3e}")]
    NotADerivation { residual: f64 },

    #[error("eigenvalue clustering ambiguous: cluster gap {gap:.3e}")]
    ClusteringAmbiguous { gap: f64 },

    #[error("generalized kernel routes disagree: distance {distance:.3e}")]
    KernelRoutesDisagree { distance: f64 },

    #[error("derivation is not elliptic: {0}")]
    NotElliptic(String),

    #[error("automorphism certificate failed: bracket residual {residual:.3e}")]
    AutomorphismCertificateFailed { residual: f64 },

    #[error("det(I - phi) gap {gap:.3e} below threshold {threshold:.3e}")]
    DetGapTooSmall { gap: f64, threshold: f64 },

    #[error("inversion residual not central: {residual:.3e}")]
    ResidualNotCentral { residual: f64 },

    #[error("integrator step size underflow at t = {t}")]
    StepSizeUnderflow { t: f64 },

    #[error("invalid control law: {0}")]
    InvalidLaw(String),

    #[error("rescaling speed {value} outside ({lo}, {hi})")]
    RescaleOutOfRange { value: f64, lo: f64, hi: f64 },

    #[error("N0 compactness hypothesis not certifiable: dim n0 = {dim} in the simply connected model")]
    N0NotTrivial { dim: usize },

    #[error("drift restricted to the nilradical is singular: det = {det:.3e}")]
    D0Singular { det: f64 },

    #[error("drift on the vector factor is not nilpotent: residual {residual:.3e}")]
    ANotNilpotent { residual: f64 },

    #[error("periodicity residual {residual:.3e} exceeds {threshold:.3e}")]
    PeriodicityResidualExceeded { residual: f64, threshold: f64 },

    #[error("inversion residual {residual:.3e} exceeds {threshold:.3e}")]
    InversionResidualExceeded { residual: f64, threshold: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        use Error::*;
        match self {
            NotAntisymmetric { .. }
            | JacobiViolated { .. }
            | NotSolvable
            | NotNilpotent
            | NotAnIdeal { .. }
            | NotADerivation { .. }
            | NotElliptic(_)
            | InvalidNilradical(_)
            | DetGapTooSmall { .. }
            | N0NotTrivial { .. }
            | D0Singular { .. }
            | ANotNilpotent { .. } => ErrorKind::Guard,
            DimensionMismatch { .. }
            | ClassTooLarge { .. }
            | InvalidLaw(_)
            | RescaleOutOfRange { .. }
            | Parse(_)
            | Io(_) => ErrorKind::Usage,
            TriangularizationFailed(_)
            | ClusteringAmbiguous { .. }
            | KernelRoutesDisagree { .. }
            | AutomorphismCertificateFailed { .. }
            | ResidualNotCentral { .. }
            | StepSizeUnderflow { .. }
            | PeriodicityResidualExceeded { .. }
            | InversionResidualExceeded { .. } => ErrorKind::Numerical,
        }
    }

    /// Name of the hypothesis or residual a failure refers to.
    pub fn hypothesis(&self) -> &'static str {
        use Error::*;
        match self {
            NotAntisymmetric { .. } => "antisymmetry",
            JacobiViolated { .. } => "Jacobi identity",
            NotSolvable => "solvability",
            NotNilpotent => "nilpotency",
            NotAnIdeal { .. } => "ideal",
            NotADerivation { .. } => "Leibniz rule",
            NotElliptic(_) => "ellipticity",
            InvalidNilradical(_) => "nilradical candidate",
            DetGapTooSmall { .. } => "det(I - phi) != 0",
            N0NotTrivial { .. } => "N0 compactness (n0 = 0)",
            D0Singular { .. } => "det D0 != 0",
            ANotNilpotent { .. } => "A nilpotent",
            TriangularizationFailed(_) => "triangularization",
            ClusteringAmbiguous { .. } => "eigenvalue clustering",
            KernelRoutesDisagree { .. } => "generalized kernel agreement",
            AutomorphismCertificateFailed { .. } => "automorphism certificate",
            ResidualNotCentral { .. } => "central residual",
            StepSizeUnderflow { .. } => "integrator step size",
            PeriodicityResidualExceeded { .. } => "periodicity residual",
            InversionResidualExceeded { .. } => "inversion residual",
            DimensionMismatch { .. } => "dimension",
            ClassTooLarge { .. } => "nilpotency class",
            InvalidLaw(_) => "control law",
            RescaleOutOfRange { .. } => "rescaling speed",
            Parse(_) => "parse",
            Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
