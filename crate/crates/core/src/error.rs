use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("radius must be positive and finite, got {0}")]
    InvalidRadius(f64),
    #[error("semi-axes must be positive and finite, got {0:?}")]
    InvalidSemiAxes(Vec<f64>),
    #[error("principal axes are not orthonormal")]
    NonOrthonormalAxes,
    #[error("gradient norm {norm:.3e} is below tolerance")]
    DegenerateGradient { norm: f64 },
    #[error("curvature {curvature:.3e} is not positive")]
    NonConvexPoint { curvature: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FlowError {
    #[error("intersection search did not converge in {steps} steps")]
    NumericalFailure { steps: usize },
    #[error("incidence {cosine:.3e} is below the tangency threshold")]
    TangentIncidence { cosine: f64 },
    #[error("ray is trapped (budget exhausted after {reflections} reflections)")]
    Trapped { reflections: usize },
    #[error("ray touches an obstacle tangentially")]
    Tangency,
    #[error("entry point is not an inward phase point of S0")]
    InvalidEntry,
    #[error("continuation left the branch neighbourhood: {reason}")]
    NoConvergence { reason: String },
    #[error("reflection combinatorics changed along the continuation")]
    CombinatoricsChanged,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RecoveryError {
    #[error("tangential gradient {norm} too close to 1; normal component sign is unreliable")]
    NearNormalAmbiguity { norm: f64 },
    #[error("stencil samples do not belong to one continuation branch: {reason}")]
    BranchBroken { reason: String },
    #[error("no diagonal travelling times available")]
    EmptyDiagonal,
    #[error("no dataset cell near the requested chord")]
    MissingCell,
    #[error(transparent)]
    Flow(#[from] FlowError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReconstructionError {
    #[error("diagonal minimum is not unique: {first:.12} at {first_angle:.6} rad and {second:.12} at {second_angle:.6} rad")]
    NonUniqueMinimum {
        first: f64,
        first_angle: f64,
        second: f64,
        second_angle: f64,
    },
    #[error("no separating vacuous line between the two bodies")]
    NoSeparatingLine,
    #[error("reflexive diagonal branch lost: {0}")]
    BranchLost(String),
    #[error("ambiguous echograph arc adjacency: {0}")]
    AmbiguousAdjacency(String),
    #[error("backtraced ray left the determined boundary")]
    BacktraceHitUnknownRegion,
    #[error("negative residual length {0:.3e}")]
    NegativeResidualLength(f64),
    #[error("backtrace expected {expected} reflections, found {found}")]
    ReflectionCountMismatch { expected: usize, found: usize },
    #[error("fewer than {needed} arc points near the query")]
    InsufficientSupport { needed: usize },
    #[error("reconstruction needs a planar scene with exactly two bodies")]
    UnsupportedScene,
    #[error(transparent)]
    Recovery(#[from] RecoveryError),
}

#[derive(Debug, Error)]
pub enum IoError {
    #[error("i/o error on {path}: {cause}")]
    File { path: String, cause: std::io::Error },
    #[error("invalid json in {path}: {cause}")]
    Json {
        path: String,
        cause: serde_json::Error,
    },
    #[error("invalid scene: {0}")]
    Scene(String),
    #[error("malformed csv {path} line {line}: {reason}")]
    Csv {
        path: String,
        line: usize,
        reason: String,
    },
}
