use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("subspace is not isotropic: corestriction defect {defect:.3e}")]
    NotIsotropic { defect: f64 },

    #[error("poly-form is degenerate: common kernel has dimension {kernel_dim}")]
    DegeneratePolyForm { kernel_dim: usize },

    #[error("point leaves the sample box in coordinate {coordinate} ({value} not in [{lo}, {hi}])")]
    OutOfBox {
        coordinate: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("bracket does not close on the frame: residual {residual:.3e}")]
    ClosureFailure { residual: f64 },

    #[error("function is not admissible: residual of dh in S is {residual:.3e}")]
    NotAdmissible { residual: f64 },

    #[error("2-form is degenerate at a sample point (common kernel dimension {kernel_dim})")]
    DegenerateForm { kernel_dim: usize },

    #[error("2-form is not closed: |d omega| = {residual:.3e}")]
    NotClosed { residual: f64 },

    #[error("leaf form system is inconsistent: residual {residual:.3e}")]
    IllPosed { residual: f64 },

    #[error("not a clean value: {0}")]
    NotCleanValue(String),

    #[error("reduced form is degenerate (common kernel dimension {kernel_dim})")]
    DegenerateReduction { kernel_dim: usize },

    #[error("trajectory left the sample box at t = {t}")]
    LeftBox { t: f64 },

    #[error("paths are not composable: endpoint gap {gap:.3e}")]
    NonComposable { gap: f64 },

    #[error("operation requires a different structure: {0}")]
    WrongStructure(String),

    #[error("relation spaces do not match: {0}")]
    SpaceMismatch(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error: {0}")]
    Parse(String),
}
