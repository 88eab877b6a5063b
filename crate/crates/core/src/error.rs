use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point is off the hyperboloid (residual {residual:e}, x0 = {x0})")]
    OffHyperboloid { residual: f64, x0: f64 },

    #[error("boundary vector is not a future null vector (residual {residual:e}, x0 = {x0})")]
    NotNull { residual: f64, x0: f64 },

    #[error("tangent vector invalid: {0}")]
    InvalidTangent(String),

    #[error("dimension mismatch: expected {expected} coordinates, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("degenerate quadruple: boundary points must be distinct")]
    DegenerateQuadruple,

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("expected a {expected} measure, got a {got} measure")]
    MeasureKind { expected: &'static str, got: &'static str },

    #[error("endpoint set is a single boundary point; the objective is not proper")]
    SingletonEndpoints,

    #[error("boundary map is not Moebius: max |log cross-ratio deviation| = {deviation:e}")]
    NotMoebius { deviation: f64 },

    #[error("root find failed on [{lo}, {hi}]: f(lo) = {f_lo:e}, f(hi) = {f_hi:e} after {expansions} expansions")]
    RootFind {
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
        expansions: usize,
    },

    #[error("matrix is not an orthochronous Lorentz transformation (residual {residual:e})")]
    NotLorentz { residual: f64 },

    #[error("solver did not converge after {iterations} iterations (gradient norm {grad_norm:e})")]
    NotConverged { iterations: usize, grad_norm: f64 },

    #[error("boundary grid does not surround the point (hull gap {gap:e}); use a finer grid")]
    Undersampled { gap: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
