use thiserror::Error;

pub type Result<T> = std::result::Result<T, SpikeError>;

#[derive(Debug, Error)]
pub enum SpikeError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("point {point:?} is {distance:.3e} from the boundary, below the safe margin {margin:.3e}")]
    TooCloseToBoundary { point: [f64; 4], distance: f64, margin: f64 },

    #[error("accuracy target missed for {what}: estimated defect {defect:.3e} exceeds {threshold:.3e}")]
    Accuracy { what: String, defect: f64, threshold: f64 },

    #[error("ill-conditioned least-squares system (condition estimate {condition:.3e})")]
    Conditioning { condition: f64 },

    #[error("singular evaluation: {0}")]
    Singularity(String),

    #[error("degree not certifiable: {0}")]
    NotCertifiable(String),

    #[error("minimizer lies on the boundary of the search box: {0}")]
    BoundaryMinimizer(String),

    #[error("no sign change of u(1) found for u0 in [{lo:.3e}, {hi:.3e}]")]
    Bracket { lo: f64, hi: f64 },

    #[error("solution did not cross zero before r = {cap}")]
    NoCrossing { cap: f64 },

    #[error("step size underflow at r = {r:.3e}")]
    StepSize { r: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("configuration error: {0}")]
    Config(String),
}
