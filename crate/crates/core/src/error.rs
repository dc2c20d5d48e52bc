use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("root solver did not converge for {what}: last bracket [{lo}, {hi}]")]
    Solver { what: String, lo: f64, hi: f64 },

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("overflow evaluating {what} at x = {x}")]
    Overflow { what: &'static str, x: f64 },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("level ordering violated: {0}")]
    Ordering(String),

    #[error("degenerate interval: {0}")]
    DegenerateInterval(String),

    #[error("no permanental law: det(I + Lambda G) = {det}")]
    Existence { det: f64 },

    #[error("internal consistency check failed for {what}: gap {gap:e}")]
    Consistency { what: String, gap: f64 },

    #[error("estimation error: {0}")]
    Estimation(String),

    #[error("ensembles are not comparable: {0}")]
    Comparability(String),

    #[error("unsupported model for simulation: {0}")]
    UnsupportedModel(String),

    #[error("point ({x}, {y}) is not a node of the solved grid")]
    OffGrid { x: f64, y: f64 },
}
