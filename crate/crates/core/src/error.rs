use thiserror::Error;

#[derive(Debug, Error)]
pub enum HetNetError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("geometry cannot place {0}")]
    Geometry(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("station {station} exceeds its transmit budget ({used:.6} W > {budget:.6} W)")]
    BudgetExceeded { station: usize, used: f64, budget: f64 },

    #[error("unknown solver `{0}`")]
    UnknownSolver(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),
}

pub type Result<T, E = HetNetError> = std::result::Result<T, E>;
