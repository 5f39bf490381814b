use thiserror::Error;

/// Location of an inadmissible state.
#[derive(Debug, Clone, PartialEq)]
pub struct Location {
    pub element: usize,
    pub point: usize,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("inadmissible state at {loc:?}: rho={rho:e}, internal energy={ie:e}, state={state:?}")]
    Inadmissible { loc: Option<Location>, rho: f64, ie: f64, state: [f64; 5] },
    #[error("mesh error: {0}")]
    Mesh(String),
    #[error("root finding failed: {0}")]
    RootFind(String),
    #[error("time step failed after {retries} retries at t={t}: {cause}")]
    StepFailed { retries: usize, t: f64, cause: Box<Error> },
    #[error("limiter invariant violated: {0}")]
    Limiter(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn at(self, element: usize, point: usize) -> Error {
        match self {
            Error::Inadmissible { rho, ie, state, .. } => Error::Inadmissible {
                loc: Some(Location { element, point }),
                rho,
                ie,
                state,
            },
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
