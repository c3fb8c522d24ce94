use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Invalid construction parameters (counts, temperatures, speeds).
    #[error("configuration error: {0}")]
    Config(String),

    /// Operation not allowed in the current simulation state.
    #[error("state error: {0}")]
    State(String),

    /// Dynamics could not be continued (membrane left the box, runaway event count).
    #[error("simulation error: {0}")]
    Simulation(String),

    #[error("thermostat error: {0}")]
    Thermostat(String),

    #[error("unknown surface: {0}")]
    UnknownSurface(String),

    /// Argument outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// Antisymmetrization of linearly dependent orbitals.
    #[error("zero state: {0}")]
    ZeroState(String),
}
