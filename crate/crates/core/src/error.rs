use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("shape mismatch: expected {expected} values, found {found}")]
    Shape { expected: usize, found: usize },

    #[error("grids are not nested: {0}")]
    Coupling(String),

    #[error("time {t} is not a multiple of the time step {h}")]
    OffGrid { t: f64, h: f64 },

    #[error("{what} = {value} is outside {range}")]
    OutOfRange {
        what: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("scheme blew up at t = {t}, x = {x}: value {value}")]
    BlowUp { t: f64, x: f64, value: f64 },

    #[error("no snapshot at t = {0}")]
    MissingCheckpoint(f64),

    #[error("malformed path dump: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
