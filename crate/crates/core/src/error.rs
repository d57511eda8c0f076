use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value at x = {point:?}: {what}")]
    Domain { what: String, point: Vec<f64> },
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("unsupported dimension n = {0} (the Gastel family needs 5 <= n <= 9)")]
    UnsupportedDimension(usize),
    #[error("quadrature missed its tolerance: value {value:e}, error estimate {error:e}")]
    Tolerance { value: f64, error: f64 },
    #[error("finite differences hit their noise floor: {0}")]
    Accuracy(String),
    #[error("no convergence: {0}")]
    NonConvergence(String),
    #[error("connection is not a soliton: residual {0:e}")]
    NotSoliton(f64),
    #[error("blowup at t = {t}: max |eta_r| exceeded threshold at rho = {rho}")]
    Blowup { t: f64, rho: f64 },
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(what: impl Into<String>, x: &[f64]) -> Error {
    Error::Domain { what: what.into(), point: x.to_vec() }
}
