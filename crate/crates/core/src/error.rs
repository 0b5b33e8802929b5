use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("no convergence in {what} after {iterations} iterations")]
    Convergence { what: &'static str, iterations: usize },
    #[error("unsupported eigenvalue degeneracy at xi = {xi:e} (relative gap {gap:e})")]
    UnsupportedDegeneracy { xi: f64, gap: f64 },
    #[error("accuracy error: {0}")]
    Accuracy(String),
    #[error("scaled norm {0:e} too large for the matrix exponential")]
    ScaledNorm(f64),
    #[error("blow-up at t = {time}: {reason}")]
    BlowUp { time: f64, reason: String },
    #[error("invalid parameters: {}", .0.join("; "))]
    InvalidParams(Vec<String>),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
