use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParams { name: &'static str, reason: String },

    #[error("classical fixed point did not converge after {iterations} iterations (best residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("drift matrix is numerically defective (eigenvector condition number {cond:.3e})")]
    DefectiveMatrix { cond: f64 },

    #[error("no steady state: drift has an eigenvalue with real part {max_re:.6e} >= 0")]
    Unstable { max_re: f64 },

    #[error("frequency quadrature did not converge (estimated relative error {estimate:.3e})")]
    QuadratureNotConverged { estimate: f64 },

    #[error("no exceptional point in search box (best coalescence measure {residual:.3e})")]
    NotFound { residual: f64 },

    #[error("time-domain propagation blew up at t = {time:.6e} s")]
    BlowUp { time: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParams {
            name,
            reason: reason.into(),
        }
    }
}
