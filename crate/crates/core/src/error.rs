use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("rate `{0}` has a divergent cumulative intensity at 0; event times cannot be sampled")]
    NonIntegrableRate(String),

    #[error("no finite majorant for rate `{rate}` on [0, {horizon}]")]
    NoMajorant { rate: String, horizon: f64 },

    #[error("cumulative intensity of `{0}` diverges on (0, t]")]
    DivergentIntegral(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("adaptive quadrature did not reach tolerance {tol:e} on [{a}, {b}]")]
    NonConvergent { a: f64, b: f64, tol: f64 },

    #[error("closed form requires a constant rate, got `{0}`; use the Monte Carlo path instead")]
    UnsupportedRate(String),

    #[error("operation not defined for variant {0}")]
    UnsupportedVariant(String),

    #[error("cumulative intensity never reaches level {level}")]
    NoRoot { level: f64 },

    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("residuals do not decrease under refinement (fitted order {fitted_order:.3})")]
    NonMonotone {
        h_list: Vec<f64>,
        residuals: Vec<f64>,
        fitted_order: f64,
    },

    #[error("binning mismatch: {0}")]
    BinningMismatch(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("test `{name}` failed to run: {source}")]
    Test { name: String, source: Box<Error> },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
