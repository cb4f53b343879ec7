use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Inputs violate a documented precondition.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// p + q <= 2: simulable, but the asymptotic formulas do not apply.
    #[error("extremal regime (p + q = {sum}): asymptotic formulas require p + q > 2")]
    ExtremalRegime { sum: f64 },

    #[error("nonpositive Beta shape ({shape1}, {shape2}) for {what}")]
    NonPositiveShape {
        what: String,
        shape1: f64,
        shape2: f64,
    },

    #[error("{what} = {value} exceeds the supported maximum {max}")]
    TooLarge {
        what: &'static str,
        value: usize,
        max: usize,
    },

    #[error("eigenvalue iteration did not converge at index {index}")]
    NoConvergence { index: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("point {x} lies in the support or on a pole")]
    InsideSupport { x: f64 },

    #[error("extrapolation diverged: residuals eta0 {residual0:e}, eta1 {residual1:e}")]
    Extrapolation { residual0: f64, residual1: f64 },

    #[error("quadrature did not converge: estimated error {estimate:e}")]
    Quadrature { estimate: f64 },

    #[error("replicate {index}: {source}")]
    Replicate { index: usize, source: Box<Error> },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Distinguishes failures of a numerical method from bad input.
    pub fn is_numerical(&self) -> bool {
        if let Error::Replicate { source, .. } = self {
            return source.is_numerical();
        }
        matches!(
            self,
            Error::NoConvergence { .. }
                | Error::NonFinite(_)
                | Error::Extrapolation { .. }
                | Error::Quadrature { .. }
        )
    }

    /// Short machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::ExtremalRegime { .. } => "extremal_regime",
            Error::NonPositiveShape { .. } => "nonpositive_shape",
            Error::TooLarge { .. } => "too_large",
            Error::NoConvergence { .. } => "no_convergence",
            Error::NonFinite(_) => "non_finite",
            Error::InsideSupport { .. } => "inside_support",
            Error::Extrapolation { .. } => "extrapolation",
            Error::Quadrature { .. } => "quadrature",
            Error::Replicate { source, .. } => source.kind(),
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
