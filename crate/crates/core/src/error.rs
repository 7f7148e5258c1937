use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error in {func}: {detail}")]
    Domain { func: &'static str, detail: String },

    #[error("{func} did not converge after {terms} terms (partial sum {partial:e}, truncation bound {bound:e})")]
    Convergence {
        func: &'static str,
        terms: usize,
        partial: f64,
        bound: f64,
    },

    #[error("{func}: intermediate terms vanish below the floating-point range ({detail})")]
    Underflow { func: &'static str, detail: String },

    #[error("cone angle equation is unsatisfiable: {0}")]
    Unsatisfiable(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("variance interpretation `{interpretation}` is not admissible here: {detail}")]
    Interpretation {
        interpretation: &'static str,
        detail: String,
    },

    #[error("no printed variant of {formula} matches the numerical oracle (best relative gap {best_gap:e})")]
    UnresolvedFormula { formula: &'static str, best_gap: f64 },

    #[error("out of regime: {0}")]
    OutOfRegime(String),

    #[error("quadrature did not reach the requested accuracy (estimate {estimate:e}, error {error:e})")]
    Accuracy { estimate: f64, error: f64 },
}

impl Error {
    pub(crate) fn domain(func: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain {
            func,
            detail: detail.into(),
        }
    }

    /// True for errors caused by bad input rather than numerics.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::Usage(_) | Error::Unsupported(_))
    }
}
