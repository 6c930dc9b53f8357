use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A jet or grid function failed the spacelike condition |Du| < 1.
    #[error("not spacelike at {location}: |Du| = {slope}")]
    NotSpacelike { location: String, slope: f64 },

    /// The linearized operator is not elliptic (jet outside the admissible cone).
    #[error("ellipticity lost at {location}: sigma1 = {sigma1}, sigma2 = {sigma2}")]
    Ellipticity {
        location: String,
        sigma1: f64,
        sigma2: f64,
    },

    #[error("numeric failure: {0}")]
    Numeric(String),

    /// Newton line search could not find an acceptable step.
    #[error("newton stall after {iterations} iterations (t = {t}, residual = {residual:.3e}): {reason}")]
    Stall {
        iterations: usize,
        t: f64,
        residual: f64,
        reason: String,
    },

    /// Barrier hypotheses violated at grid points.
    #[error("barrier check failed: {0}")]
    BarrierCheck(String),

    #[error("hypothesis not met: {0}")]
    Hypothesis(String),

    #[error("search failed: {0}")]
    SearchFailure(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A failure inside a multi-stage run; carries how far the run got.
    #[error("stage {stage} (R = {radius}) failed after radii {completed_radii:?}: {source}")]
    Stage {
        stage: usize,
        radius: f64,
        #[source]
        source: Box<Error>,
        completed_radii: Vec<f64>,
        gaps: Vec<f64>,
    },

    #[error("parse error in {field}: {message}")]
    Parse { field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn parse(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Input errors are the caller's fault; everything else is a solver failure.
    pub fn is_input_error(&self) -> bool {
        if let Error::Stage { source, .. } = self {
            return source.is_input_error();
        }
        matches!(
            self,
            Error::Domain(_)
                | Error::BarrierCheck(_)
                | Error::Hypothesis(_)
                | Error::Precondition(_)
                | Error::Parse { .. }
                | Error::Io(_)
        )
    }
}
