use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the lab pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid orbifold: {0}")]
    InvalidOrbifold(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("tangent vector of length {length} exceeds the injectivity bound {bound}")]
    RadiusExceeded { length: f64, bound: f64 },
    #[error(
        "point lies at distance {distance} from the singular locus, beyond the tube radius {tube}"
    )]
    TooFarFromSingularLocus { distance: f64, tube: f64 },
    #[error("the orbifold has no singular points")]
    EmptySingularLocus,

    #[error("shooting bracket [{lo}, {hi}] does not separate undershoot from overshoot")]
    NoSignChange { lo: f64, hi: f64 },
    #[error("shooting stopped with bracket width {width} above tolerance {tol}")]
    ToleranceNotReached { width: f64, tol: f64 },
    #[error("radial integration failed: {0}")]
    Integration(String),

    #[error("array of length {got} does not match the grid size {expected}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("function has no positive part; the Nehari scale is undefined")]
    NoPositivePart,
    #[error("bump too wide: profile value {value} at the cutoff plateau exceeds {limit}")]
    BumpTooWide { value: f64, limit: f64 },
    #[error("descent diverged at iteration {iteration}")]
    Diverged { iteration: usize },

    #[error("function vanishes identically")]
    ZeroFunction,
    #[error("support does not fit in any ball of radius {radius}")]
    SupportTooWide { radius: f64 },
    #[error("concentration coefficient {cc} does not exceed eta = {eta}")]
    NotConcentrated { cc: f64, eta: f64 },
    #[error("concentration center lies at distance {distance} from Z, outside the tube of radius {tube}")]
    RoundtripEscapedTube { distance: f64, tube: f64 },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Wraps the error with the name of the pipeline stage that raised it.
    pub fn at(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Returns the innermost error, skipping stage tags.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    /// True when the error reports a violated mathematical invariant rather than
    /// a usage or IO failure.
    pub fn is_falsified_invariant(&self) -> bool {
        matches!(
            self.root(),
            Error::RoundtripEscapedTube { .. } | Error::NotConcentrated { .. }
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
