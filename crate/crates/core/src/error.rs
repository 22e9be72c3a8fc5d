use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("time {t} is outside [0, {horizon}]")]
    DomainRange { t: f64, horizon: f64 },

    #[error("boundary search failed at t = {t}: {reason}")]
    GeometrySearch { t: f64, reason: String },

    #[error("oblique projection did not reach the domain after {iters} sub-steps at t = {t} (last iterate {last:?})")]
    ProjectionFailure { t: f64, iters: usize, last: Vec<f64> },

    #[error("shape mismatch in {what}: expected {expected}, got {got}")]
    Shape {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("step {step} failed{}: {source}", particle.map(|p| format!(" for particle {p}")).unwrap_or_default())]
    Step {
        particle: Option<usize>,
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("Picard iteration did not reach tol {tol} within {} iterations", history.len())]
    FixedPoint { tol: f64, history: Vec<f64> },

    #[error("rate optimizer diverged: control energy {energy} exceeds ceiling {ceiling}")]
    Optimization { energy: f64, ceiling: f64 },

    #[error("unknown {kind} preset `{name}`")]
    UnknownPreset { kind: &'static str, name: String },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("run has no `{0}` table")]
    MissingTable(String),
}

impl Error {
    /// Stable machine-readable code, also used as the CLI exit status and by
    /// the C ABI.
    pub fn code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_) => 2,
            Error::Shape { .. } => 3,
            Error::DomainRange { .. } => 4,
            Error::GeometrySearch { .. } => 5,
            Error::ProjectionFailure { .. } => 6,
            Error::Step { source, .. } => source.code(),
            Error::FixedPoint { .. } => 7,
            Error::Optimization { .. } => 8,
            Error::UnknownPreset { .. } => 10,
            Error::Config(_) => 11,
            Error::Io { .. } => 12,
            Error::MissingTable(_) => 13,
        }
    }

    pub(crate) fn at_step(self, particle: Option<usize>, step: usize) -> Error {
        Error::Step {
            particle,
            step,
            source: Box::new(self),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Error {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
