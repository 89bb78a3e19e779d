use thiserror::Error;

/// Errors produced by the detection toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("drift blowup at step {step} in sensor {sensor}")]
    DriftBlowup { step: usize, sensor: usize },

    #[error("numeric overflow in sensor {sensor} at t = {t}")]
    NumericOverflow { sensor: usize, t: f64 },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("no positive root of tanh(w) = 2*eps*w for eps = {0} (requires 0 < eps < 1/2)")]
    NoPositiveRoot(f64),

    #[error("{nonstopping} of {total} paths did not stop by t = {horizon}")]
    NonStopping {
        nonstopping: usize,
        total: usize,
        horizon: f64,
    },

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("root finding failed: {0}")]
    RootFinding(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// True for errors caused by bad user input rather than numerical trouble.
    pub fn is_config(&self) -> bool {
        match self {
            Error::Config(_) | Error::Precondition(_) | Error::Dimension(_) => true,
            Error::Context { source, .. } => source.is_config(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn precondition(ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Precondition(msg()))
    }
}
