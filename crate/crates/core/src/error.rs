use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in {what}: expected {expected}, got {got}")]
    Shape {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("backward pass requested without a matching forward cache")]
    MissingCache,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown sample id {0}")]
    Lookup(usize),

    #[error("training diverged at epoch {epoch}: {reason}")]
    Diverged { epoch: usize, reason: String },

    #[error("eigensolver did not converge after {sweeps} sweeps")]
    NoConvergence { sweeps: usize },

    #[error("point cloud is empty")]
    EmptyCloud,

    #[error("malformed input at byte {offset}: {reason}")]
    Format { offset: usize, reason: String },
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Shape {
            what,
            expected,
            got,
        })
    }
}
