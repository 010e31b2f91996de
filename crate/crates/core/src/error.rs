//! Error type shared by every module of the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller supplied an argument outside the operation's domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The Liouvillian does not have a one-dimensional kernel.
    #[error(
        "degenerate steady state: singular value ratio {ratio:.3e} \
         (smallest {smallest:.3e}, next {next:.3e})"
    )]
    NumericalDegeneracy {
        ratio: f64,
        smallest: f64,
        next: f64,
    },

    /// A linear solve or propagation produced an unacceptable residual.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// A quantity that must be real, nonnegative, or otherwise constrained is not.
    #[error("consistency error: {0}")]
    Consistency(String),

    /// A coefficient lookup fell outside the precomputed (g, S) grid.
    #[error("(g, S) = ({g:.6e}, {s:.6e}) rad/us outside the coefficient domain")]
    OutOfRange { g: f64, s: f64 },

    /// A cache node failed to solve.
    #[error("cache node ({g:.6e}, {s:.6e}) failed: {source}")]
    CacheNode {
        g: f64,
        s: f64,
        #[source]
        source: Box<Error>,
    },

    /// The stochastic integrator produced a non-finite state.
    #[error("trajectory blew up at t = {t:.6e} us (r = {r:?}, v = {v:?})")]
    BlowUp { t: f64, r: [f64; 3], v: [f64; 3] },

    /// A statistical estimator had no usable input.
    #[error("statistics: {0}")]
    Statistics(String),

    #[error("configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
