use thiserror::Error;

/// Errors shared across the solver, simulation and reporting layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("no samples")]
    NoSamples,

    #[error("domain violation: value {value} outside the validity interval [{lo}, {hi}]")]
    DomainViolation { value: f64, lo: f64, hi: f64 },

    #[error("degenerate derivative: |g'({x})| is numerically zero")]
    DegenerateDerivative { x: f64 },

    #[error("invalid parameter `{name}`: {message}")]
    InvalidParameter { name: &'static str, message: String },

    #[error("{what} = {value} outside [{lo}, {hi}]")]
    OutOfRange {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("mode error: {0}")]
    Mode(String),

    #[error(
        "CFL violation: dt = {dt:.6e} exceeds dx^2 / max(vol^2) = {limit:.6e}; \
         increase n_t to at least {required_n_t}"
    )]
    CflViolation {
        dt: f64,
        limit: f64,
        required_n_t: usize,
    },

    #[error("non-finite {what} at (t = {t}, x = {x})")]
    NonFinite { what: &'static str, t: f64, x: f64 },

    #[error(
        "stream truncated before horizon: last arrival {last_arrival} <= horizon {horizon}; \
         sample with a larger cap"
    )]
    StreamTruncated { last_arrival: f64, horizon: f64 },

    #[error(
        "exponential overflow in the quadratic driver (exponent {exponent:.1}); \
         use a smaller risk sensitivity or rescale the payoffs"
    )]
    Overflow { exponent: f64 },

    #[error("surface/model mismatch: {0}")]
    SurfaceMismatch(String),

    #[error("g-domain violation on path with seed {seed}: {source}")]
    PathDomain {
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("validation error at `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
