use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A value outside the mathematical domain of an operation.
    Domain { what: &'static str, value: f64 },
    /// A requested accommodative demand the lens cannot produce.
    OutOfRange {
        requested: f64,
        near: f64,
        far: f64,
    },
    InsufficientData { needed: usize, got: usize },
    SingularFit,
    NonMonotoneCalibration,
    /// Lines of sight would intersect behind the viewer.
    Divergence { disparity_arcmin: f64, limit_arcmin: f64 },
    /// The oculomotor integration ran away.
    Unstable { accommodation: f64, vergence: f64, params: String },
    NonIdentifiable(String),
    Precondition(String),
    UnstableCi { failed: usize, total: usize },
    Invalid(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain { what, value } => write!(f, "{what} out of domain: {value}"),
            Error::OutOfRange { requested, near, far } => write!(
                f,
                "demand {requested:.3} D outside achievable range {far:.2}-{near:.2} D ({:.2}-{:.2} m)",
                1.0 / near,
                1.0 / far
            ),
            Error::InsufficientData { needed, got } => {
                write!(f, "insufficient data: need at least {needed}, got {got}")
            }
            Error::SingularFit => write!(f, "singular fit: all samples share one current"),
            Error::NonMonotoneCalibration => {
                write!(f, "calibration line has zero slope and cannot be inverted")
            }
            Error::Divergence { disparity_arcmin, limit_arcmin } => write!(
                f,
                "uncrossed disparity {disparity_arcmin:.3} arcmin exceeds screen vergence {limit_arcmin:.3} arcmin"
            ),
            Error::Unstable { accommodation, vergence, params } => write!(
                f,
                "oculomotor model diverged (A = {accommodation:.3} D, V = {vergence:.3} D) with {params}"
            ),
            Error::NonIdentifiable(msg) => write!(f, "non-identifiable fit: {msg}"),
            Error::Precondition(msg) => write!(f, "precondition violated: {msg}"),
            Error::UnstableCi { failed, total } => {
                write!(f, "bootstrap unstable: {failed} of {total} resamples failed to fit")
            }
            Error::Invalid(msg) => write!(f, "invalid parameter: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
