use alloc::string::String;
use alloc::vec::Vec;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("duplicate dimension `{0}`")]
    DuplicateDim(String),
    #[error("cannot parse unit `{0}`")]
    BadUnit(String),
    #[error("unknown coordinate `{0}`")]
    UnknownCoord(String),
    #[error("unknown dimension `{0}`")]
    UnknownDim(String),
    #[error("selector not aligned with coordinate `{0}`")]
    UnalignedSelector(String),
    #[error("incompatible units `{0}` and `{1}`")]
    UnitMismatch(String, String),
    #[error("conflicting values for coordinate `{0}`")]
    CoordMismatch(String),
    #[error("optode `{0}` missing from probe geometry")]
    MissingOptode(String),
    #[error("expected exactly two wavelengths, found {0}")]
    NeedTwoWavelengths(usize),
    #[error("window holds {0} samples, at least 4 required")]
    WindowTooShort(usize),
    #[error("series too short: {0}")]
    TooShort(String),
    #[error("non-positive amplitude encountered")]
    NonPositiveAmplitude,
    #[error("extinction matrix is rank deficient")]
    SingularExtinction,
    #[error("invalid frequency band: {0}")]
    BadBand(String),
    #[error("irregular sampling")]
    IrregularSampling,
    #[error("weights sum to zero")]
    ZeroWeights,
    #[error("not implemented: {0}")]
    NotImplemented(String),
    #[error("no events match the requested trial types")]
    NoMatchingEvents,
    #[error("reltime slice outside epoch range: {0}")]
    BadSlice(String),
    #[error("stimulus table is empty")]
    EmptyStim,
    #[error("invalid parameter: {0}")]
    BadParam(String),
    #[error("no short channels")]
    NoShortChannels,
    #[error("duplicate regressor `{0}`")]
    DuplicateRegressor(String),
    #[error("time grids or channel sets differ: {0}")]
    GridMismatch(String),
    #[error("design matrix is rank deficient; offending regressors: {0:?}")]
    RankDeficient(Vec<String>),
    #[error("covariance is not positive semi-definite")]
    NonPsdCov,
    #[error("seed vertex {0} out of range")]
    BadSeed(usize),
    #[error("surface has no vertices")]
    EmptySurface,
    #[error("linear system is singular")]
    SingularSystem,
    #[error("channels do not match the sensitivity matrix: {0}")]
    ChannelMismatch(String),
    #[error("image has no parcel coordinate")]
    NoParcelCoord,
    #[error("onset {0} outside the time range")]
    OnsetOutOfRange(f64),
    #[error("no generator registered for `{0}`")]
    UnknownGenerator(String),
    #[error("invalid range: {0}")]
    BadRange(String),
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error("component {0} did not converge")]
    NonConvergence(usize),
    #[error("l1 regularization must lie in [0, 0.5)")]
    BadReg,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("feature dimension mismatch: {0}")]
    FeatureMismatch(String),
    #[error("time shift {0} s outside the data duration")]
    ShiftOutOfRange(f64),
    #[error("projected source covariance is degenerate")]
    DegenerateCs,
    #[error("unknown trial type `{0}`")]
    UnknownTrialType(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = core::result::Result<T, Error>;
