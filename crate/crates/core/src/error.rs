use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Interpolation degree exceeds the number of substeps, or is unsupported.
    DegreeTooHigh { degree: usize, substeps: usize },
    NonMonotoneTimes,
    /// A sample set or waveform violates its shape invariants.
    InvalidSamples(&'static str),
    InvalidWindow,
    OutOfWindow { t: f64, start: f64, end: f64 },
    LengthMismatch { expected: usize, found: usize },
    LayoutMismatch { len: usize, block: usize },
    DimensionChange { expected: usize, found: usize },
    EmptyHistory,
    RankDeficient,
    InvalidConfig(String),
    MaxIterationsExceeded { window: usize, iterations: usize },
    LinearSolveFailure,
    WrongSide,
    Empty,
    NonPositive,
    /// Failure reported by a participant (for example a broken transport).
    Participant(String),
    MalformedFrame(String),
    VersionMismatch { local: u16, remote: u16 },
    ConfigMismatch { key: String },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DegreeTooHigh { degree, substeps } => write!(
                f,
                "interpolation degree {degree} not supported with {substeps} substeps"
            ),
            Error::NonMonotoneTimes => f.write_str("sample times are not strictly increasing"),
            Error::InvalidSamples(why) => write!(f, "invalid sample set: {why}"),
            Error::InvalidWindow => f.write_str("time window length must be positive and finite"),
            Error::OutOfWindow { t, start, end } => {
                write!(f, "time {t} outside window [{start}, {end}]")
            }
            Error::LengthMismatch { expected, found } => {
                write!(f, "length mismatch: expected {expected}, found {found}")
            }
            Error::LayoutMismatch { len, block } => {
                write!(f, "vector of length {len} is not a whole number of {block}-blocks")
            }
            Error::DimensionChange { expected, found } => write!(
                f,
                "secant dimension changed within a window: expected {expected}, found {found}"
            ),
            Error::EmptyHistory => f.write_str("no secant information available"),
            Error::RankDeficient => f.write_str("all secant columns were filtered out"),
            Error::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
            Error::MaxIterationsExceeded { window, iterations } => write!(
                f,
                "window {window} did not converge within {iterations} iterations"
            ),
            Error::LinearSolveFailure => f.write_str("linear solve failed (zero pivot)"),
            Error::WrongSide => f.write_str("operation not available on this subdomain"),
            Error::Empty => f.write_str("empty input"),
            Error::NonPositive => f.write_str("values must be strictly positive"),
            Error::Participant(msg) => write!(f, "participant failure: {msg}"),
            Error::MalformedFrame(msg) => write!(f, "malformed frame: {msg}"),
            Error::VersionMismatch { local, remote } => {
                write!(f, "protocol version mismatch: local {local}, remote {remote}")
            }
            Error::ConfigMismatch { key } => write!(f, "configuration mismatch on key `{key}`"),
        }
    }
}

impl core::error::Error for Error {}
