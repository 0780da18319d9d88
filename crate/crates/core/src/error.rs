use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MapError {
    #[error("beam has zero length")]
    DegenerateBeam,
    #[error("non-finite coordinate in input")]
    NonFinite,
    #[error("beam origin {found:?} differs from index origin {expected:?}")]
    OriginMismatch { expected: [f64; 3], found: [f64; 3] },
    #[error("label {label} outside 0..={max}")]
    LabelOutOfRange { label: u16, max: u16 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("scan contains no beams")]
    EmptyScan,
    #[error("scenario: {0}")]
    Scenario(String),
}
