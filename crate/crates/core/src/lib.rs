//! Near-field localization and sensing toolkit.
//!
//! Simulation and estimation building blocks for radio localization and
//! sensing with electrically large apertures (ELAA, RIS panels, distributed
//! phase-coherent MIMO). The library models spherical-wavefront propagation,
//! per-element blockage (spatial non-stationarity), and beam squint over
//! wide OFDM bandwidths, and provides:
//!
//! - [`geometry`]: apertures, coordinate types, near/far-field diagnostics
//! - [`channel`]: exact spherical-wave steering, path assembly, RIS cascades,
//!   noisy observation synthesis
//! - [`beamforming`]: phase-shifter focusing weights, spatial gain fields,
//!   focal-point extraction, beam-squint focal curves
//! - [`fisher`]: Fisher information and position error bounds for
//!   coherent/noncoherent distributed uplink localization
//! - [`estimators`]: NF-MUSIC, direct ML positioning, TDOA multilateration,
//!   RIS-aided NLOS positioning
//! - [`sensing`]: bistatic matched-filter imaging and peak detection

pub mod beamforming;
pub mod channel;
pub mod estimators;
pub mod fisher;
pub mod geometry;
pub mod sensing;

use thiserror::Error;

/// Errors raised by toolkit operations. Most variants are precondition
/// violations; numerical conditions that the caller is expected to handle
/// (e.g. a singular Fisher matrix) are reported in results, not here.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("{name} must be finite")]
    NonFinite { name: &'static str },
    #[error("{name} must be a unit vector (norm {norm})")]
    NonUnitVector { name: &'static str, norm: f64 },
    #[error("array needs at least one element")]
    EmptyArray,
    #[error("array elements {a} and {b} coincide")]
    DuplicateElements { a: usize, b: usize },
    #[error("source coincides with array element {element}")]
    CoincidentSourceElement { element: usize },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("mask entry {index} is {value}, outside [0, 1]")]
    MaskValueOutOfRange { index: usize, value: f64 },
    #[error("invalid region: {0}")]
    InvalidRegion(String),
    #[error("field is constant; no unique extremum")]
    ConstantField,
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("source count {n_sources} must be below element count {elements}")]
    TooManySources { n_sources: usize, elements: usize },
    #[error("covariance matrix is not Hermitian")]
    NotHermitian,
    #[error("singular system: {0}")]
    SingularSystem(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub use beamforming::{GainField, WeightVector};
pub use channel::{BlockageMask, ChannelTensor, OfdmGrid, PathKind, PropagationPath};
pub use geometry::{ArrayGeometry, Position, Region2D, SPEED_OF_LIGHT};
