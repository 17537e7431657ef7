use std::fmt;

use thiserror::Error;

use crate::geometry::SlitIndex;

pub type Result<T> = std::result::Result<T, Error>;

/// A single violated geometry invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum GeometryViolation {
    DimensionBelowTwo(usize),
    NonPositive { field: &'static str, value: f64 },
    SlitsNotDisjoint { slit_width: f64, slit_spacing: f64 },
    FarFieldOrdering { z_aperture: f64, lens_position: f64, detector_far_plane: f64 },
}

impl fmt::Display for GeometryViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeometryViolation::DimensionBelowTwo(d) => write!(f, "dimension below 2 (D = {d})"),
            GeometryViolation::NonPositive { field, value } => {
                write!(f, "{field} must be strictly positive (got {value})")
            }
            GeometryViolation::SlitsNotDisjoint { slit_width, slit_spacing } => write!(
                f,
                "slits not disjoint: spacing d = {slit_spacing} m must exceed slit width 2a = {slit_width} m"
            ),
            GeometryViolation::FarFieldOrdering { z_aperture, lens_position, detector_far_plane } => write!(
                f,
                "far-field ordering violated: need z_A < z_L < z (got {z_aperture}, {lens_position}, {detector_far_plane})"
            ),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {}", join(.0))]
    Geometry(Vec<GeometryViolation>),

    #[error("dimension below 2 (D = {0})")]
    DimensionBelowTwo(usize),

    #[error("slit label with twice_l = {twice_l} is not valid for D = {dimension}")]
    InvalidSlit { twice_l: i32, dimension: usize },

    #[error("cannot parse slit label {0:?}")]
    SlitLabel(String),

    #[error("invalid pump profile: {0}")]
    Pump(String),

    #[error("pump amplitude vanishes over every slit pair")]
    PumpVanishes,

    #[error("quadrature did not converge: estimated error {estimate:e} exceeds tolerance {tolerance:e}")]
    Quadrature { estimate: f64, tolerance: f64 },

    #[error("degenerate imaging configuration: the beta denominator f^2 - (z - z_L - f)(z - z_A - f) is zero")]
    DegenerateImaging,

    #[error("dimension mismatch: expected D = {expected}, found D = {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("state is not normalized (squared norm {0})")]
    Unnormalized(f64),

    #[error("density operator is not Hermitian (max deviation {0:e})")]
    NonHermitian(f64),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("more than one scan record for fixed slit {0}")]
    DuplicateScan(SlitIndex),

    #[error("no scan record for fixed slit {0}")]
    MissingScan(SlitIndex),

    #[error("no coincidences recorded in any bin")]
    EmptyCounts,

    #[error("fringe slices were evaluated on different x1 grids")]
    MismatchedGrids,

    #[error("{0}")]
    InvalidInput(String),

    #[error("configuration: {0}")]
    Config(String),

    #[error("{path}: {message}")]
    Parse { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn join(violations: &[GeometryViolation]) -> String {
    violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}
