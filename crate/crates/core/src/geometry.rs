//! Physical parameters of the setup and the slit labelling convention.
//!
//! Slits of a D-slit aperture are labelled by `l` running from `-(D-1)/2` to
//! `+(D-1)/2` in unit steps, so labels are half-integers for even `D` and
//! integers for odd `D`. Slit `l` is centered at `l * d`. Labels are stored as
//! `twice_l = 2 l` to keep all index arithmetic in integers.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, GeometryViolation, Result};

/// Label of one slit, stored as twice its (possibly half-integer) value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SlitIndex {
    twice_l: i32,
}

impl SlitIndex {
    pub fn new(twice_l: i32, dimension: usize) -> Result<Self> {
        let span = dimension as i32 - 1;
        if dimension < 2 {
            return Err(Error::DimensionBelowTwo(dimension));
        }
        if twice_l.abs() > span || (twice_l - span).rem_euclid(2) != 0 {
            return Err(Error::InvalidSlit { twice_l, dimension });
        }
        Ok(Self { twice_l })
    }

    pub fn twice_l(self) -> i32 {
        self.twice_l
    }

    pub fn l(self) -> f64 {
        f64::from(self.twice_l) / 2.0
    }

    /// The symmetrically opposite slit `-l`.
    pub fn mirrored(self) -> Self {
        Self { twice_l: -self.twice_l }
    }

    /// Position of the slit center for spacing `d`.
    pub fn center(self, slit_spacing: f64) -> f64 {
        self.l() * slit_spacing
    }

    /// Zero-based position of this label in [`slit_indices`] order.
    pub fn slot(self, dimension: usize) -> usize {
        ((self.twice_l + dimension as i32 - 1) / 2) as usize
    }

    pub fn from_slot(slot: usize, dimension: usize) -> Self {
        Self { twice_l: 2 * slot as i32 - (dimension as i32 - 1) }
    }

    /// Parse a label such as `+3/2`, `-1/2`, `0` or `1` and check it against `dimension`.
    pub fn parse(label: &str, dimension: usize) -> Result<Self> {
        let twice_l = parse_twice_l(label)?;
        Self::new(twice_l, dimension)
    }

    /// The slit whose transmitting region `[l d - a, l d + a]` contains `x`, if any.
    /// Edges are included up to a relative rounding margin of `1e-9 a`.
    pub fn nearest(x: f64, geometry: &ExperimentGeometry) -> Option<Self> {
        let dim = geometry.dimension();
        let half_span = (dim as f64 - 1.0) / 2.0;
        let slot = (x / geometry.slit_spacing() + half_span).round();
        if slot < 0.0 || slot > dim as f64 - 1.0 {
            return None;
        }
        let index = Self::from_slot(slot as usize, dim);
        let offset = x - index.center(geometry.slit_spacing());
        (offset.abs() <= geometry.slit_half_width() * (1.0 + 1e-9)).then_some(index)
    }
}

fn parse_twice_l(label: &str) -> Result<i32> {
    let bad = || Error::SlitLabel(label.to_string());
    let trimmed = label.trim();
    let (sign, body) = match trimmed.strip_prefix('-') {
        Some(rest) => (-1, rest),
        None => (1, trimmed.strip_prefix('+').unwrap_or(trimmed)),
    };
    let magnitude = match body.split_once('/') {
        Some((num, "2")) => num.parse::<i32>().map_err(|_| bad())?,
        Some(_) => return Err(bad()),
        None => 2 * body.parse::<i32>().map_err(|_| bad())?,
    };
    Ok(sign * magnitude)
}

impl fmt::Display for SlitIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.twice_l < 0 { "-" } else if self.twice_l > 0 { "+" } else { "" };
        let m = self.twice_l.abs();
        if m % 2 == 0 {
            write!(f, "{sign}{}", m / 2)
        } else {
            write!(f, "{sign}{m}/2")
        }
    }
}

/// Labels `-l_D, ..., +l_D` of a D-slit aperture in increasing order.
pub fn slit_indices(dimension: usize) -> Result<Vec<SlitIndex>> {
    if dimension < 2 {
        return Err(Error::DimensionBelowTwo(dimension));
    }
    Ok((0..dimension).map(|slot| SlitIndex::from_slot(slot, dimension)).collect())
}

/// Raw, unvalidated parameter set. All lengths in meters.
///
/// Defaults are the values of the reference setup: 826 nm degenerate
/// wavelength, four slits of width 0.09 mm on a 0.17 mm pitch at 200 mm from
/// the crystal, near-field detectors about 2 mm behind the slits with a 0.1 mm
/// entrance slit, and a far-field arm with an f = 150 mm lens at 650 mm and
/// detectors at 800 mm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    pub wavelength: f64,
    pub dimension: usize,
    pub slit_half_width: f64,
    pub slit_spacing: f64,
    pub z_aperture: f64,
    pub detector_near_offset: f64,
    pub detector_slit_width: f64,
    pub lens_focal: f64,
    pub lens_position: f64,
    pub detector_far_plane: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            wavelength: 826e-9,
            dimension: 4,
            slit_half_width: 0.045e-3,
            slit_spacing: 0.17e-3,
            z_aperture: 0.2,
            detector_near_offset: 2e-3,
            detector_slit_width: 0.1e-3,
            lens_focal: 0.15,
            lens_position: 0.65,
            detector_far_plane: 0.8,
        }
    }
}

impl GeometryConfig {
    pub fn with_dimension(dimension: usize) -> Self {
        Self { dimension, ..Self::default() }
    }

    pub fn validate(&self) -> Result<ExperimentGeometry> {
        validate(self)
    }
}

/// Check every invariant of `raw` and derive the wavenumber.
///
/// All violations are collected and reported together.
pub fn validate(raw: &GeometryConfig) -> Result<ExperimentGeometry> {
    let mut violations = Vec::new();
    if raw.dimension < 2 {
        violations.push(GeometryViolation::DimensionBelowTwo(raw.dimension));
    }
    let lengths = [
        ("wavelength", raw.wavelength),
        ("slit_half_width", raw.slit_half_width),
        ("slit_spacing", raw.slit_spacing),
        ("z_aperture", raw.z_aperture),
        ("detector_near_offset", raw.detector_near_offset),
        ("detector_slit_width", raw.detector_slit_width),
        ("lens_focal", raw.lens_focal),
        ("lens_position", raw.lens_position),
        ("detector_far_plane", raw.detector_far_plane),
    ];
    for (field, value) in lengths {
        // also rejects NaN
        if !(value > 0.0 && value.is_finite()) {
            violations.push(GeometryViolation::NonPositive { field, value });
        }
    }
    if !(raw.slit_spacing > 2.0 * raw.slit_half_width) {
        violations.push(GeometryViolation::SlitsNotDisjoint {
            slit_width: 2.0 * raw.slit_half_width,
            slit_spacing: raw.slit_spacing,
        });
    }
    if !(raw.z_aperture < raw.lens_position && raw.lens_position < raw.detector_far_plane) {
        violations.push(GeometryViolation::FarFieldOrdering {
            z_aperture: raw.z_aperture,
            lens_position: raw.lens_position,
            detector_far_plane: raw.detector_far_plane,
        });
    }
    if !violations.is_empty() {
        return Err(Error::Geometry(violations));
    }
    Ok(ExperimentGeometry { raw: raw.clone(), wavenumber: 2.0 * PI / raw.wavelength })
}

/// A validated, immutable parameter set with the cached wavenumber `k = 2 pi / lambda`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentGeometry {
    raw: GeometryConfig,
    wavenumber: f64,
}

impl ExperimentGeometry {
    /// The reference setup with `D = 4`.
    pub fn reference() -> Self {
        GeometryConfig::default().validate().expect("default geometry is valid")
    }

    pub fn reference_with_dimension(dimension: usize) -> Result<Self> {
        GeometryConfig::with_dimension(dimension).validate()
    }

    pub fn config(&self) -> &GeometryConfig {
        &self.raw
    }

    pub fn wavelength(&self) -> f64 {
        self.raw.wavelength
    }
    pub fn wavenumber(&self) -> f64 {
        self.wavenumber
    }
    pub fn dimension(&self) -> usize {
        self.raw.dimension
    }
    pub fn slit_half_width(&self) -> f64 {
        self.raw.slit_half_width
    }
    pub fn slit_spacing(&self) -> f64 {
        self.raw.slit_spacing
    }
    pub fn z_aperture(&self) -> f64 {
        self.raw.z_aperture
    }
    pub fn detector_near_offset(&self) -> f64 {
        self.raw.detector_near_offset
    }
    pub fn detector_slit_width(&self) -> f64 {
        self.raw.detector_slit_width
    }
    pub fn lens_focal(&self) -> f64 {
        self.raw.lens_focal
    }
    pub fn lens_position(&self) -> f64 {
        self.raw.lens_position
    }
    pub fn detector_far_plane(&self) -> f64 {
        self.raw.detector_far_plane
    }

    pub fn slits(&self) -> Vec<SlitIndex> {
        slit_indices(self.dimension()).expect("validated dimension")
    }

    /// Phase `k d^2 l^2 / (2 z_A)` picked up by the pair `(l, -l)` between crystal and apertures.
    pub fn pair_phase(&self, slit: SlitIndex) -> f64 {
        let l = slit.l();
        self.wavenumber * self.slit_spacing().powi(2) * l * l / (2.0 * self.z_aperture())
    }

    /// Outer edge of the aperture, `l_D d + a`.
    pub fn aperture_half_extent(&self) -> f64 {
        (self.dimension() as f64 - 1.0) / 2.0 * self.slit_spacing() + self.slit_half_width()
    }

    /// Same geometry with a different dimension.
    pub fn with_dimension(&self, dimension: usize) -> Result<Self> {
        GeometryConfig { dimension, ..self.raw.clone() }.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reference_geometry_is_valid() {
        let g = ExperimentGeometry::reference();
        assert_eq!(g.dimension(), 4);
        assert!(((g.wavenumber() - 2.0 * PI / 826e-9) / g.wavenumber()).abs() < 1e-12);
    }

    #[test]
    fn touching_slits_are_rejected() {
        let raw = GeometryConfig { slit_spacing: 0.09e-3, ..Default::default() };
        let err = raw.validate().unwrap_err();
        assert!(err.to_string().contains("slits not disjoint"), "{err}");
    }

    #[test]
    fn single_slit_is_rejected() {
        let raw = GeometryConfig { dimension: 1, ..Default::default() };
        let err = raw.validate().unwrap_err();
        assert!(err.to_string().contains("dimension below 2"), "{err}");
    }

    #[test]
    fn every_violation_is_named() {
        let raw = GeometryConfig {
            dimension: 0,
            wavelength: -1.0,
            slit_spacing: 1e-5,
            lens_position: 0.1,
            ..Default::default()
        };
        match raw.validate() {
            Err(Error::Geometry(v)) => assert_eq!(v.len(), 4, "{v:?}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn labels_for_even_and_odd_dimensions() {
        let four: Vec<i32> = slit_indices(4).unwrap().iter().map(|s| s.twice_l()).collect();
        assert_eq!(four, vec![-3, -1, 1, 3]);
        let eight: Vec<f64> = slit_indices(8).unwrap().iter().map(|s| s.l()).collect();
        assert_eq!(eight, vec![-3.5, -2.5, -1.5, -0.5, 0.5, 1.5, 2.5, 3.5]);
        let three: Vec<f64> = slit_indices(3).unwrap().iter().map(|s| s.l()).collect();
        assert_eq!(three, vec![-1.0, 0.0, 1.0]);
        assert!(slit_indices(1).is_err());
    }

    #[test]
    fn parity_and_range_are_checked() {
        assert!(SlitIndex::new(2, 4).is_err());
        assert!(SlitIndex::new(5, 4).is_err());
        assert!(SlitIndex::new(1, 3).is_err());
        assert!(SlitIndex::new(-2, 3).is_ok());
    }

    #[test]
    fn labels_parse_and_print() {
        for (text, twice) in [("+3/2", 3), ("-1/2", -1), ("1/2", 1), ("0", 0), ("-1", -2)] {
            let dim = if twice % 2 == 0 { 3 } else { 4 };
            let s = SlitIndex::parse(text, dim).unwrap();
            assert_eq!(s.twice_l(), twice);
        }
        assert_eq!(SlitIndex::new(-3, 4).unwrap().to_string(), "-3/2");
        assert_eq!(SlitIndex::new(2, 3).unwrap().to_string(), "+1");
        assert!(SlitIndex::parse("1/3", 4).is_err());
        assert!(SlitIndex::parse("x", 4).is_err());
    }

    proptest! {
        #[test]
        fn indices_are_symmetric_and_consecutive(dim in 2usize..40) {
            let idx = slit_indices(dim).unwrap();
            prop_assert_eq!(idx.len(), dim);
            prop_assert_eq!(idx.iter().map(|s| s.twice_l()).sum::<i32>(), 0);
            for w in idx.windows(2) {
                prop_assert_eq!(w[1].twice_l() - w[0].twice_l(), 2);
            }
            for (slot, s) in idx.iter().enumerate() {
                prop_assert_eq!(s.slot(dim), slot);
            }
        }

        #[test]
        fn nearest_inverts_center(dim in 2usize..12, pick in 0usize..12, frac in -1.0f64..1.0) {
            let g = ExperimentGeometry::reference_with_dimension(dim).unwrap();
            let slit = SlitIndex::from_slot(pick % dim, dim);
            let x = slit.center(g.slit_spacing()) + 0.999 * frac * g.slit_half_width();
            prop_assert_eq!(SlitIndex::nearest(x, &g), Some(slit));
        }
    }

    #[test]
    fn gaps_have_no_slit() {
        let g = ExperimentGeometry::reference();
        assert_eq!(SlitIndex::nearest(0.0, &g), None);
        assert_eq!(SlitIndex::nearest(1.5 * g.slit_spacing() + g.slit_half_width() + 1e-9, &g), None);
        assert_eq!(SlitIndex::nearest(10.0 * g.slit_spacing(), &g), None);
    }
}
