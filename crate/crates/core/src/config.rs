//! Run configuration: one JSON document with geometry, pump, noise, grid and
//! threshold blocks. Every field is optional and defaults to the reference
//! setup. All lengths are meters.
//!
//! ```json
//! {
//!   "geometry": { "dimension": 8, "slit_spacing": 1.7e-4 },
//!   "pump": { "shape": "gaussian", "waist": 4.5e-6, "center": 0.0 },
//!   "noise": { "seed": 7, "mean_pair_flux": 2000.0, "acquisition": 1.0 },
//!   "grids": { "x2_slices": [0.0, 3e-4] },
//!   "thresholds": { "score": 0.05, "visibility": 0.1 }
//! }
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::diagnostics::WitnessThresholds;
use crate::error::{Error, Result};
use crate::experiment::NoiseSettings;
use crate::far_field::linspace;
use crate::geometry::{ExperimentGeometry, GeometryConfig};
use crate::quadrature::QuadratureSpec;
use crate::state_prep::PumpProfile;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub geometry: GeometryConfig,
    pub pump: PumpConfig,
    pub noise: NoiseConfig,
    pub grids: GridConfig,
    pub thresholds: ThresholdConfig,
    pub quadrature: QuadratureConfig,
}

/// Pump profile in the aperture plane. The default is a gaussian focused to a
/// tenth of the slit half width, centered on the aperture.
pub const DEFAULT_PUMP_WAIST: f64 = 4.5e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PumpConfig(pub PumpProfile);

impl Default for PumpConfig {
    fn default() -> Self {
        Self(PumpProfile::gaussian(DEFAULT_PUMP_WAIST, 0.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub seed: u64,
    /// Pairs/s.
    pub mean_pair_flux: f64,
    pub singles_ratio: f64,
    /// Seconds per scan point.
    pub acquisition: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        let n = NoiseSettings::default();
        Self { seed: n.seed, mean_pair_flux: n.mean_pair_flux, singles_ratio: n.singles_ratio, acquisition: n.acquisition }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    /// Step of the near-field D2 scan; the range spans the aperture plus one detector width.
    pub scan_step: f64,
    pub fringe_min: f64,
    pub fringe_max: f64,
    pub fringe_points: usize,
    /// Fixed D2 positions for fringe slices.
    pub x2_slices: Vec<f64>,
    pub map_min: f64,
    pub map_max: f64,
    pub map_points: usize,
    /// Midpoint samples per axis of the detector window when smoothing.
    pub window_points: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            scan_step: 5e-6,
            fringe_min: -2.5e-3,
            fringe_max: 2.5e-3,
            fringe_points: 501,
            x2_slices: vec![0.0, 300e-6],
            map_min: -2.5e-3,
            map_max: 2.5e-3,
            map_points: 101,
            window_points: 9,
        }
    }
}

impl GridConfig {
    pub fn fringe_grid(&self) -> Vec<f64> {
        linspace(self.fringe_min, self.fringe_max, self.fringe_points)
    }

    pub fn map_grid(&self) -> Vec<f64> {
        linspace(self.map_min, self.map_max, self.map_points)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdConfig {
    pub score: f64,
    pub visibility: f64,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        let t = WitnessThresholds::default();
        Self { score: t.score, visibility: t.visibility }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureConfig {
    pub base_order: usize,
    pub rel_tol: f64,
    pub max_depth: u32,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        let q = QuadratureSpec::default();
        Self { base_order: q.base_order, rel_tol: q.rel_tol, max_depth: q.max_depth }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Validated geometry plus checks on the other blocks.
    pub fn validate(&self) -> Result<ExperimentGeometry> {
        let geometry = self.geometry.validate()?;
        self.pump.0.validate()?;
        let n = &self.noise;
        if !(n.mean_pair_flux >= 0.0 && n.singles_ratio >= 0.0 && n.acquisition >= 0.0) {
            return Err(Error::Config("noise: flux, singles ratio and acquisition must be nonnegative".into()));
        }
        let g = &self.grids;
        if !(g.scan_step > 0.0) {
            return Err(Error::Config("grids: scan_step must be positive".into()));
        }
        if !(g.fringe_max > g.fringe_min) || g.fringe_points < 2 {
            return Err(Error::Config("grids: fringe range must be increasing with at least two points".into()));
        }
        if !(g.map_max > g.map_min) || g.map_points < 2 {
            return Err(Error::Config("grids: map range must be increasing with at least two points".into()));
        }
        if self.quadrature.base_order == 0 || !(self.quadrature.rel_tol > 0.0) {
            return Err(Error::Config("quadrature: base_order and rel_tol must be positive".into()));
        }
        Ok(geometry)
    }

    pub fn noise_settings(&self) -> NoiseSettings {
        NoiseSettings {
            seed: self.noise.seed,
            mean_pair_flux: self.noise.mean_pair_flux,
            singles_ratio: self.noise.singles_ratio,
            acquisition: self.noise.acquisition,
        }
    }

    pub fn witness_thresholds(&self) -> WitnessThresholds {
        WitnessThresholds { score: self.thresholds.score, visibility: self.thresholds.visibility }
    }

    pub fn quadrature_spec(&self) -> QuadratureSpec {
        QuadratureSpec {
            base_order: self.quadrature.base_order,
            rel_tol: self.quadrature.rel_tol,
            max_depth: self.quadrature.max_depth,
        }
    }
}
