//! Two-qudit states in the slit-pair basis `|l1>|l2>`.
//!
//! Three constructions are provided: the analytic maximally entangled state
//! produced by a pump focused onto the aperture plane, the classically
//! correlated mixture with the same slit-pair statistics, and a numerical
//! projection of the transmitted biphoton amplitude for an arbitrary pump
//! profile.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ExperimentGeometry, SlitIndex};
use crate::quadrature::{AdaptiveTensor, QuadratureSpec, Rect};

/// Tolerance on the squared norm of a normalized state.
pub const NORM_TOLERANCE: f64 = 1e-10;

/// Pure two-qudit state with amplitudes `c[l1][l2]` stored row-major by slot.
///
/// States built by [`QuditPureState::new`] are normalized; reconstructed
/// states may carry a norm below one (see [`QuditPureState::from_raw`]).
#[derive(Debug, Clone, PartialEq)]
pub struct QuditPureState {
    dimension: usize,
    amplitudes: Vec<Complex64>,
}

impl QuditPureState {
    /// Normalized state; fails if the squared norm differs from 1 by more than [`NORM_TOLERANCE`].
    pub fn new(dimension: usize, amplitudes: Vec<Complex64>) -> Result<Self> {
        let state = Self::from_raw(dimension, amplitudes)?;
        let n = state.norm_sqr();
        if (n - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::Unnormalized(n));
        }
        Ok(state)
    }

    /// State with arbitrary norm, for reconstructions that are deliberately left unnormalized.
    pub fn from_raw(dimension: usize, amplitudes: Vec<Complex64>) -> Result<Self> {
        if dimension < 2 {
            return Err(Error::DimensionBelowTwo(dimension));
        }
        if amplitudes.len() != dimension * dimension {
            return Err(Error::InvalidState(format!(
                "expected {} amplitudes for D = {dimension}, got {}",
                dimension * dimension,
                amplitudes.len()
            )));
        }
        if amplitudes.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::InvalidState("non-finite amplitude".into()));
        }
        Ok(Self { dimension, amplitudes })
    }

    /// Scale `amplitudes` to unit norm.
    pub fn normalize(dimension: usize, amplitudes: Vec<Complex64>) -> Result<Self> {
        let state = Self::from_raw(dimension, amplitudes)?;
        let n = state.norm_sqr().sqrt();
        if n == 0.0 {
            return Err(Error::InvalidState("zero state cannot be normalized".into()));
        }
        Ok(Self { dimension, amplitudes: state.amplitudes.iter().map(|c| c / n).collect() })
    }

    /// Product state `u ⊗ v`, normalized.
    pub fn product(u: &[Complex64], v: &[Complex64]) -> Result<Self> {
        if u.len() != v.len() {
            return Err(Error::DimensionMismatch { expected: u.len(), found: v.len() });
        }
        let amps = u.iter().flat_map(|a| v.iter().map(move |b| a * b)).collect();
        Self::normalize(u.len(), amps)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn get(&self, l1: SlitIndex, l2: SlitIndex) -> Complex64 {
        self.amplitudes[l1.slot(self.dimension) * self.dimension + l2.slot(self.dimension)]
    }

    pub fn at_slots(&self, s1: usize, s2: usize) -> Complex64 {
        self.amplitudes[s1 * self.dimension + s2]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - 1.0).abs() <= NORM_TOLERANCE
    }

    pub fn normalized(&self) -> Result<Self> {
        Self::normalize(self.dimension, self.amplitudes.clone())
    }

    /// `<self|other>` without normalization.
    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        if self.dimension != other.dimension {
            return Err(Error::DimensionMismatch { expected: self.dimension, found: other.dimension });
        }
        Ok(self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a.conj() * b).sum())
    }

    /// Iterate `(l1, l2, c)` over all entries in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = (SlitIndex, SlitIndex, Complex64)> + '_ {
        let d = self.dimension;
        self.amplitudes.iter().enumerate().map(move |(i, c)| {
            (SlitIndex::from_slot(i / d, d), SlitIndex::from_slot(i % d, d), *c)
        })
    }

    pub fn nonzero_count(&self, threshold: f64) -> usize {
        self.amplitudes.iter().filter(|c| c.norm() > threshold).count()
    }
}

/// Equally or unequally weighted mixture of the products `|l>|−l>`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelatedMixture {
    dimension: usize,
    weights: Vec<f64>,
}

impl CorrelatedMixture {
    /// Weights indexed by the slot of `l` (photon 1); photon 2 is at `-l`.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        let dimension = weights.len();
        if dimension < 2 {
            return Err(Error::DimensionBelowTwo(dimension));
        }
        if weights.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::InvalidState("mixture weights must be nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidState(format!("mixture weights sum to {total}, not 1")));
        }
        Ok(Self { dimension, weights })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, l: SlitIndex) -> f64 {
        self.weights[l.slot(self.dimension)]
    }
}

/// Transverse pump amplitude `W(ξ)` in the aperture plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase")]
pub enum PumpProfile {
    /// `exp(-(ξ - center)^2 / waist^2)`.
    Gaussian { waist: f64, center: f64 },
    /// Linear interpolation between `(position, re, im)` samples, zero outside.
    Tabulated { samples: Vec<(f64, f64, f64)> },
}

impl PumpProfile {
    pub fn gaussian(waist: f64, center: f64) -> Self {
        PumpProfile::Gaussian { waist, center }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PumpProfile::Gaussian { waist, center } => {
                if !(*waist > 0.0 && waist.is_finite()) {
                    return Err(Error::Pump(format!("gaussian waist must be positive, got {waist}")));
                }
                if !center.is_finite() {
                    return Err(Error::Pump("gaussian center must be finite".into()));
                }
            }
            PumpProfile::Tabulated { samples } => {
                if samples.len() < 2 {
                    return Err(Error::Pump("tabulated profile needs at least two samples".into()));
                }
                if samples.windows(2).any(|w| !(w[1].0 > w[0].0)) {
                    return Err(Error::Pump("tabulated samples must be strictly ordered by position".into()));
                }
            }
        }
        Ok(())
    }

    pub fn amplitude(&self, xi: f64) -> Complex64 {
        match self {
            PumpProfile::Gaussian { waist, center } => {
                let t = (xi - center) / waist;
                Complex64::new((-t * t).exp(), 0.0)
            }
            PumpProfile::Tabulated { samples } => {
                let first = samples[0].0;
                let last = samples[samples.len() - 1].0;
                if xi < first || xi > last {
                    return Complex64::new(0.0, 0.0);
                }
                let i = samples.partition_point(|s| s.0 <= xi).clamp(1, samples.len() - 1);
                let (x0, r0, i0) = samples[i - 1];
                let (x1, r1, i1) = samples[i];
                let t = (xi - x0) / (x1 - x0);
                Complex64::new(r0 + t * (r1 - r0), i0 + t * (i1 - i0))
            }
        }
    }
}

/// Rectangle-function sum: 1 inside some slit `|x - l d| <= a`, 0 elsewhere.
pub fn aperture_transmission(x: f64, geometry: &ExperimentGeometry) -> f64 {
    if SlitIndex::nearest(x, geometry).is_some() {
        1.0
    } else {
        0.0
    }
}

/// Overlap `<l|l2>` of the sinc-kernel slit modes.
///
/// The modes are Fourier transforms of uniform slits, so the overlap is the
/// autocorrelation of two rectangles of width `2a` separated by `(l - l2) d`,
/// i.e. the triangle `max(0, 1 - |Δ| / 2a)`.
pub fn mode_overlap(l: SlitIndex, l2: SlitIndex, geometry: &ExperimentGeometry) -> f64 {
    let delta = (l.l() - l2.l()) * geometry.slit_spacing();
    triangle(delta / (2.0 * geometry.slit_half_width()))
}

pub fn triangle(t: f64) -> f64 {
    (1.0 - t.abs()).max(0.0)
}

/// `c[l][-l] = exp(i k d^2 l^2 / (2 z_A)) / sqrt(D)`, zero elsewhere.
pub fn ideal_entangled_state(geometry: &ExperimentGeometry) -> QuditPureState {
    let d = geometry.dimension();
    let norm = 1.0 / (d as f64).sqrt();
    let mut amps = vec![Complex64::new(0.0, 0.0); d * d];
    for l in geometry.slits() {
        amps[l.slot(d) * d + l.mirrored().slot(d)] = Complex64::from_polar(norm, geometry.pair_phase(l));
    }
    QuditPureState { dimension: d, amplitudes: amps }
}

/// Uniform mixture `p_l = 1/D`.
pub fn classically_correlated_state(geometry: &ExperimentGeometry) -> CorrelatedMixture {
    let d = geometry.dimension();
    CorrelatedMixture { dimension: d, weights: vec![1.0 / d as f64; d] }
}

/// Project the transmitted biphoton amplitude onto the uniform slit modes.
///
/// `c[l1][l2]` is the integral over slit `l1` (photon 1) and slit `l2`
/// (photon 2) of `exp(i k (x2 - x1)^2 / (8 z_A)) W((x1 + x2) / 2)`, globally
/// normalized. Slit-pair cells are integrated in parallel and collected in
/// slot order.
pub fn project_biphoton(
    geometry: &ExperimentGeometry,
    pump: &PumpProfile,
    spec: &QuadratureSpec,
) -> Result<QuditPureState> {
    pump.validate()?;
    let d = geometry.dimension();
    let a = geometry.slit_half_width();
    let pitch = geometry.slit_spacing();
    let chirp = geometry.wavenumber() / (8.0 * geometry.z_aperture());
    let integrand = |x1: f64, x2: f64| {
        let dx = x2 - x1;
        Complex64::from_polar(1.0, chirp * dx * dx) * pump.amplitude(0.5 * (x1 + x2))
    };
    let quad = AdaptiveTensor::new(*spec);
    let cell = |slot: usize| {
        let l1 = SlitIndex::from_slot(slot / d, d).center(pitch);
        let l2 = SlitIndex::from_slot(slot % d, d).center(pitch);
        Rect::new((l1 - a, l1 + a), (l2 - a, l2 + a))
    };

    let probes: Vec<(Complex64, f64)> =
        (0..d * d).into_par_iter().map(|slot| quad.probe(cell(slot), &integrand)).collect();
    let mut scale = probes.iter().map(|(v, _)| v.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        // The base rule may straddle an unresolved pump; refine once before giving up.
        scale = (0..d * d)
            .into_par_iter()
            .map(|slot| quad.integrate(cell(slot), 0.0, &integrand).value.norm())
            .reduce(|| 0.0, f64::max);
        if scale == 0.0 {
            return Err(Error::PumpVanishes);
        }
    }
    let tol = spec.rel_tol * scale;

    let estimates: Vec<_> = (0..d * d)
        .into_par_iter()
        .map(|slot| quad.integrate(cell(slot), tol, &integrand))
        .collect();
    let error: f64 = estimates.iter().map(|e| e.error).sum();
    if estimates.iter().any(|e| !e.converged) {
        return Err(Error::Quadrature { estimate: error, tolerance: tol });
    }
    QuditPureState::normalize(d, estimates.into_iter().map(|e| e.value).collect())
}
