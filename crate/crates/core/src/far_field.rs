//! Fourth-order (coincidence) interference behind the lenses.
//!
//! Each arm carries a lens of focal length `f` at `z_L`; detectors sit in the
//! plane `z`. The propagation collapses onto three numbers: the fringe wave
//! number `beta`, the conditional shift `phi` and the envelope offset `eta`.
//!
//! Rates come in two unit systems. The closed form for the ideal state and
//! the classically correlated rate are in "closed-form units", where the
//! ideal state peaks at `D^2` and the mixture at `D`. The kernel evaluator
//! for arbitrary pure states returns `|<x1, x2|psi>|^2`, which is the closed
//! form divided by `D` for the ideal state. Comparisons are made after
//! normalizing patterns to unit maximum.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{ExperimentGeometry, SlitIndex};
use crate::state_prep::{CorrelatedMixture, QuditPureState};

/// Relative tolerance below which a negative closed-form value is treated as rounding.
pub const CLAMP_TOLERANCE: f64 = 1e-9;

/// Visibility is measured where the incoherent envelope exceeds this fraction of its peak.
pub const ENVELOPE_FLOOR: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FarFieldParams {
    /// Fringe wave number, 1/m.
    pub beta: f64,
    /// Conditional fringe shift per unit `l + m`, m.
    pub phi: f64,
    /// Envelope displacement factor, dimensionless.
    pub eta: f64,
}

impl FarFieldParams {
    /// Fringe period of adjacent-slit (`|l - m| = 1`) terms, `2 pi / beta`.
    pub fn adjacent_period(&self) -> f64 {
        2.0 * PI / self.beta.abs()
    }
}

pub fn far_field_params(geometry: &ExperimentGeometry) -> Result<FarFieldParams> {
    let k = geometry.wavenumber();
    let f = geometry.lens_focal();
    let d = geometry.slit_spacing();
    let z = geometry.detector_far_plane();
    let z_l = geometry.lens_position();
    let z_a = geometry.z_aperture();
    let mut defocus = z - z_l - f;
    // Detector in the focal plane up to rounding of the inputs.
    if defocus.abs() <= 1e-12 * z {
        defocus = 0.0;
    }
    let denom = f * f - defocus * (z - z_a - f);
    if denom.abs() <= 1e-12 * f * f {
        return Err(Error::DegenerateImaging);
    }
    Ok(FarFieldParams {
        beta: k * f * d / denom,
        phi: d * (f * f - defocus * (z + z_a - f)) / (2.0 * f * z_a),
        eta: defocus / f,
    })
}

pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Precomputed far-field propagation for one geometry.
#[derive(Debug, Clone)]
pub struct FarFieldModel {
    geometry: ExperimentGeometry,
    params: FarFieldParams,
    slits: Vec<SlitIndex>,
    envelope_scale: f64,
    quadratic_phase: f64,
}

impl FarFieldModel {
    pub fn new(geometry: &ExperimentGeometry) -> Result<Self> {
        let params = far_field_params(geometry)?;
        let d = geometry.slit_spacing();
        // Per-slit phase alpha l^2 chosen so that the pair phase
        // k d^2 l^2 / (2 z_A) - 2 alpha l^2 equals -beta phi l^2, which is
        // exactly the (l + m) phi term of the closed form.
        let pair_phase = geometry.wavenumber() * d * d / (2.0 * geometry.z_aperture());
        Ok(Self {
            geometry: geometry.clone(),
            params,
            slits: geometry.slits(),
            envelope_scale: geometry.slit_half_width() * params.beta / d,
            quadratic_phase: 0.5 * (params.beta * params.phi + pair_phase),
        })
    }

    pub fn params(&self) -> FarFieldParams {
        self.params
    }

    pub fn geometry(&self) -> &ExperimentGeometry {
        &self.geometry
    }

    pub fn dimension(&self) -> usize {
        self.slits.len()
    }

    /// The per-slit quadratic kernel phase `alpha`.
    pub fn quadratic_phase(&self) -> f64 {
        self.quadratic_phase
    }

    /// First zero of the single-slit envelope for `eta = 0`, `pi d / (a beta)`.
    pub fn envelope_first_zero(&self) -> f64 {
        PI / self.envelope_scale.abs()
    }

    /// Single-slit diffraction factor of a photon from slit `s` detected at `x`.
    pub fn envelope(&self, x: f64, s: SlitIndex) -> f64 {
        let shift = s.l() * self.params.eta * self.geometry.slit_spacing();
        sinc(self.envelope_scale * (x - shift))
    }

    /// Propagation kernel from slit `s` to detector position `x`.
    pub fn kernel(&self, x: f64, s: SlitIndex) -> Complex64 {
        let l = s.l();
        let phase = -(self.params.beta * l * x + self.quadratic_phase * l * l);
        Complex64::from_polar(self.envelope(x, s), phase)
    }

    /// `V_lm(x1, x2)` for photon 1 in slits `l`, `m` and photon 2 in `-l`, `-m`.
    pub fn envelope_product(&self, x1: f64, x2: f64, l: SlitIndex, m: SlitIndex) -> f64 {
        self.envelope(x1, l) * self.envelope(x1, m) * self.envelope(x2, l.mirrored()) * self.envelope(x2, m.mirrored())
    }

    /// Closed-form rate of the ideal state before clamping.
    pub fn closed_form_unclamped(&self, x1: f64, x2: f64) -> f64 {
        let FarFieldParams { beta, phi, .. } = self.params;
        let mut diag = 0.0;
        let mut cross = 0.0;
        for (i, &l) in self.slits.iter().enumerate() {
            diag += self.envelope_product(x1, x2, l, l);
            for &m in &self.slits[i + 1..] {
                let arg = beta * (l.l() - m.l()) * (x2 - x1 - (l.l() + m.l()) * phi);
                cross += self.envelope_product(x1, x2, l, m) * arg.cos();
            }
        }
        diag + 2.0 * cross
    }

    /// Closed-form rate of the ideal state, clamped at zero.
    pub fn closed_form(&self, x1: f64, x2: f64) -> f64 {
        self.closed_form_unclamped(x1, x2).max(0.0)
    }

    /// Diagonal (incoherent) part of the closed form, `sum_l V_ll`.
    pub fn closed_form_background(&self, x1: f64, x2: f64) -> f64 {
        self.slits.iter().map(|&l| self.envelope_product(x1, x2, l, l)).sum()
    }

    /// `|sum c[l1][l2] K(x1, l1) K(x2, l2)|^2`.
    pub fn pure_rate(&self, state: &QuditPureState, x1: f64, x2: f64) -> f64 {
        let k1: Vec<Complex64> = self.slits.iter().map(|&s| self.kernel(x1, s)).collect();
        let k2: Vec<Complex64> = self.slits.iter().map(|&s| self.kernel(x2, s)).collect();
        let d = self.dimension();
        let mut amp = Complex64::new(0.0, 0.0);
        for (i, a) in k1.iter().enumerate() {
            let row: Complex64 = (0..d).map(|j| state.at_slots(i, j) * k2[j]).sum();
            amp += a * row;
        }
        amp.norm_sqr()
    }

    /// The pure-state rate with all cross terms dropped.
    pub fn pure_background(&self, state: &QuditPureState, x1: f64, x2: f64) -> f64 {
        let d = self.dimension();
        let e1: Vec<f64> = self.slits.iter().map(|&s| self.envelope(x1, s).powi(2)).collect();
        let e2: Vec<f64> = self.slits.iter().map(|&s| self.envelope(x2, s).powi(2)).collect();
        let mut total = 0.0;
        for i in 0..d {
            for j in 0..d {
                total += state.at_slots(i, j).norm_sqr() * e1[i] * e2[j];
            }
        }
        total
    }

    /// `sum_l p_l D V_ll`; for uniform weights this is the diagonal sum of the closed form.
    pub fn mixture_rate(&self, mixture: &CorrelatedMixture, x1: f64, x2: f64) -> f64 {
        let d = self.dimension() as f64;
        self.slits.iter().map(|&l| mixture.weight(l) * d * self.envelope_product(x1, x2, l, l)).sum()
    }

    fn check_dimension(&self, found: usize) -> Result<()> {
        if found != self.dimension() {
            return Err(Error::DimensionMismatch { expected: self.dimension(), found });
        }
        Ok(())
    }
}

pub fn coincidence_rate_closed_form(x1: f64, x2: f64, geometry: &ExperimentGeometry) -> Result<f64> {
    Ok(FarFieldModel::new(geometry)?.closed_form(x1, x2))
}

pub fn coincidence_rate_general(
    state: &QuditPureState,
    x1: f64,
    x2: f64,
    geometry: &ExperimentGeometry,
) -> Result<f64> {
    let model = FarFieldModel::new(geometry)?;
    model.check_dimension(state.dimension())?;
    Ok(model.pure_rate(state, x1, x2))
}

pub fn coincidence_rate_cc(
    mixture: &CorrelatedMixture,
    x1: f64,
    x2: f64,
    geometry: &ExperimentGeometry,
) -> Result<f64> {
    let model = FarFieldModel::new(geometry)?;
    model.check_dimension(mixture.dimension())?;
    Ok(model.mixture_rate(mixture, x1, x2))
}

/// A coincidence rate together with its incoherent (cross-term free) part.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RateSample {
    pub rate: f64,
    pub background: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Entangled,
    ClassicallyCorrelated,
    Mixed,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::Entangled => "entangled",
            Provenance::ClassicallyCorrelated => "classically_correlated",
            Provenance::Mixed => "mixed",
        })
    }
}

/// What the detectors look at.
#[derive(Debug, Clone, Copy)]
pub enum RateSource<'a> {
    /// Ideal state through the closed form.
    ClosedForm,
    /// Arbitrary pure state through the kernel evaluator.
    Pure(&'a QuditPureState),
    Correlated(&'a CorrelatedMixture),
    /// `weight |psi><psi| + (1 - weight) rho_cc`, mixed linearly in the rate.
    Blend { weight: f64, pure: &'a QuditPureState, mixture: &'a CorrelatedMixture },
}

impl RateSource<'_> {
    pub fn provenance(&self) -> Provenance {
        match self {
            RateSource::ClosedForm | RateSource::Pure(_) => Provenance::Entangled,
            RateSource::Correlated(_) => Provenance::ClassicallyCorrelated,
            RateSource::Blend { .. } => Provenance::Mixed,
        }
    }

    pub fn check(&self, model: &FarFieldModel) -> Result<()> {
        match self {
            RateSource::ClosedForm => Ok(()),
            RateSource::Pure(s) => model.check_dimension(s.dimension()),
            RateSource::Correlated(m) => model.check_dimension(m.dimension()),
            RateSource::Blend { weight, pure, mixture } => {
                if !(0.0..=1.0).contains(weight) {
                    return Err(Error::InvalidInput(format!("blend weight {weight} outside [0, 1]")));
                }
                model.check_dimension(pure.dimension())?;
                model.check_dimension(mixture.dimension())
            }
        }
    }

    pub fn sample(&self, model: &FarFieldModel, x1: f64, x2: f64) -> RateSample {
        match self {
            RateSource::ClosedForm => RateSample {
                rate: model.closed_form(x1, x2),
                background: model.closed_form_background(x1, x2),
            },
            RateSource::Pure(s) => RateSample {
                rate: model.pure_rate(s, x1, x2),
                background: model.pure_background(s, x1, x2),
            },
            RateSource::Correlated(m) => {
                let r = model.mixture_rate(m, x1, x2);
                RateSample { rate: r, background: r }
            }
            RateSource::Blend { weight, pure, mixture } => {
                // mixture_rate carries the closed-form factor D
                let d = model.dimension() as f64;
                let cc = model.mixture_rate(mixture, x1, x2) / d;
                RateSample {
                    rate: weight * model.pure_rate(pure, x1, x2) + (1.0 - weight) * cc,
                    background: weight * model.pure_background(pure, x1, x2) + (1.0 - weight) * cc,
                }
            }
        }
    }
}

/// Uniform detector aperture averaged by midpoint sampling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorWindow {
    pub width: f64,
    pub points: usize,
}

impl DetectorWindow {
    pub const MIN_POINTS: usize = 9;

    pub fn new(width: f64, points: usize) -> Result<Self> {
        if !(width >= 0.0 && width.is_finite()) {
            return Err(Error::InvalidInput(format!("detector window width {width} must be nonnegative")));
        }
        Ok(Self { width, points: points.max(Self::MIN_POINTS) })
    }

    pub fn offsets(&self) -> impl Iterator<Item = f64> + '_ {
        let n = self.points as f64;
        (0..self.points).map(move |i| ((i as f64 + 0.5) / n - 0.5) * self.width)
    }

    /// Average `f` over the square window centered at `(x1, x2)`.
    pub fn average<F: Fn(f64, f64) -> RateSample>(&self, x1: f64, x2: f64, f: F) -> RateSample {
        let mut acc = RateSample::default();
        for o2 in self.offsets() {
            for o1 in self.offsets() {
                let s = f(x1 + o1, x2 + o2);
                acc.rate += s.rate;
                acc.background += s.background;
            }
        }
        let n = (self.points * self.points) as f64;
        RateSample { rate: acc.rate / n, background: acc.background / n }
    }
}

/// Rate averaged over a square window of the detector slit width in each coordinate.
pub fn detector_smoothed_rate<F: Fn(f64, f64) -> f64>(rate: F, x1: f64, x2: f64, geometry: &ExperimentGeometry) -> f64 {
    let window = DetectorWindow { width: geometry.detector_slit_width(), points: DetectorWindow::MIN_POINTS };
    window.average(x1, x2, |a, b| RateSample { rate: rate(a, b), background: 0.0 }).rate
}

/// Evaluate `source` at `(x1, x2)`, optionally smoothed by `window`.
pub fn evaluate(model: &FarFieldModel, source: &RateSource<'_>, window: Option<&DetectorWindow>, x1: f64, x2: f64) -> RateSample {
    match window {
        Some(w) => w.average(x1, x2, |a, b| source.sample(model, a, b)),
        None => source.sample(model, x1, x2),
    }
}

/// `n` evenly spaced points from `start` to `end` inclusive.
pub fn linspace(start: f64, end: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let step = (end - start) / (n - 1) as f64;
            (0..n).map(|i| if i == n - 1 { end } else { start + step * i as f64 }).collect()
        }
    }
}

fn check_grid(grid: &[f64], axis: &str) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidInput(format!("{axis} grid is empty")));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput(format!("{axis} grid must be strictly increasing")));
    }
    Ok(())
}

/// One-dimensional coincidence pattern in `x1` at fixed `x2`.
#[derive(Debug, Clone, PartialEq)]
pub struct FringeSlice {
    pub x2: f64,
    pub x1: Vec<f64>,
    pub rates: Vec<f64>,
    pub visibility: f64,
    pub provenance: Provenance,
}

impl FringeSlice {
    /// Rates scaled to unit maximum.
    pub fn normalized(&self) -> Vec<f64> {
        let max = self.rates.iter().copied().fold(0.0, f64::max);
        if max == 0.0 {
            return self.rates.clone();
        }
        self.rates.iter().map(|r| r / max).collect()
    }
}

/// Fringe visibility inside the central envelope.
///
/// The rate is divided by its incoherent part so that the single-slit
/// envelope itself does not count as a fringe; the visibility is then
/// `(max - min) / (max + min)` of that ratio over the points with `|x1| < limit`
/// where the incoherent part is at least half its maximum.
pub fn fringe_visibility(x1: &[f64], samples: &[RateSample], limit: f64) -> f64 {
    let floor = samples.iter().map(|s| s.background).fold(0.0, f64::max) * ENVELOPE_FLOOR;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (x, s) in x1.iter().zip(samples) {
        if x.abs() < limit && s.background >= floor && s.background > 0.0 {
            let ratio = s.rate / s.background;
            lo = lo.min(ratio);
            hi = hi.max(ratio);
        }
    }
    if !(hi > lo) || hi + lo <= 0.0 {
        return 0.0;
    }
    ((hi - lo) / (hi + lo)).clamp(0.0, 1.0)
}

pub fn fringe_slice(
    model: &FarFieldModel,
    source: &RateSource<'_>,
    x2: f64,
    x1_grid: &[f64],
    window: Option<&DetectorWindow>,
) -> Result<FringeSlice> {
    source.check(model)?;
    check_grid(x1_grid, "x1")?;
    let samples: Vec<RateSample> =
        x1_grid.par_iter().map(|&x1| evaluate(model, source, window, x1, x2)).collect();
    let visibility = fringe_visibility(x1_grid, &samples, model.envelope_first_zero());
    Ok(FringeSlice {
        x2,
        x1: x1_grid.to_vec(),
        rates: samples.iter().map(|s| s.rate).collect(),
        visibility,
        provenance: source.provenance(),
    })
}

/// Coincidence rate sampled on an `x1 × x2` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CoincidenceMap {
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    /// Row-major with `x2` as the outer index.
    pub rates: Vec<f64>,
    pub provenance: Provenance,
    pub geometry: ExperimentGeometry,
    /// Largest negative closed-form excursion removed by clamping, relative to the map maximum.
    pub clamped: f64,
}

impl CoincidenceMap {
    pub fn rate(&self, i1: usize, i2: usize) -> f64 {
        self.rates[i2 * self.x1.len() + i1]
    }

    pub fn max_rate(&self) -> f64 {
        self.rates.iter().copied().fold(0.0, f64::max)
    }

    /// Whether clamping removed more than rounding noise.
    pub fn clamping_significant(&self) -> bool {
        self.clamped > CLAMP_TOLERANCE
    }
}

pub fn coincidence_map(
    model: &FarFieldModel,
    source: &RateSource<'_>,
    x1_grid: &[f64],
    x2_grid: &[f64],
    window: Option<&DetectorWindow>,
) -> Result<CoincidenceMap> {
    source.check(model)?;
    check_grid(x1_grid, "x1")?;
    check_grid(x2_grid, "x2")?;
    let rows: Vec<Vec<f64>> = x2_grid
        .par_iter()
        .map(|&x2| x1_grid.iter().map(|&x1| evaluate(model, source, window, x1, x2).rate).collect())
        .collect();
    let rates: Vec<f64> = rows.into_iter().flatten().collect();
    let mut clamped = 0.0;
    if matches!(source, RateSource::ClosedForm) {
        let min_raw = x2_grid
            .iter()
            .flat_map(|&x2| x1_grid.iter().map(move |&x1| (x1, x2)))
            .map(|(x1, x2)| model.closed_form_unclamped(x1, x2))
            .fold(0.0, f64::min);
        let max = rates.iter().copied().fold(0.0, f64::max);
        if max > 0.0 {
            clamped = -min_raw / max;
        }
    }
    Ok(CoincidenceMap {
        x1: x1_grid.to_vec(),
        x2: x2_grid.to_vec(),
        rates,
        provenance: source.provenance(),
        geometry: model.geometry().clone(),
        clamped,
    })
}
