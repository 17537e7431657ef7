//! Near-field coincidence scans and what is inferred from them.
//!
//! Detector D1 sits behind one slit `l` of the first aperture while D2 scans
//! the second aperture a couple of millimeters behind it. At that distance no
//! diffraction develops, so each detector simply collects the fraction of a
//! slit's light that falls inside its entrance slit.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{ExperimentGeometry, SlitIndex};
use crate::state_prep::QuditPureState;

/// Counting parameters shared by all records of one run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSettings {
    pub seed: u64,
    /// Pair flux in pairs/s scaling the coincidence rate.
    pub mean_pair_flux: f64,
    /// Singles flux relative to the pair flux (singles are not gated by the partner detector).
    pub singles_ratio: f64,
    /// Acquisition time per scan point, s.
    pub acquisition: f64,
}

impl Default for NoiseSettings {
    fn default() -> Self {
        Self { seed: 1, mean_pair_flux: 2.0e3, singles_ratio: 10.0, acquisition: 1.0 }
    }
}

/// One scan of D2 with D1 fixed behind `fixed_slit`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanRecord {
    pub fixed_slit: SlitIndex,
    pub positions: Vec<f64>,
    pub singles: Vec<u64>,
    pub coincidences: Vec<u64>,
    pub expected_singles: Vec<f64>,
    pub expected_coincidences: Vec<f64>,
    pub acquisition: f64,
    pub seed: u64,
    pub mean_pair_flux: f64,
    /// False when the grid does not reach both outer slit edges.
    pub covers_aperture: bool,
}

/// Fraction of slit `slit`'s transmitted light inside a detector window of
/// width `window` centered at `x`.
pub fn overlap_fraction(x: f64, window: f64, slit: SlitIndex, geometry: &ExperimentGeometry) -> f64 {
    let a = geometry.slit_half_width();
    let c = slit.center(geometry.slit_spacing());
    let lo = (x - 0.5 * window).max(c - a);
    let hi = (x + 0.5 * window).min(c + a);
    ((hi - lo) / (2.0 * a)).max(0.0)
}

/// Scan grid `i * step`, symmetric about 0, reaching one detector width past
/// the aperture on each side.
pub fn default_scan_grid(geometry: &ExperimentGeometry, step: f64) -> Vec<f64> {
    let half = geometry.aperture_half_extent() + geometry.detector_slit_width();
    let n = (half / step - 1e-9).ceil() as i64;
    (-n..=n).map(|i| i as f64 * step).collect()
}

/// Seeded stream for the record of `fixed_slit`; one independent ChaCha stream per slit.
pub fn record_rng(seed: u64, fixed_slit: SlitIndex) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(fixed_slit.twice_l() as i64 as u64);
    rng
}

fn poisson<R: rand::Rng>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).map(|p| p.sample(rng) as u64).unwrap_or(0)
}

pub fn near_field_scan(
    state: &QuditPureState,
    fixed_slit: SlitIndex,
    grid: &[f64],
    noise: &NoiseSettings,
    geometry: &ExperimentGeometry,
) -> Result<ScanRecord> {
    let dim = geometry.dimension();
    if state.dimension() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: state.dimension() });
    }
    SlitIndex::new(fixed_slit.twice_l(), dim)?;
    if grid.is_empty() {
        return Err(Error::InvalidInput("scan grid is empty".into()));
    }
    if !(noise.mean_pair_flux >= 0.0 && noise.acquisition >= 0.0 && noise.singles_ratio >= 0.0) {
        return Err(Error::InvalidInput("flux, singles ratio and acquisition must be nonnegative".into()));
    }

    let slits = geometry.slits();
    let window = geometry.detector_slit_width();
    let row = fixed_slit.slot(dim);
    // Probability that photon 2 went through l2, jointly with photon 1 in the fixed slit / anywhere.
    let joint: Vec<f64> = (0..dim).map(|j| state.at_slots(row, j).norm_sqr()).collect();
    let marginal: Vec<f64> = (0..dim).map(|j| (0..dim).map(|i| state.at_slots(i, j).norm_sqr()).sum()).collect();

    let mut expected_coincidences = Vec::with_capacity(grid.len());
    let mut expected_singles = Vec::with_capacity(grid.len());
    for &x in grid {
        let (mut c, mut s) = (0.0, 0.0);
        for (j, &slit) in slits.iter().enumerate() {
            let ov = overlap_fraction(x, window, slit, geometry);
            c += joint[j] * ov;
            s += marginal[j] * ov;
        }
        expected_coincidences.push(noise.mean_pair_flux * c * noise.acquisition);
        expected_singles.push(noise.mean_pair_flux * noise.singles_ratio * s * noise.acquisition);
    }

    let mut rng = record_rng(noise.seed, fixed_slit);
    let mut singles = Vec::with_capacity(grid.len());
    let mut coincidences = Vec::with_capacity(grid.len());
    for (s, c) in expected_singles.iter().zip(&expected_coincidences) {
        singles.push(poisson(*s, &mut rng));
        coincidences.push(poisson(*c, &mut rng));
    }

    let extent = geometry.aperture_half_extent();
    let (lo, hi) = grid.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    Ok(ScanRecord {
        fixed_slit,
        positions: grid.to_vec(),
        singles,
        coincidences,
        expected_singles,
        expected_coincidences,
        acquisition: noise.acquisition,
        seed: noise.seed,
        mean_pair_flux: noise.mean_pair_flux,
        covers_aperture: lo <= -extent && hi >= extent,
    })
}

/// One scan per fixed slit, in slit order. Records are generated in parallel
/// from independent per-slit streams, so the result does not depend on scheduling.
pub fn simulate_all_scans(
    state: &QuditPureState,
    grid: &[f64],
    noise: &NoiseSettings,
    geometry: &ExperimentGeometry,
) -> Result<Vec<ScanRecord>> {
    geometry
        .slits()
        .par_iter()
        .map(|&l| near_field_scan(state, l, grid, noise, geometry))
        .collect()
}

/// Which counts of a record feed the histogram.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CountKind {
    Sampled,
    /// Noise-free expectation values.
    Expected,
}

/// Normalized slit-pair probabilities `P[l1][l2]` with standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityTable {
    dimension: usize,
    probabilities: Vec<f64>,
    std_errors: Vec<f64>,
}

impl ProbabilityTable {
    /// `P = C / sum C` with Poisson errors propagated through the ratio:
    /// `sigma_P^2 = C (N - C) / N^3`.
    pub fn from_counts(dimension: usize, counts: &[f64]) -> Result<Self> {
        if counts.len() != dimension * dimension {
            return Err(Error::InvalidInput(format!("expected {} counts, got {}", dimension * dimension, counts.len())));
        }
        let total: f64 = counts.iter().sum();
        if !(total > 0.0) {
            return Err(Error::EmptyCounts);
        }
        let probabilities = counts.iter().map(|c| c / total).collect();
        let std_errors = counts.iter().map(|c| (c * (total - c)).max(0.0).sqrt() / total.powf(1.5)).collect();
        Ok(Self { dimension, probabilities, std_errors })
    }

    /// Table taken as given, e.g. squared amplitudes read from a file.
    /// Entries must be nonnegative but need not sum to one.
    pub fn from_raw(dimension: usize, probabilities: Vec<f64>, std_errors: Vec<f64>) -> Result<Self> {
        let n = dimension * dimension;
        if dimension < 2 {
            return Err(Error::DimensionBelowTwo(dimension));
        }
        if probabilities.len() != n || std_errors.len() != n {
            return Err(Error::InvalidInput(format!("table for D = {dimension} needs {n} entries")));
        }
        if probabilities.iter().chain(&std_errors).any(|p| !(*p >= 0.0)) {
            return Err(Error::InvalidInput("probabilities and errors must be nonnegative".into()));
        }
        Ok(Self { dimension, probabilities, std_errors })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn std_errors(&self) -> &[f64] {
        &self.std_errors
    }

    pub fn get(&self, l1: SlitIndex, l2: SlitIndex) -> f64 {
        self.probabilities[l1.slot(self.dimension) * self.dimension + l2.slot(self.dimension)]
    }

    pub fn std_error(&self, l1: SlitIndex, l2: SlitIndex) -> f64 {
        self.std_errors[l1.slot(self.dimension) * self.dimension + l2.slot(self.dimension)]
    }

    pub fn total(&self) -> f64 {
        self.probabilities.iter().sum()
    }
}

/// Bin every record by the slit under D2 and normalize.
///
/// A scan point counts toward slit `l2` only if the detector center lies
/// within `±a` of that slit's center; points over the opaque gaps are dropped.
pub fn probability_table(records: &[ScanRecord], geometry: &ExperimentGeometry, kind: CountKind) -> Result<ProbabilityTable> {
    let dim = geometry.dimension();
    let mut seen = vec![false; dim];
    let mut counts = vec![0.0; dim * dim];
    for record in records {
        let fixed = SlitIndex::new(record.fixed_slit.twice_l(), dim)?;
        let row = fixed.slot(dim);
        if seen[row] {
            return Err(Error::DuplicateScan(fixed));
        }
        seen[row] = true;
        for (i, &x) in record.positions.iter().enumerate() {
            let Some(slit) = SlitIndex::nearest(x, geometry) else { continue };
            let c = match kind {
                CountKind::Sampled => record.coincidences[i] as f64,
                CountKind::Expected => record.expected_coincidences[i],
            };
            counts[row * dim + slit.slot(dim)] += c;
        }
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::MissingScan(SlitIndex::from_slot(missing, dim)));
    }
    ProbabilityTable::from_counts(dim, &counts)
}

/// Amplitudes `sqrt(P)` with the theoretical pair phases on the anti-diagonal.
///
/// Relative phases are not measured by the scans, so the phases of the
/// ideal state are assumed. The result is not renormalized.
pub fn reconstruct_state(table: &ProbabilityTable, geometry: &ExperimentGeometry) -> Result<QuditPureState> {
    let dim = geometry.dimension();
    if table.dimension() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: table.dimension() });
    }
    let mut amps = Vec::with_capacity(dim * dim);
    for i in 0..dim {
        let l1 = SlitIndex::from_slot(i, dim);
        for j in 0..dim {
            let l2 = SlitIndex::from_slot(j, dim);
            let magnitude = table.probabilities()[i * dim + j].sqrt();
            let phase = if l2 == l1.mirrored() { geometry.pair_phase(l1) } else { 0.0 };
            amps.push(Complex64::from_polar(magnitude, phase));
        }
    }
    QuditPureState::from_raw(dim, amps)
}

/// Whether the candidate is renormalized before the overlap is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FidelityConvention {
    /// Candidate taken as-is; reproduces fidelities quoted for unnormalized reconstructions.
    #[default]
    Raw,
    Renormalized,
}

/// `|<reference|candidate>|^2` with the reference normalized.
pub fn fidelity(candidate: &QuditPureState, reference: &QuditPureState, convention: FidelityConvention) -> Result<f64> {
    if candidate.dimension() != reference.dimension() {
        return Err(Error::DimensionMismatch { expected: reference.dimension(), found: candidate.dimension() });
    }
    let reference = reference.normalized()?;
    let overlap = match convention {
        FidelityConvention::Raw => reference.inner(candidate)?,
        FidelityConvention::Renormalized => reference.inner(&candidate.normalized()?)?,
    };
    Ok(overlap.norm_sqr())
}

/// State with the given anti-diagonal magnitudes (indexed by the slot of `l`)
/// and the theoretical pair phases, not renormalized.
pub fn anti_diagonal_state(magnitudes: &[f64], geometry: &ExperimentGeometry) -> Result<QuditPureState> {
    let dim = geometry.dimension();
    if magnitudes.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: magnitudes.len() });
    }
    let mut amps = vec![Complex64::new(0.0, 0.0); dim * dim];
    for (i, &m) in magnitudes.iter().enumerate() {
        let l = SlitIndex::from_slot(i, dim);
        amps[i * dim + l.mirrored().slot(dim)] = Complex64::from_polar(m, geometry.pair_phase(l));
    }
    QuditPureState::from_raw(dim, amps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state_prep::ideal_entangled_state;
    use approx::assert_relative_eq;

    fn setup(dim: usize) -> (ExperimentGeometry, QuditPureState, Vec<f64>) {
        let g = ExperimentGeometry::reference_with_dimension(dim).unwrap();
        let psi = ideal_entangled_state(&g);
        let grid = default_scan_grid(&g, 5e-6);
        (g, psi, grid)
    }

    #[test]
    fn overlap_fraction_geometry() {
        let g = ExperimentGeometry::reference();
        let s = g.slits();
        let c = s[3].center(g.slit_spacing());
        assert_relative_eq!(overlap_fraction(c, 0.1e-3, s[3], &g), 1.0);
        assert_eq!(overlap_fraction(c, 0.1e-3, s[2], &g), 0.0);
        assert_relative_eq!(overlap_fraction(c + 0.095e-3, 0.1e-3, s[3], &g), 0.0, epsilon = 1e-12);
        assert_relative_eq!(overlap_fraction(c + 0.045e-3, 0.1e-3, s[3], &g), 0.05 / 0.09, epsilon = 1e-12);
    }

    #[test]
    fn coincidences_only_behind_the_opposite_slit() {
        let (g, psi, grid) = setup(4);
        let s = g.slits();
        let rec = near_field_scan(&psi, s[3], &grid, &NoiseSettings::default(), &g).unwrap();
        assert!(rec.covers_aperture);
        for (i, &x) in grid.iter().enumerate() {
            let near = SlitIndex::nearest(x, &g);
            if near.is_some() && near != Some(s[0]) {
                assert_eq!(rec.expected_coincidences[i], 0.0, "x = {x}");
                assert_eq!(rec.coincidences[i], 0);
            }
        }
        let peak = rec.expected_coincidences.iter().copied().fold(0.0, f64::max);
        assert!(peak > 0.0);
        // Singles see every slit with equal weight.
        let singles_at: Vec<f64> =
            s.iter().map(|l| rec.expected_singles[grid.iter().position(|&x| (x - l.center(g.slit_spacing())).abs() < 2.5e-6).unwrap()]).collect();
        for v in &singles_at {
            assert_relative_eq!(*v, singles_at[0], max_relative = 1e-9);
        }
    }

    #[test]
    fn zero_flux_gives_zero_counts() {
        let (g, psi, grid) = setup(4);
        let noise = NoiseSettings { mean_pair_flux: 0.0, ..Default::default() };
        for rec in simulate_all_scans(&psi, &grid, &noise, &g).unwrap() {
            assert!(rec.singles.iter().chain(&rec.coincidences).all(|&c| c == 0));
        }
    }

    #[test]
    fn same_seed_same_record() {
        let (g, psi, grid) = setup(4);
        let noise = NoiseSettings { seed: 99, ..Default::default() };
        let a = simulate_all_scans(&psi, &grid, &noise, &g).unwrap();
        let b = simulate_all_scans(&psi, &grid, &noise, &g).unwrap();
        assert_eq!(a, b);
        let c = simulate_all_scans(&psi, &grid, &NoiseSettings { seed: 100, ..noise }, &g).unwrap();
        assert_ne!(a[0].coincidences, c[0].coincidences);
    }

    #[test]
    fn noiseless_histogram_is_anti_diagonal() {
        for dim in [2, 3, 4, 8] {
            let (g, psi, grid) = setup(dim);
            let recs = simulate_all_scans(&psi, &grid, &NoiseSettings::default(), &g).unwrap();
            let table = probability_table(&recs, &g, CountKind::Expected).unwrap();
            for &l1 in &g.slits() {
                for &l2 in &g.slits() {
                    let p = table.get(l1, l2);
                    if l2 == l1.mirrored() {
                        assert_relative_eq!(p, 1.0 / dim as f64, epsilon = 1e-12);
                    } else {
                        assert_eq!(p, 0.0);
                    }
                }
            }
            assert_relative_eq!(table.total(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn histogram_input_errors() {
        let (g, psi, grid) = setup(4);
        let recs = simulate_all_scans(&psi, &grid, &NoiseSettings::default(), &g).unwrap();
        let dup = vec![recs[0].clone(), recs[0].clone(), recs[1].clone(), recs[2].clone()];
        assert!(matches!(probability_table(&dup, &g, CountKind::Sampled), Err(Error::DuplicateScan(_))));
        assert!(matches!(probability_table(&recs[..3], &g, CountKind::Sampled), Err(Error::MissingScan(_))));
        let noise = NoiseSettings { mean_pair_flux: 0.0, ..Default::default() };
        let empty = simulate_all_scans(&psi, &grid, &noise, &g).unwrap();
        assert!(matches!(probability_table(&empty, &g, CountKind::Sampled), Err(Error::EmptyCounts)));
    }

    #[test]
    fn propagated_errors_match_binomial_form() {
        let t = ProbabilityTable::from_counts(2, &[30.0, 10.0, 0.0, 60.0]).unwrap();
        assert_relative_eq!(t.probabilities()[0], 0.3);
        assert_relative_eq!(t.std_errors()[0], (0.3f64 * 0.7 / 100.0).sqrt(), max_relative = 1e-12);
        assert_eq!(t.std_errors()[2], 0.0);
    }

    #[test]
    fn reconstruction_round_trip() {
        let (g, psi, grid) = setup(4);
        let recs = simulate_all_scans(&psi, &grid, &NoiseSettings::default(), &g).unwrap();
        let table = probability_table(&recs, &g, CountKind::Expected).unwrap();
        let rec = reconstruct_state(&table, &g).unwrap();
        for (a, b) in rec.amplitudes().iter().zip(psi.amplitudes()) {
            assert!((a - b).norm() < 1e-12);
        }
        assert_relative_eq!(fidelity(&rec, &psi, FidelityConvention::Raw).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn printed_four_slit_amplitudes() {
        let g = ExperimentGeometry::reference();
        // slots: -3/2, -1/2, +1/2, +3/2
        let rec = anti_diagonal_state(&[0.49, 0.50, 0.50, 0.49], &g).unwrap();
        assert_relative_eq!(rec.norm_sqr(), 0.9802, epsilon = 1e-12);
        let ideal = ideal_entangled_state(&g);
        assert_relative_eq!(fidelity(&rec, &ideal, FidelityConvention::Raw).unwrap(), 0.9801, epsilon = 1e-12);
        let renorm = fidelity(&rec, &ideal, FidelityConvention::Renormalized).unwrap();
        assert_relative_eq!(renorm, 0.99_f64.powi(2) / 0.9802, epsilon = 1e-12);
    }

    #[test]
    fn printed_eight_slit_amplitudes() {
        let g = ExperimentGeometry::reference_with_dimension(8).unwrap();
        // slot order -7/2 .. +7/2
        let mags = [0.36, 0.34, 0.34, 0.36, 0.34, 0.34, 0.36, 0.35];
        let rec = anti_diagonal_state(&mags, &g).unwrap();
        assert_relative_eq!(rec.norm_sqr(), 0.9737, epsilon = 1e-12);
        let f = fidelity(&rec, &ideal_entangled_state(&g), FidelityConvention::Raw).unwrap();
        assert_relative_eq!(f, 2.79f64 * 2.79 / 8.0, epsilon = 1e-12);
    }

    #[test]
    fn fidelity_dimension_mismatch() {
        let a = ideal_entangled_state(&ExperimentGeometry::reference());
        let b = ideal_entangled_state(&ExperimentGeometry::reference_with_dimension(2).unwrap());
        assert!(matches!(fidelity(&a, &b, FidelityConvention::Raw), Err(Error::DimensionMismatch { .. })));
    }
}
