//! Entanglement measures and the conditional-fringe witness.

use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::far_field::FringeSlice;
use crate::state_prep::{CorrelatedMixture, QuditPureState};

const HERMITIAN_TOLERANCE: f64 = 1e-10;

/// Two-qudit density operator on the `D^2`-dimensional slit-pair space.
///
/// Basis order is `(l1, l2)` row-major over slit slots, the same order as
/// [`QuditPureState::amplitudes`].
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    dimension: usize,
    matrix: DMatrix<Complex64>,
}

impl DensityOperator {
    pub fn from_matrix(dimension: usize, matrix: DMatrix<Complex64>) -> Result<Self> {
        let n = dimension * dimension;
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::InvalidState(format!("density operator for D = {dimension} must be {n}x{n}")));
        }
        Ok(Self { dimension, matrix })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    /// Largest entry of `|rho - rho^dagger|`.
    pub fn hermiticity_error(&self) -> f64 {
        (&self.matrix - self.matrix.adjoint()).iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    fn require_hermitian(&self) -> Result<()> {
        let err = self.hermiticity_error();
        if err > HERMITIAN_TOLERANCE {
            return Err(Error::NonHermitian(err));
        }
        Ok(())
    }

    /// Partial transpose over the second qudit.
    pub fn partial_transpose(&self) -> DMatrix<Complex64> {
        let d = self.dimension;
        DMatrix::from_fn(d * d, d * d, |r, c| {
            let (i, j) = (r / d, r % d);
            let (k, l) = (c / d, c % d);
            self.matrix[(i * d + l, k * d + j)]
        })
    }

    /// `lambda rho_a + (1 - lambda) rho_b`.
    pub fn blend(weight: f64, a: &Self, b: &Self) -> Result<Self> {
        if a.dimension != b.dimension {
            return Err(Error::DimensionMismatch { expected: a.dimension, found: b.dimension });
        }
        Ok(Self { dimension: a.dimension, matrix: &a.matrix * Complex64::from(weight) + &b.matrix * Complex64::from(1.0 - weight) })
    }
}

impl From<&QuditPureState> for DensityOperator {
    fn from(state: &QuditPureState) -> Self {
        let v = nalgebra::DVector::from_column_slice(state.amplitudes());
        Self { dimension: state.dimension(), matrix: &v * v.adjoint() }
    }
}

impl From<&CorrelatedMixture> for DensityOperator {
    fn from(mixture: &CorrelatedMixture) -> Self {
        let d = mixture.dimension();
        let mut m = DMatrix::zeros(d * d, d * d);
        for (slot, &p) in mixture.weights().iter().enumerate() {
            let idx = slot * d + (d - 1 - slot);
            m[(idx, idx)] = Complex64::from(p);
        }
        Self { dimension: d, matrix: m }
    }
}

pub fn to_density<'a, T>(input: &'a T) -> DensityOperator
where
    DensityOperator: From<&'a T>,
{
    DensityOperator::from(input)
}

/// Singular values of the amplitude matrix, descending.
pub fn schmidt_spectrum(state: &QuditPureState) -> Vec<f64> {
    let d = state.dimension();
    let m = DMatrix::from_row_slice(d, d, state.amplitudes());
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Von Neumann entropy of either reduced state, in bits.
pub fn entanglement_entropy(state: &QuditPureState) -> Result<f64> {
    if !state.is_normalized() {
        return Err(Error::Unnormalized(state.norm_sqr()));
    }
    Ok(schmidt_spectrum(state)
        .iter()
        .map(|s| s * s)
        .filter(|p| *p > 0.0)
        .map(|p| -p * p.log2())
        .sum())
}

/// Real eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(matrix: &DMatrix<Complex64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(matrix.clone()).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Sum of the magnitudes of the negative eigenvalues of the partial transpose.
pub fn negativity(rho: &DensityOperator) -> Result<f64> {
    rho.require_hermitian()?;
    Ok(hermitian_eigenvalues(&rho.partial_transpose()).iter().filter(|e| **e < 0.0).fold(0.0, |acc, e| acc - e))
}

/// `Tr(rho^2)`.
pub fn purity(rho: &DensityOperator) -> f64 {
    // Tr(ρ²) = Σ_ij ρ_ij ρ_ji = Σ_ij |ρ_ij|² for Hermitian ρ
    (&rho.matrix * &rho.matrix).trace().re
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WitnessThresholds {
    /// Minimum L∞ distance between unit-normalized slices.
    pub score: f64,
    /// Minimum fringe visibility required of every slice.
    pub visibility: f64,
}

impl Default for WitnessThresholds {
    fn default() -> Self {
        Self { score: 0.05, visibility: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    EntangledSignature,
    NoSignature,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::EntangledSignature => "entangled-signature",
            Verdict::NoSignature => "no-signature",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WitnessReport {
    pub score: f64,
    pub visibilities: Vec<f64>,
    pub verdict: Verdict,
}

/// Do the fringes seen by D1 change shape when D2 moves?
///
/// The score is the largest L∞ distance between any two unit-normalized
/// slices. A pattern that factorizes in `x1` and `x2` gives identical
/// normalized slices however strong its fringes are.
pub fn conditionality_witness(slices: &[FringeSlice], thresholds: &WitnessThresholds) -> Result<WitnessReport> {
    if slices.len() < 2 {
        return Err(Error::InvalidInput("the witness needs at least two fringe slices".into()));
    }
    let grid = &slices[0].x1;
    if slices.iter().any(|s| s.x1 != *grid || s.rates.len() != grid.len()) {
        return Err(Error::MismatchedGrids);
    }
    for (i, a) in slices.iter().enumerate() {
        if slices[i + 1..].iter().any(|b| b.x2 == a.x2) {
            return Err(Error::InvalidInput(format!("two slices share x2 = {}", a.x2)));
        }
    }
    let normalized: Vec<Vec<f64>> = slices.iter().map(FringeSlice::normalized).collect();
    let mut score: f64 = 0.0;
    for (i, a) in normalized.iter().enumerate() {
        for b in &normalized[i + 1..] {
            let dist = a.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
            score = score.max(dist);
        }
    }
    let visibilities: Vec<f64> = slices.iter().map(|s| s.visibility).collect();
    let verdict = if score > thresholds.score && visibilities.iter().all(|v| *v > thresholds.visibility) {
        Verdict::EntangledSignature
    } else {
        Verdict::NoSignature
    };
    Ok(WitnessReport { score, visibilities, verdict })
}

/// Metrics reported by `analyze`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DiagnosticsReport {
    pub entries: Vec<(String, String)>,
}

impl DiagnosticsReport {
    pub fn push(&mut self, metric: impl Into<String>, value: impl fmt::Display) {
        self.entries.push((metric.into(), value.to_string()));
    }

    pub fn get(&self, metric: &str) -> Option<&str> {
        self.entries.iter().find(|(m, _)| m == metric).map(|(_, v)| v.as_str())
    }

    /// Schmidt coefficients, entropy, negativity and purity of a pure state.
    pub fn add_pure_state(&mut self, state: &QuditPureState) -> Result<()> {
        let schmidt = schmidt_spectrum(state);
        let joined = schmidt.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(";");
        self.push("schmidt_coefficients", joined);
        let normalized = state.normalized()?;
        self.push("entropy_bits", entanglement_entropy(&normalized)?);
        let rho = to_density(&normalized);
        self.push("negativity", negativity(&rho)?);
        self.push("purity", purity(&rho));
        Ok(())
    }

    pub fn add_mixture(&mut self, mixture: &CorrelatedMixture) -> Result<()> {
        let rho = to_density(mixture);
        self.push("negativity", negativity(&rho)?);
        self.push("purity", purity(&rho));
        Ok(())
    }

    pub fn add_witness(&mut self, report: &WitnessReport) {
        self.push("witness_score", report.score);
        self.push("verdict", report.verdict);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ExperimentGeometry;
    use crate::state_prep::{classically_correlated_state, ideal_entangled_state};
    use approx::assert_relative_eq;

    fn ideal(dim: usize) -> QuditPureState {
        ideal_entangled_state(&ExperimentGeometry::reference_with_dimension(dim).unwrap())
    }

    fn mixture(dim: usize) -> CorrelatedMixture {
        classically_correlated_state(&ExperimentGeometry::reference_with_dimension(dim).unwrap())
    }

    #[test]
    fn pure_density_is_rank_one_projector() {
        let rho = to_density(&ideal(2));
        assert_eq!(rho.matrix().nrows(), 4);
        assert_relative_eq!(rho.trace().re, 1.0, epsilon = 1e-14);
        let sq = rho.matrix() * rho.matrix();
        assert!((sq - rho.matrix()).iter().all(|c| c.norm() < 1e-14));
        let ev = hermitian_eigenvalues(rho.matrix());
        assert_relative_eq!(ev[3], 1.0, epsilon = 1e-12);
        assert!(ev[..3].iter().all(|e| e.abs() < 1e-12));
    }

    #[test]
    fn mixture_density_is_diagonal() {
        let rho = to_density(&mixture(4));
        let m = rho.matrix();
        let mut diag = Vec::new();
        for r in 0..16 {
            for c in 0..16 {
                if r != c {
                    assert_eq!(m[(r, c)], Complex64::new(0.0, 0.0));
                } else if m[(r, r)].re != 0.0 {
                    diag.push((r, m[(r, r)].re));
                }
            }
        }
        // |l, -l> sits at slot(l)·D + slot(-l) = s·4 + (3 - s)
        assert_eq!(diag, vec![(3, 0.25), (6, 0.25), (9, 0.25), (12, 0.25)]);
    }

    #[test]
    fn schmidt_of_ideal_and_product_states() {
        for dim in [2, 4, 8] {
            for s in schmidt_spectrum(&ideal(dim)) {
                assert_relative_eq!(s, 1.0 / (dim as f64).sqrt(), epsilon = 1e-12);
            }
        }
        let u = vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 2.0), Complex64::new(-1.0, 1.0)];
        let v = vec![Complex64::new(0.5, 0.0), Complex64::new(1.0, 0.0), Complex64::new(0.0, -1.0)];
        let prod = QuditPureState::product(&u, &v).unwrap();
        let s = schmidt_spectrum(&prod);
        assert_relative_eq!(s[0], 1.0, epsilon = 1e-12);
        assert!(s[1..].iter().all(|x| x.abs() < 1e-12));
        assert!(entanglement_entropy(&prod).unwrap().abs() < 1e-10);
    }

    #[test]
    fn schmidt_of_printed_reconstruction() {
        let g = ExperimentGeometry::reference();
        let rec = crate::experiment::anti_diagonal_state(&[0.49, 0.50, 0.50, 0.49], &g).unwrap();
        let s = schmidt_spectrum(&rec);
        for (got, want) in s.iter().zip([0.50, 0.50, 0.49, 0.49]) {
            assert_relative_eq!(*got, want, epsilon = 1e-12);
        }
        assert!(matches!(entanglement_entropy(&rec), Err(Error::Unnormalized(_))));
    }

    #[test]
    fn entropy_is_log_d() {
        for dim in 2..=10 {
            assert_relative_eq!(entanglement_entropy(&ideal(dim)).unwrap(), (dim as f64).log2(), epsilon = 1e-10);
        }
    }

    #[test]
    fn purity_values() {
        assert_relative_eq!(purity(&to_density(&ideal(4))), 1.0, epsilon = 1e-12);
        assert_relative_eq!(purity(&to_density(&mixture(4))), 0.25, epsilon = 1e-15);
        assert_relative_eq!(purity(&to_density(&mixture(8))), 0.125, epsilon = 1e-15);
    }

    #[test]
    fn negativity_of_mixture_is_zero() {
        for dim in [2, 3, 4, 8] {
            assert_eq!(negativity(&to_density(&mixture(dim))).unwrap(), 0.0);
        }
    }

    #[test]
    fn non_hermitian_input_is_rejected() {
        let mut m = DMatrix::<Complex64>::identity(4, 4) * Complex64::from(0.25);
        m[(0, 1)] = Complex64::new(0.1, 0.0);
        let rho = DensityOperator::from_matrix(2, m).unwrap();
        assert!(matches!(negativity(&rho), Err(Error::NonHermitian(_))));
    }

    #[test]
    fn partial_transpose_swaps_second_indices() {
        let m = DMatrix::from_fn(4, 4, |r, c| Complex64::new((10 * r + c) as f64, 0.0));
        let rho = DensityOperator::from_matrix(2, m).unwrap();
        let pt = rho.partial_transpose();
        // <i j| ρ^T2 |k l> = <i l| ρ |k j>; entry (0·2+1, 1·2+0) ← (0·2+0, 1·2+1)
        assert_eq!(pt[(1, 2)].re, 3.0);
        assert_eq!(pt[(0, 0)].re, 0.0);
        assert_eq!(pt[(3, 0)].re, 21.0);
    }

    #[test]
    fn witness_rejects_bad_inputs() {
        let s = |x2: f64, grid: Vec<f64>| FringeSlice {
            x2,
            rates: vec![1.0; grid.len()],
            x1: grid,
            visibility: 0.0,
            provenance: crate::far_field::Provenance::Entangled,
        };
        let t = WitnessThresholds::default();
        assert!(conditionality_witness(&[s(0.0, vec![0.0, 1.0])], &t).is_err());
        assert!(matches!(
            conditionality_witness(&[s(0.0, vec![0.0, 1.0]), s(1.0, vec![0.0, 2.0])], &t),
            Err(Error::MismatchedGrids)
        ));
        assert!(conditionality_witness(&[s(0.0, vec![0.0, 1.0]), s(0.0, vec![0.0, 1.0])], &t).is_err());
        let r = conditionality_witness(&[s(0.0, vec![0.0, 1.0]), s(1.0, vec![0.0, 1.0])], &t).unwrap();
        assert_eq!(r.score, 0.0);
        assert_eq!(r.verdict, Verdict::NoSignature);
    }
}
