use biphoton_qudit_sim::quadrature::QuadratureSpec;
use biphoton_qudit_sim::state_prep::{ideal_entangled_state, project_biphoton, PumpProfile, QuditPureState};
use biphoton_qudit_sim::{ExperimentGeometry, SlitIndex};
use num_complex::Complex64;

fn project(g: &ExperimentGeometry, waist: f64, center: f64) -> QuditPureState {
    project_biphoton(g, &PumpProfile::gaussian(waist, center), &QuadratureSpec::default()).unwrap()
}

fn max_magnitude_deviation(a: &QuditPureState, b: &QuditPureState) -> f64 {
    a.amplitudes().iter().zip(b.amplitudes()).map(|(x, y)| (x.norm() - y.norm()).abs()).fold(0.0, f64::max)
}

fn off_anti_diagonal(s: &QuditPureState) -> f64 {
    s.entries().filter(|(l1, l2, _)| *l2 != l1.mirrored()).map(|(_, _, c)| c.norm()).fold(0.0, f64::max)
}

/// Zero-waist limit: the pump forces x2 = -x1, so c[l][-l] is proportional to
/// the integral of exp(i k x^2 / (2 z_A)) over slit l. Composite Simpson.
fn delta_pump_limit(g: &ExperimentGeometry) -> Vec<Complex64> {
    let (a, d, k, z) = (g.slit_half_width(), g.slit_spacing(), g.wavenumber(), g.z_aperture());
    let n = 20_000;
    let raw: Vec<Complex64> = g
        .slits()
        .iter()
        .map(|l| {
            let (lo, h) = (l.center(d) - a, 2.0 * a / n as f64);
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..=n {
                let x = lo + i as f64 * h;
                let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                acc += Complex64::from_polar(w, k * x * x / (2.0 * z));
            }
            acc * h / 3.0
        })
        .collect();
    let norm = raw.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    raw.into_iter().map(|c| c / norm).collect()
}

#[test]
fn output_is_normalized_for_any_pump() {
    let g = ExperimentGeometry::reference();
    for (w, c) in [(4.5e-6, 0.0), (4.5e-5, 1e-4), (6.8e-3, 0.0)] {
        assert!((project(&g, w, c).norm_sqr() - 1.0).abs() < 1e-10);
    }
    let tab = PumpProfile::Tabulated { samples: vec![(-1e-3, 1.0, 0.0), (1e-3, 1.0, 0.0)] };
    let s = project_biphoton(&g, &tab, &QuadratureSpec::default()).unwrap();
    assert!((s.norm_sqr() - 1.0).abs() < 1e-10);
}

#[test]
fn narrowing_the_pump_suppresses_off_diagonal_pairs() {
    let g = ExperimentGeometry::reference();
    let a = g.slit_half_width();
    let leak: Vec<f64> = [a, a / 2.0, a / 10.0].iter().map(|&w| off_anti_diagonal(&project(&g, w, 0.0))).collect();
    assert!(leak[0] > leak[1] && leak[1] > leak[2], "{leak:?}");
    assert!(leak[2] < 1e-3);
}

#[test]
fn narrow_pump_approaches_the_finite_slit_limit() {
    let g = ExperimentGeometry::reference();
    let limit = delta_pump_limit(&g);
    let psi = project(&g, g.slit_half_width() / 100.0, 0.0);
    for (slot, l) in g.slits().iter().enumerate() {
        let c = psi.get(*l, l.mirrored());
        assert!((c.norm() - limit[slot].norm()).abs() < 1e-4, "{l}: {} vs {}", c.norm(), limit[slot].norm());
    }
    // The limit is within 1e-2 of 1/sqrt(D) but not closer: the chirp across
    // an outer slit spans 2 k l d a / z_A ≈ 0.87 rad.
    let ideal = ideal_entangled_state(&g);
    let dev = max_magnitude_deviation(&psi, &ideal);
    assert!(dev > 5e-3 && dev < 1e-2, "{dev}");
}

#[test]
fn relative_phases_follow_the_pair_phase() {
    let g = ExperimentGeometry::reference();
    let psi = project(&g, g.slit_half_width() / 10.0, 0.0);
    let inner = SlitIndex::parse("+1/2", 4).unwrap();
    let outer = SlitIndex::parse("+3/2", 4).unwrap();
    let step = (psi.get(outer, outer.mirrored()) / psi.get(inner, inner.mirrored())).arg();
    let expected = g.wavenumber() * g.slit_spacing().powi(2) / g.z_aperture();
    assert!((step - expected).abs() < 0.02, "{step} vs {expected}");
}

#[test]
fn displaced_pump_moves_the_correlations() {
    let g = ExperimentGeometry::reference();
    let psi = project(&g, g.slit_half_width() / 10.0, g.slit_spacing());
    let (biggest, _) = psi
        .entries()
        .map(|(l1, l2, c)| ((l1.twice_l(), l2.twice_l()), c.norm()))
        .fold(((0, 0), 0.0), |best, e| if e.1 > best.1 { e } else { best });
    assert_eq!(biggest.0 + biggest.1, 4, "{biggest:?}");
    for (l1, l2, c) in psi.entries() {
        if l1.twice_l() + l2.twice_l() != 4 {
            assert!(c.norm() < 1e-3, "{l1},{l2}: {}", c.norm());
        }
    }
}

#[test]
fn wide_pump_loses_the_anti_correlation() {
    let g = ExperimentGeometry::reference();
    let psi = project(&g, 10.0 * 4.0 * g.slit_spacing(), 0.0);
    assert_eq!(psi.nonzero_count(0.1), 16);
}

#[test]
fn cells_are_bit_stable_across_thread_counts() {
    let g = ExperimentGeometry::reference_with_dimension(8).unwrap();
    let pump = PumpProfile::gaussian(4.5e-6, 0.0);
    let spec = QuadratureSpec::default();
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let a = one.install(|| project_biphoton(&g, &pump, &spec)).unwrap();
    let b = four.install(|| project_biphoton(&g, &pump, &spec)).unwrap();
    assert_eq!(a, b);
}
