//! Gauss-Legendre rules and an adaptive tensor-product integrator for
//! complex integrands over rectangles.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Nodes and weights of an n-point Gauss-Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Roots of `P_n` by Newton iteration from the Chebyshev-like initial guess.
    pub fn new(order: usize) -> Self {
        assert!(order > 0, "Gauss-Legendre order must be positive");
        let n = order;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Nodes and weights mapped onto `[lo, hi]`.
    pub fn scaled(&self, lo: f64, hi: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        self.nodes.iter().zip(&self.weights).map(move |(x, w)| (mid + half * x, half * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, lo: f64, hi: f64, mut f: F) -> f64 {
        self.scaled(lo, hi).map(|(x, w)| w * f(x)).sum()
    }
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let prev = if n == 0 { 0.0 } else { p0 };
    let dp = n as f64 * (x * p - prev) / (x * x - 1.0);
    (p, dp)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x: (f64, f64),
    pub y: (f64, f64),
}

impl Rect {
    pub fn new(x: (f64, f64), y: (f64, f64)) -> Self {
        Self { x, y }
    }

    fn quarters(&self) -> [Rect; 4] {
        let xm = 0.5 * (self.x.0 + self.x.1);
        let ym = 0.5 * (self.y.0 + self.y.1);
        [
            Rect::new((self.x.0, xm), (self.y.0, ym)),
            Rect::new((xm, self.x.1), (self.y.0, ym)),
            Rect::new((self.x.0, xm), (ym, self.y.1)),
            Rect::new((xm, self.x.1), (ym, self.y.1)),
        ]
    }
}

/// Settings for [`AdaptiveTensor`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    /// Points per axis of the base rule; the check rule uses twice as many.
    pub base_order: usize,
    /// Target error relative to the largest cell integral.
    pub rel_tol: f64,
    /// Maximum number of quadrisections of a cell.
    pub max_depth: u32,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { base_order: 32, rel_tol: 1e-8, max_depth: 14 }
    }
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: Complex64,
    pub error: f64,
    pub converged: bool,
}

/// Tensor Gauss-Legendre rule with order-doubling error estimates and
/// recursive quadrisection of cells that fail the check.
#[derive(Debug, Clone)]
pub struct AdaptiveTensor {
    spec: QuadratureSpec,
    coarse: GaussLegendre,
    fine: GaussLegendre,
}

impl AdaptiveTensor {
    pub fn new(spec: QuadratureSpec) -> Self {
        Self {
            coarse: GaussLegendre::new(spec.base_order),
            fine: GaussLegendre::new(2 * spec.base_order),
            spec,
        }
    }

    pub fn spec(&self) -> QuadratureSpec {
        self.spec
    }

    /// Plain tensor-product rule of the given order on `rect`.
    pub fn tensor<F>(rule: &GaussLegendre, rect: Rect, f: &F) -> Complex64
    where
        F: Fn(f64, f64) -> Complex64,
    {
        let mut acc = Complex64::new(0.0, 0.0);
        for (y, wy) in rule.scaled(rect.y.0, rect.y.1) {
            let mut row = Complex64::new(0.0, 0.0);
            for (x, wx) in rule.scaled(rect.x.0, rect.x.1) {
                row += wx * f(x, y);
            }
            acc += wy * row;
        }
        acc
    }

    /// Order-doubled estimate on `rect` without subdivision.
    pub fn probe<F>(&self, rect: Rect, f: &F) -> (Complex64, f64)
    where
        F: Fn(f64, f64) -> Complex64,
    {
        let lo = Self::tensor(&self.coarse, rect, f);
        let hi = Self::tensor(&self.fine, rect, f);
        (hi, (hi - lo).norm())
    }

    /// Integrate `f` over `rect` to absolute tolerance `tol`.
    pub fn integrate<F>(&self, rect: Rect, tol: f64, f: &F) -> Estimate
    where
        F: Fn(f64, f64) -> Complex64,
    {
        let (value, error) = self.probe(rect, f);
        self.refine(rect, value, error, tol, 0, f)
    }

    fn refine<F>(&self, rect: Rect, value: Complex64, error: f64, tol: f64, depth: u32, f: &F) -> Estimate
    where
        F: Fn(f64, f64) -> Complex64,
    {
        if error <= tol {
            return Estimate { value, error, converged: true };
        }
        if depth >= self.spec.max_depth {
            return Estimate { value, error, converged: false };
        }
        let mut total = Estimate { value: Complex64::new(0.0, 0.0), error: 0.0, converged: true };
        for quarter in rect.quarters() {
            let (v, e) = self.probe(quarter, f);
            let part = self.refine(quarter, v, e, tol / 4.0, depth + 1, f);
            total.value += part.value;
            total.error += part.error;
            total.converged &= part.converged;
        }
        total
    }
}

/// Turn a non-converged estimate into an error.
pub fn require_converged(estimate: Estimate, tolerance: f64) -> Result<Complex64> {
    if estimate.converged {
        Ok(estimate.value)
    } else {
        Err(Error::Quadrature { estimate: estimate.error, tolerance })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn five_point_rule_matches_tables() {
        let gl = GaussLegendre::new(5);
        let expected_nodes = [-0.906_179_845_938_664, -0.538_469_310_105_683, 0.0, 0.538_469_310_105_683, 0.906_179_845_938_664];
        let expected_weights = [0.236_926_885_056_189, 0.478_628_670_499_366, 0.568_888_888_888_889, 0.478_628_670_499_366, 0.236_926_885_056_189];
        for i in 0..5 {
            assert_relative_eq!(gl.nodes()[i], expected_nodes[i], epsilon = 1e-14);
            assert_relative_eq!(gl.weights()[i], expected_weights[i], epsilon = 1e-14);
        }
    }

    #[test]
    fn exact_for_polynomials_up_to_degree_2n_minus_1() {
        for n in [1, 2, 7, 32, 64] {
            let gl = GaussLegendre::new(n);
            assert_relative_eq!(gl.weights().iter().sum::<f64>(), 2.0, epsilon = 1e-13);
            let deg = 2 * n as i32 - 1;
            let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
            let got = gl.integrate(-1.0, 1.0, |x| x.powi(deg));
            assert!((got - exact).abs() < 1e-12, "n={n}: {got}");
            let even = 2 * n as i32 - 2;
            let got = gl.integrate(0.0, 2.0, |x| x.powi(even));
            assert_relative_eq!(got, 2f64.powi(even + 1) / (even as f64 + 1.0), max_relative = 1e-12);
        }
    }

    #[test]
    fn adaptive_resolves_a_narrow_ridge() {
        // Gaussian ridge along x + y = 0 of width 1e-2 across the unit square [-1,1]^2.
        let w = 1e-2_f64;
        let f = |x: f64, y: f64| Complex64::new((-((x + y) / 2.0).powi(2) / (w * w)).exp(), 0.0);
        let quad = AdaptiveTensor::new(QuadratureSpec::default());
        let est = quad.integrate(Rect::new((-1.0, 1.0), (-1.0, 1.0)), 1e-10, &f);
        assert!(est.converged);
        // Exact: in u=(x+y)/2, v=y-x the Jacobian is 1; the v-extent at u is 4(1-|u|).
        // ∫ e^{-u²/w²} 4(1-|u|) du over |u|<1 = 4(w√π erf(1/w) - w²(1 - e^{-1/w²})).
        let exact = 4.0 * (w * PI.sqrt() - w * w);
        assert_relative_eq!(est.value.re, exact, max_relative = 1e-9);
    }

    #[test]
    fn unconverged_estimate_is_reported() {
        let spec = QuadratureSpec { base_order: 4, rel_tol: 1e-8, max_depth: 0 };
        let quad = AdaptiveTensor::new(spec);
        let f = |x: f64, _y: f64| Complex64::new((40.0 * x).cos(), 0.0);
        let est = quad.integrate(Rect::new((0.0, 1.0), (0.0, 1.0)), 1e-12, &f);
        assert!(!est.converged);
        assert!(matches!(require_converged(est, 1e-12), Err(Error::Quadrature { .. })));
    }
}
