//! Testable forms of three concentration statements: the Poincaré
//! inequality for Beta laws, the variance bound it implies for the Jacobi
//! ensemble, and the `O(n⁻²)` coupling of `√Beta(np, nq)` with a Gaussian.

use serde::Serialize;
use statrs::function::beta::beta_reg;
use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

use crate::error::{invalid, Error, Result};
use crate::experiments::{run_replicates, sample_moments};
use crate::model::{assemble_gram, sample_factor};
use crate::params::EnsembleParams;
use crate::quadrature::{gauss_jacobi_unit, gauss_legendre};
use crate::spectral::TestFunction;

/// Nodes of the Gauss–Jacobi rule used for Beta expectations.
pub const BETA_RULE_NODES: usize = 96;
/// Gauss–Legendre nodes on the Gaussian range of the coupling integral.
pub const COUPLING_NODES: usize = 400;
/// Half-width of the Gaussian range.
pub const COUPLING_RANGE: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PoincareReport {
    pub variance: f64,
    pub bound: f64,
    /// `variance / bound`, zero when both vanish.
    pub ratio: f64,
    /// Monte Carlo standard errors, when sampled.
    pub variance_se: Option<f64>,
    pub bound_se: Option<f64>,
    /// Factor multiplying `E Σ f'(λᵢ)²` in the ensemble bound.
    pub prefactor: Option<f64>,
}

impl PoincareReport {
    fn exact(variance: f64, bound: f64) -> Self {
        Self {
            variance,
            bound,
            ratio: ratio(variance, bound),
            variance_se: None,
            bound_se: None,
            prefactor: None,
        }
    }

    /// `(bound - variance)` in units of the combined standard error.
    pub fn margin_in_se(&self) -> Option<f64> {
        let (sv, sb) = (self.variance_se?, self.bound_se?);
        Some((self.bound - self.variance) / (sv * sv + sb * sb).sqrt())
    }
}

fn ratio(v: f64, b: f64) -> f64 {
    if v == 0.0 && b == 0.0 {
        0.0
    } else {
        v / b
    }
}

fn derivative_of(f: &TestFunction, x: f64) -> Result<f64> {
    f.derivative(x).ok_or_else(|| invalid(format!("{} has no derivative", f.name())))
}

/// Compares `Var f(Y)` with `E f'(Y)² / (4(p+q))` for `Y ~ Beta(p, q)`.
/// With `weighted`, compares `Var f(X)` with `E[(1-X²) f'(X)²] / (p+q)` for
/// `X = 2Y - 1`.
pub fn beta_poincare_ratio(p: f64, q: f64, f: &TestFunction, weighted: bool) -> Result<PoincareReport> {
    if !(p > 0.0 && q > 0.0) {
        return Err(invalid(format!("need p, q > 0, got ({p}, {q})")));
    }
    // Gauss–Jacobi absorbs the endpoint singularities of the density.
    let rule = gauss_jacobi_unit(BETA_RULE_NODES, p - 1.0, q - 1.0)?;
    let map = |y: f64| if weighted { 2.0 * y - 1.0 } else { y };
    let mean = rule.integrate(|y| f.value(map(y)));
    let variance = rule.integrate(|y| (f.value(map(y)) - mean).powi(2));
    let mut grad = Vec::with_capacity(rule.len());
    for &y in &rule.nodes {
        let x = map(y);
        let d = derivative_of(f, x)?;
        grad.push(if weighted { (1.0 - x * x) * d * d } else { d * d });
    }
    let eg = crate::quadrature::pairwise_sum(&grad.iter().zip(&rule.weights).map(|(g, w)| g * w).collect::<Vec<_>>());
    let bound = if weighted { eg / (p + q) } else { eg / (4.0 * (p + q)) };
    if !(variance.is_finite() && bound.is_finite()) {
        return Err(Error::NonFinite("Beta Poincaré quadrature".into()));
    }
    Ok(PoincareReport::exact(variance, bound))
}

/// Coefficients of `f'(x)²` for a polynomial `f`.
fn squared_derivative(coeffs: &[f64]) -> Vec<f64> {
    let d: Vec<f64> = coeffs.iter().enumerate().skip(1).map(|(i, v)| i as f64 * v).collect();
    if d.is_empty() {
        return vec![0.0];
    }
    let mut out = vec![0.0; 2 * d.len() - 1];
    for (i, x) in d.iter().enumerate() {
        for (j, y) in d.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Monte Carlo check of `Var tr f(A) ≤ κ E Σ f'(λᵢ)²` with
/// `κ = α / (4n min(b/a - 1, (1-b)/a - 1))`.
pub fn jacobi_poincare_check(params: &EnsembleParams, f: &TestFunction, replicates: usize, seed: u64, threads: usize) -> Result<PoincareReport> {
    let asym = params.asymptotic();
    asym.require_proportional()?;
    let gap = (asym.b / asym.a - 1.0).min((1.0 - asym.b) / asym.a - 1.0);
    if !(gap > 0.0) {
        return Err(invalid("need b/a > 1 and (1-b)/a > 1"));
    }
    if replicates < 2 {
        return Err(invalid("need at least two replicates"));
    }
    if !f.has_derivative() {
        return Err(invalid(format!("{} has no derivative", f.name())));
    }
    let prefactor = asym.alpha / (4.0 * params.n as f64 * gap);
    let poly = f.polynomial_coeffs();
    let pairs: Vec<(f64, f64)> = run_replicates(seed, replicates, threads, |_, rng| {
        let a = assemble_gram(&sample_factor(params, rng)?);
        if let Some(c) = &poly {
            let g = squared_derivative(c);
            let t = a.power_traces(c.len().max(g.len()));
            let dot = |w: &[f64]| w.iter().zip(&t).map(|(x, y)| x * y).sum::<f64>();
            Ok((dot(c), dot(&g)))
        } else {
            let s = a.eigenvalues()?;
            let tr: f64 = s.values.iter().map(|&l| f.value(l)).sum();
            let gr: f64 = s.values.iter().map(|&l| f.derivative(l).unwrap_or(f64::NAN).powi(2)).sum();
            Ok((tr, gr))
        }
    })?;
    let (tr, gr): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let mt = sample_moments(&tr);
    let mg = sample_moments(&gr);
    let m = replicates as f64;
    let variance = mt.variance;
    let variance_se = ((mt.central4 - mt.variance * mt.variance).max(0.0) / m).sqrt();
    let bound = prefactor * mg.mean;
    let bound_se = prefactor * (mg.variance / m).sqrt();
    Ok(PoincareReport {
        variance,
        bound,
        ratio: ratio(variance, bound),
        variance_se: Some(variance_se),
        bound_se: Some(bound_se),
        prefactor: Some(prefactor),
    })
}

/// Squared-distance coupling of `Y = √Beta(np, nq)` with `μ + σX`,
/// `X ~ N(0, 1)`, `μ = √(p/(p+q))`, `σ = √q / (2(p+q)√n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CouplingReport {
    pub n: f64,
    /// `E(Y - μ - σX)²` under the quantile coupling.
    pub gap: f64,
    /// `n² · gap`.
    pub scaled: f64,
    /// Same expectation with `Y` and `X` independent.
    pub independent_gap: f64,
}

fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// `z` with `P(B ≤ z) = u`, or with `P(B > z) = v` when `upper` is set.
fn beta_quantile(s1: f64, s2: f64, target: f64, upper: bool) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let below = if upper {
            // P(B > z) = I_{1-z}(s2, s1)
            beta_reg(s2, s1, 1.0 - mid) > target
        } else {
            beta_reg(s1, s2, mid) < target
        };
        if below {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

pub fn coupling_gap(n: f64, p: f64, q: f64) -> Result<CouplingReport> {
    if !(p > 0.0 && q > 0.0) || !(n > (1.0 / p).max(1.0 / q)) || !n.is_finite() {
        return Err(invalid(format!("need p, q > 0 and n > max(1/p, 1/q), got n = {n}, p = {p}, q = {q}")));
    }
    let (s1, s2) = (n * p, n * q);
    let mu = (p / (p + q)).sqrt();
    let sigma = q.sqrt() / (2.0 * (p + q) * n.sqrt());
    let rule = gauss_legendre(COUPLING_NODES, -COUPLING_RANGE, COUPLING_RANGE)?;
    let phi = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut terms = Vec::with_capacity(rule.len());
    for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
        // Work with the smaller tail for accuracy.
        let z = if x <= 0.0 {
            beta_quantile(s1, s2, normal_cdf(x), false)
        } else {
            beta_quantile(s1, s2, normal_cdf(-x), true)
        };
        if !z.is_finite() {
            return Err(Error::NonFinite(format!("Beta quantile at x = {x}")));
        }
        terms.push(w * phi(x) * (z.sqrt() - mu - sigma * x).powi(2));
    }
    let gap = crate::quadrature::pairwise_sum(&terms);
    // E√B from the Beta integral, Var √B = E B - (E√B)².
    let ey = (ln_gamma(s1 + 0.5) - ln_gamma(s1) + ln_gamma(s1 + s2) - ln_gamma(s1 + s2 + 0.5)).exp();
    let var_y = s1 / (s1 + s2) - ey * ey;
    let independent_gap = var_y + (ey - mu).powi(2) + sigma * sigma;
    Ok(CouplingReport {
        n,
        gap,
        scaled: n * n * gap,
        independent_gap,
    })
}
