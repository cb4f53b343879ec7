//! Limiting spectral objects: the equilibrium density `μ`, the signed
//! correction `ν`, their Stieltjes transforms, the shifted Chebyshev basis
//! `Γ_n` and the variance functionals of linear statistics.
//!
//! Integrals over the support use `x = c + r cos θ`, which turns the
//! square-root edge behaviour into a smooth periodic integrand, so the
//! midpoint rule in θ converges geometrically.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Serialize, Serializer};

use crate::eig;
use crate::error::{invalid, Error, Result};
use crate::params::{AsymptoticParams, SupportInterval};
use crate::quadrature::{angle_mean, jacobi_matrix_unit};

/// Default number of θ nodes.
pub const DEFAULT_NODES: usize = 2048;
/// Highest monomial degree in the built-in library.
pub const MAX_MONOMIAL_DEGREE: usize = 12;

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Kind {
    /// Monomial coefficients, lowest degree first.
    Polynomial(Vec<f64>),
    Gamma(usize, SupportInterval),
    Exp(f64),
    /// Knots sorted by abscissa, extended constantly outside.
    PiecewiseLinear(Vec<(f64, f64)>),
    Custom(RealFn, Option<RealFn>),
}

/// A real test function with an optional derivative.
#[derive(Clone)]
pub struct TestFunction {
    name: String,
    kind: Kind,
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TestFunction({})", self.name)
    }
}

impl Serialize for TestFunction {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.name)
    }
}

impl TestFunction {
    pub fn constant(v: f64) -> Self {
        Self {
            name: if v == 1.0 { "const".into() } else { format!("const({v})") },
            kind: Kind::Polynomial(vec![v]),
        }
    }

    pub fn monomial(degree: usize) -> Result<Self> {
        if degree > MAX_MONOMIAL_DEGREE {
            return Err(Error::TooLarge {
                what: "monomial degree",
                value: degree,
                max: MAX_MONOMIAL_DEGREE,
            });
        }
        let mut coeffs = vec![0.0; degree + 1];
        coeffs[degree] = 1.0;
        let name = match degree {
            0 => "const".to_string(),
            1 => "x".to_string(),
            d => format!("x^{d}"),
        };
        Ok(Self {
            name,
            kind: Kind::Polynomial(coeffs),
        })
    }

    pub fn polynomial(name: impl Into<String>, coeffs: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            kind: Kind::Polynomial(if coeffs.is_empty() { vec![0.0] } else { coeffs }),
        }
    }

    pub fn gamma(order: usize, support: SupportInterval) -> Self {
        Self {
            name: format!("gamma{order}"),
            kind: Kind::Gamma(order, support),
        }
    }

    pub fn exp(rate: f64) -> Self {
        Self {
            name: if rate == 1.0 { "exp".into() } else { format!("exp({rate})") },
            kind: Kind::Exp(rate),
        }
    }

    /// Piecewise-linear interpolant of `knots`. Not differentiable at the
    /// knots, so it falls outside the smoothness the CLT needs.
    pub fn piecewise_linear(mut knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(invalid("piecewise-linear function needs at least two knots"));
        }
        knots.sort_by(|a, b| a.0.total_cmp(&b.0));
        if knots.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(invalid("knot abscissae must be distinct"));
        }
        Ok(Self {
            name: "pwl".into(),
            kind: Kind::PiecewiseLinear(knots),
        })
    }

    pub fn custom<F, D>(name: impl Into<String>, value: F, derivative: Option<D>) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            kind: Kind::Custom(Arc::new(value), derivative.map(|d| Arc::new(d) as RealFn)),
        }
    }

    /// Parses one library name: `const`, `x`, `x^d`, `gammaN`, `exp`,
    /// `exp(r)`, `pwl`. `gammaN` needs the support.
    pub fn parse(spec: &str, support: Option<SupportInterval>) -> Result<Self> {
        let s = spec.trim();
        let unknown = || invalid(format!("unknown test function {s:?}"));
        if s == "const" || s == "1" {
            return Ok(Self::constant(1.0));
        }
        if s == "x" {
            return Self::monomial(1);
        }
        if let Some(d) = s.strip_prefix("x^") {
            return Self::monomial(d.parse().map_err(|_| unknown())?);
        }
        if let Some(d) = s.strip_prefix("gamma") {
            let order = d.parse().map_err(|_| unknown())?;
            let support = support.ok_or_else(|| invalid("gammaN needs a non-extremal support"))?;
            return Ok(Self::gamma(order, support));
        }
        if s == "exp" {
            return Ok(Self::exp(1.0));
        }
        if let Some(rate) = s.strip_prefix("exp(").and_then(|r| r.strip_suffix(')')) {
            return Ok(Self::exp(rate.parse().map_err(|_| unknown())?));
        }
        if s == "pwl" {
            return Self::piecewise_linear(vec![(0.0, 0.5), (0.5, 0.0), (1.0, 0.5)]);
        }
        Err(unknown())
    }

    /// Comma-separated list; `gammaA..gammaB` expands to a range.
    pub fn parse_list(spec: &str, support: Option<SupportInterval>) -> Result<Vec<Self>> {
        let mut out = Vec::new();
        for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            if let Some((lo, hi)) = item.split_once("..") {
                let lo: usize = lo.trim_start_matches("gamma").parse().map_err(|_| invalid(format!("bad range {item:?}")))?;
                let hi: usize = hi.trim_start_matches("gamma").parse().map_err(|_| invalid(format!("bad range {item:?}")))?;
                if lo > hi {
                    return Err(invalid(format!("empty range {item:?}")));
                }
                for order in lo..=hi {
                    out.push(Self::parse(&format!("gamma{order}"), support)?);
                }
            } else {
                out.push(Self::parse(item, support)?);
            }
        }
        if out.is_empty() {
            return Err(invalid("no test functions given"));
        }
        Ok(out)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn value(&self, x: f64) -> f64 {
        match &self.kind {
            Kind::Polynomial(c) => horner(c, x),
            Kind::Gamma(n, s) => cheb_gamma(*n, x, s),
            Kind::Exp(k) => (k * x).exp(),
            Kind::PiecewiseLinear(knots) => interp(knots, x),
            Kind::Custom(f, _) => f(x),
        }
    }

    pub fn derivative(&self, x: f64) -> Option<f64> {
        match &self.kind {
            Kind::Polynomial(c) => {
                let d: Vec<f64> = c.iter().enumerate().skip(1).map(|(i, v)| i as f64 * v).collect();
                Some(horner(&d, x))
            }
            Kind::Gamma(n, s) => Some(cheb_gamma_derivative(*n, x, s)),
            Kind::Exp(k) => Some(k * (k * x).exp()),
            Kind::PiecewiseLinear(knots) => {
                let i = knots.partition_point(|&(kx, _)| kx <= x);
                if i == 0 || i == knots.len() {
                    Some(0.0)
                } else {
                    let ((x0, y0), (x1, y1)) = (knots[i - 1], knots[i]);
                    Some((y1 - y0) / (x1 - x0))
                }
            }
            Kind::Custom(_, d) => d.as_ref().map(|d| d(x)),
        }
    }

    pub fn has_derivative(&self) -> bool {
        !matches!(&self.kind, Kind::Custom(_, None))
    }

    /// True for functions without the smoothness the CLT assumes.
    pub fn outside_clt_hypotheses(&self) -> bool {
        matches!(self.kind, Kind::PiecewiseLinear(_))
    }

    /// Monomial coefficients when the function is a polynomial.
    pub fn polynomial_coeffs(&self) -> Option<Vec<f64>> {
        match &self.kind {
            Kind::Polynomial(c) => Some(c.clone()),
            Kind::Gamma(n, s) => Some(gamma_monomial_coeffs(*n, s)),
            _ => None,
        }
    }
}

fn horner(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, v| acc * x + v)
}

fn interp(knots: &[(f64, f64)], x: f64) -> f64 {
    let i = knots.partition_point(|&(kx, _)| kx <= x);
    if i == 0 {
        return knots[0].1;
    }
    if i == knots.len() {
        return knots[i - 1].1;
    }
    let ((x0, y0), (x1, y1)) = (knots[i - 1], knots[i]);
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

/// `Γ_n(x) = 2 T_n(u)` with `u` the support mapped to `[-1, 1]`.
pub fn cheb_gamma(n: usize, x: f64, support: &SupportInterval) -> f64 {
    let u = support.to_unit(x);
    let (mut t0, mut t1) = (1.0, u);
    if n == 0 {
        return 2.0;
    }
    for _ in 1..n {
        let t2 = 2.0 * u * t1 - t0;
        t0 = t1;
        t1 = t2;
    }
    2.0 * t1
}

/// `Γ_n'(x) = 2n U_{n-1}(u) · du/dx`.
pub fn cheb_gamma_derivative(n: usize, x: f64, support: &SupportInterval) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let u = support.to_unit(x);
    let (mut u0, mut u1) = (1.0, 2.0 * u);
    for _ in 1..n - 1 {
        let u2 = 2.0 * u * u1 - u0;
        u0 = u1;
        u1 = u2;
    }
    let un1 = if n == 1 { u0 } else { u1 };
    2.0 * n as f64 * un1 / support.half_width()
}

/// Monomial coefficients of `Γ_n`.
pub fn gamma_monomial_coeffs(n: usize, support: &SupportInterval) -> Vec<f64> {
    let (c, r) = (support.center(), support.half_width());
    // u = (x - c)/r
    let u = [-c / r, 1.0 / r];
    let mul_u = |p: &[f64]| {
        let mut q = vec![0.0; p.len() + 1];
        for (i, v) in p.iter().enumerate() {
            q[i] += u[0] * v;
            q[i + 1] += u[1] * v;
        }
        q
    };
    let mut t0 = vec![1.0];
    let mut t1 = u.to_vec();
    if n == 0 {
        return vec![2.0];
    }
    for _ in 1..n {
        let mut t2: Vec<f64> = mul_u(&t1).iter().map(|v| 2.0 * v).collect();
        for (i, v) in t0.iter().enumerate() {
            t2[i] -= v;
        }
        t0 = t1;
        t1 = t2;
    }
    t1.iter().map(|v| 2.0 * v).collect()
}

/// Chebyshev coefficients on the support. `fhat[0]` is the θ-average, so
/// `f = fhat[0] + Σ_{n≥1} fhat[n] Γ_n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChebyshevCoefficients {
    pub fhat: Vec<f64>,
    pub truncation: usize,
}

fn finite_or(what: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite(what.into()))
    }
}

/// `(x(1-x))⁻¹ r² sin²θ` written without cancellation near the edges.
fn density_factor(s: &SupportInterval, theta: f64) -> f64 {
    let r = s.half_width();
    let (sh, ch) = (0.5 * theta).sin_cos();
    let (sh2, ch2) = (sh * sh, ch * ch);
    // x = λ₋ + 2r cos²(θ/2), 1 - x = (1 - λ₊) + 2r sin²(θ/2)
    let x = s.lambda_minus + 2.0 * r * ch2;
    let one_minus = (1.0 - s.lambda_plus) + 2.0 * r * sh2;
    4.0 * r * r * sh2 * ch2 / (x * one_minus)
}

/// `∫ f dμ` against the equilibrium density
/// `√((λ₊-x)(x-λ₋)) / (2πa x(1-x))`.
pub fn integrate_mu(f: &TestFunction, asym: &AsymptoticParams, nodes: usize) -> Result<f64> {
    let s = asym.support()?;
    let v = angle_mean(nodes, |t| f.value(s.at_angle(t)) * density_factor(&s, t)) / (2.0 * asym.a);
    finite_or("integral against mu", v)
}

/// `∫ √(-(x-λ₋)(x-λ₊)) / (x(1-x)) dx`, which equals `2πa`.
pub fn density_mass_integral(asym: &AsymptoticParams, nodes: usize) -> Result<f64> {
    let s = asym.support()?;
    finite_or("density mass", PI * angle_mean(nodes, |t| density_factor(&s, t)))
}

/// `∫ f dν = f(λ₋)/4 + f(λ₊)/4 - (1/2π)∫₀^π f(c + r cos θ) dθ`.
pub fn integrate_nu(f: &TestFunction, support: &SupportInterval, nodes: usize) -> Result<f64> {
    let edges = 0.25 * (f.value(support.lambda_minus) + f.value(support.lambda_plus));
    let v = edges - 0.5 * angle_mean(nodes, |t| f.value(support.at_angle(t)));
    finite_or("integral against nu", v)
}

pub fn cheb_coeffs(f: &TestFunction, truncation: usize, support: &SupportInterval, nodes: usize) -> Result<ChebyshevCoefficients> {
    let thetas = crate::quadrature::midpoint_angles(nodes);
    let vals: Vec<f64> = thetas.iter().map(|&t| f.value(support.at_angle(t))).collect();
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("samples of {}", f.name())));
    }
    let fhat = (0..=truncation)
        .map(|n| {
            let terms: Vec<f64> = thetas.iter().zip(&vals).map(|(&t, v)| v * (n as f64 * t).cos()).collect();
            crate::quadrature::pairwise_sum(&terms) / nodes as f64
        })
        .collect();
    Ok(ChebyshevCoefficients { fhat, truncation })
}

/// Limiting variance `σ² = α Σ n fhat[n]²` and the half-derivative norm
/// `τ² = Σ n² fhat[n]²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VarianceFunctionals {
    pub sigma_sq: f64,
    pub tau_sq: f64,
    /// Contribution of the last tenth of the coefficients to `σ²`.
    pub tail_estimate: f64,
    /// Coefficients have not visibly decayed by the truncation.
    pub slow_decay: bool,
}

pub fn variance_functionals(f: &TestFunction, truncation: usize, beta: f64, support: &SupportInterval, nodes: usize) -> Result<VarianceFunctionals> {
    if truncation == 0 {
        return Err(invalid("truncation must be positive"));
    }
    if !(beta > 0.0) {
        return Err(invalid(format!("beta must be positive, got {beta}")));
    }
    let alpha = 2.0 / beta;
    let ch = cheb_coeffs(f, truncation, support, nodes)?;
    let part = |range: std::ops::RangeInclusive<usize>, pow: i32| -> f64 {
        range.map(|n| (n as f64).powi(pow) * ch.fhat[n] * ch.fhat[n]).sum()
    };
    let sigma_sq = alpha * part(1..=truncation, 1);
    let tau_sq = part(1..=truncation, 2);
    let start = (truncation - truncation / 10).max(1);
    let tail_estimate = alpha * part(start..=truncation, 1);
    let slow_decay = tail_estimate > 1e-8 * sigma_sq.max(f64::MIN_POSITIVE);
    Ok(VarianceFunctionals {
        sigma_sq,
        tau_sq,
        tail_estimate,
        slow_decay,
    })
}

/// `(1/2π)∫ f'(x)² √((λ₊-x)(x-λ₋)) dx`, the direct form of `τ²`.
pub fn tau_sq_direct(f: &TestFunction, support: &SupportInterval, nodes: usize) -> Result<f64> {
    if !f.has_derivative() {
        return Err(invalid(format!("{} has no derivative", f.name())));
    }
    let r = support.half_width();
    let v = 0.5 * angle_mean(nodes, |t| {
        let d = f.derivative(support.at_angle(t)).unwrap_or(f64::NAN);
        let st = t.sin();
        d * d * r * r * st * st
    });
    finite_or("tau integral", v)
}

/// `(m₀(x), m₁(x))`: leading and `1/n` terms of the mean Stieltjes
/// transform `E (1/n) tr (x - A)⁻¹`, for `x` off the support.
pub fn stieltjes_pair(x: f64, asym: &AsymptoticParams) -> Result<(f64, f64)> {
    let s = asym.support()?;
    if s.contains(x) || x == 0.0 || x == 1.0 || !x.is_finite() {
        return Err(Error::InsideSupport { x });
    }
    let (a, b) = (asym.a, asym.b);
    let (lm, lp, c) = (s.lambda_minus, s.lambda_plus, s.center());
    let root = ((x - lm) * (x - lp)).sqrt().copysign(x - c);
    let m0 = ((a - b) + (1.0 - 2.0 * a) * x - root) / (2.0 * a * x * (1.0 - x));
    let m1 = (c - x + root) / (2.0 * (x - lp) * (x - lm));
    Ok((m0, m1))
}

/// Roots of the degree-`n` orthogonal polynomial for `x^r (1-x)^s` on
/// `[0, 1]`, ascending.
pub fn jacobi_roots(n: usize, r: f64, s: f64) -> Result<Vec<f64>> {
    let jm = jacobi_matrix_unit(n, r, s)?;
    Ok(eig::eigenvalues(&jm, eig::DEFAULT_TOL)?.values)
}

/// `(1/n) Σ 1/(x - λᵢ) - m₀(x) - m₁(x)/n` over the Jacobi roots with
/// `r = n(b/a - 1)`, `s = n((1-b)/a - 1)`: the `α = 0` ensemble.
pub fn alpha_zero_residual(n: usize, x: f64, asym: &AsymptoticParams) -> Result<f64> {
    let (m0, m1) = stieltjes_pair(x, asym)?;
    let nf = n as f64;
    let roots = jacobi_roots(n, nf * (asym.b / asym.a - 1.0), nf * ((1.0 - asym.b) / asym.a - 1.0))?;
    let terms: Vec<f64> = roots.iter().map(|l| 1.0 / (x - l)).collect();
    Ok(crate::quadrature::pairwise_sum(&terms) / nf - m0 - m1 / nf)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quarter_half(alpha: f64) -> AsymptoticParams {
        AsymptoticParams::from_ab(0.25, 0.5, alpha).unwrap()
    }

    #[test]
    fn gamma_values() {
        let s = quarter_half(1.0).support().unwrap();
        assert_eq!(cheb_gamma(0, 0.3, &s), 2.0);
        assert!(cheb_gamma(1, s.center(), &s).abs() < 1e-15);
        assert!((cheb_gamma(1, s.lambda_plus, &s) - 2.0).abs() < 1e-15);
        let x = s.at_angle(PI / 9.0);
        assert!((cheb_gamma(3, x, &s) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn gamma_derivative_and_coefficients() {
        let s = quarter_half(1.0).support().unwrap();
        for n in 0..7 {
            let f = TestFunction::gamma(n, s);
            let poly = TestFunction::polynomial("p", gamma_monomial_coeffs(n, &s));
            for x in [0.1, 0.37, 0.8] {
                let h = 1e-6;
                let fd = (f.value(x + h) - f.value(x - h)) / (2.0 * h);
                assert!((fd - f.derivative(x).unwrap()).abs() < 1e-5 * (1.0 + fd.abs()), "n={n}");
                assert!((poly.value(x) - f.value(x)).abs() < 1e-10, "n={n}");
            }
        }
    }

    #[test]
    fn library_derivatives_match_differences() {
        let s = quarter_half(1.0).support().unwrap();
        let fs = TestFunction::parse_list("x,x^3,x^12,exp,exp(-2),gamma2..gamma4", Some(s)).unwrap();
        assert_eq!(fs.len(), 8);
        for f in &fs {
            for x in [0.05, 0.31, 0.62, 0.93] {
                let h = 1e-6;
                let fd = (f.value(x + h) - f.value(x - h)) / (2.0 * h);
                assert!((fd - f.derivative(x).unwrap()).abs() < 1e-5 * (1.0 + fd.abs()), "{}", f.name());
            }
        }
        let pwl = TestFunction::parse("pwl", None).unwrap();
        assert!(pwl.outside_clt_hypotheses());
        assert_eq!(pwl.value(0.25), 0.25);
        assert!(TestFunction::parse("gamma2", None).is_err());
        assert!(TestFunction::parse("sinh", None).is_err());
        assert!(TestFunction::monomial(13).is_err());
    }

    #[test]
    fn masses() {
        let p = quarter_half(1.0);
        let s = p.support().unwrap();
        let one = TestFunction::constant(1.0);
        assert!((integrate_mu(&one, &p, DEFAULT_NODES).unwrap() - 1.0).abs() < 1e-12);
        assert!(integrate_nu(&one, &s, DEFAULT_NODES).unwrap().abs() < 1e-14);
        assert!((density_mass_integral(&p, DEFAULT_NODES).unwrap() - 2.0 * PI * 0.25).abs() < 1e-12);
    }

    #[test]
    fn mu_first_moment_is_b() {
        for (a, b) in [(0.25, 0.5), (0.2, 0.3), (0.25, 0.25), (0.1, 0.85)] {
            let p = AsymptoticParams::from_ab(a, b, 1.0).unwrap();
            let x = TestFunction::monomial(1).unwrap();
            assert!((integrate_mu(&x, &p, DEFAULT_NODES).unwrap() - b).abs() < 1e-10, "({a},{b})");
        }
    }

    #[test]
    fn nu_moments() {
        let s = quarter_half(1.0).support().unwrap();
        let x = TestFunction::monomial(1).unwrap();
        let x2 = TestFunction::monomial(2).unwrap();
        assert!(integrate_nu(&x, &s, DEFAULT_NODES).unwrap().abs() < 1e-14);
        assert!((integrate_nu(&x2, &s, DEFAULT_NODES).unwrap() - 3.0 / 64.0).abs() < 1e-14);
    }

    #[test]
    fn chebyshev_coefficients() {
        let s = quarter_half(1.0).support().unwrap();
        let ch = cheb_coeffs(&TestFunction::gamma(2, s), 5, &s, 64).unwrap();
        for (n, v) in ch.fhat.iter().enumerate() {
            assert!((v - if n == 2 { 1.0 } else { 0.0 }).abs() < 1e-14);
        }
        let (c, r) = (s.center(), s.half_width());
        let ch = cheb_coeffs(&TestFunction::monomial(1).unwrap(), 4, &s, 64).unwrap();
        assert!((ch.fhat[0] - c).abs() < 1e-15 && (ch.fhat[1] - r / 2.0).abs() < 1e-15);
        assert!(ch.fhat[2..].iter().all(|v| v.abs() < 1e-15));
        let ch = cheb_coeffs(&TestFunction::monomial(2).unwrap(), 4, &s, 64).unwrap();
        assert!((ch.fhat[1] - c * r).abs() < 1e-15 && (ch.fhat[2] - r * r / 4.0).abs() < 1e-15);
    }

    #[test]
    fn variances() {
        let s = quarter_half(1.0).support().unwrap();
        for i in 1..=4 {
            let v = variance_functionals(&TestFunction::gamma(i, s), 32, 4.0, &s, DEFAULT_NODES).unwrap();
            assert!((v.sigma_sq - 0.5 * i as f64).abs() < 1e-12);
            assert!(v.tau_sq >= 2.0 * v.sigma_sq - 1e-12);
        }
        let r = s.half_width();
        let v = variance_functionals(&TestFunction::monomial(1).unwrap(), 32, 2.0, &s, DEFAULT_NODES).unwrap();
        assert!((v.sigma_sq - r * r / 4.0).abs() < 1e-14);
        assert!(!v.slow_decay);
        let pwl = TestFunction::parse("pwl", None).unwrap();
        assert!(variance_functionals(&pwl, 32, 2.0, &s, DEFAULT_NODES).unwrap().slow_decay);
    }

    #[test]
    fn tau_identity() {
        let s = quarter_half(1.0).support().unwrap();
        let f = TestFunction::monomial(3).unwrap();
        let v = variance_functionals(&f, 32, 2.0, &s, DEFAULT_NODES).unwrap();
        assert!((v.tau_sq - tau_sq_direct(&f, &s, DEFAULT_NODES).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn stieltjes_values() {
        let p = AsymptoticParams::from_ab(0.25, 0.25, 1.0).unwrap();
        let (m0, _) = stieltjes_pair(2.0, &p).unwrap();
        assert!((m0 - (2.5f64.sqrt() - 1.0)).abs() < 1e-14);
        let q = quarter_half(1.0);
        let (m0, _) = stieltjes_pair(1e6, &q).unwrap();
        assert!((m0 * 1e6 - 1.0).abs() < 1e-5);
        let (_, m1) = stieltjes_pair(1e3, &q).unwrap();
        assert!((m1 * 1e9 / (-3.0 / 64.0) - 1.0).abs() < 0.01);
        assert!(stieltjes_pair(0.5, &q).is_err());
        assert!(stieltjes_pair(1.0, &q).is_err());
    }

    #[test]
    fn stieltjes_quadratic() {
        for (a, b) in [(0.25, 0.5), (0.2, 0.35), (0.1, 0.8)] {
            let p = AsymptoticParams::from_ab(a, b, 1.0).unwrap();
            for x in [-0.7, -0.01, 1.01, 1.5, 3.0] {
                let (m, _) = stieltjes_pair(x, &p).unwrap();
                let d = x * (1.0 - x);
                let res = a * m * m + ((b - a) - (1.0 - 2.0 * a) * x) / d * m + (1.0 - a) / d;
                assert!(res.abs() < 1e-10, "({a},{b}) x={x}: {res}");
            }
        }
    }

    #[test]
    fn stieltjes_matches_quadrature() {
        let p = quarter_half(1.0);
        let x = 1.7;
        let f = TestFunction::custom("resolvent", move |t| 1.0 / (x - t), None::<fn(f64) -> f64>);
        let (m0, m1) = stieltjes_pair(x, &p).unwrap();
        assert!((integrate_mu(&f, &p, DEFAULT_NODES).unwrap() - m0).abs() < 1e-12);
        // ν pairs with the 1/n term through a sign: m₁ = -∫ dν/(x - t)
        let s = p.support().unwrap();
        assert!((integrate_nu(&f, &s, DEFAULT_NODES).unwrap() + m1).abs() < 1e-12);
    }

    #[test]
    fn jacobi_roots_small() {
        assert_eq!(jacobi_roots(1, 0.0, 0.0).unwrap(), vec![0.5]);
        let r = jacobi_roots(1, 1.5, 3.0).unwrap();
        assert!((r[0] - 2.5 / 6.5).abs() < 1e-15);
        // Legendre on [0,1], degree 2: 1/2 ± 1/(2√3)
        let r = jacobi_roots(2, 0.0, 0.0).unwrap();
        assert!((r[0] - (0.5 - 0.5 / 3f64.sqrt())).abs() < 1e-15);
        assert!(jacobi_roots(3, -1.0, 0.0).is_err());
    }

    #[test]
    fn alpha_zero_model_is_second_order() {
        let p = quarter_half(0.0);
        let r1 = alpha_zero_residual(100, 2.0, &p).unwrap();
        let r2 = alpha_zero_residual(200, 2.0, &p).unwrap();
        assert!((r1 / r2 - 4.0).abs() < 0.5, "{r1} {r2}");
    }
}
