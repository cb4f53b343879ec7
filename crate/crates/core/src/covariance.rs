//! Limiting covariance of centered monomial traces.
//!
//! `C[k][l]` is a one-dimensional integral over `σ ∈ [-a, 0]` built from the
//! bridge weight polynomials. In the shifted Chebyshev basis the covariance
//! becomes diagonal, `C = α L Λ Lᵀ` with `Λ = diag(0, 1, 2, ...)`, and the
//! generating functions of both sides have closed forms.

use rayon::prelude::*;
use serde::Serialize;

use crate::eig::dense_symmetric_eigenvalues;
use crate::error::{invalid, Error, Result};
use crate::params::{AsymptoticParams, SupportInterval};
use crate::paths::{p_poly, WeightPolynomial};
use crate::quadrature::{gauss_legendre, GaussRule};

pub const DEFAULT_NODES: usize = 200;
pub const MAX_BASIS_N: usize = 64;
pub const MAX_THEORY_K: usize = 32;
/// Tolerated change between `nodes` and `2 nodes`, relative to the entry scale.
pub const DOUBLING_TOL: f64 = 1e-9;

/// Symmetric `K × K` matrix of `C[k][l]`, `k, l = 1..=K`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovarianceMatrix {
    pub k_max: usize,
    /// `entries[k-1][l-1] = C[k][l]`.
    pub entries: Vec<Vec<f64>>,
    /// Gauss–Legendre nodes used, zero for closed-form matrices.
    pub quadrature_nodes: usize,
    /// Largest change seen under node doubling.
    pub error_estimate: f64,
}

impl CovarianceMatrix {
    /// 1-based access.
    pub fn get(&self, k: usize, l: usize) -> f64 {
        self.entries[k - 1][l - 1]
    }

    pub fn max_abs_diff(&self, other: &CovarianceMatrix) -> f64 {
        self.entries
            .iter()
            .flatten()
            .zip(other.entries.iter().flatten())
            .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(dense_symmetric_eigenvalues(&self.entries)?[0])
    }
}

/// `L[n][k]`: coefficient of `Γ_k` in `xⁿ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BasisChange {
    pub l: Vec<Vec<f64>>,
    pub support: SupportInterval,
}

impl BasisChange {
    pub fn rows(&self) -> usize {
        self.l.len()
    }

    /// `Σ_k L[n][k] Γ_k(x)`.
    pub fn reconstruct(&self, n: usize, x: f64) -> f64 {
        self.l[n]
            .iter()
            .enumerate()
            .map(|(k, v)| v * crate::spectral::cheb_gamma(k, x, &self.support))
            .sum()
    }
}

/// The `(x, y)` pair parameterized by `σ ∈ [-a, 0]`.
pub fn xy_of_sigma(sigma: f64, asym: &AsymptoticParams) -> Result<(f64, f64)> {
    let (a, b) = (asym.a, asym.b);
    let slack = 1e-15;
    if !(sigma >= -a - slack && sigma <= slack) {
        return Err(invalid(format!("sigma = {sigma} outside [-a, 0] = [{}, 0]", -a)));
    }
    let d = 1.0 + 2.0 * sigma;
    let x = ((b + sigma) * (1.0 - a + sigma)).max(0.0).sqrt() / d;
    let y = ((1.0 - b + sigma) * (a + sigma)).max(0.0).sqrt() / d;
    Ok((x, y))
}

fn integrand(pk: &WeightPolynomial, pl: &WeightPolynomial, sigma: f64, asym: &AsymptoticParams) -> f64 {
    let (x, y) = xy_of_sigma(sigma, asym).expect("node inside [-a, 0]");
    let (kx, ky, lx, ly) = (pk.dx(x, y), pk.dy(x, y), pl.dx(x, y), pl.dy(x, y));
    let sym = (kx * lx + ky * ly) * (1.0 - x * x - y * y);
    let cross = (kx * ly + ky * lx) * (2.0 * x * y);
    0.25 * asym.alpha * (sym - cross) / (1.0 + 2.0 * sigma)
}

fn entry_with(k: usize, l: usize, asym: &AsymptoticParams, rule: &GaussRule) -> f64 {
    let (pk, pl) = (p_poly(k), p_poly(l));
    rule.integrate(|s| integrand(&pk, &pl, s, asym))
}

fn rules(asym: &AsymptoticParams, nodes: usize) -> Result<(GaussRule, GaussRule)> {
    asym.require_proportional()?;
    if nodes == 0 {
        return Err(invalid("node count must be positive"));
    }
    Ok((gauss_legendre(nodes, -asym.a, 0.0)?, gauss_legendre(2 * nodes, -asym.a, 0.0)?))
}

/// `C[k][l]` by Gauss–Legendre in σ, checked against a doubled rule.
pub fn covariance_entry(k: usize, l: usize, asym: &AsymptoticParams, nodes: usize) -> Result<f64> {
    if k == 0 || l == 0 {
        return Err(invalid("covariance indices start at 1"));
    }
    let (coarse, fine) = rules(asym, nodes)?;
    let (v, w) = (entry_with(k, l, asym, &coarse), entry_with(k, l, asym, &fine));
    let err = (v - w).abs();
    if !(err <= DOUBLING_TOL * w.abs().max(1.0)) {
        return Err(Error::Quadrature { estimate: err });
    }
    Ok(w)
}

/// All `C[k][l]` for `k, l ≤ K`.
pub fn covariance_matrix(k_max: usize, asym: &AsymptoticParams, nodes: usize) -> Result<CovarianceMatrix> {
    if k_max == 0 {
        return Err(invalid("K must be positive"));
    }
    let (coarse, fine) = rules(asym, nodes)?;
    let pairs: Vec<(usize, usize)> = (1..=k_max).flat_map(|k| (k..=k_max).map(move |l| (k, l))).collect();
    let vals: Vec<(f64, f64)> = pairs
        .par_iter()
        .map(|&(k, l)| (entry_with(k, l, asym, &coarse), entry_with(k, l, asym, &fine)))
        .collect();
    let mut entries = vec![vec![0.0; k_max]; k_max];
    let mut error_estimate: f64 = 0.0;
    for (&(k, l), &(v, w)) in pairs.iter().zip(&vals) {
        let err = (v - w).abs();
        if !(err <= DOUBLING_TOL * w.abs().max(1.0)) {
            return Err(Error::Quadrature { estimate: err });
        }
        error_estimate = error_estimate.max(err);
        entries[k - 1][l - 1] = w;
        entries[l - 1][k - 1] = w;
    }
    Ok(CovarianceMatrix {
        k_max,
        entries,
        quadrature_nodes: 2 * nodes,
        error_estimate,
    })
}

/// Iterates multiplication by `x` in the `Γ` basis:
/// `x Γ_k = c Γ_k + (r/2)(Γ_{k+1} + Γ_{k-1})`, `x Γ₀ = c Γ₀ + r Γ₁`.
pub fn basis_l(n_max: usize, support: &SupportInterval) -> Result<BasisChange> {
    if n_max > MAX_BASIS_N {
        return Err(Error::TooLarge {
            what: "basis size N",
            value: n_max,
            max: MAX_BASIS_N,
        });
    }
    let (c, r) = (support.center(), support.half_width());
    let mut l = vec![vec![0.5]];
    for n in 0..n_max {
        let prev = &l[n];
        let mut next = vec![0.0; n + 2];
        for (k, &v) in prev.iter().enumerate() {
            next[k] += c * v;
            if k == 0 {
                next[1] += r * v;
            } else {
                next[k + 1] += 0.5 * r * v;
                next[k - 1] += 0.5 * r * v;
            }
        }
        l.push(next);
    }
    Ok(BasisChange { l, support: *support })
}

/// `α (L Λ Lᵀ)[k][l]` for `k, l = 1..=K`.
pub fn theory_covariance(k_max: usize, beta: f64, support: &SupportInterval) -> Result<CovarianceMatrix> {
    if k_max == 0 || k_max > MAX_THEORY_K {
        return Err(Error::TooLarge {
            what: "K",
            value: k_max,
            max: MAX_THEORY_K,
        });
    }
    if !(beta > 0.0) {
        return Err(invalid(format!("beta must be positive, got {beta}")));
    }
    let alpha = 2.0 / beta;
    let basis = basis_l(k_max, support)?;
    let entries = (1..=k_max)
        .map(|k| {
            (1..=k_max)
                .map(|l| {
                    let m = k.min(l);
                    alpha * (1..=m).map(|j| j as f64 * basis.l[k][j] * basis.l[l][j]).sum::<f64>()
                })
                .collect()
        })
        .collect();
    Ok(CovarianceMatrix {
        k_max,
        entries,
        quadrature_nodes: 0,
        error_estimate: 0.0,
    })
}

/// Closed-form double generating functions `(C_form, T_form)` at
/// `η, ω > λ₊`. `C_form = α T_form`.
pub fn laplace_closed(eta: f64, omega: f64, support: &SupportInterval, beta: f64) -> Result<(f64, f64)> {
    let (lm, lp) = (support.lambda_minus, support.lambda_plus);
    for v in [eta, omega] {
        if !(v > lp) || !v.is_finite() {
            return Err(Error::InsideSupport { x: v });
        }
    }
    let alpha = 2.0 / beta;
    let ra = ((omega - lm) * (eta - lp)).sqrt();
    let rb = ((omega - lp) * (eta - lm)).sqrt();
    let so = ((omega - lm) * (omega - lp)).sqrt();
    let se = ((eta - lm) * (eta - lp)).sqrt();
    let c_form = if (eta - omega).abs() < 1e-4 * (eta + omega) {
        // (√A - √B)² (η-ω)⁻² = (λ₊-λ₋)² (√A + √B)⁻², no cancellation.
        let w = lp - lm;
        0.25 * alpha * w * w / ((ra + rb).powi(2) * so * se)
    } else {
        0.25 * alpha * (ra - rb).powi(2) / ((eta - omega).powi(2) * so * se)
    };
    let (c, r) = (support.center(), support.half_width());
    let (et, ot) = (eta - c, omega - c);
    let bracket = ((ot + r) * (et - r)).sqrt() + ((ot - r) * (et + r)).sqrt();
    let t_form = r * r / ((et * et - r * r).sqrt() * (ot * ot - r * r).sqrt() * bracket * bracket);
    Ok((c_form, t_form))
}

/// `Σ_{k,l ≤ K} C[k][l] η^(-k-1) ω^(-l-1)`.
pub fn laplace_partial_sum(k_max: usize, eta: f64, omega: f64, cov: &CovarianceMatrix) -> Result<f64> {
    if k_max > cov.k_max {
        return Err(invalid(format!("K = {k_max} exceeds the matrix size {}", cov.k_max)));
    }
    let mut total = 0.0;
    for k in 1..=k_max {
        for l in 1..=k_max {
            total += cov.get(k, l) * eta.powi(-(k as i32) - 1) * omega.powi(-(l as i32) - 1);
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(alpha: f64) -> (AsymptoticParams, SupportInterval) {
        let p = AsymptoticParams::from_ab(0.25, 0.5, alpha).unwrap();
        (p, p.support().unwrap())
    }

    #[test]
    fn xy_endpoints() {
        let (p, s) = setup(1.0);
        let (_, y) = xy_of_sigma(-0.25, &p).unwrap();
        assert_eq!(y, 0.0);
        let (x, y) = xy_of_sigma(0.0, &p).unwrap();
        assert!(((x + y).powi(2) - s.lambda_plus).abs() < 1e-15);
        assert!(xy_of_sigma(0.1, &p).is_err());
        assert!(xy_of_sigma(-0.3, &p).is_err());
        for i in 0..=1000 {
            let (x, y) = xy_of_sigma(-0.25 * i as f64 / 1000.0, &p).unwrap();
            assert!(x * x + y * y < 1.0);
        }
    }

    #[test]
    fn spot_entries() {
        let (p, s) = setup(1.0);
        let (c, r) = (s.center(), s.half_width());
        assert!((covariance_entry(1, 1, &p, DEFAULT_NODES).unwrap() - 3.0 / 64.0).abs() < 1e-12);
        let c22 = c * c * r * r + r.powi(4) / 8.0;
        assert!((c22 - 105.0 / 2048.0).abs() < 1e-15);
        assert!((covariance_entry(2, 2, &p, DEFAULT_NODES).unwrap() - c22).abs() < 1e-10);
        assert_eq!(covariance_entry(2, 3, &p, 50).unwrap(), covariance_entry(3, 2, &p, 50).unwrap());
        assert!(covariance_entry(0, 1, &p, 50).is_err());
    }

    #[test]
    fn basis_rows() {
        let (_, s) = setup(1.0);
        let (c, r) = (s.center(), s.half_width());
        let b = basis_l(6, &s).unwrap();
        assert_eq!(b.l[0], vec![0.5]);
        assert!((b.l[1][0] - c / 2.0).abs() < 1e-16 && (b.l[1][1] - r / 2.0).abs() < 1e-16);
        let want = [c * c / 2.0 + r * r / 4.0, c * r, r * r / 4.0];
        for (x, y) in b.l[2].iter().zip(want) {
            assert!((x - y).abs() < 1e-16);
        }
        for n in 0..=6 {
            for x in [0.1, 0.5, 0.77] {
                assert!((b.reconstruct(n, x) - x.powi(n as i32)).abs() < 1e-12);
            }
        }
        assert!(basis_l(65, &s).is_err());
    }

    #[test]
    fn theory_entries() {
        let (_, s) = setup(1.0);
        let (c, r) = (s.center(), s.half_width());
        let t = theory_covariance(4, 1.0, &s).unwrap();
        assert!((t.get(1, 1) - 2.0 * r * r / 4.0).abs() < 1e-15);
        assert!((t.get(1, 2) - 2.0 * (r / 2.0) * (c * r)).abs() < 1e-15);
        assert_eq!(t.get(3, 4), t.get(4, 3));
    }

    #[test]
    fn quadrature_matches_theory() {
        for alpha in [0.5, 1.0, 2.0] {
            let (p, s) = setup(alpha);
            let q = covariance_matrix(6, &p, DEFAULT_NODES).unwrap();
            let t = theory_covariance(6, 2.0 / alpha, &s).unwrap();
            assert!(q.max_abs_diff(&t) < 1e-10);
            assert!(q.min_eigenvalue().unwrap() > -1e-10);
        }
    }

    #[test]
    fn closed_forms_agree() {
        let (_, s) = setup(1.0);
        let (c, t) = laplace_closed(2.0, 3.0, &s, 2.0).unwrap();
        assert!((c - t).abs() < 1e-14);
        // near the diagonal the rationalized branch agrees with the raw one
        let (eta, omega) = (2.0, 2.0003);
        let (lm, lp) = (s.lambda_minus, s.lambda_plus);
        let raw = 0.25 * (((omega - lm) * (eta - lp)).sqrt() - ((omega - lp) * (eta - lm)).sqrt()).powi(2)
            / ((eta - omega).powi(2) * ((omega - lm) * (omega - lp)).sqrt() * ((eta - lm) * (eta - lp)).sqrt());
        let (c1, _) = laplace_closed(eta, omega, &s, 2.0).unwrap();
        assert!((c1 - raw).abs() < 1e-8 * c1);
        let (c3, t3) = laplace_closed(2.0, 2.0, &s, 1.0).unwrap();
        assert!((c3 - 2.0 * t3).abs() < 1e-14);
        assert!(laplace_closed(0.5, 2.0, &s, 1.0).is_err());
    }

    #[test]
    fn transforms_decay_like_inverse_square() {
        let (_, s) = setup(1.0);
        let (c1, _) = laplace_closed(2.0, 1e4, &s, 2.0).unwrap();
        let (c2, _) = laplace_closed(2.0, 2e4, &s, 2.0).unwrap();
        assert!((c1 / c2 - 4.0).abs() < 1e-3);
    }

    #[test]
    fn partial_sum_single_term() {
        let (p, _) = setup(1.0);
        let q = covariance_matrix(2, &p, 50).unwrap();
        let v = laplace_partial_sum(1, 2.0, 3.0, &q).unwrap();
        assert!((v - q.get(1, 1) / (4.0 * 9.0)).abs() < 1e-18);
        assert!(laplace_partial_sum(3, 2.0, 3.0, &q).is_err());
    }
}
