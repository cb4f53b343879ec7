//! Gauss rules from the three-term recurrence (Golub–Welsch) and summation
//! helpers shared by the spectral, covariance and concentration modules.

use crate::eig::ql_eigenvalues;
use crate::error::{invalid, Error, Result};
use crate::model::SymTridiagonal;

/// Nodes and weights of a quadrature rule.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        let terms: Vec<f64> = self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).collect();
        pairwise_sum(&terms)
    }
}

/// Sum with `O(log n)` error growth.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// `θ_j = (j + 1/2)π/n`, the midpoint grid on `[0, π]`.
pub fn midpoint_angles(n: usize) -> Vec<f64> {
    (0..n).map(|j| (j as f64 + 0.5) * std::f64::consts::PI / n as f64).collect()
}

/// Mean of `f` over the midpoint grid; approximates `(1/π)∫₀^π f dθ`.
/// Exact for trigonometric polynomials in θ of degree below `2n`.
pub fn angle_mean<F: Fn(f64) -> f64>(n: usize, f: F) -> f64 {
    let vals: Vec<f64> = midpoint_angles(n).into_iter().map(f).collect();
    pairwise_sum(&vals) / n as f64
}

/// Orthonormal recurrence matrix for the weight `x^r (1-x)^s` on `[0, 1]`.
pub fn jacobi_matrix_unit(n: usize, r: f64, s: f64) -> Result<SymTridiagonal> {
    if n == 0 {
        return Err(invalid("rule size must be positive"));
    }
    if !(r > -1.0 && s > -1.0) {
        return Err(invalid(format!("need r, s > -1, got r = {r}, s = {s}")));
    }
    // On [-1, 1] the weight is (1-t)^A (1+t)^B with x = (1+t)/2.
    let (ja, jb) = (s, r);
    let ab = ja + jb;
    let diag = (0..n)
        .map(|k| {
            let a = if k == 0 {
                (jb - ja) / (ab + 2.0)
            } else {
                let t = 2.0 * k as f64 + ab;
                (jb - ja) * (jb + ja) / (t * (t + 2.0))
            };
            0.5 * (1.0 + a)
        })
        .collect::<Vec<_>>();
    let off = (1..n)
        .map(|k| {
            let kf = k as f64;
            let t = 2.0 * kf + ab;
            let b = if k == 1 {
                4.0 * (1.0 + ja) * (1.0 + jb) / ((2.0 + ab).powi(2) * (3.0 + ab))
            } else {
                4.0 * kf * (kf + ja) * (kf + jb) * (kf + ab) / (t * t * (t + 1.0) * (t - 1.0))
            };
            0.5 * b.sqrt()
        })
        .collect::<Vec<_>>();
    if diag.iter().chain(&off).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("Jacobi recurrence (n = {n}, r = {r}, s = {s})")));
    }
    SymTridiagonal::new(diag, off)
}

/// Weights `1 / Σ_k p_k(x)²` from the orthonormal polynomials of `jm`,
/// normalized so that the weights of a probability measure sum to one.
pub fn christoffel_weights(jm: &SymTridiagonal, nodes: &[f64]) -> Vec<f64> {
    let n = jm.n();
    nodes
        .iter()
        .map(|&x| {
            let (mut prev, mut cur) = (0.0, 1.0);
            let mut sum = 1.0;
            for k in 0..n - 1 {
                let back = if k > 0 { jm.off[k - 1] * prev } else { 0.0 };
                let next = ((x - jm.diag[k]) * cur - back) / jm.off[k];
                prev = cur;
                cur = next;
                sum += cur * cur;
            }
            if sum.is_finite() {
                1.0 / sum
            } else {
                0.0
            }
        })
        .collect()
}

fn rule_from_matrix(jm: &SymTridiagonal) -> Result<GaussRule> {
    let mut nodes = ql_eigenvalues(&jm.diag, &jm.off)?;
    nodes.sort_by(f64::total_cmp);
    let weights = christoffel_weights(jm, &nodes);
    Ok(GaussRule { nodes, weights })
}

/// Gauss rule for the Beta-type probability measure proportional to
/// `x^r (1-x)^s` on `[0, 1]`. Weights sum to one.
pub fn gauss_jacobi_unit(n: usize, r: f64, s: f64) -> Result<GaussRule> {
    rule_from_matrix(&jacobi_matrix_unit(n, r, s)?)
}

/// Gauss–Legendre rule on `[lo, hi]`; weights sum to `hi - lo`.
pub fn gauss_legendre(n: usize, lo: f64, hi: f64) -> Result<GaussRule> {
    if !(lo < hi) {
        return Err(invalid(format!("empty interval [{lo}, {hi}]")));
    }
    let unit = gauss_jacobi_unit(n, 0.0, 0.0)?;
    let len = hi - lo;
    Ok(GaussRule {
        nodes: unit.nodes.iter().map(|x| lo + len * x).collect(),
        weights: unit.weights.iter().map(|w| w * len).collect(),
    })
}
