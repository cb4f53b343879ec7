//! Parameterizations of the ensemble: `(n, β, n1, n2)`, the proportional
//! ratios `(p, q)` and the rescaled `(a, b, α)`, plus the support edges.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Finite-size ensemble parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleParams {
    pub n: usize,
    pub beta: f64,
    pub n1: f64,
    pub n2: f64,
}

impl EnsembleParams {
    pub fn new(n: usize, beta: f64, n1: f64, n2: f64) -> Result<Self> {
        if n == 0 {
            return Err(invalid("n must be positive"));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(invalid(format!("beta must be positive, got {beta}")));
        }
        let floor = n as f64 - 1.0;
        if !(n1 >= floor && n1.is_finite()) || !(n2 >= floor && n2.is_finite()) {
            return Err(invalid(format!(
                "need n1, n2 >= n - 1 = {floor}, got n1 = {n1}, n2 = {n2}"
            )));
        }
        Ok(Self { n, beta, n1, n2 })
    }

    /// `n1 = p·n`, `n2 = q·n`.
    pub fn proportional(n: usize, beta: f64, p: f64, q: f64) -> Result<Self> {
        Self::new(n, beta, p * n as f64, q * n as f64)
    }

    /// Inverse of the `(a, b)` reparameterization: `p = b/a`, `q = (1-b)/a`.
    pub fn from_ab(n: usize, beta: f64, a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0) {
            return Err(invalid(format!("a must be positive, got {a}")));
        }
        Self::proportional(n, beta, b / a, (1.0 - b) / a)
    }

    pub fn alpha(&self) -> f64 {
        2.0 / self.beta
    }

    pub fn asymptotic(&self) -> AsymptoticParams {
        derive_asymptotic(self)
    }
}

/// Ratios and rescaled parameters shared by every limit formula.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticParams {
    pub p: f64,
    pub q: f64,
    pub a: f64,
    pub b: f64,
    pub alpha: f64,
    /// Set when `p + q <= 2`. Such ensembles can be sampled but the
    /// limit formulas refuse them.
    pub extremal: bool,
}

pub fn derive_asymptotic(params: &EnsembleParams) -> AsymptoticParams {
    let n = params.n as f64;
    AsymptoticParams::from_pq(params.n1 / n, params.n2 / n, params.alpha())
}

impl AsymptoticParams {
    pub fn from_pq(p: f64, q: f64, alpha: f64) -> Self {
        let s = p + q;
        Self {
            p,
            q,
            a: 1.0 / s,
            b: p / s,
            alpha,
            extremal: s <= 2.0,
        }
    }

    pub fn from_ab(a: f64, b: f64, alpha: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) || !(b > 0.0 && b < 1.0) {
            return Err(invalid(format!("need a > 0 and 0 < b < 1, got a = {a}, b = {b}")));
        }
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(invalid(format!("alpha must be nonnegative, got {alpha}")));
        }
        Ok(Self {
            p: b / a,
            q: (1.0 - b) / a,
            a,
            b,
            alpha,
            extremal: a >= 0.5,
        })
    }

    pub fn beta(&self) -> f64 {
        2.0 / self.alpha
    }

    /// Errors out in the extremal regime.
    pub fn require_proportional(&self) -> Result<()> {
        if self.extremal {
            Err(Error::ExtremalRegime { sum: self.p + self.q })
        } else {
            Ok(())
        }
    }

    /// `a ↦ 1-b`, `b ↦ 1-a`. The support is invariant under this map.
    pub fn involution(&self) -> Self {
        let a = 1.0 - self.b;
        let b = 1.0 - self.a;
        Self {
            p: b / a,
            q: (1.0 - b) / a,
            a,
            b,
            alpha: self.alpha,
            extremal: a >= 0.5,
        }
    }

    pub fn support(&self) -> Result<SupportInterval> {
        support_edges(self)
    }
}

/// Support `[λ₋, λ₊]` of the equilibrium measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupportInterval {
    pub lambda_minus: f64,
    pub lambda_plus: f64,
}

pub fn support_edges(asym: &AsymptoticParams) -> Result<SupportInterval> {
    asym.require_proportional()?;
    let (a, b) = (asym.a, asym.b);
    let slack = 1e-14;
    if !(a > 0.0) || b < a - slack || b > 1.0 - a + slack {
        return Err(invalid(format!("need 0 < a <= b <= 1 - a, got a = {a}, b = {b}")));
    }
    let (lm, lp) = edge_formula(a, b);
    SupportInterval::new(lm, lp)
}

/// `[√(b(1-a)) ∓ √(a(1-b))]²`, unchecked.
pub fn edge_formula(a: f64, b: f64) -> (f64, f64) {
    let u = (b * (1.0 - a)).max(0.0).sqrt();
    let v = (a * (1.0 - b)).max(0.0).sqrt();
    (((u - v) * (u - v)).max(0.0), ((u + v) * (u + v)).min(1.0))
}

impl SupportInterval {
    pub fn new(lambda_minus: f64, lambda_plus: f64) -> Result<Self> {
        if !(0.0 <= lambda_minus && lambda_minus < lambda_plus && lambda_plus <= 1.0) {
            return Err(invalid(format!(
                "need 0 <= lambda_minus < lambda_plus <= 1, got [{lambda_minus}, {lambda_plus}]"
            )));
        }
        Ok(Self {
            lambda_minus,
            lambda_plus,
        })
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.lambda_plus + self.lambda_minus)
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.lambda_plus - self.lambda_minus)
    }

    /// `c + r cos θ`.
    pub fn at_angle(&self, theta: f64) -> f64 {
        self.center() + self.half_width() * theta.cos()
    }

    /// Affine map of the support onto `[-1, 1]`.
    pub fn to_unit(&self, x: f64) -> f64 {
        (2.0 * x - self.lambda_plus - self.lambda_minus) / (self.lambda_plus - self.lambda_minus)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lambda_minus <= x && x <= self.lambda_plus
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(x: f64, y: f64, tol: f64) -> bool {
        (x - y).abs() <= tol
    }

    #[test]
    fn derive_from_ensemble() {
        let p = EnsembleParams::new(100, 2.0, 200.0, 200.0).unwrap();
        let s = p.asymptotic();
        assert_eq!((s.p, s.q, s.a, s.b, s.alpha), (2.0, 2.0, 0.25, 0.5, 1.0));
        assert!(!s.extremal);
    }

    #[test]
    fn extremal_is_flagged_not_rejected() {
        let p = EnsembleParams::new(50, 1.0, 50.0, 50.0).unwrap();
        let s = p.asymptotic();
        assert_eq!((s.p, s.q), (1.0, 1.0));
        assert!(s.extremal);
        assert!(matches!(s.support(), Err(Error::ExtremalRegime { .. })));
    }

    #[test]
    fn rejects_small_n1() {
        assert!(EnsembleParams::new(10, 2.0, 8.0, 20.0).is_err());
        assert!(EnsembleParams::new(10, 2.0, 9.0, 9.0).is_ok());
        assert!(EnsembleParams::new(10, 0.0, 20.0, 20.0).is_err());
        assert!(EnsembleParams::new(0, 1.0, 20.0, 20.0).is_err());
    }

    #[test]
    fn involution_swaps_pairs() {
        let s = AsymptoticParams::from_ab(0.2, 0.3, 1.0).unwrap();
        let t = s.involution();
        assert!(close(t.a, 0.7, 1e-15) && close(t.b, 0.8, 1e-15));
        let u = t.involution();
        assert!(close(u.a, 0.2, 1e-15) && close(u.b, 0.3, 1e-15));
    }

    #[test]
    fn involution_preserves_support() {
        let s = AsymptoticParams::from_ab(0.2, 0.45, 1.0).unwrap();
        let t = s.involution();
        let (e, f) = (edge_formula(s.a, s.b), edge_formula(t.a, t.b));
        assert!(close(e.0, f.0, 1e-14));
        assert!(close(e.1, f.1, 1e-14));
    }

    #[test]
    fn edges_quarter_half() {
        let s = AsymptoticParams::from_ab(0.25, 0.5, 1.0).unwrap().support().unwrap();
        let r3 = 3f64.sqrt();
        assert!(close(s.lambda_minus, (2.0 - r3) / 4.0, 1e-15));
        assert!(close(s.lambda_plus, (2.0 + r3) / 4.0, 1e-15));
        assert!(close(s.center(), 0.5, 1e-15));
        assert!(close(s.half_width(), r3 / 4.0, 1e-15));
    }

    #[test]
    fn degenerate_edges() {
        let s = AsymptoticParams::from_ab(0.25, 0.25, 1.0).unwrap().support().unwrap();
        assert_eq!(s.lambda_minus, 0.0);
        assert!(close(s.lambda_plus, 0.75, 1e-15));
        let t = AsymptoticParams::from_ab(0.25, 0.75, 1.0).unwrap().support().unwrap();
        assert!(close(t.lambda_plus, 1.0, 1e-15));
    }

    #[test]
    fn edges_out_of_range() {
        let s = AsymptoticParams::from_ab(0.3, 0.2, 1.0).unwrap();
        assert!(s.support().is_err());
    }

    #[test]
    fn unit_map() {
        let s = SupportInterval::new(0.2, 0.6).unwrap();
        assert_eq!(s.to_unit(0.2), -1.0);
        assert_eq!(s.to_unit(0.6), 1.0);
        assert!(close(s.at_angle(0.0), 0.6, 1e-15));
    }
}
