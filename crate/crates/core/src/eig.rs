//! Eigenvalues of symmetric tridiagonal matrices.
//!
//! Implicit QL with the Wilkinson shift does the work; Sturm-sequence
//! bisection backs it up and serves as an independent check.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::SymTridiagonal;

/// Absolute bisection tolerance, relative to the matrix scale.
pub const DEFAULT_TOL: f64 = 1e-14;
/// Sweeps allowed per eigenvalue before QL gives up.
pub const MAX_SWEEPS: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    /// Ascending.
    pub values: Vec<f64>,
    /// `|Σ λ - tr A|`.
    pub residual_trace_error: f64,
}

/// All eigenvalues of `a`, ascending. Falls back to bisection at tolerance
/// `tol · ‖A‖` if QL fails to converge.
pub fn eigenvalues(a: &SymTridiagonal, tol: f64) -> Result<Spectrum> {
    if a.diag.iter().chain(&a.off).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("tridiagonal entries".into()));
    }
    let mut values = match ql_eigenvalues(&a.diag, &a.off) {
        Ok(v) => v,
        Err(Error::NoConvergence { .. }) => bisection_eigenvalues(a, tol),
        Err(e) => return Err(e),
    };
    values.sort_by(f64::total_cmp);
    let residual_trace_error = (values.iter().sum::<f64>() - a.trace()).abs();
    Ok(Spectrum {
        values,
        residual_trace_error,
    })
}

/// Implicit QL sweeps, eigenvalues only. Order of the result is unspecified.
pub fn ql_eigenvalues(diag: &[f64], off: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    if off.len() + 1 != n && !(n == 0 && off.is_empty()) {
        return Err(invalid("off-diagonal length must be n - 1"));
    }
    let mut d = diag.to_vec();
    let mut e = off.to_vec();
    e.push(0.0);
    for l in 0..n {
        let mut sweeps = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            sweeps += 1;
            if sweeps > MAX_SWEEPS {
                return Err(Error::NoConvergence { index: l });
            }
            // Shift from the leading 2x2 block.
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut underflow = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(d)
}

/// Number of eigenvalues strictly below `x`.
pub fn sturm_count(a: &SymTridiagonal, x: f64) -> usize {
    let emax = a.off.iter().fold(1.0f64, |m, v| m.max(v * v));
    let pivmin = f64::MIN_POSITIVE * emax;
    let mut count = 0;
    let mut q = 1.0;
    for i in 0..a.n() {
        let e2 = if i > 0 { a.off[i - 1] * a.off[i - 1] } else { 0.0 };
        q = a.diag[i] - x - if i > 0 { e2 / q } else { 0.0 };
        if q.abs() < pivmin {
            q = -pivmin;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Gershgorin interval containing the spectrum.
pub fn gershgorin(a: &SymTridiagonal) -> (f64, f64) {
    let n = a.n();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..n {
        let mut rad = 0.0;
        if i > 0 {
            rad += a.off[i - 1].abs();
        }
        if i + 1 < n {
            rad += a.off[i].abs();
        }
        lo = lo.min(a.diag[i] - rad);
        hi = hi.max(a.diag[i] + rad);
    }
    (lo, hi)
}

/// Every eigenvalue by bisection on the Sturm count, ascending.
pub fn bisection_eigenvalues(a: &SymTridiagonal, tol: f64) -> Vec<f64> {
    let (glo, ghi) = gershgorin(a);
    let scale = glo.abs().max(ghi.abs()).max(f64::MIN_POSITIVE);
    let width = tol * scale;
    (0..a.n())
        .map(|k| {
            let (mut lo, mut hi) = (glo - width, ghi + width);
            for _ in 0..200 {
                if hi - lo <= width + 2.0 * f64::EPSILON * lo.abs().max(hi.abs()) {
                    break;
                }
                let mid = 0.5 * (lo + hi);
                if sturm_count(a, mid) > k {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            0.5 * (lo + hi)
        })
        .collect()
}

/// Householder reduction of a dense symmetric matrix to tridiagonal form.
/// Only the lower triangle is read.
pub fn tridiagonalize(dense: &[Vec<f64>]) -> Result<SymTridiagonal> {
    let n = dense.len();
    if n == 0 || dense.iter().any(|r| r.len() != n) {
        return Err(invalid("expected a nonempty square matrix"));
    }
    let mut a: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if j <= i { dense[i][j] } else { dense[j][i] }).collect())
        .collect();
    for k in 0..n.saturating_sub(2) {
        let norm = (k + 1..n).map(|i| a[i][k] * a[i][k]).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = -norm.copysign(a[k + 1][k]);
        let mut v: Vec<f64> = (k + 1..n).map(|i| a[i][k]).collect();
        v[0] -= alpha;
        let vn = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if vn == 0.0 {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= vn);
        let m = v.len();
        // p = S v on the trailing block, w = p - (vᵀp) v; S ← S - 2vwᵀ - 2wvᵀ.
        let p: Vec<f64> = (0..m)
            .map(|i| (0..m).map(|j| a[k + 1 + i][k + 1 + j] * v[j]).sum())
            .collect();
        let vp: f64 = v.iter().zip(&p).map(|(x, y)| x * y).sum();
        let w: Vec<f64> = p.iter().zip(&v).map(|(pi, vi)| pi - vp * vi).collect();
        for i in 0..m {
            for j in 0..m {
                a[k + 1 + i][k + 1 + j] -= 2.0 * (v[i] * w[j] + w[i] * v[j]);
            }
        }
        for i in k + 1..n {
            a[i][k] = 0.0;
            a[k][i] = 0.0;
        }
        a[k + 1][k] = alpha;
        a[k][k + 1] = alpha;
    }
    SymTridiagonal::new(
        (0..n).map(|i| a[i][i]).collect(),
        (0..n - 1).map(|i| a[i + 1][i]).collect(),
    )
}

/// Eigenvalues of a small dense symmetric matrix, ascending.
pub fn dense_symmetric_eigenvalues(dense: &[Vec<f64>]) -> Result<Vec<f64>> {
    Ok(eigenvalues(&tridiagonalize(dense)?, DEFAULT_TOL)?.values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{assemble_gram, replicate_stream, sample_factor};
    use crate::params::EnsembleParams;
    use rand::Rng;

    fn tri(diag: Vec<f64>, off: Vec<f64>) -> SymTridiagonal {
        SymTridiagonal::new(diag, off).unwrap()
    }

    #[test]
    fn diagonal_matrix() {
        let s = eigenvalues(&tri(vec![3.0, -1.0, 2.0, 0.5], vec![0.0; 3]), DEFAULT_TOL).unwrap();
        assert_eq!(s.values, vec![-1.0, 0.5, 2.0, 3.0]);
    }

    #[test]
    fn three_by_three_closed_form() {
        let s = eigenvalues(&tri(vec![1.0; 3], vec![1.0; 2]), DEFAULT_TOL).unwrap();
        let r2 = 2f64.sqrt();
        let want = [1.0 - r2, 1.0, 1.0 + r2];
        for (x, y) in s.values.iter().zip(want) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn single_entry() {
        assert_eq!(eigenvalues(&tri(vec![0.3], vec![]), DEFAULT_TOL).unwrap().values, vec![0.3]);
    }

    #[test]
    fn nan_is_rejected() {
        assert!(matches!(
            eigenvalues(&tri(vec![1.0, f64::NAN], vec![0.0]), DEFAULT_TOL),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn agrees_with_bisection() {
        let mut rng = replicate_stream(21, 0);
        for _ in 0..50 {
            let n = rng.random_range(1..=10);
            let a = tri(
                (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
                (1..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
            );
            let q = eigenvalues(&a, DEFAULT_TOL).unwrap().values;
            let b = bisection_eigenvalues(&a, DEFAULT_TOL);
            for (x, y) in q.iter().zip(&b) {
                assert!((x - y).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn sturm_counts_are_monotone() {
        let a = tri(vec![1.0; 3], vec![1.0; 2]);
        assert_eq!(sturm_count(&a, -1.0), 0);
        assert_eq!(sturm_count(&a, 0.0), 1);
        assert_eq!(sturm_count(&a, 1.5), 2);
        assert_eq!(sturm_count(&a, 3.0), 3);
    }

    #[test]
    fn gram_spectrum_in_unit_interval() {
        let p = EnsembleParams::proportional(64, 2.0, 2.0, 2.0).unwrap();
        for r in 0..100 {
            let a = assemble_gram(&sample_factor(&p, &mut replicate_stream(22, r)).unwrap());
            let s = a.eigenvalues().unwrap();
            assert!(s.values[0] >= -1e-12 && s.values[63] <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn householder_preserves_spectrum() {
        let mut rng = replicate_stream(23, 0);
        let n = 7;
        let mut m = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..=i {
                let v = rng.random_range(-1.0..1.0);
                m[i][j] = v;
                m[j][i] = v;
            }
        }
        let t = tridiagonalize(&m).unwrap();
        let tr: f64 = (0..n).map(|i| m[i][i]).sum();
        let fro: f64 = m.iter().flatten().map(|v| v * v).sum();
        assert!((t.trace() - tr).abs() < 1e-13);
        assert!((t.frobenius_sq() - fro).abs() < 1e-13);
        // 2x2 block has a known spectrum
        let ev = dense_symmetric_eigenvalues(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        assert!((ev[0] - 1.0).abs() < 1e-15 && (ev[1] - 3.0).abs() < 1e-15);
    }
}
