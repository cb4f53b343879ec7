//! Alternating bridges and the path expansion of `tr (B Bᵀ)^k`.
//!
//! Expanding the trace of `(B Bᵀ)^k` entrywise, each nonzero term follows a
//! lattice path through the rows of `B` whose odd steps never go up and even
//! steps never go down. Shifting such a bridge to every starting row and
//! multiplying the visited entries recovers the trace. Since every variable
//! enters with an even multiplicity, expectations reduce to Beta moments that
//! can be computed in exact rational arithmetic.

use std::collections::HashMap;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::model::TridiagonalFactor;

/// Exact reduced fraction with arbitrary-precision parts.
pub type ExactRational = BigRational;

pub const MAX_ENUMERATE_K: usize = 10;
pub const MAX_PATH_TRACE_K: usize = 8;
pub const MAX_EXACT_K: usize = 5;

/// A bridge of `2k` steps in `{-1, 0, +1}`. Odd steps (1st, 3rd, ...) are
/// never `+1`, even steps never `-1`, and the steps sum to zero.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct AlternatingBridge {
    steps: Vec<i8>,
}

impl AlternatingBridge {
    pub fn new(steps: Vec<i8>) -> Result<Self> {
        if !steps.len().is_multiple_of(2) {
            return Err(invalid("bridge length must be even"));
        }
        for (i, &s) in steps.iter().enumerate() {
            let ok = if i % 2 == 0 { s == 0 || s == -1 } else { s == 0 || s == 1 };
            if !ok {
                return Err(invalid(format!("step {} = {s} violates the alternation rule", i + 1)));
            }
        }
        if steps.iter().map(|&s| s as i32).sum::<i32>() != 0 {
            return Err(invalid("bridge must return to its starting height"));
        }
        Ok(Self { steps })
    }

    pub fn k(&self) -> usize {
        self.steps.len() / 2
    }

    pub fn steps(&self) -> &[i8] {
        &self.steps
    }

    /// Heights relative to the start, `2k + 1` values.
    pub fn heights(&self) -> Vec<i32> {
        let mut h = vec![0];
        for &s in &self.steps {
            h.push(h.last().unwrap() + s as i32);
        }
        h
    }

    /// Number of horizontal steps; the bridge weight is `x^h y^(2k-h)`.
    pub fn horizontal_count(&self) -> usize {
        self.steps.iter().filter(|&&s| s == 0).count()
    }

    /// Horizontal steps grouped by height.
    pub fn horizontal_by_height(&self) -> HashMap<i32, usize> {
        let mut m = HashMap::new();
        let h = self.heights();
        for (i, &s) in self.steps.iter().enumerate() {
            if s == 0 {
                *m.entry(h[i]).or_insert(0) += 1;
            }
        }
        m
    }

    /// Crossings of the edge between heights `m` and `m + 1`, keyed by `m`.
    pub fn crossings_by_edge(&self) -> HashMap<i32, usize> {
        let mut m = HashMap::new();
        let h = self.heights();
        for (i, &s) in self.steps.iter().enumerate() {
            if s != 0 {
                *m.entry(h[i].min(h[i + 1])).or_insert(0) += 1;
            }
        }
        m
    }

    /// Every height carries an even number of horizontal steps and every
    /// edge an even number of crossings.
    pub fn has_even_step_counts(&self) -> bool {
        self.horizontal_by_height().values().all(|c| c % 2 == 0)
            && self.crossings_by_edge().values().all(|c| c % 2 == 0)
    }
}

/// All alternating bridges of a given half-length.
#[derive(Debug, Clone, Serialize)]
pub struct BridgeSet {
    pub k: usize,
    pub bridges: Vec<AlternatingBridge>,
}

impl BridgeSet {
    pub fn len(&self) -> usize {
        self.bridges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bridges.is_empty()
    }

    /// `Σ x^h y^(2k-h)` over the set, exactly.
    pub fn weight_sum(&self, x: &BigUint, y: &BigUint) -> BigUint {
        let two_k = 2 * self.k as u32;
        self.bridges
            .iter()
            .map(|b| {
                let h = b.horizontal_count() as u32;
                x.pow(h) * y.pow(two_k - h)
            })
            .sum()
    }

    /// Number of bridges with `2l` horizontal steps, for `l = 0..=k`.
    pub fn horizontal_histogram(&self) -> Vec<u64> {
        let mut hist = vec![0u64; self.k + 1];
        for b in &self.bridges {
            hist[b.horizontal_count() / 2] += 1;
        }
        hist
    }
}

pub fn enumerate_bridges(k: usize) -> Result<BridgeSet> {
    if k > MAX_ENUMERATE_K {
        return Err(Error::TooLarge {
            what: "bridge half-length k",
            value: k,
            max: MAX_ENUMERATE_K,
        });
    }
    let mut out = Vec::new();
    let mut steps = Vec::with_capacity(2 * k);
    extend(2 * k, 0, &mut steps, &mut out);
    Ok(BridgeSet { k, bridges: out })
}

fn extend(len: usize, height: i32, steps: &mut Vec<i8>, out: &mut Vec<AlternatingBridge>) {
    let i = steps.len();
    if i == len {
        if height == 0 {
            out.push(AlternatingBridge { steps: steps.clone() });
        }
        return;
    }
    let options: [i8; 2] = if i.is_multiple_of(2) { [0, -1] } else { [0, 1] };
    for s in options {
        let h = height + s as i32;
        // Remaining positions: odd ones can only lower, even ones only raise.
        let rest = len - i - 1;
        let downs = if i.is_multiple_of(2) { rest / 2 } else { rest.div_ceil(2) } as i32;
        let ups = rest as i32 - downs;
        if h - downs <= 0 && h + ups >= 0 {
            steps.push(s);
            extend(len, h, steps, out);
            steps.pop();
        }
    }
}

/// `p_k(x, y) = Σ_l C(k,l)² x^(2l) y^(2(k-l))`.
#[derive(Debug, Clone, Serialize)]
pub struct WeightPolynomial {
    pub k: usize,
    /// `coeffs[l] = C(k, l)²`.
    pub coeffs: Vec<BigUint>,
    #[serde(skip)]
    float_coeffs: Vec<f64>,
}

pub fn p_poly(k: usize) -> WeightPolynomial {
    let mut binom = vec![BigUint::one()];
    for l in 0..k {
        let next = binom[l].clone() * BigUint::from(k - l) / BigUint::from(l + 1);
        binom.push(next);
    }
    let coeffs: Vec<BigUint> = binom.iter().map(|c| c * c).collect();
    let float_coeffs = coeffs.iter().map(|c| c.to_f64().unwrap_or(f64::INFINITY)).collect();
    WeightPolynomial {
        k,
        coeffs,
        float_coeffs,
    }
}

impl WeightPolynomial {
    pub fn value(&self, x: f64, y: f64) -> f64 {
        let k = self.k as i32;
        (0..=k)
            .map(|l| self.float_coeffs[l as usize] * x.powi(2 * l) * y.powi(2 * (k - l)))
            .sum()
    }

    pub fn dx(&self, x: f64, y: f64) -> f64 {
        let k = self.k as i32;
        (1..=k)
            .map(|l| self.float_coeffs[l as usize] * (2 * l) as f64 * x.powi(2 * l - 1) * y.powi(2 * (k - l)))
            .sum()
    }

    pub fn dy(&self, x: f64, y: f64) -> f64 {
        let k = self.k as i32;
        (0..k)
            .map(|l| self.float_coeffs[l as usize] * (2 * (k - l)) as f64 * x.powi(2 * l) * y.powi(2 * (k - l) - 1))
            .sum()
    }

    pub fn value_exact(&self, x: &BigUint, y: &BigUint) -> BigUint {
        let k = self.k as u32;
        self.coeffs
            .iter()
            .enumerate()
            .map(|(l, c)| c * x.pow(2 * l as u32) * y.pow(2 * (k - l as u32)))
            .sum()
    }

    /// `Σ coeffs = C(2k, k)`.
    pub fn coefficient_sum(&self) -> BigUint {
        self.coeffs.iter().sum()
    }
}

/// `Σ_{k ≤ kmax} t^k p_k(x, y) / k!`.
pub fn egf_partial_sum(x: f64, y: f64, t: f64, kmax: usize) -> f64 {
    let mut fact = 1.0;
    let mut sum = 0.0;
    for k in 0..=kmax {
        if k > 0 {
            fact *= k as f64;
        }
        sum += t.powi(k as i32) * p_poly(k).value(x, y) / fact;
    }
    sum
}

/// Offsets (relative to the start row) of the `B` entries a bridge visits.
#[derive(Debug, Clone)]
struct Profile {
    min_h: i32,
    max_h: i32,
    /// `B[w][w]` visits: (row offset, count).
    diag: Vec<(i32, u32)>,
    /// `B[w+1][w]` visits: (column offset, count).
    sub: Vec<(i32, u32)>,
    /// Visited entries in path order: (is_diag, offset).
    walk: Vec<(bool, i32)>,
}

fn profile(b: &AlternatingBridge) -> Profile {
    let h = b.heights();
    let mut walk = Vec::with_capacity(b.steps.len());
    for (i, &s) in b.steps.iter().enumerate() {
        let (from, to) = (h[i], h[i + 1]);
        // odd step: B[w_i][w_{i+1}]; even step: B[w_{i+1}][w_i]
        walk.push(if s == 0 { (true, from) } else { (false, from.min(to)) });
    }
    let mut diag: HashMap<i32, u32> = HashMap::new();
    let mut sub: HashMap<i32, u32> = HashMap::new();
    for &(is_diag, o) in &walk {
        *if is_diag { diag.entry(o) } else { sub.entry(o) }.or_insert(0) += 1;
    }
    let mut diag: Vec<_> = diag.into_iter().collect();
    let mut sub: Vec<_> = sub.into_iter().collect();
    diag.sort_unstable();
    sub.sort_unstable();
    Profile {
        min_h: *h.iter().min().unwrap(),
        max_h: *h.iter().max().unwrap(),
        diag,
        sub,
        walk,
    }
}

/// `tr (B Bᵀ)^k` as a sum over shifted bridges. Paths leaving rows `1..=n`
/// contribute nothing.
pub fn trace_via_paths(factor: &TridiagonalFactor, k: usize) -> Result<f64> {
    if k > MAX_PATH_TRACE_K {
        return Err(Error::TooLarge {
            what: "trace power k",
            value: k,
            max: MAX_PATH_TRACE_K,
        });
    }
    let n = factor.n() as i32;
    let profiles: Vec<Profile> = enumerate_bridges(k)?.bridges.iter().map(profile).collect();
    let (d, e) = (factor.diag(), factor.sub());
    let mut total = 0.0;
    for t in 0..n {
        for p in &profiles {
            if t + p.min_h < 0 || t + p.max_h >= n {
                continue;
            }
            total += p
                .walk
                .iter()
                .map(|&(is_diag, o)| {
                    let i = (t + o) as usize;
                    if is_diag {
                        d[i]
                    } else {
                        e[i]
                    }
                })
                .product::<f64>();
        }
    }
    Ok(total)
}

/// `(α, a, b)` as exact rationals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RationalParams {
    #[serde(serialize_with = "ser_rational")]
    pub alpha: BigRational,
    #[serde(serialize_with = "ser_rational")]
    pub a: BigRational,
    #[serde(serialize_with = "ser_rational")]
    pub b: BigRational,
}

fn ser_rational<S: serde::Serializer>(v: &BigRational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

impl RationalParams {
    pub fn new(alpha: BigRational, a: BigRational, b: BigRational) -> Result<Self> {
        if !alpha.is_positive() || !a.is_positive() || !b.is_positive() || b >= BigRational::one() {
            return Err(invalid(format!("need alpha, a > 0 and 0 < b < 1, got ({alpha}, {a}, {b})")));
        }
        Ok(Self { alpha, a, b })
    }

    /// From `(numerator, denominator)` pairs.
    pub fn from_ratios(alpha: (i64, i64), a: (i64, i64), b: (i64, i64)) -> Result<Self> {
        let r = |(p, q): (i64, i64)| {
            if q == 0 {
                Err(invalid("zero denominator"))
            } else {
                Ok(BigRational::new(BigInt::from(p), BigInt::from(q)))
            }
        };
        Self::new(r(alpha)?, r(a)?, r(b)?)
    }

    pub fn to_f64(&self) -> (f64, f64, f64) {
        (to_f64(&self.alpha), to_f64(&self.a), to_f64(&self.b))
    }
}

pub fn to_f64(x: &BigRational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Parses `"3"`, `"-1/4"` or a terminating decimal like `"0.25"` exactly.
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    let bad = || invalid(format!("not an exact rational: {s:?}"));
    if s.contains('/') {
        let r = BigRational::from_str(s).map_err(|_| bad())?;
        return Ok(r);
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    if int.is_empty() && frac.is_empty() {
        return Err(bad());
    }
    let digits = format!("{int}{frac}");
    if !digits.chars().all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let num = BigInt::from_str(&digits).map_err(|_| bad())?;
    let den = num_traits::pow(BigInt::from(10), frac.len());
    let r = BigRational::new(num, den);
    Ok(if neg { -r } else { r })
}

fn rising(x: &BigRational, m: usize) -> BigRational {
    let mut r = BigRational::one();
    let mut t = x.clone();
    for _ in 0..m {
        r *= &t;
        t += BigRational::one();
    }
    r
}

/// `E[z^u (1-z)^v]` for `z ~ Beta(r, s)`.
pub fn beta_moment(r: &BigRational, s: &BigRational, u: usize, v: usize) -> BigRational {
    rising(r, u) * rising(s, v) / rising(&(r + s), u + v)
}

type Shapes = Vec<(BigRational, BigRational)>;

/// Exact Beta shapes of `c_i²` and `c'_j²` (1-based indices).
fn exact_shapes(p: &RationalParams, n: usize) -> Result<(Shapes, Shapes)> {
    let nn = BigRational::from_integer(BigInt::from(n));
    let inv_alpha = p.alpha.recip();
    let scale = &nn / (&p.alpha * &p.a);
    let one = BigRational::one();
    let check = |what: String, r: BigRational, s: BigRational| {
        if r.is_positive() && s.is_positive() {
            Ok((r, s))
        } else {
            Err(Error::NonPositiveShape {
                what,
                shape1: to_f64(&r),
                shape2: to_f64(&s),
            })
        }
    };
    let c = (1..=n)
        .map(|i| {
            let shift = BigRational::from_integer(BigInt::from(i as i64 - n as i64)) * &inv_alpha;
            check(format!("c_{i}^2"), &scale * &p.b + &shift, &scale * (&one - &p.b) + &shift)
        })
        .collect::<Result<Vec<_>>>()?;
    let cp = (1..n)
        .map(|j| {
            let r = BigRational::from_integer(BigInt::from(j)) * &inv_alpha;
            let s = &scale + BigRational::from_integer(BigInt::from(j as i64 - 2 * n as i64 + 1)) * &inv_alpha;
            check(format!("c'_{j}^2"), r, s)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((c, cp))
}

/// `E tr A^k` in exact arithmetic.
pub fn expected_trace_exact(params: &RationalParams, n: usize, k: usize) -> Result<BigRational> {
    if k > MAX_EXACT_K {
        return Err(Error::TooLarge {
            what: "exact trace power k",
            value: k,
            max: MAX_EXACT_K,
        });
    }
    if n == 0 {
        return Err(invalid("n must be positive"));
    }
    if k == 0 {
        return Ok(BigRational::from_integer(BigInt::from(n)));
    }
    let (c, cp) = exact_shapes(params, n)?;
    // moments[var][u][v]; c_i at var i - 1, c'_j at var n + j - 1.
    let table: Vec<Vec<Vec<BigRational>>> = c
        .par_iter()
        .chain(cp.par_iter())
        .map(|(r, s)| {
            (0..=k)
                .map(|u| (0..=k - u).map(|v| beta_moment(r, s, u, v)).collect())
                .collect()
        })
        .collect();
    let profiles: Vec<Profile> = enumerate_bridges(k)?.bridges.iter().map(profile).collect();
    let n_i = n as i32;
    let rows: Vec<BigRational> = (1..=n_i)
        .into_par_iter()
        .map(|t| {
            let mut row = BigRational::zero();
            let mut ex: Vec<(usize, usize, usize)> = Vec::new();
            for p in &profiles {
                if t + p.min_h < 1 || t + p.max_h > n_i {
                    continue;
                }
                ex.clear();
                let mut bump = |var: usize, du: usize, dv: usize| {
                    if let Some(slot) = ex.iter_mut().find(|e| e.0 == var) {
                        slot.1 += du;
                        slot.2 += dv;
                    } else {
                        ex.push((var, du, dv));
                    }
                };
                for &(o, cnt) in &p.diag {
                    // B[m][m] = c_{n-m+1} s'_{n-m}
                    let m = (t + o) as usize;
                    let half = (cnt / 2) as usize;
                    bump(n - m, half, 0);
                    if n > m {
                        bump(n + (n - m) - 1, 0, half);
                    }
                }
                for &(o, cnt) in &p.sub {
                    // B[m+1][m] = -s_{n-m} c'_{n-m}
                    let m = (t + o) as usize;
                    let half = (cnt / 2) as usize;
                    bump(n - m - 1, 0, half);
                    bump(n + (n - m) - 1, half, 0);
                }
                let mut term = BigRational::one();
                for &(var, u, v) in &ex {
                    term *= &table[var][u][v];
                }
                row += term;
            }
            row
        })
        .collect();
    Ok(tree_sum(rows))
}

fn tree_sum(mut xs: Vec<BigRational>) -> BigRational {
    if xs.is_empty() {
        return BigRational::zero();
    }
    while xs.len() > 1 {
        xs = xs
            .par_chunks(2)
            .map(|c| if c.len() == 2 { &c[0] + &c[1] } else { c[0].clone() })
            .collect();
    }
    xs.pop().unwrap()
}

/// Exact least-degree polynomial in `h = 1/n` through the data; returns the
/// first two coefficients `(P(0), P'(0))`.
fn richardson(ns: &[usize], vals: &[BigRational]) -> (BigRational, BigRational) {
    let l = ns.len();
    let mut m: Vec<Vec<BigRational>> = ns
        .iter()
        .zip(vals)
        .map(|(&n, v)| {
            let h = BigRational::new(BigInt::one(), BigInt::from(n));
            let mut row = Vec::with_capacity(l + 1);
            let mut p = BigRational::one();
            for _ in 0..l {
                row.push(p.clone());
                p *= &h;
            }
            row.push(v.clone());
            row
        })
        .collect();
    // Gaussian elimination; Vandermonde rows with distinct nodes are nonsingular.
    for col in 0..l {
        let piv = (col..l).find(|&r| !m[r][col].is_zero()).expect("distinct grid points");
        m.swap(col, piv);
        let pv = m[col][col].clone();
        for j in col..=l {
            m[col][j] = &m[col][j] / &pv;
        }
        for r in 0..l {
            if r != col && !m[r][col].is_zero() {
                let f = m[r][col].clone();
                for j in col..=l {
                    let delta = &f * &m[col][j];
                    m[r][j] -= delta;
                }
            }
        }
    }
    let c1 = if l > 1 { m[1][l].clone() } else { BigRational::zero() };
    (m[0][l].clone(), c1)
}

/// Extrapolated expansion `(1/n) E tr A^k = η_k(0) + η_k(1)/n + O(n⁻²)`.
#[derive(Debug, Clone, Serialize)]
pub struct EtaEstimate {
    pub k: usize,
    pub grid: Vec<usize>,
    /// `(1/n) E tr A^k` at each grid size.
    #[serde(skip)]
    pub values: Vec<BigRational>,
    #[serde(skip)]
    pub eta0_exact: BigRational,
    #[serde(skip)]
    pub eta1_exact: BigRational,
    pub eta0: f64,
    pub eta1: f64,
    /// Change in each estimate when the coarsest level is dropped.
    pub residual0: f64,
    pub residual1: f64,
}

/// Relative residual beyond which extrapolation is declared divergent.
pub const DIVERGENCE_LIMIT: f64 = 1e-2;

/// Default geometric grid `(128, 256, 512)`.
pub fn default_grid() -> Vec<usize> {
    vec![128, 256, 512]
}

pub fn eta_extract(k: usize, params: &RationalParams, grid: &[usize]) -> Result<EtaEstimate> {
    if grid.len() < 3 {
        return Err(invalid("extrapolation grid needs at least three sizes"));
    }
    let mut sorted = grid.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != grid.len() || sorted[0] == 0 {
        return Err(invalid("grid sizes must be distinct and positive"));
    }
    let values = grid
        .iter()
        .map(|&n| {
            expected_trace_exact(params, n, k).map(|t| t / BigRational::from_integer(BigInt::from(n)))
        })
        .collect::<Result<Vec<_>>>()?;
    let (e0, e1) = richardson(grid, &values);
    // Drop the coarsest size and refit.
    let coarse = grid.iter().enumerate().min_by_key(|(_, &n)| n).unwrap().0;
    let (g2, v2): (Vec<usize>, Vec<BigRational>) = grid
        .iter()
        .zip(&values)
        .enumerate()
        .filter(|(i, _)| *i != coarse)
        .map(|(_, (&n, v))| (n, v.clone()))
        .unzip();
    let (f0, f1) = richardson(&g2, &v2);
    let residual0 = to_f64(&(&e0 - &f0).abs());
    let residual1 = to_f64(&(&e1 - &f1).abs());
    let (eta0, eta1) = (to_f64(&e0), to_f64(&e1));
    if !(residual0.is_finite() && residual1.is_finite())
        || residual0 > DIVERGENCE_LIMIT * (1.0 + eta0.abs())
        || residual1 > DIVERGENCE_LIMIT * (1.0 + eta1.abs())
    {
        return Err(Error::Extrapolation { residual0, residual1 });
    }
    Ok(EtaEstimate {
        k,
        grid: grid.to_vec(),
        values,
        eta0_exact: e0,
        eta1_exact: e1,
        eta0,
        eta1,
        residual0,
        residual1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{replicate_stream, sample_factor};
    use crate::params::EnsembleParams;

    fn rat(p: i64, q: i64) -> BigRational {
        BigRational::new(BigInt::from(p), BigInt::from(q))
    }

    fn binom(n: u64, k: u64) -> u64 {
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }

    #[test]
    fn small_bridge_sets() {
        let b1 = enumerate_bridges(1).unwrap();
        let steps: Vec<_> = b1.bridges.iter().map(|b| b.steps().to_vec()).collect();
        assert_eq!(b1.len(), 2);
        assert!(steps.contains(&vec![0, 0]) && steps.contains(&vec![-1, 1]));
        assert_eq!(enumerate_bridges(2).unwrap().len(), 6);
        assert_eq!(enumerate_bridges(5).unwrap().len(), 252);
        assert_eq!(enumerate_bridges(0).unwrap().len(), 1);
        assert!(enumerate_bridges(11).is_err());
    }

    #[test]
    fn enumeration_matches_brute_force() {
        for k in 1..=5usize {
            let mut brute = 0;
            for code in 0..3usize.pow(2 * k as u32) {
                let mut c = code;
                let steps: Vec<i8> = (0..2 * k)
                    .map(|_| {
                        let s = (c % 3) as i8 - 1;
                        c /= 3;
                        s
                    })
                    .collect();
                if AlternatingBridge::new(steps).is_ok() {
                    brute += 1;
                }
            }
            assert_eq!(enumerate_bridges(k).unwrap().len(), brute);
            assert_eq!(brute as u64, binom(2 * k as u64, k as u64));
        }
    }

    #[test]
    fn invalid_bridges() {
        assert!(AlternatingBridge::new(vec![1, -1]).is_err());
        assert!(AlternatingBridge::new(vec![0, 1]).is_err());
        assert!(AlternatingBridge::new(vec![0]).is_err());
    }

    #[test]
    fn weight_polynomials() {
        let c = |k| p_poly(k).coeffs.iter().map(|v| v.to_u64().unwrap()).collect::<Vec<_>>();
        assert_eq!(c(1), vec![1, 1]);
        assert_eq!(c(2), vec![1, 4, 1]);
        assert_eq!(c(3), vec![1, 9, 9, 1]);
        assert_eq!(enumerate_bridges(3).unwrap().horizontal_histogram(), vec![1, 9, 9, 1]);
        let p2 = p_poly(2);
        assert_eq!(p2.dx(1.0, 1.0), 12.0);
        let h = 1e-6;
        let fd = (p2.value(0.7 + h, 0.4) - p2.value(0.7 - h, 0.4)) / (2.0 * h);
        assert!((fd - p2.dx(0.7, 0.4)).abs() < 1e-5);
        let fd = (p2.value(0.7, 0.4 + h) - p2.value(0.7, 0.4 - h)) / (2.0 * h);
        assert!((fd - p2.dy(0.7, 0.4)).abs() < 1e-5);
    }

    #[test]
    fn evenness_at_every_height() {
        for k in 1..=8 {
            assert!(enumerate_bridges(k).unwrap().bridges.iter().all(|b| b.has_even_step_counts()));
        }
    }

    #[test]
    fn path_trace_small_cases() {
        let f = TridiagonalFactor::from_raw(vec![0.3], vec![]).unwrap();
        assert!((trace_via_paths(&f, 3).unwrap() - 0.3f64.powi(3)).abs() < 1e-16);
        let f = TridiagonalFactor::from_raw(vec![0.3, 0.6], vec![0.2]).unwrap();
        // c_2² s'_1² + s_1² c'_1² + c_1²
        let want = 0.6 * 0.8 + 0.7 * 0.2 + 0.3;
        assert!((trace_via_paths(&f, 1).unwrap() - want).abs() < 1e-15);
        assert!(trace_via_paths(&f, 9).is_err());
    }

    #[test]
    fn path_trace_matches_power_traces() {
        let p = EnsembleParams::proportional(12, 2.0, 2.0, 3.0).unwrap();
        let f = sample_factor(&p, &mut replicate_stream(31, 0)).unwrap();
        let t = crate::model::assemble_gram(&f).power_traces(6);
        for k in 1..=6 {
            let v = trace_via_paths(&f, k).unwrap();
            assert!((v - t[k]).abs() <= 1e-12 * t[k].abs());
        }
    }

    #[test]
    fn exact_trace_hand_cases() {
        let p = RationalParams::from_ratios((1, 1), (1, 4), (1, 2)).unwrap();
        assert_eq!(expected_trace_exact(&p, 2, 1).unwrap(), rat(1, 1));
        assert_eq!(expected_trace_exact(&p, 64, 1).unwrap(), rat(32, 1));
        // n = 1: E c_1⁴ with r = s = nb/(αa) = 2
        let want = beta_moment(&rat(2, 1), &rat(2, 1), 2, 0);
        assert_eq!(expected_trace_exact(&p, 1, 2).unwrap(), want);
        assert_eq!(want, rat(2 * 3, 4 * 5));
    }

    #[test]
    fn exact_trace_first_moment_is_nb() {
        let p = RationalParams::from_ratios((1, 2), (1, 5), (3, 10)).unwrap();
        for n in [2, 7, 30] {
            let want = rat(3 * n as i64, 10);
            assert_eq!(expected_trace_exact(&p, n, 1).unwrap(), want);
        }
    }

    #[test]
    fn nonpositive_shape_is_reported() {
        // p = b/a = 1/2, so n1 = n/2 < n - 1.
        let p = RationalParams::from_ratios((1, 1), (1, 2), (1, 4)).unwrap();
        assert!(matches!(expected_trace_exact(&p, 4, 1), Err(Error::NonPositiveShape { .. })));
    }

    #[test]
    fn parse_rationals() {
        assert_eq!(parse_rational("0.25").unwrap(), rat(1, 4));
        assert_eq!(parse_rational("-1/3").unwrap(), rat(-1, 3));
        assert_eq!(parse_rational("2").unwrap(), rat(2, 1));
        assert_eq!(parse_rational(".5").unwrap(), rat(1, 2));
        assert!(parse_rational("1e-3").is_err());
        assert!(parse_rational("").is_err());
    }

    #[test]
    fn richardson_recovers_polynomials() {
        // v(n) = 1/3 + 2/n - 5/n²
        let ns = [10usize, 20, 40];
        let vals: Vec<_> = ns
            .iter()
            .map(|&n| rat(1, 3) + rat(2, n as i64) - rat(5, (n * n) as i64))
            .collect();
        let (c0, c1) = richardson(&ns, &vals);
        assert_eq!((c0, c1), (rat(1, 3), rat(2, 1)));
    }

    #[test]
    fn eta_first_moment() {
        let p = RationalParams::from_ratios((1, 2), (1, 4), (1, 2)).unwrap();
        let e = eta_extract(1, &p, &[8, 16, 32]).unwrap();
        assert_eq!(e.eta0_exact, rat(1, 2));
        assert!(e.eta1_exact.is_zero());
    }
}
