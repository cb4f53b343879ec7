//! The bidiagonal factor `B` of the tridiagonal model and the Gram matrix
//! `A = B Bᵀ`.
//!
//! `B` is lower bidiagonal with
//! `B[k][k] = c_{n-k+1} s'_{n-k}` (`s'_0 = 1`) and
//! `B[k+1][k] = -s_{n-k} c'_{n-k}`, all indices 1-based. Only the squares
//! `c_i²` and `c'_j²` are drawn; every entry of `A` is a polynomial in them
//! except the off-diagonal, which carries one square root.

use std::io::Write;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::eig::{self, Spectrum};
use crate::error::{invalid, Error, Result};
use crate::params::EnsembleParams;

/// Shapes of a Beta law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaSpec {
    pub shape1: f64,
    pub shape2: f64,
}

impl BetaSpec {
    pub fn new(shape1: f64, shape2: f64) -> Result<Self> {
        if !(shape1 > 0.0 && shape2 > 0.0 && shape1.is_finite() && shape2.is_finite()) {
            return Err(Error::NonPositiveShape {
                what: "Beta law".into(),
                shape1,
                shape2,
            });
        }
        Ok(Self { shape1, shape2 })
    }

    pub fn mean(&self) -> f64 {
        self.shape1 / (self.shape1 + self.shape2)
    }

    pub fn variance(&self) -> f64 {
        let s = self.shape1 + self.shape2;
        self.shape1 * self.shape2 / (s * s * (s + 1.0))
    }
}

/// One Beta draw as `X / (X + Y)` with independent Gamma variates.
pub fn beta_sample<R: Rng + ?Sized>(spec: &BetaSpec, rng: &mut R) -> f64 {
    // Both constructors succeed for positive finite shapes.
    let gx = Gamma::new(spec.shape1, 1.0).expect("validated shape");
    let gy = Gamma::new(spec.shape2, 1.0).expect("validated shape");
    loop {
        let x: f64 = gx.sample(rng);
        let y: f64 = gy.sample(rng);
        let s = x + y;
        // Tiny shapes can underflow both variates.
        if s > 0.0 {
            return x / s;
        }
    }
}

/// Deterministic generator for replicate `replicate` of a run seeded with
/// `seed`. Streams of different replicates never overlap, so results do not
/// depend on how replicates are scheduled across threads.
pub fn replicate_stream(seed: u64, replicate: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    rng
}

/// Beta laws of `c_i²` (i = 1..n) and `c'_j²` (j = 1..n-1).
pub fn factor_shapes(params: &EnsembleParams) -> Result<(Vec<BetaSpec>, Vec<BetaSpec>)> {
    let n = params.n as f64;
    let h = params.beta / 2.0;
    let c = (1..=params.n)
        .map(|i| {
            let i = i as f64;
            let (s1, s2) = (h * (params.n1 - n + i), h * (params.n2 - n + i));
            BetaSpec::new(s1, s2).map_err(|_| Error::NonPositiveShape {
                what: format!("c_{i}^2"),
                shape1: s1,
                shape2: s2,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let cp = (1..params.n)
        .map(|j| {
            let j = j as f64;
            let (s1, s2) = (h * j, h * (params.n1 + params.n2 - 2.0 * n + 1.0 + j));
            BetaSpec::new(s1, s2).map_err(|_| Error::NonPositiveShape {
                what: format!("c'_{j}^2"),
                shape1: s1,
                shape2: s2,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((c, cp))
}

/// Bidiagonal factor, stored through its raw Beta draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TridiagonalFactor {
    raw_c: Vec<f64>,
    raw_cp: Vec<f64>,
    diag: Vec<f64>,
    sub: Vec<f64>,
}

impl TridiagonalFactor {
    /// `raw_c[i-1] = c_i²`, `raw_cp[j-1] = c'_j²`.
    pub fn from_raw(raw_c: Vec<f64>, raw_cp: Vec<f64>) -> Result<Self> {
        let n = raw_c.len();
        if n == 0 || raw_cp.len() + 1 != n {
            return Err(invalid(format!(
                "need raw_c of length n >= 1 and raw_cp of length n - 1, got {} and {}",
                n,
                raw_cp.len()
            )));
        }
        if let Some(v) = raw_c.iter().chain(&raw_cp).find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(invalid(format!("raw draw {v} outside [0, 1]")));
        }
        let diag = (0..n)
            .map(|k| {
                let c = raw_c[n - 1 - k].sqrt();
                let sp = if k + 1 < n { (1.0 - raw_cp[n - 2 - k]).sqrt() } else { 1.0 };
                c * sp
            })
            .collect();
        let sub = (0..n - 1)
            .map(|k| -(1.0 - raw_c[n - 2 - k]).sqrt() * raw_cp[n - 2 - k].sqrt())
            .collect();
        Ok(Self {
            raw_c,
            raw_cp,
            diag,
            sub,
        })
    }

    pub fn n(&self) -> usize {
        self.raw_c.len()
    }
    pub fn raw_c(&self) -> &[f64] {
        &self.raw_c
    }
    pub fn raw_cp(&self) -> &[f64] {
        &self.raw_cp
    }
    /// `B[k][k]`, 0-based.
    pub fn diag(&self) -> &[f64] {
        &self.diag
    }
    /// `B[k+1][k]`, 0-based.
    pub fn sub(&self) -> &[f64] {
        &self.sub
    }

    /// Dense row-major copy of `B`.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.n();
        let mut b = vec![vec![0.0; n]; n];
        for k in 0..n {
            b[k][k] = self.diag[k];
            if k + 1 < n {
                b[k + 1][k] = self.sub[k];
            }
        }
        b
    }

    /// Writes one row per index: `index, raw_c, raw_cp, d, e`. The last row
    /// leaves `raw_cp` and `e` empty.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["index", "raw_c", "raw_cp", "d", "e"])?;
        let opt = |v: Option<&f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        for k in 0..self.n() {
            w.write_record([
                (k + 1).to_string(),
                format!("{:e}", self.raw_c[k]),
                opt(self.raw_cp.get(k)),
                format!("{:e}", self.diag[k]),
                opt(self.sub.get(k)),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Draws every `c_i²` then every `c'_j²` from `rng`, in index order.
pub fn sample_factor<R: Rng + ?Sized>(params: &EnsembleParams, rng: &mut R) -> Result<TridiagonalFactor> {
    let (c, cp) = factor_shapes(params)?;
    let raw_c = c.iter().map(|s| beta_sample(s, rng)).collect();
    let raw_cp = cp.iter().map(|s| beta_sample(s, rng)).collect();
    TridiagonalFactor::from_raw(raw_c, raw_cp)
}

/// The `β → ∞` factor: each Beta draw replaced by its mean.
pub fn deterministic_factor(params: &EnsembleParams) -> Result<TridiagonalFactor> {
    let (c, cp) = factor_shapes(params)?;
    TridiagonalFactor::from_raw(
        c.iter().map(BetaSpec::mean).collect(),
        cp.iter().map(BetaSpec::mean).collect(),
    )
}

/// Symmetric tridiagonal matrix in compact form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymTridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

/// `A = B Bᵀ`. The diagonal is built from the raw draws alone.
pub fn assemble_gram(factor: &TridiagonalFactor) -> SymTridiagonal {
    let n = factor.n();
    let (z, zp) = (factor.raw_c(), factor.raw_cp());
    let diag = (0..n)
        .map(|k| {
            // d_k² = z_{n-k+1}(1 - z'_{n-k}),  e_{k-1}² = (1 - z_{n-k+1}) z'_{n-k+1}
            let zk = z[n - 1 - k];
            let d2 = if k + 1 < n { zk * (1.0 - zp[n - 2 - k]) } else { zk };
            let e2 = if k > 0 { (1.0 - zk) * zp[n - 1 - k] } else { 0.0 };
            d2 + e2
        })
        .collect();
    let off = (0..n.saturating_sub(1)).map(|k| factor.diag()[k] * factor.sub()[k]).collect();
    SymTridiagonal { diag, off }
}

impl SymTridiagonal {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Result<Self> {
        if diag.is_empty() || off.len() + 1 != diag.len() {
            return Err(invalid(format!(
                "need diag of length n >= 1 and off of length n - 1, got {} and {}",
                diag.len(),
                off.len()
            )));
        }
        Ok(Self { diag, off })
    }

    pub fn n(&self) -> usize {
        self.diag.len()
    }

    pub fn trace(&self) -> f64 {
        self.diag.iter().sum()
    }

    /// Squared Frobenius norm.
    pub fn frobenius_sq(&self) -> f64 {
        self.diag.iter().map(|d| d * d).sum::<f64>() + 2.0 * self.off.iter().map(|e| e * e).sum::<f64>()
    }

    pub fn max_abs(&self) -> f64 {
        self.diag.iter().chain(&self.off).fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.n();
        let mut a = vec![vec![0.0; n]; n];
        for k in 0..n {
            a[k][k] = self.diag[k];
            if k + 1 < n {
                a[k][k + 1] = self.off[k];
                a[k + 1][k] = self.off[k];
            }
        }
        a
    }

    pub fn eigenvalues(&self) -> Result<Spectrum> {
        eig::eigenvalues(self, eig::DEFAULT_TOL)
    }

    /// `tr A^j` for `j = 0..=kmax`, by repeated banded multiplication.
    pub fn power_traces(&self, kmax: usize) -> Vec<f64> {
        let n = self.n();
        let mut out = Vec::with_capacity(kmax + 1);
        out.push(n as f64);
        // P = A^j stored by rows, offsets -w..=w.
        let mut w = 0usize;
        let mut p = vec![1.0; n];
        for _ in 0..kmax {
            let (pw, nw) = (2 * w + 1, 2 * w + 3);
            let mut next = vec![0.0; n * nw];
            for i in 0..n {
                let row = &p[i * pw..(i + 1) * pw];
                let dst = &mut next[i * nw..(i + 1) * nw];
                for (slot, &v) in row.iter().enumerate() {
                    if v == 0.0 {
                        continue;
                    }
                    // column m = i + slot - w
                    let m = i + slot;
                    if m < w || m - w >= n {
                        continue;
                    }
                    let m = m - w;
                    // A[m][m-1], A[m][m], A[m][m+1] land at offsets slot, slot+1, slot+2 of the wider row.
                    if m > 0 {
                        dst[slot] += v * self.off[m - 1];
                    }
                    dst[slot + 1] += v * self.diag[m];
                    if m + 1 < n {
                        dst[slot + 2] += v * self.off[m];
                    }
                }
            }
            w += 1;
            p = next;
            let mid = w;
            out.push((0..n).map(|i| p[i * (2 * w + 1) + mid]).sum());
        }
        out
    }
}
