//! Monte Carlo harness: fluctuations of linear statistics, law-of-large-
//! numbers distances, the Trotter Frobenius gap, the `1/n` deviation of the
//! mean, and moments in the extremal regime.
//!
//! Replicate `i` of a run seeded with `s` always draws from stream `(s, i)`
//! and all reductions run over the ordered replicate list, so results are
//! identical for any thread count.

use std::io::Write;

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::erf::erfc;

use crate::covariance::theory_covariance;
use crate::error::{invalid, Error, Result};
use crate::model::{assemble_gram, deterministic_factor, replicate_stream, sample_factor, SymTridiagonal};
use crate::params::{AsymptoticParams, EnsembleParams, SupportInterval};
use crate::paths::{default_grid, eta_extract, to_f64, RationalParams};
use crate::quadrature::{angle_mean, pairwise_sum};
use crate::spectral::{integrate_mu, integrate_nu, variance_functionals, TestFunction, DEFAULT_NODES};

/// Chebyshev truncation used for theory variances.
pub const THEORY_TRUNCATION: usize = 64;

/// Runs `f(i, stream(seed, i))` for every replicate, in parallel, returning
/// results in replicate order. `threads == 0` uses the global pool.
pub fn run_replicates<T, F>(seed: u64, replicates: usize, threads: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, &mut ChaCha8Rng) -> Result<T> + Sync + Send,
{
    let work = || {
        (0..replicates)
            .into_par_iter()
            .map(|i| {
                let mut rng = replicate_stream(seed, i as u64);
                f(i, &mut rng).map_err(|e| Error::Replicate {
                    index: i,
                    source: Box::new(e),
                })
            })
            .collect::<Result<Vec<T>>>()
    };
    if threads == 0 {
        work()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| invalid(format!("thread pool: {e}")))?
            .install(work)
    }
}

/// Sample moments; `variance` is unbiased, the rest are plug-in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Moments {
    pub count: usize,
    pub mean: f64,
    pub variance: f64,
    pub central2: f64,
    pub central4: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
}

pub fn sample_moments(xs: &[f64]) -> Moments {
    let m = xs.len() as f64;
    let mean = pairwise_sum(xs) / m;
    let pow = |k: i32| pairwise_sum(&xs.iter().map(|x| (x - mean).powi(k)).collect::<Vec<_>>()) / m;
    let (c2, c3, c4) = (pow(2), pow(3), pow(4));
    let (skewness, excess_kurtosis) = if c2 > 0.0 {
        (c3 / c2.powf(1.5), c4 / (c2 * c2) - 3.0)
    } else {
        (0.0, 0.0)
    };
    Moments {
        count: xs.len(),
        mean,
        variance: if xs.len() > 1 { c2 * m / (m - 1.0) } else { 0.0 },
        central2: c2,
        central4: c4,
        skewness,
        excess_kurtosis,
    }
}

/// Sup distance between the empirical law of `xs` and `N(mean, sd²)`.
pub fn ks_normal(xs: &[f64], mean: f64, sd: f64) -> f64 {
    if !(sd > 0.0) {
        return 0.0;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = 0.5 * erfc(-(x - mean) / (sd * std::f64::consts::SQRT_2));
            (f - i as f64 / m).abs().max((f - (i + 1) as f64 / m).abs())
        })
        .fold(0.0, f64::max)
}

/// Inputs of a fluctuation run.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub params: EnsembleParams,
    pub test_functions: Vec<TestFunction>,
    pub replicates: usize,
    pub seed: u64,
    /// 0 = let the runtime decide.
    pub threads: usize,
}

impl ExperimentConfig {
    pub fn new(params: EnsembleParams, test_functions: Vec<TestFunction>, replicates: usize, seed: u64, threads: usize) -> Result<Self> {
        if replicates < 2 {
            return Err(invalid("need at least two replicates"));
        }
        if test_functions.is_empty() {
            return Err(invalid("need at least one test function"));
        }
        for f in &test_functions {
            for x in [0.0, 0.5, 1.0] {
                if !f.value(x).is_finite() {
                    return Err(invalid(format!("{} is not finite on [0, 1]", f.name())));
                }
            }
        }
        Ok(Self {
            params,
            test_functions,
            replicates,
            seed,
            threads,
        })
    }
}

/// How `tr f(A)` is evaluated for a list of functions.
enum Plan {
    /// Monomial coefficients; traces come from banded powers of `A`.
    Powers(Vec<Vec<f64>>, usize),
    Spectrum,
}

fn plan(fs: &[TestFunction]) -> Plan {
    let coeffs: Option<Vec<Vec<f64>>> = fs.iter().map(TestFunction::polynomial_coeffs).collect();
    match coeffs {
        Some(c) => {
            let deg = c.iter().map(|v| v.len() - 1).max().unwrap_or(0);
            Plan::Powers(c, deg)
        }
        None => Plan::Spectrum,
    }
}

fn linear_statistics(plan: &Plan, fs: &[TestFunction], a: &SymTridiagonal) -> Result<Vec<f64>> {
    match plan {
        Plan::Powers(coeffs, deg) => {
            let t = a.power_traces(*deg);
            Ok(coeffs.iter().map(|c| c.iter().zip(&t).map(|(x, y)| x * y).sum()).collect())
        }
        Plan::Spectrum => {
            let s = a.eigenvalues()?;
            Ok(fs
                .iter()
                .map(|f| pairwise_sum(&s.values.iter().map(|&l| f.value(l)).collect::<Vec<_>>()))
                .collect())
        }
    }
}

/// Per-function summary of a fluctuation run.
#[derive(Debug, Clone, Serialize)]
pub struct StatisticSummary {
    pub name: String,
    /// Mean of `tr f(A)` before centering.
    pub mean: f64,
    pub variance: f64,
    /// Standard error of `variance`.
    pub variance_se: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub ks_distance: f64,
    pub theory_variance: Option<f64>,
    pub relative_error: Option<f64>,
    pub outside_clt_hypotheses: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunResult {
    pub params: EnsembleParams,
    pub functions: Vec<String>,
    pub replicates: usize,
    pub seed: u64,
    pub threads: usize,
    pub extremal: bool,
    pub summaries: Vec<StatisticSummary>,
    pub covariance: Vec<Vec<f64>>,
    pub covariance_se: Vec<Vec<f64>>,
    pub theory_covariance: Option<Vec<Vec<f64>>>,
    /// `samples[f][i] = tr f(A_i) - mean`.
    #[serde(skip)]
    pub samples: Vec<Vec<f64>>,
}

impl RunResult {
    /// One row per replicate, one column per test function.
    pub fn write_samples_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["replicate".to_string()];
        header.extend(self.functions.iter().cloned());
        w.write_record(&header)?;
        for i in 0..self.replicates {
            let mut row = vec![i.to_string()];
            row.extend(self.samples.iter().map(|s| format!("{:e}", s[i])));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn summary(&self, name: &str) -> Option<&StatisticSummary> {
        self.summaries.iter().find(|s| s.name == name)
    }
}

/// `α Σ_{k,l} f_k g_l C[k][l]` for polynomial `f`, `g` given by monomial
/// coefficients.
fn polynomial_theory_covariance(coeffs: &[Vec<f64>], beta: f64, support: &SupportInterval) -> Result<Vec<Vec<f64>>> {
    let deg = coeffs.iter().map(|c| c.len() - 1).max().unwrap_or(0);
    let m = coeffs.len();
    if deg == 0 {
        return Ok(vec![vec![0.0; m]; m]);
    }
    let c = theory_covariance(deg, beta, support)?;
    Ok((0..m)
        .map(|i| {
            (0..m)
                .map(|j| {
                    let mut s = 0.0;
                    for k in 1..coeffs[i].len() {
                        for l in 1..coeffs[j].len() {
                            s += coeffs[i][k] * coeffs[j][l] * c.get(k, l);
                        }
                    }
                    s
                })
                .collect()
        })
        .collect())
}

/// Chebyshev form `α Σ_n n fhat[n] ghat[n]`, for non-polynomial functions.
fn chebyshev_theory_covariance(fs: &[TestFunction], beta: f64, support: &SupportInterval) -> Result<Vec<Vec<f64>>> {
    let alpha = 2.0 / beta;
    let coeffs = fs
        .iter()
        .map(|f| crate::spectral::cheb_coeffs(f, THEORY_TRUNCATION, support, DEFAULT_NODES))
        .collect::<Result<Vec<_>>>()?;
    Ok(coeffs
        .iter()
        .map(|a| {
            coeffs
                .iter()
                .map(|b| alpha * (1..=THEORY_TRUNCATION).map(|n| n as f64 * a.fhat[n] * b.fhat[n]).sum::<f64>())
                .collect()
        })
        .collect())
}

pub fn run_fluctuations(config: &ExperimentConfig) -> Result<RunResult> {
    let fs = &config.test_functions;
    let pl = plan(fs);
    let params = config.params;
    let rows = run_replicates(config.seed, config.replicates, config.threads, |_, rng| {
        let a = assemble_gram(&sample_factor(&params, rng)?);
        linear_statistics(&pl, fs, &a)
    })?;
    let nf = fs.len();
    let m = config.replicates;
    let raw: Vec<Vec<f64>> = (0..nf).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
    let means: Vec<f64> = raw.iter().map(|x| pairwise_sum(x) / m as f64).collect();
    let samples: Vec<Vec<f64>> = raw.iter().zip(&means).map(|(x, mu)| x.iter().map(|v| v - mu).collect()).collect();

    let mut covariance = vec![vec![0.0; nf]; nf];
    let mut covariance_se = vec![vec![0.0; nf]; nf];
    for i in 0..nf {
        for j in i..nf {
            let prods: Vec<f64> = samples[i].iter().zip(&samples[j]).map(|(x, y)| x * y).collect();
            let pm = sample_moments(&prods);
            let cov = pairwise_sum(&prods) / (m as f64 - 1.0);
            let se = (pm.central2 / m as f64).sqrt();
            covariance[i][j] = cov;
            covariance[j][i] = cov;
            covariance_se[i][j] = se;
            covariance_se[j][i] = se;
        }
    }

    let asym = params.asymptotic();
    let support = if asym.extremal { None } else { Some(asym.support()?) };
    let theory_var: Vec<Option<f64>> = match &support {
        Some(s) => fs
            .iter()
            .map(|f| variance_functionals(f, THEORY_TRUNCATION, params.beta, s, DEFAULT_NODES).map(|v| Some(v.sigma_sq)))
            .collect::<Result<_>>()?,
        None => vec![None; nf],
    };
    let theory_covariance = match (&support, &pl) {
        (Some(s), Plan::Powers(c, _)) => Some(polynomial_theory_covariance(c, params.beta, s)?),
        (Some(s), Plan::Spectrum) => Some(chebyshev_theory_covariance(fs, params.beta, s)?),
        (None, _) => None,
    };

    let summaries = fs
        .iter()
        .enumerate()
        .map(|(j, f)| {
            let mo = sample_moments(&samples[j]);
            let variance_se = ((mo.central4 - mo.central2 * mo.central2).max(0.0) / m as f64).sqrt();
            StatisticSummary {
                name: f.name().to_string(),
                mean: means[j],
                variance: mo.variance,
                variance_se,
                skewness: mo.skewness,
                excess_kurtosis: mo.excess_kurtosis,
                ks_distance: ks_normal(&samples[j], 0.0, mo.variance.sqrt()),
                theory_variance: theory_var[j],
                relative_error: theory_var[j].filter(|t| *t != 0.0).map(|t| (mo.variance - t) / t),
                outside_clt_hypotheses: f.outside_clt_hypotheses(),
            }
        })
        .collect();

    Ok(RunResult {
        params,
        functions: fs.iter().map(|f| f.name().to_string()).collect(),
        replicates: m,
        seed: config.seed,
        threads: config.threads,
        extremal: asym.extremal,
        summaries,
        covariance,
        covariance_se,
        theory_covariance,
        samples,
    })
}

/// Growth of `n1`, `n2` with `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "regime", rename_all = "lowercase")]
pub enum LlnRegime {
    /// `n1 = n + offset1`, `n2 = n + offset2`.
    Sublinear { offset1: f64, offset2: f64 },
    /// `n1 = p n`, `n2 = q n`.
    Proportional { p: f64, q: f64 },
    /// `n1 = c1 n²`, `n2 = c2 n²`.
    Superlinear { c1: f64, c2: f64 },
}

impl LlnRegime {
    pub fn params(&self, n: usize, beta: f64) -> Result<EnsembleParams> {
        let nf = n as f64;
        match *self {
            LlnRegime::Sublinear { offset1, offset2 } => EnsembleParams::new(n, beta, nf + offset1, nf + offset2),
            LlnRegime::Proportional { p, q } => EnsembleParams::proportional(n, beta, p, q),
            LlnRegime::Superlinear { c1, c2 } => EnsembleParams::new(n, beta, c1 * nf * nf, c2 * nf * nf),
        }
    }

    /// Limit of `n⁻¹ Σ f(λᵢ)`. In the superlinear regime the spectrum
    /// collapses to the point `c1 / (c1 + c2)`.
    pub fn target(&self, f: &TestFunction, beta: f64) -> Result<f64> {
        match *self {
            LlnRegime::Sublinear { .. } => Ok(angle_mean(DEFAULT_NODES, |t| f.value(0.5 * (1.0 + t.cos())))),
            LlnRegime::Proportional { p, q } => {
                let asym = AsymptoticParams::from_pq(p, q, 2.0 / beta);
                integrate_mu(f, &asym, DEFAULT_NODES)
            }
            LlnRegime::Superlinear { c1, c2 } => Ok(f.value(c1 / (c1 + c2))),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LlnRow {
    pub n: usize,
    /// Mean over replicates of `|n⁻¹ Σ f(λᵢ) - target|`.
    pub distance: f64,
    pub distance_se: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LlnTable {
    pub regime: LlnRegime,
    pub function: String,
    pub target: f64,
    pub rows: Vec<LlnRow>,
}

impl LlnTable {
    /// Number of size steps where the distance failed to shrink.
    pub fn violations(&self) -> usize {
        self.rows.windows(2).filter(|w| w[1].distance >= w[0].distance).count()
    }
}

pub fn lln_check(regime: LlnRegime, sizes: &[usize], f: &TestFunction, beta: f64, replicates: usize, seed: u64, threads: usize) -> Result<LlnTable> {
    if sizes.is_empty() || replicates == 0 {
        return Err(invalid("need at least one size and one replicate"));
    }
    let target = regime.target(f, beta)?;
    let pl = plan(std::slice::from_ref(f));
    let mut rows = Vec::with_capacity(sizes.len());
    for (step, &n) in sizes.iter().enumerate() {
        let params = regime.params(n, beta)?;
        // Disjoint seeds per size keep the rows independent.
        let run_seed = seed.wrapping_add((step as u64) << 32);
        let d = run_replicates(run_seed, replicates, threads, |_, rng| {
            let a = assemble_gram(&sample_factor(&params, rng)?);
            let v = linear_statistics(&pl, std::slice::from_ref(f), &a)?[0];
            Ok((v / n as f64 - target).abs())
        })?;
        let mo = sample_moments(&d);
        rows.push(LlnRow {
            n,
            distance: mo.mean,
            distance_se: (mo.variance / replicates as f64).sqrt(),
        });
    }
    Ok(LlnTable {
        regime,
        function: f.name().to_string(),
        target,
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrotterReport {
    pub n: usize,
    /// Mean of `‖BBᵀ - B∞B∞ᵀ‖²_F`.
    pub gap: f64,
    pub gap_se: f64,
    pub gap_over_log_n: f64,
}

pub fn trotter_gap(params: &EnsembleParams, replicates: usize, seed: u64, threads: usize) -> Result<TrotterReport> {
    if replicates == 0 {
        return Err(invalid("need at least one replicate"));
    }
    let det = assemble_gram(&deterministic_factor(params)?);
    let d = run_replicates(seed, replicates, threads, |_, rng| {
        let a = assemble_gram(&sample_factor(params, rng)?);
        Ok(frobenius_gap(&a, &det))
    })?;
    let mo = sample_moments(&d);
    let ln = (params.n as f64).ln();
    Ok(TrotterReport {
        n: params.n,
        gap: mo.mean,
        gap_se: (mo.variance / replicates as f64).sqrt(),
        gap_over_log_n: mo.mean / ln,
    })
}

/// `‖A - B‖²_F` for tridiagonals of equal size.
pub fn frobenius_gap(a: &SymTridiagonal, b: &SymTridiagonal) -> f64 {
    let dd: f64 = a.diag.iter().zip(&b.diag).map(|(x, y)| (x - y).powi(2)).sum();
    let oo: f64 = a.off.iter().zip(&b.off).map(|(x, y)| (x - y).powi(2)).sum();
    dd + 2.0 * oo
}

#[derive(Debug, Clone, Serialize)]
pub struct DeviationReport {
    pub k: usize,
    pub alpha: f64,
    pub a: f64,
    pub b: f64,
    /// Extrapolated limit of `(1/n) E tr Aᵏ`.
    pub eta0: f64,
    /// `∫ xᵏ dμ` by quadrature.
    pub mu_moment: f64,
    /// Extrapolated `n((1/n) E tr Aᵏ - η₀)`.
    pub deviation: f64,
    /// `(α - 1) ∫ xᵏ dν`.
    pub predicted: f64,
    pub residual: f64,
    /// `(n, n((1/n) E tr Aᵏ - ∫xᵏdμ))` at each grid size.
    pub finite_n: Vec<(usize, f64)>,
    pub grid: Vec<usize>,
}

/// Exact-rational mean traces against the signed measure `ν`.
pub fn deviation_check(k: usize, params: &RationalParams, grid: Option<&[usize]>) -> Result<DeviationReport> {
    if k == 0 || k > 3 {
        return Err(invalid(format!("deviation check supports 1 <= k <= 3, got {k}")));
    }
    let default = default_grid();
    let grid = grid.unwrap_or(&default);
    let (alpha, a, b) = params.to_f64();
    let asym = AsymptoticParams::from_ab(a, b, alpha)?;
    let support = asym.support()?;
    let f = TestFunction::monomial(k)?;
    let mu_moment = integrate_mu(&f, &asym, DEFAULT_NODES)?;
    let predicted = (alpha - 1.0) * integrate_nu(&f, &support, DEFAULT_NODES)?;
    let est = eta_extract(k, params, grid)?;
    let finite_n = grid
        .iter()
        .zip(&est.values)
        .map(|(&n, v)| (n, n as f64 * (to_f64(v) - mu_moment)))
        .collect();
    Ok(DeviationReport {
        k,
        alpha,
        a,
        b,
        eta0: est.eta0,
        mu_moment,
        deviation: est.eta1,
        predicted,
        residual: est.residual1,
        finite_n,
        grid: grid.to_vec(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExtremalReport {
    pub n: usize,
    pub beta: f64,
    pub replicates: usize,
    /// Central moments of `tr A`.
    pub second: f64,
    pub fourth: f64,
    pub second_se: f64,
    pub fourth_se: f64,
    /// `1/(8β)` and `3/(64β²)`.
    pub expected_second: f64,
    pub expected_fourth: f64,
    /// `fourth / second²`.
    pub kurtosis: f64,
}

/// Moments of `tr A` for `n1 = n2 = n`.
pub fn extremal_moments(n: usize, beta: f64, replicates: usize, seed: u64, threads: usize) -> Result<ExtremalReport> {
    let params = EnsembleParams::new(n, beta, n as f64, n as f64)?;
    if !params.asymptotic().extremal {
        return Err(invalid("extremal moments need p = q = 1"));
    }
    if replicates < 2 {
        return Err(invalid("need at least two replicates"));
    }
    let t = run_replicates(seed, replicates, threads, |_, rng| Ok(assemble_gram(&sample_factor(&params, rng)?).trace()))?;
    let m = replicates as f64;
    let mean = pairwise_sum(&t) / m;
    let cm = |k: i32| pairwise_sum(&t.iter().map(|x| (x - mean).powi(k)).collect::<Vec<_>>()) / m;
    let (second, fourth, eighth) = (cm(2), cm(4), cm(8));
    Ok(ExtremalReport {
        n,
        beta,
        replicates,
        second,
        fourth,
        second_se: ((fourth - second * second).max(0.0) / m).sqrt(),
        fourth_se: ((eighth - fourth * fourth).max(0.0) / m).sqrt(),
        expected_second: 1.0 / (8.0 * beta),
        expected_fourth: 3.0 / (64.0 * beta * beta),
        kurtosis: fourth / (second * second),
    })
}
