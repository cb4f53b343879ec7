use std::fs::File;

use serde_json::{json, Value};

use betajacobi::concentration::{beta_poincare_ratio, coupling_gap, jacobi_poincare_check};
use betajacobi::covariance::{self, covariance_matrix, laplace_closed, laplace_partial_sum, theory_covariance};
use betajacobi::eig::{bisection_eigenvalues, eigenvalues, DEFAULT_TOL};
use betajacobi::experiments::{deviation_check, extremal_moments, lln_check, run_fluctuations, LlnRegime};
use betajacobi::model::{assemble_gram, replicate_stream, sample_factor};
use betajacobi::paths::{default_grid, egf_partial_sum, enumerate_bridges, eta_extract, p_poly, RationalParams};
use betajacobi::spectral::{
    self, alpha_zero_residual, cheb_coeffs, density_mass_integral, integrate_mu, integrate_nu, stieltjes_pair, variance_functionals,
};
use betajacobi::{AsymptoticParams, ExperimentConfig, TestFunction};

use crate::opts::Opts;
use crate::{CliError, Outcome};

/// Absolute tolerance for `cov --verify`.
const COV_VERIFY_TOL: f64 = 1e-8;

pub fn run(name: &str, o: &Opts) -> Result<Outcome, CliError> {
    match name {
        "sample" => sample(o),
        "eig" => eig(o),
        "spectrum" => spectrum(o),
        "cov" => cov(o),
        "fluct" => fluct(o),
        "lln" => lln(o),
        "expect" => expect(o),
        "extremal" => extremal(o),
        "concentration" => concentration(o),
        "verify-all" => verify_all(o),
        other => Err(CliError::Validation(format!("unknown command {other}"))),
    }
}

/// Writes each command's defaults into `o`, so the echoed config is complete.
pub fn fill_defaults(name: &str, o: &mut Opts) {
    fn set<T>(v: &mut Option<T>, d: T) {
        if v.is_none() {
            *v = Some(d);
        }
    }
    set(&mut o.seed, 0);
    if o.alpha.is_none() {
        set(&mut o.beta, 2.0);
    }
    let x = || "x".to_string();
    match name {
        "eig" => set(&mut o.method, "ql".into()),
        "spectrum" => {
            set(&mut o.nodes, spectral::DEFAULT_NODES);
            set(&mut o.k_max, 32);
            set(&mut o.funcs, x());
        }
        "cov" => {
            set(&mut o.nodes, covariance::DEFAULT_NODES);
            set(&mut o.k_max, 8);
        }
        "fluct" => {
            set(&mut o.reps, 1000);
            set(&mut o.funcs, x());
        }
        "lln" => {
            set(&mut o.regime, "proportional".into());
            set(&mut o.sizes, "50,100,200,400".into());
            set(&mut o.reps, 200);
            set(&mut o.funcs, x());
            match o.regime.as_deref() {
                Some("sublinear") => {
                    set(&mut o.o1, 3.0);
                    set(&mut o.o2, 3.0);
                }
                Some("superlinear") => {
                    set(&mut o.c1, 1.0);
                    set(&mut o.c2, 1.0);
                }
                _ => {
                    set(&mut o.p, 2.0);
                    set(&mut o.q, 2.0);
                }
            }
        }
        "expect" => set(&mut o.k, 2),
        "extremal" => set(&mut o.reps, 2000),
        "concentration" => {
            set(&mut o.p, 2.0);
            set(&mut o.q, 2.0);
            set(&mut o.funcs, x());
            set(&mut o.reps, 1000);
        }
        _ => {}
    }
}

fn json_of<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("plain data serializes")
}

fn sample(o: &Opts) -> Result<Outcome, CliError> {
    let params = o.ensemble()?;
    let mut rng = replicate_stream(o.seed(), 0);
    let factor = sample_factor(&params, &mut rng)?;
    if let Some(path) = &o.csv {
        factor.write_csv(File::create(path).map_err(|e| CliError::Core(e.into()))?)?;
    }
    let a = assemble_gram(&factor);
    let s = a.eigenvalues()?;
    Ok(Outcome::ok(
        json!({
            "params": params,
            "raw_c": factor.raw_c(),
            "raw_cp": factor.raw_cp(),
            "diag": factor.diag(),
            "sub": factor.sub(),
            "trace": a.trace(),
            "eigenvalues": s.values,
        }),
        Value::Null,
    ))
}

fn eig(o: &Opts) -> Result<Outcome, CliError> {
    let params = o.ensemble()?;
    let mut rng = replicate_stream(o.seed(), 0);
    let a = assemble_gram(&sample_factor(&params, &mut rng)?);
    let method = o.method.as_deref().unwrap_or("ql");
    let (values, check) = match method {
        "ql" => (eigenvalues(&a, DEFAULT_TOL)?.values, None),
        "bisection" => (bisection_eigenvalues(&a, DEFAULT_TOL), None),
        "both" => {
            let ql = eigenvalues(&a, DEFAULT_TOL)?.values;
            let bis = bisection_eigenvalues(&a, DEFAULT_TOL);
            let diff = ql.iter().zip(&bis).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            (ql, Some(diff))
        }
        m => return Err(CliError::Validation(format!("--method must be ql, bisection or both, got {m}"))),
    };
    let tr: f64 = values.iter().sum();
    let fr: f64 = values.iter().map(|l| l * l).sum();
    Ok(Outcome::ok(
        json!({
            "params": params,
            "method": method,
            "eigenvalues": values,
            "trace_error": (tr - a.trace()).abs(),
            "frobenius_error": (fr - a.frobenius_sq()).abs(),
            "max_method_difference": check,
        }),
        Value::Null,
    ))
}

fn functions(o: &Opts, asym: Option<&AsymptoticParams>) -> Result<Vec<TestFunction>, CliError> {
    let support = match asym {
        Some(a) if !a.extremal => Some(a.support()?),
        _ => None,
    };
    Ok(TestFunction::parse_list(o.funcs.as_deref().unwrap_or("x"), support)?)
}

fn spectrum(o: &Opts) -> Result<Outcome, CliError> {
    let asym = o.asymptotic()?;
    let s = asym.support()?;
    let nodes = o.nodes.unwrap_or(spectral::DEFAULT_NODES);
    let beta = o.beta()?;
    let truncation = o.k_max.unwrap_or(32);
    let mut rows = Vec::new();
    for f in functions(o, Some(&asym))? {
        let ch = cheb_coeffs(&f, truncation, &s, nodes)?;
        let v = variance_functionals(&f, truncation, beta, &s, nodes)?;
        rows.push(json!({
            "function": f.name(),
            "integral_mu": integrate_mu(&f, &asym, nodes)?,
            "integral_nu": integrate_nu(&f, &s, nodes)?,
            "chebyshev": ch.fhat,
            "sigma_sq": v.sigma_sq,
            "tau_sq": v.tau_sq,
            "tail_estimate": v.tail_estimate,
            "slow_decay": v.slow_decay,
            "outside_clt_hypotheses": f.outside_clt_hypotheses(),
        }));
    }
    let stieltjes = match o.x {
        Some(x) => {
            let (m0, m1) = stieltjes_pair(x, &asym)?;
            json!({ "x": x, "m0": m0, "m1": m1 })
        }
        None => Value::Null,
    };
    let one = TestFunction::constant(1.0);
    Ok(Outcome::ok(
        json!({
            "params": asym,
            "support": s,
            "mu_mass": integrate_mu(&one, &asym, nodes)?,
            "nu_mass": integrate_nu(&one, &s, nodes)?,
            "density_mass_integral": density_mass_integral(&asym, nodes)?,
            "functions": rows,
            "stieltjes": stieltjes,
        }),
        json!({ "spectral": nodes, "chebyshev_truncation": truncation }),
    ))
}

fn cov(o: &Opts) -> Result<Outcome, CliError> {
    let asym = o.asymptotic()?;
    let s = asym.support()?;
    let k_max = o.k_max.unwrap_or(8);
    let nodes = o.nodes.unwrap_or(covariance::DEFAULT_NODES);
    let c = covariance_matrix(k_max, &asym, nodes)?;
    let mut result = json!({ "params": asym, "support": s, "covariance": c });
    let mut passed = true;
    if o.verify {
        let t = theory_covariance(k_max, o.beta()?, &s)?;
        let diff = c.max_abs_diff(&t);
        passed = diff <= COV_VERIFY_TOL;
        eprintln!("max |C - alpha L Lambda L^T| = {diff:e}");
        result["verify"] = json!({ "theory": t, "max_abs_diff": diff, "tolerance": COV_VERIFY_TOL, "passed": passed });
    }
    Ok(Outcome {
        result,
        nodes: json!({ "covariance": c.quadrature_nodes }),
        passed,
    })
}

fn fluct(o: &Opts) -> Result<Outcome, CliError> {
    let params = o.ensemble()?;
    let fs = functions(o, Some(&params.asymptotic()))?;
    let cfg = ExperimentConfig::new(params, fs, o.reps.unwrap_or(1000), o.seed(), o.threads())?;
    let r = run_fluctuations(&cfg)?;
    if let Some(path) = &o.csv {
        r.write_samples_csv(File::create(path).map_err(|e| CliError::Core(e.into()))?)?;
    }
    Ok(Outcome::ok(
        json_of(&r),
        json!({ "spectral": spectral::DEFAULT_NODES, "chebyshev_truncation": betajacobi::experiments::THEORY_TRUNCATION }),
    ))
}

fn lln(o: &Opts) -> Result<Outcome, CliError> {
    let regime = match o.regime.as_deref().unwrap_or("proportional") {
        "sublinear" => LlnRegime::Sublinear {
            offset1: o.o1.unwrap_or(3.0),
            offset2: o.o2.unwrap_or(3.0),
        },
        "proportional" => LlnRegime::Proportional {
            p: o.p.unwrap_or(2.0),
            q: o.q.unwrap_or(2.0),
        },
        "superlinear" => LlnRegime::Superlinear {
            c1: o.c1.unwrap_or(1.0),
            c2: o.c2.unwrap_or(1.0),
        },
        r => return Err(CliError::Validation(format!("unknown regime {r}"))),
    };
    let sizes = o.sizes()?.unwrap_or_else(|| vec![50, 100, 200, 400]);
    let beta = o.beta()?;
    let fs = functions(o, None)?;
    let tables = fs
        .iter()
        .enumerate()
        .map(|(i, f)| lln_check(regime, &sizes, f, beta, o.reps.unwrap_or(200), o.seed().wrapping_add(i as u64), o.threads()))
        .collect::<Result<Vec<_>, _>>()?;
    let with_violations: Vec<Value> = tables
        .iter()
        .map(|t| {
            let mut v = json_of(t);
            v["violations"] = json!(t.violations());
            v
        })
        .collect();
    Ok(Outcome::ok(json!({ "beta": beta, "tables": with_violations }), json!({ "spectral": spectral::DEFAULT_NODES })))
}

fn expect(o: &Opts) -> Result<Outcome, CliError> {
    let params = o.rational_params()?;
    let k = o.k.unwrap_or(2);
    let grid = o.sizes()?;
    let r = deviation_check(k, &params, grid.as_deref())?;
    Ok(Outcome::ok(json_of(&r), json!({ "spectral": spectral::DEFAULT_NODES })))
}

fn extremal(o: &Opts) -> Result<Outcome, CliError> {
    let n = Opts::require(&o.n, "n")?;
    let r = extremal_moments(n, o.beta()?, o.reps.unwrap_or(2000), o.seed(), o.threads())?;
    Ok(Outcome::ok(json_of(&r), Value::Null))
}

fn concentration(o: &Opts) -> Result<Outcome, CliError> {
    let (p, q) = (o.p.unwrap_or(2.0), o.q.unwrap_or(2.0));
    let fs = functions(o, None)?;
    let mut beta_rows = Vec::new();
    for f in &fs {
        let plain = beta_poincare_ratio(p, q, f, false)?;
        let weighted = beta_poincare_ratio(p, q, f, true)?;
        beta_rows.push(json!({ "function": f.name(), "unweighted": plain, "weighted": weighted }));
    }
    let mut result = json!({ "p": p, "q": q, "beta_poincare": beta_rows });
    if let Some(n) = o.n {
        let params = betajacobi::EnsembleParams::proportional(n, o.beta()?, p, q)?;
        let mut rows = Vec::new();
        for f in &fs {
            let r = jacobi_poincare_check(&params, f, o.reps.unwrap_or(1000), o.seed(), o.threads())?;
            rows.push(json!({ "function": f.name(), "report": r, "margin_in_se": r.margin_in_se() }));
        }
        result["ensemble"] = json!(rows);
        result["coupling"] = json_of(&coupling_gap(n as f64, p, q)?);
    }
    Ok(Outcome::ok(
        result,
        json!({
            "beta_rule": betajacobi::concentration::BETA_RULE_NODES,
            "coupling": betajacobi::concentration::COUPLING_NODES,
        }),
    ))
}

struct Check {
    name: &'static str,
    passed: bool,
    detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, detail }
}

fn binomial(n: u64, k: u64) -> u64 {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

/// Deterministic checks that finish in seconds.
fn verify_all(_o: &Opts) -> Result<Outcome, CliError> {
    let mut checks = Vec::new();

    let counts_ok = (1..=8).all(|k| enumerate_bridges(k).map(|s| s.len() as u64 == binomial(2 * k as u64, k as u64)).unwrap_or(false));
    let sum_ok = (1..=8).all(|k| p_poly(k).coefficient_sum() == binomial(2 * k as u64, k as u64).into());
    checks.push(check("bridge_counts", counts_ok && sum_ok, "|A_2k| = C(2k,k), k <= 8".into()));

    let (x, y, t) = (0.3f64, 0.5f64, 0.7f64);
    let z = 2.0 * x * y * t;
    let i0: f64 = (0..30).map(|m| (0.5 * z).powi(2 * m) / (1..=m).map(|i| i as f64).product::<f64>().powi(2)).sum();
    let egf_err = (egf_partial_sum(x, y, t, 12) - (t * (x * x + y * y)).exp() * i0).abs();
    checks.push(check("egf_identity", egf_err <= 1e-10, format!("error {egf_err:e}")));

    let mut cov_err: f64 = 0.0;
    for alpha in [0.5, 1.0, 2.0] {
        let asym = AsymptoticParams::from_ab(0.25, 0.5, alpha)?;
        let s = asym.support()?;
        let c = covariance_matrix(8, &asym, covariance::DEFAULT_NODES)?;
        cov_err = cov_err.max(c.max_abs_diff(&theory_covariance(8, 2.0 / alpha, &s)?));
    }
    checks.push(check("covariance_diagonalization", cov_err <= COV_VERIFY_TOL, format!("max diff {cov_err:e}")));

    let asym = AsymptoticParams::from_ab(0.25, 0.5, 1.0)?;
    let s = asym.support()?;
    let (cf, tf) = laplace_closed(2.0, 3.0, &s, 2.0)?;
    let cov40 = covariance_matrix(40, &asym, covariance::DEFAULT_NODES)?;
    let ps = laplace_partial_sum(40, 2.0, 3.0, &cov40)?;
    checks.push(check(
        "laplace_forms",
        (cf - tf).abs() <= 1e-12 && (ps - cf).abs() <= 1e-6,
        format!("C_form {cf}, T_form {tf}, K=40 partial sum {ps}"),
    ));

    let half = RationalParams::from_ratios((1, 2), (1, 4), (1, 2))?;
    let dev = deviation_check(2, &half, None)?;
    let rel = (dev.deviation / (-3.0 / 128.0) - 1.0).abs();
    checks.push(check("mean_trace_deviation", rel <= 0.01, format!("{} vs -3/128", dev.deviation)));

    let grid = default_grid();
    let eta = |num, den| -> Result<f64, CliError> { Ok(eta_extract(2, &RationalParams::from_ratios((num, den), (1, 4), (1, 2))?, &grid)?.eta1) };
    let (e1, e2, eh) = (eta(1, 1)?, eta(2, 1)?, eta(1, 2)?);
    checks.push(check(
        "palindromy",
        e1.abs() <= 1e-6 && (e2 + 2.0 * eh).abs() <= 1e-3 * (2.0 * eh).abs(),
        format!("eta(1,1) {e1:e}, eta(1,2) {e2}, eta(1,1/2) {eh}"),
    ));

    let zero = AsymptoticParams::from_ab(0.25, 0.5, 0.0)?;
    let r: Vec<f64> = [100, 200, 400].iter().map(|&n| alpha_zero_residual(n, 2.0, &zero)).collect::<Result<_, _>>()?;
    let ratios = [r[0] / r[1], r[1] / r[2]];
    checks.push(check(
        "alpha_zero_model",
        ratios.iter().all(|q| (2.0..=8.0).contains(q)),
        format!("doubling ratios {:.3} {:.3}", ratios[0], ratios[1]),
    ));

    let one = TestFunction::constant(1.0);
    let mass = (integrate_mu(&one, &asym, 2048)? - 1.0).abs();
    let nu = integrate_nu(&one, &s, 2048)?.abs();
    let dens = (density_mass_integral(&asym, 2048)? - 2.0 * std::f64::consts::PI * 0.25).abs();
    checks.push(check("measures", mass <= 1e-10 && nu <= 1e-10 && dens <= 1e-8, format!("{mass:e} {nu:e} {dens:e}")));

    let lin = TestFunction::monomial(1)?;
    let mut worst: f64 = 0.0;
    for p in [0.5, 1.0, 2.0, 8.0] {
        for q in [0.5, 1.0, 2.0, 8.0] {
            worst = worst.max((beta_poincare_ratio(p, q, &lin, true)?.ratio - 1.0).abs());
        }
    }
    checks.push(check("beta_poincare_equality", worst <= 1e-6, format!("max |ratio - 1| {worst:e}")));

    let scaled: Vec<f64> = [1e2, 1e3, 1e4].iter().map(|&n| coupling_gap(n, 1.0, 1.0).map(|c| c.scaled)).collect::<Result<_, _>>()?;
    let (lo, hi) = scaled.iter().fold((f64::MAX, f64::MIN), |(l, h), v| (l.min(*v), h.max(*v)));
    checks.push(check("coupling_rate", hi / lo <= 2.0, format!("n^2 gap {scaled:?}")));

    let passed = checks.iter().all(|c| c.passed);
    for c in &checks {
        eprintln!("[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    let rows: Vec<Value> = checks.iter().map(|c| json!({ "name": c.name, "passed": c.passed, "detail": c.detail })).collect();
    Ok(Outcome {
        result: json!({ "checks": rows }),
        nodes: json!({ "covariance": 2 * covariance::DEFAULT_NODES, "spectral": 2048 }),
        passed,
    })
}
