use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};

use betajacobi::paths::{parse_rational, to_f64, RationalParams};
use betajacobi::{AsymptoticParams, EnsembleParams};

use crate::CliError;

/// Flags shared by every subcommand. A `--config` JSON file with the same
/// keys fills in whatever is not given on the command line.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Opts {
    /// Matrix size.
    #[arg(long)]
    pub n: Option<usize>,
    /// Dyson index.
    #[arg(long)]
    pub beta: Option<f64>,
    /// `n1 = p n`.
    #[arg(long)]
    pub p: Option<f64>,
    /// `n2 = q n`.
    #[arg(long)]
    pub q: Option<f64>,
    /// Explicit first Beta parameter, instead of `p`.
    #[arg(long)]
    pub n1: Option<f64>,
    #[arg(long)]
    pub n2: Option<f64>,
    /// `1/(p+q)`; accepts fractions like `1/4`.
    #[arg(long)]
    pub a: Option<String>,
    /// `p/(p+q)`.
    #[arg(long)]
    pub b: Option<String>,
    /// `2/β`; used by `expect`, accepts fractions.
    #[arg(long)]
    pub alpha: Option<String>,
    /// Largest covariance index.
    #[arg(long = "K")]
    #[serde(rename = "K")]
    pub k_max: Option<usize>,
    /// Power of the mean trace in `expect`.
    #[arg(long)]
    pub k: Option<usize>,
    /// Test functions, e.g. `gamma1..gamma4,x,exp`.
    #[arg(long)]
    pub funcs: Option<String>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Quadrature node count.
    #[arg(long)]
    pub nodes: Option<usize>,
    /// `sublinear`, `proportional` or `superlinear`.
    #[arg(long)]
    pub regime: Option<String>,
    /// Comma-separated matrix sizes.
    #[arg(long)]
    pub sizes: Option<String>,
    /// Offsets for the sublinear regime, `n1 = n + o1`.
    #[arg(long)]
    pub o1: Option<f64>,
    #[arg(long)]
    pub o2: Option<f64>,
    /// Superlinear coefficients, `n1 = c1 n²`.
    #[arg(long)]
    pub c1: Option<f64>,
    #[arg(long)]
    pub c2: Option<f64>,
    /// `ql`, `bisection` or `both`.
    #[arg(long)]
    pub method: Option<String>,
    /// Extra argument of the Stieltjes transforms.
    #[arg(long)]
    pub x: Option<f64>,
    /// Check the computed object against its closed form.
    #[arg(long)]
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub verify: bool,
    /// JSON summary path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// CSV path for raw samples or the sampled factor.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Worker threads, 0 = all cores.
    #[arg(long, env = "BETAJACOBI_THREADS")]
    pub threads: Option<usize>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

macro_rules! merge_fields {
    ($dst:ident, $src:ident; $($f:ident),*) => {
        $( if $dst.$f.is_none() { $dst.$f = $src.$f; } )*
    };
}

impl Opts {
    /// Fills unset fields from the config file, if any.
    pub fn resolve(mut self) -> Result<Self, CliError> {
        let Some(path) = self.config.clone() else {
            return Ok(self);
        };
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        let file: Opts = serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        merge_fields!(self, file; n, beta, p, q, n1, n2, a, b, alpha, k_max, k, funcs, reps, seed, nodes,
            regime, sizes, o1, o2, c1, c2, method, x, out, csv, threads);
        self.verify |= file.verify;
        Ok(self)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn threads(&self) -> usize {
        self.threads.unwrap_or(0)
    }

    pub fn beta(&self) -> Result<f64, CliError> {
        match (self.beta, &self.alpha) {
            (Some(b), _) => Ok(b),
            (None, Some(a)) => Ok(2.0 / rational(a)?),
            (None, None) => Ok(2.0),
        }
    }

    pub fn require<T: Clone>(v: &Option<T>, name: &str) -> Result<T, CliError> {
        v.clone().ok_or_else(|| CliError::Validation(format!("--{name} is required")))
    }

    pub fn ensemble(&self) -> Result<EnsembleParams, CliError> {
        let n = Self::require(&self.n, "n")?;
        let beta = self.beta()?;
        let r = match (self.n1, self.n2, self.p, self.q, &self.a, &self.b) {
            (Some(n1), Some(n2), ..) => EnsembleParams::new(n, beta, n1, n2),
            (_, _, Some(p), Some(q), ..) => EnsembleParams::proportional(n, beta, p, q),
            (.., Some(a), Some(b)) => EnsembleParams::from_ab(n, beta, rational(a)?, rational(b)?),
            _ => return Err(CliError::Validation("give --n1/--n2, --p/--q or --a/--b".into())),
        };
        Ok(r?)
    }

    pub fn asymptotic(&self) -> Result<AsymptoticParams, CliError> {
        let alpha = 2.0 / self.beta()?;
        match (self.p, self.q, &self.a, &self.b) {
            (Some(p), Some(q), ..) => Ok(AsymptoticParams::from_pq(p, q, alpha)),
            (.., Some(a), Some(b)) => Ok(AsymptoticParams::from_ab(rational(a)?, rational(b)?, alpha)?),
            _ => Err(CliError::Validation("give --p/--q or --a/--b".into())),
        }
    }

    /// Exact `(α, a, b)`; `α` from `--alpha`, else `2/β`.
    pub fn rational_params(&self) -> Result<RationalParams, CliError> {
        let alpha = match (&self.alpha, self.beta) {
            (Some(a), _) => parse_rational(a)?,
            (None, Some(b)) => parse_rational(&b.to_string())?.recip() * parse_rational("2")?,
            (None, None) => parse_rational("1")?,
        };
        let a = parse_rational(&Self::require(&self.a, "a")?)?;
        let b = parse_rational(&Self::require(&self.b, "b")?)?;
        Ok(RationalParams::new(alpha, a, b)?)
    }

    pub fn sizes(&self) -> Result<Option<Vec<usize>>, CliError> {
        self.sizes
            .as_deref()
            .map(|s| {
                s.split(',')
                    .map(|t| t.trim().parse::<usize>().map_err(|e| CliError::Validation(format!("--sizes: {t:?}: {e}"))))
                    .collect()
            })
            .transpose()
    }
}

fn rational(s: &str) -> Result<f64, CliError> {
    Ok(to_f64(&parse_rational(s)?))
}
