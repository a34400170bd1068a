use std::path::{Path, PathBuf};

use hypknn::limitlaw::{solve_regime, Regime, WRule};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const DEFAULT_GRID: [f64; 4] = [6.0, 8.0, 10.0, 12.0];

/// Experiment description, read from `--config` and overridden by flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub d: usize,
    pub k: usize,
    pub s0: f64,
    /// Single window parameter; ignored when `lambdas` is set.
    pub lambda: Option<f64>,
    pub lambdas: Option<Vec<f64>>,
    /// Target exceedance scale; used unless `v` is given.
    pub target_u: f64,
    /// Explicit recentring threshold, shared by every grid point.
    pub v: Option<f64>,
    pub w_rule: WRule<f64>,
    pub u_cap: Option<f64>,
    pub replicates: u64,
    pub master_seed: u64,
    /// Finite law-comparison bin edges; an overflow bin `[last, inf)` is appended.
    pub bin_edges: Option<Vec<f64>>,
    pub count_cap: u64,
    pub bootstrap: usize,
    pub out: PathBuf,
    pub parallel: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            d: 2,
            k: 1,
            s0: 0.0,
            lambda: None,
            lambdas: None,
            target_u: 20.0,
            v: None,
            w_rule: WRule::Sqrt,
            u_cap: None,
            replicates: 100,
            master_seed: 1,
            bin_edges: None,
            count_cap: 20,
            bootstrap: 1000,
            out: PathBuf::from("runs"),
            parallel: None,
        }
    }
}

/// The fields that determine simulated output.
#[derive(Serialize)]
struct HashView<'a> {
    d: usize,
    k: usize,
    s0: f64,
    lambdas: Vec<f64>,
    target_u: f64,
    v: Option<f64>,
    w_rule: &'a WRule<f64>,
    u_cap: Option<f64>,
    master_seed: u64,
}

impl ExperimentConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    pub fn grid(&self) -> Vec<f64> {
        match (&self.lambdas, self.lambda) {
            (Some(g), _) => g.clone(),
            (None, Some(l)) => vec![l],
            (None, None) => DEFAULT_GRID.to_vec(),
        }
    }

    /// Law bin edges with the overflow bin.
    pub fn law_edges(&self) -> Vec<f64> {
        let mut e = self
            .bin_edges
            .clone()
            .unwrap_or_else(|| (0..=7).map(|i| self.s0 + i as f64).collect());
        e.push(f64::INFINITY);
        e
    }

    /// SHA-256 over the output-determining fields. The replicate count is left
    /// out so that `--resume` can extend a finished run.
    pub fn hash(&self) -> String {
        let view = HashView {
            d: self.d,
            k: self.k,
            s0: self.s0,
            lambdas: self.grid(),
            target_u: self.target_u,
            v: self.v,
            w_rule: &self.w_rule,
            u_cap: self.u_cap,
            master_seed: self.master_seed,
        };
        hex::encode(Sha256::digest(serde_json::to_vec(&view).expect("plain data")))
    }

    pub fn regime(&self, lambda: f64) -> Result<Regime, CliError> {
        let r = match self.v {
            Some(v) => Regime::from_threshold(self.d, self.k, self.s0, lambda, v, self.w_rule),
            None => solve_regime(self.d, self.k, self.s0, lambda, self.target_u, self.w_rule),
        };
        let r = match self.u_cap {
            Some(c) => r.and_then(|r| r.with_u_cap(c)),
            None => r,
        };
        r.map_err(|e| CliError::Usage(format!("lambda = {lambda}: {e}")))
    }

    /// Validates every grid point and the comparison settings before any sampling.
    pub fn validate(&self) -> Result<Vec<Regime>, CliError> {
        let grid = self.grid();
        if grid.is_empty() {
            return Err(CliError::Usage("empty lambda grid".into()));
        }
        let edges = self.law_edges();
        if edges.len() < 2 || edges.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(CliError::Usage("bin edges must be strictly increasing".into()));
        }
        if self.parallel == Some(0) {
            return Err(CliError::Usage("parallelism must be at least 1".into()));
        }
        grid.iter().map(|&l| self.regime(l)).collect()
    }
}

/// Directory of one grid point inside the output directory.
pub fn regime_dir(out: &Path, lambda: f64) -> PathBuf {
    out.join(format!("lambda_{lambda}"))
}
