//! Experiment configuration: a JSON document with unknown keys rejected.
//! Indices in the file are 1-based.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use slm_bounds::model::gaussian_matrix;
use slm_bounds::{Matrix, SparseLinearModel, SparseVector};

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    #[serde(default = "one")]
    pub sigma2: f64,
    pub sparsity: usize,
    #[serde(default)]
    pub x0: OneOrMany<X0Spec>,
    #[serde(default)]
    pub estimators: Vec<EstimatorSpec>,
    #[serde(default)]
    pub bound: BoundOptions,
    #[serde(default)]
    pub simulation: SimulationOptions,
    #[serde(default)]
    pub sweep: SweepOptions,
    #[serde(default)]
    pub oracle: OracleOptions,
    pub output: Option<PathBuf>,
}

fn one() -> f64 {
    1.0
}

/// `"identity N"`, `"gaussian MxN seed k"`, or an inline row-major matrix.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ModelSpec {
    Named(String),
    Inline(InlineMatrix),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T> Default for OneOrMany<T> {
    fn default() -> Self {
        OneOrMany::Many(Vec::new())
    }
}

impl<T> OneOrMany<T> {
    pub fn as_slice(&self) -> &[T] {
        match self {
            OneOrMany::One(t) => std::slice::from_ref(t),
            OneOrMany::Many(v) => v,
        }
    }
}

/// Nonzero values at 1-based `indices`; without `indices`, `values` is the
/// full dense vector.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct X0Spec {
    pub values: Vec<f64>,
    pub indices: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EstimatorSpec {
    Identity,
    /// Best-`S` selection (SSNM maximum likelihood).
    MlSsnm,
    /// Exhaustive least squares over supports (SLM maximum likelihood).
    MlSlm,
    Ht { threshold: f64 },
    Lmvu,
}

impl EstimatorSpec {
    pub fn label(&self) -> String {
        match self {
            EstimatorSpec::Identity => "identity".into(),
            EstimatorSpec::MlSsnm => "ml_ssnm".into(),
            EstimatorSpec::MlSlm => "ml_slm".into(),
            EstimatorSpec::Ht { threshold } => format!("ht_T{threshold}"),
            EstimatorSpec::Lmvu => "lmvu".into(),
        }
    }
}

/// The prescribed mean used by `bound` and `oracle`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeanSpec {
    #[default]
    Unbiased,
    Ht {
        threshold: f64,
    },
    /// Quadrature for `S = 1`, otherwise a Monte Carlo bank.
    Ml {
        #[serde(default = "default_bank_trials")]
        bank_trials: usize,
        #[serde(default = "default_bank_seed")]
        bank_seed: u64,
    },
}

fn default_bank_trials() -> usize {
    200_000
}

fn default_bank_seed() -> u64 {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchSpec {
    #[default]
    Exhaustive,
    Greedy,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundOptions {
    #[serde(default)]
    pub search: SearchSpec,
    #[serde(default = "default_budget")]
    pub budget: u64,
    #[serde(default)]
    pub mean: MeanSpec,
}

fn default_budget() -> u64 {
    1_000_000
}

impl Default for BoundOptions {
    fn default() -> Self {
        Self {
            search: SearchSpec::default(),
            budget: default_budget(),
            mean: MeanSpec::default(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationOptions {
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub chunk_size: Option<usize>,
}

fn default_trials() -> usize {
    1_000_000
}

fn default_seed() -> u64 {
    1
}

impl Default for SimulationOptions {
    fn default() -> Self {
        Self {
            trials: default_trials(),
            seed: default_seed(),
            chunk_size: None,
        }
    }
}

/// SNR points in dB, listed or as an inclusive range.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum SnrGrid {
    List(Vec<f64>),
    Range(SnrRange),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnrRange {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl SnrGrid {
    pub fn points(&self) -> Result<Vec<f64>, CliError> {
        match self {
            SnrGrid::List(v) => Ok(v.clone()),
            SnrGrid::Range(r) => {
                if !(r.step > 0.0) || !(r.stop >= r.start) {
                    return Err(CliError::Config(format!(
                        "SNR range needs step > 0 and stop >= start, got {}..{} step {}",
                        r.start, r.stop, r.step
                    )));
                }
                // integer count avoids accumulating the step
                let count = ((r.stop - r.start) / r.step + 1e-9).floor() as usize + 1;
                Ok((0..count).map(|i| r.start + r.step * i as f64).collect())
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepOptions {
    #[serde(default = "default_snr")]
    pub snr_db: SnrGrid,
    #[serde(default = "default_thresholds")]
    pub thresholds: Vec<f64>,
    /// Append the unbiased closed form as column `unbiased`.
    #[serde(default)]
    pub unbiased_reference: bool,
    /// Append a standard-error column after each variance column.
    #[serde(default)]
    pub standard_errors: bool,
}

fn default_snr() -> SnrGrid {
    SnrGrid::Range(SnrRange {
        start: -30.0,
        stop: 20.0,
        step: 2.0,
    })
}

fn default_thresholds() -> Vec<f64> {
    vec![3.0, 4.0, 5.0]
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            snr_db: default_snr(),
            thresholds: default_thresholds(),
            unbiased_reference: false,
            standard_errors: false,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleOptions {
    /// Grid resolutions to run, one table row each (refinement study).
    #[serde(default = "default_per_axis")]
    pub per_axis: Vec<usize>,
    /// Grid half-width in multiples of sigma.
    #[serde(default = "default_half_width")]
    pub half_width: f64,
    /// Fail with exit code 3 when the Gram matrix had to be truncated.
    #[serde(default)]
    pub strict: bool,
    /// 1-based support; defaults to the argmax of `L*` for `component`.
    pub support: Option<Vec<usize>>,
    /// 1-based component whose variance is bounded.
    #[serde(default = "default_component")]
    pub component: usize,
}

fn default_per_axis() -> Vec<usize> {
    vec![41]
}

fn default_half_width() -> f64 {
    6.0
}

fn default_component() -> usize {
    1
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            per_axis: default_per_axis(),
            half_width: default_half_width(),
            strict: false,
            support: None,
            component: default_component(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::from_json(&text)
    }

    /// Parses and validates every cross-reference before anything runs.
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let h = self.matrix()?;
        let n = h.cols();
        if !(self.sigma2 > 0.0) || !self.sigma2.is_finite() {
            return Err(CliError::Config(format!("sigma2 must be positive, got {}", self.sigma2)));
        }
        if self.sparsity == 0 || self.sparsity >= n {
            return Err(CliError::Config(format!(
                "sparsity must satisfy 1 <= S < N = {n}, got {}",
                self.sparsity
            )));
        }
        for x in self.x0.as_slice() {
            self.build_x0(x, n)?;
        }
        for e in &self.estimators {
            if let EstimatorSpec::Ht { threshold } = e {
                if !(*threshold >= 0.0) || !threshold.is_finite() {
                    return Err(CliError::Config(format!("HT threshold must be finite and >= 0, got {threshold}")));
                }
            }
        }
        if self.simulation.trials < 100 {
            return Err(CliError::Config("simulation.trials must be at least 100".into()));
        }
        if self.simulation.chunk_size == Some(0) {
            return Err(CliError::Config("simulation.chunk_size must be positive".into()));
        }
        if let Some(k) = &self.oracle.support {
            if k.len() != self.sparsity || k.iter().any(|&i| i == 0 || i > n) {
                return Err(CliError::Config(format!(
                    "oracle.support must list {} distinct 1-based indices <= {n}",
                    self.sparsity
                )));
            }
        }
        if self.oracle.component == 0 || self.oracle.component > n {
            return Err(CliError::Config(format!("oracle.component must be in 1..={n}")));
        }
        if self.oracle.per_axis.iter().any(|&p| p < 1) || !(self.oracle.half_width > 0.0) {
            return Err(CliError::Config("oracle grids need per_axis >= 1 and half_width > 0".into()));
        }
        self.sweep.snr_db.points()?;
        Ok(())
    }

    pub fn matrix(&self) -> Result<Matrix, CliError> {
        match &self.model {
            ModelSpec::Inline(m) => {
                Matrix::new(m.rows, m.cols, m.data.clone()).map_err(|e| CliError::Config(format!("model: {e}")))
            }
            ModelSpec::Named(s) => parse_named_model(s),
        }
    }

    pub fn model(&self) -> Result<SparseLinearModel, CliError> {
        SparseLinearModel::new(self.matrix()?, self.sigma2, self.sparsity).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn x0_vectors(&self) -> Result<Vec<SparseVector>, CliError> {
        let n = self.matrix()?.cols();
        self.x0.as_slice().iter().map(|x| self.build_x0(x, n)).collect()
    }

    fn build_x0(&self, x: &X0Spec, n: usize) -> Result<SparseVector, CliError> {
        let dense = match &x.indices {
            None => {
                if x.values.len() != n {
                    return Err(CliError::Config(format!(
                        "dense x0 needs {n} values, got {}",
                        x.values.len()
                    )));
                }
                x.values.clone()
            }
            Some(idx) => {
                if idx.len() != x.values.len() {
                    return Err(CliError::Config("x0.indices and x0.values differ in length".into()));
                }
                let mut v = vec![0.0; n];
                for (&i, &val) in idx.iter().zip(&x.values) {
                    if i == 0 || i > n {
                        return Err(CliError::Config(format!("x0 index {i} outside 1..={n}")));
                    }
                    if v[i - 1] != 0.0 {
                        return Err(CliError::Config(format!("x0 index {i} listed twice")));
                    }
                    v[i - 1] = val;
                }
                v
            }
        };
        let sv = SparseVector::new(dense).map_err(|e| CliError::Config(format!("x0: {e}")))?;
        if sv.l0() > self.sparsity {
            return Err(CliError::Config(format!(
                "x0 has {} nonzeros but S = {}",
                sv.l0(),
                self.sparsity
            )));
        }
        Ok(sv)
    }
}

fn parse_named_model(s: &str) -> Result<Matrix, CliError> {
    let bad = || CliError::Config(format!("model {s:?}: expected \"identity N\" or \"gaussian MxN seed k\""));
    let words: Vec<&str> = s.split_whitespace().collect();
    match words.as_slice() {
        ["identity", n] => {
            let n: usize = n.parse().map_err(|_| bad())?;
            if n == 0 {
                return Err(bad());
            }
            Ok(Matrix::identity(n))
        }
        ["gaussian", dims, "seed", seed] => {
            let (m, n) = dims.split_once('x').ok_or_else(bad)?;
            let m: usize = m.parse().map_err(|_| bad())?;
            let n: usize = n.parse().map_err(|_| bad())?;
            let seed: u64 = seed.parse().map_err(|_| bad())?;
            if m == 0 || n == 0 {
                return Err(bad());
            }
            Ok(gaussian_matrix(m, n, seed))
        }
        _ => Err(bad()),
    }
}
