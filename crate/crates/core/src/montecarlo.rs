//! Seeded Monte Carlo estimates of estimator mean, bias, variance and MSE.
//!
//! Trials are grouped into fixed blocks of [`BLOCK_TRIALS`]; block `b` draws
//! its noise from its own substream of `seed`. Per-block sums are folded in
//! block order, so results do not depend on the thread count or chunk size.
//! Two passes over the same noise: the first finds the mean, the second
//! accumulates centered moments.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::Estimator;
use crate::linalg::{Matrix, Vector};
use crate::model::{LinearGaussianModel, SparseLinearModel, SparseVector};
use crate::rng::{block_count, block_range, block_rng, fill_standard_normal, BLOCK_TRIALS};

pub const MIN_TRIALS: usize = 100;

/// The observation model trials are drawn from.
#[derive(Debug, Clone)]
pub enum ObservationModel {
    Sparse(SparseLinearModel),
    Linear(LinearGaussianModel),
}

impl ObservationModel {
    pub fn matrix(&self) -> &Matrix {
        match self {
            ObservationModel::Sparse(m) => m.h(),
            ObservationModel::Linear(m) => m.a(),
        }
    }

    pub fn sigma2(&self) -> f64 {
        match self {
            ObservationModel::Sparse(m) => m.sigma2(),
            ObservationModel::Linear(m) => m.sigma2(),
        }
    }
}

impl From<SparseLinearModel> for ObservationModel {
    fn from(m: SparseLinearModel) -> Self {
        ObservationModel::Sparse(m)
    }
}

impl From<LinearGaussianModel> for ObservationModel {
    fn from(m: LinearGaussianModel) -> Self {
        ObservationModel::Linear(m)
    }
}

#[derive(Debug, Clone)]
pub struct SimulationSpec {
    pub model: ObservationModel,
    pub x0: Vector,
    pub estimator: Estimator,
    pub n_trials: usize,
    pub seed: u64,
    /// Trials per parallel work item; rounded up to whole blocks. Does not affect results.
    pub chunk_size: usize,
}

impl SimulationSpec {
    pub fn new(model: impl Into<ObservationModel>, x0: Vector, estimator: Estimator, n_trials: usize, seed: u64) -> Self {
        Self {
            model: model.into(),
            x0,
            estimator,
            n_trials,
            seed,
            chunk_size: 16 * BLOCK_TRIALS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_trials < MIN_TRIALS {
            return Err(Error::InvalidArgument(format!(
                "need at least {MIN_TRIALS} trials, got {}",
                self.n_trials
            )));
        }
        if self.chunk_size == 0 {
            return Err(Error::InvalidArgument("chunk size must be positive".into()));
        }
        let h = self.model.matrix();
        if self.x0.len() != h.cols() {
            return Err(Error::Dimension(format!(
                "parameter has length {}, model has {} columns",
                self.x0.len(),
                h.cols()
            )));
        }
        if let ObservationModel::Sparse(m) = &self.model {
            m.check_parameter(&SparseVector::new(self.x0.to_vec())?)?;
        }
        if let Some(inp) = self.estimator.input_dim() {
            if inp != h.rows() {
                return Err(Error::Dimension(format!(
                    "estimator expects observations of length {inp}, model produces {}",
                    h.rows()
                )));
            }
        }
        if self.estimator.output_dim(h.rows()) != h.cols() {
            return Err(Error::Dimension(format!(
                "estimator output has length {}, parameter has length {}",
                self.estimator.output_dim(h.rows()),
                h.cols()
            )));
        }
        Ok(())
    }
}

/// Sample moments of `xhat` at `x0`. Variances use the `n - 1` normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorStats {
    pub n_trials: usize,
    pub seed: u64,
    pub mean_vec: Vector,
    pub se_mean: Vector,
    pub bias_vec: Vector,
    pub component_variances: Vector,
    pub se_component_variances: Vector,
    /// Sum of `component_variances`.
    pub total_variance: f64,
    pub se_total_variance: f64,
    pub mse: f64,
    pub se_mse: f64,
}

impl EstimatorStats {
    pub fn bias_norm(&self) -> f64 {
        self.bias_vec.norm_sq().sqrt()
    }

    /// `mse - (||bias||^2 + total_variance)` together with a 3-SE allowance.
    pub fn decomposition_gap(&self) -> (f64, f64) {
        let n = self.n_trials as f64;
        let bias2 = self.bias_vec.norm_sq();
        // E[||bias_hat||^2] overshoots by tr(Cov)/n
        let gap = self.mse - (bias2 + self.total_variance * (n - 1.0) / n);
        let se_bias2: f64 = self
            .bias_vec
            .iter()
            .zip(self.se_mean.iter())
            .map(|(b, s)| (2.0 * b * s).powi(2))
            .sum::<f64>()
            .sqrt();
        let allowance = 3.0 * (self.se_mse.powi(2) + self.se_total_variance.powi(2) + se_bias2.powi(2)).sqrt();
        (gap, allowance)
    }
}

#[derive(Debug, Clone)]
struct FirstPass {
    sum: Vec<f64>,
}

#[derive(Debug, Clone)]
struct SecondPass {
    d2: Vec<f64>,
    d4: Vec<f64>,
    q: f64,
    q2: f64,
    e: f64,
    e2: f64,
}

struct Sampler<'a> {
    h: &'a Matrix,
    mean_obs: Vector,
    sigma: f64,
    estimator: &'a Estimator,
    seed: u64,
    n_trials: usize,
}

impl Sampler<'_> {
    /// Calls `f(xhat)` for every trial of block `b`.
    fn for_each_in_block(&self, b: usize, mut f: impl FnMut(&[f64])) {
        let m = self.h.rows();
        let n = self.h.cols();
        let (start, end) = block_range(self.n_trials, b);
        let mut noise = vec![0.0; (end - start) * m];
        let mut rng = block_rng(self.seed, b as u64);
        fill_standard_normal(&mut rng, &mut noise);
        let mut y = vec![0.0; m];
        let mut xhat = vec![0.0; n];
        for t in noise.chunks_exact(m) {
            for ((yi, mi), ti) in y.iter_mut().zip(self.mean_obs.iter()).zip(t) {
                *yi = mi + self.sigma * ti;
            }
            self.estimator.apply_into(&y, &mut xhat);
            f(&xhat);
        }
    }
}

/// Runs the simulation described by `spec`.
pub fn simulate(spec: &SimulationSpec) -> Result<EstimatorStats> {
    spec.validate()?;
    let h = spec.model.matrix();
    let n = h.cols();
    let sampler = Sampler {
        h,
        mean_obs: h.matvec(&spec.x0)?,
        sigma: spec.model.sigma2().sqrt(),
        estimator: &spec.estimator,
        seed: spec.seed,
        n_trials: spec.n_trials,
    };
    let blocks = block_count(spec.n_trials);
    let per_task = spec.chunk_size.div_ceil(BLOCK_TRIALS).max(1);

    let first: Vec<FirstPass> = (0..blocks)
        .into_par_iter()
        .with_min_len(per_task)
        .map(|b| {
            let mut sum = vec![0.0; n];
            sampler.for_each_in_block(b, |x| {
                for (s, v) in sum.iter_mut().zip(x) {
                    *s += v;
                }
            });
            FirstPass { sum }
        })
        .collect();
    let mut sum = vec![0.0; n];
    for p in &first {
        for (s, v) in sum.iter_mut().zip(&p.sum) {
            *s += v;
        }
    }
    let nt = spec.n_trials as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / nt).collect();

    let second: Vec<SecondPass> = (0..blocks)
        .into_par_iter()
        .with_min_len(per_task)
        .map(|b| {
            let mut acc = SecondPass {
                d2: vec![0.0; n],
                d4: vec![0.0; n],
                q: 0.0,
                q2: 0.0,
                e: 0.0,
                e2: 0.0,
            };
            sampler.for_each_in_block(b, |x| {
                let mut q = 0.0;
                let mut e = 0.0;
                for k in 0..n {
                    let d = x[k] - mean[k];
                    let d2 = d * d;
                    acc.d2[k] += d2;
                    acc.d4[k] += d2 * d2;
                    q += d2;
                    let err = x[k] - spec.x0[k];
                    e += err * err;
                }
                acc.q += q;
                acc.q2 += q * q;
                acc.e += e;
                acc.e2 += e * e;
            });
            acc
        })
        .collect();
    let mut tot = SecondPass {
        d2: vec![0.0; n],
        d4: vec![0.0; n],
        q: 0.0,
        q2: 0.0,
        e: 0.0,
        e2: 0.0,
    };
    for p in &second {
        for k in 0..n {
            tot.d2[k] += p.d2[k];
            tot.d4[k] += p.d4[k];
        }
        tot.q += p.q;
        tot.q2 += p.q2;
        tot.e += p.e;
        tot.e2 += p.e2;
    }

    let var_of = |s1: f64, s2: f64| ((s2 - s1 * s1 / nt) / (nt - 1.0)).max(0.0);
    let component_variances: Vec<f64> = tot.d2.iter().map(|d2| d2 / (nt - 1.0)).collect();
    let se_mean: Vec<f64> = component_variances.iter().map(|v| (v / nt).sqrt()).collect();
    let se_component_variances: Vec<f64> = tot
        .d2
        .iter()
        .zip(&tot.d4)
        .map(|(d2, d4)| (var_of(*d2, *d4) / nt).sqrt())
        .collect();
    let total_variance = component_variances.iter().sum();
    let se_total_variance = (var_of(tot.q, tot.q2) / nt).sqrt();
    let mse = tot.e / nt;
    let se_mse = (var_of(tot.e, tot.e2) / nt).sqrt();
    let bias_vec: Vec<f64> = mean.iter().zip(spec.x0.iter()).map(|(m, x)| m - x).collect();

    Ok(EstimatorStats {
        n_trials: spec.n_trials,
        seed: spec.seed,
        mean_vec: mean.into(),
        se_mean: se_mean.into(),
        bias_vec: bias_vec.into(),
        component_variances: component_variances.into(),
        se_component_variances: se_component_variances.into(),
        total_variance,
        se_total_variance,
        mse,
        se_mse,
    })
}

/// Sample mean of `xhat` at one parameter point.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanEstimate {
    pub point: Vector,
    pub mean: Vector,
    pub se: Vector,
}

/// Estimated `E[xhat]` at each point, reusing the same noise draws at every
/// point so that differences between points have low variance.
pub fn estimate_mean_function(
    model: &SparseLinearModel,
    estimator: &Estimator,
    points: &[Vector],
    n_trials: usize,
    seed: u64,
) -> Result<Vec<MeanEstimate>> {
    points
        .iter()
        .map(|p| {
            let spec = SimulationSpec::new(model.clone(), p.clone(), estimator.clone(), n_trials, seed);
            let st = simulate(&spec)?;
            Ok(MeanEstimate {
                point: p.clone(),
                mean: st.mean_vec,
                se: st.se_mean,
            })
        })
        .collect()
}
