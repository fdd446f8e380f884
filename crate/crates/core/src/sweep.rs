//! Variance of the ML and HT estimators against their `S = 1` bounds over an
//! SNR grid, for the sparse signal in noise model with `x0 = xi e_1`.

use crate::bounds::{ssnm_s1_estimator_bound, ssnm_unbiased_bound, BoundConfig};
use crate::error::{Error, Result};
use crate::estimators::Estimator;
use crate::mean::{MeanFunction, QuadratureConfig};
use crate::model::{SparseLinearModel, SparseVector};
use crate::montecarlo::{simulate, SimulationSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub n: usize,
    pub sigma: f64,
    pub snr_db: Vec<f64>,
    pub thresholds: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub quadrature: QuadratureConfig,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            n: 5,
            sigma: 1.0,
            snr_db: (0..26).map(|i| -30.0 + 2.0 * i as f64).collect(),
            thresholds: vec![3.0, 4.0, 5.0],
            trials: 1_000_000,
            seed: 1,
            quadrature: QuadratureConfig::default(),
        }
    }
}

/// Monte Carlo variance with its standard error, and the matching bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Curve {
    pub variance: f64,
    pub se_variance: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub snr_db: f64,
    pub xi: f64,
    pub ml: Curve,
    /// One entry per threshold, in configuration order.
    pub ht: Vec<Curve>,
    /// `[1 + (N - 1) e^{-xi^2/sigma^2}] sigma^2`.
    pub unbiased: f64,
}

/// `xi = sigma * 10^(snr_db / 20)`.
pub fn xi_from_snr_db(snr_db: f64, sigma: f64) -> f64 {
    sigma * 10f64.powf(snr_db / 20.0)
}

pub fn fig1_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    if !(cfg.sigma > 0.0) || !cfg.sigma.is_finite() {
        return Err(Error::InvalidArgument(format!("sigma must be positive, got {}", cfg.sigma)));
    }
    if cfg.n < 2 {
        return Err(Error::InvalidArgument("the sweep needs N >= 2".into()));
    }
    let sigma2 = cfg.sigma * cfg.sigma;
    let model = SparseLinearModel::ssnm(cfg.n, 1, sigma2)?;
    let bound_cfg = BoundConfig {
        quadrature: cfg.quadrature,
        ..BoundConfig::default()
    };
    let ml_j = MeanFunction::ml_induced(0, 1, cfg.sigma, cfg.quadrature)?;
    let ht_means = cfg
        .thresholds
        .iter()
        .map(|&t| MeanFunction::ht_induced(0, t, cfg.sigma))
        .collect::<Result<Vec<_>>>()?;

    cfg.snr_db
        .iter()
        .map(|&snr| {
            let xi = xi_from_snr_db(snr, cfg.sigma);
            let mut x = vec![0.0; cfg.n];
            x[0] = xi;
            let x0 = SparseVector::new(x)?;
            // gamma_i is gamma_j re-targeted to a representative off-support index
            let curve = |est: Estimator, gj: &MeanFunction| -> Result<Curve> {
                let spec = SimulationSpec::new(model.clone(), x0.entries().to_vec().into(), est, cfg.trials, cfg.seed);
                let st = simulate(&spec)?;
                let b = ssnm_s1_estimator_bound(&model, gj, &gj.with_component(1), &x0, &bound_cfg)?;
                Ok(Curve {
                    variance: st.total_variance,
                    se_variance: st.se_total_variance,
                    bound: b.value,
                })
            };
            let ml = curve(Estimator::ml_ssnm(1)?, &ml_j)?;
            let ht = cfg
                .thresholds
                .iter()
                .zip(&ht_means)
                .map(|(&t, g)| curve(Estimator::ht(t)?, g))
                .collect::<Result<Vec<_>>>()?;
            Ok(SweepRow {
                snr_db: snr,
                xi,
                ml,
                ht,
                unbiased: ssnm_unbiased_bound(cfg.n, 1, xi, sigma2)?,
            })
        })
        .collect()
}
