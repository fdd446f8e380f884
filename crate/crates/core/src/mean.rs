//! Prescribed mean functions `gamma_k(x)`, their restriction to a support,
//! the isometric image `beta * gamma(x(s))`, and the gradient `r(s)`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::model::{embed, IsometryData, SupportSet};
use crate::normal;
use crate::quadrature::simpson;
use crate::rng::NoiseBank;

/// Numerical settings for quadrature means and finite-difference gradients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureConfig {
    /// Integration half-width around `x_k`, in multiples of sigma.
    pub half_width: f64,
    /// Simpson nodes per integration piece (odd).
    pub nodes: usize,
    /// Central-difference step relative to `max(1, |s_l|)`.
    pub fd_rel_step: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            half_width: 10.0,
            nodes: 2001,
            fd_rel_step: 1e-4,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.nodes < 51 || self.nodes % 2 == 0 {
            return Err(Error::InvalidArgument(format!(
                "quadrature node count must be odd and >= 51, got {}",
                self.nodes
            )));
        }
        if !(self.half_width >= 6.0) {
            return Err(Error::InvalidArgument(format!(
                "quadrature half-width must be at least 6 sigma, got {}",
                self.half_width
            )));
        }
        if !(self.fd_rel_step > 0.0) {
            return Err(Error::InvalidArgument("finite-difference step must be positive".into()));
        }
        Ok(())
    }
}

/// How the mean of the best-`S` selection is obtained.
#[derive(Debug, Clone)]
pub enum MlMeanMethod {
    /// One-dimensional quadrature; only valid for `S = 1`.
    Quadrature(QuadratureConfig),
    /// Sample mean over a fixed noise bank (common random numbers).
    MonteCarlo(Arc<NoiseBank>),
}

#[derive(Debug, Clone)]
pub enum MeanKind {
    Unbiased,
    Affine { coefficients: Vector, offset: f64 },
    HtInduced { threshold: f64, sigma: f64 },
    MlInduced {
        sparsity: usize,
        sigma: f64,
        method: MlMeanMethod,
    },
}

/// A prescribed mean `gamma_k(x)` for one component `k` of the estimator.
#[derive(Debug, Clone)]
pub struct MeanFunction {
    component: usize,
    kind: MeanKind,
}

impl MeanFunction {
    pub fn unbiased(k: usize) -> Self {
        Self {
            component: k,
            kind: MeanKind::Unbiased,
        }
    }

    pub fn affine(k: usize, coefficients: Vector, offset: f64) -> Self {
        Self {
            component: k,
            kind: MeanKind::Affine {
                coefficients,
                offset,
            },
        }
    }

    /// Mean of the hard-thresholding estimator with threshold `threshold`.
    pub fn ht_induced(k: usize, threshold: f64, sigma: f64) -> Result<Self> {
        if !(threshold >= 0.0) || !(sigma > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "need threshold >= 0 and sigma > 0, got T = {threshold}, sigma = {sigma}"
            )));
        }
        Ok(Self {
            component: k,
            kind: MeanKind::HtInduced { threshold, sigma },
        })
    }

    /// Mean of the best-`S` selection (SSNM maximum likelihood) by quadrature.
    pub fn ml_induced(k: usize, sparsity: usize, sigma: f64, cfg: QuadratureConfig) -> Result<Self> {
        cfg.validate()?;
        if !(sigma > 0.0) || sparsity == 0 {
            return Err(Error::InvalidArgument("need sigma > 0 and S >= 1".into()));
        }
        Ok(Self {
            component: k,
            kind: MeanKind::MlInduced {
                sparsity,
                sigma,
                method: MlMeanMethod::Quadrature(cfg),
            },
        })
    }

    /// Mean of the best-`S` selection estimated on a shared noise bank.
    pub fn ml_induced_monte_carlo(k: usize, sparsity: usize, sigma: f64, bank: Arc<NoiseBank>) -> Result<Self> {
        if !(sigma > 0.0) || sparsity == 0 {
            return Err(Error::InvalidArgument("need sigma > 0 and S >= 1".into()));
        }
        Ok(Self {
            component: k,
            kind: MeanKind::MlInduced {
                sparsity,
                sigma,
                method: MlMeanMethod::MonteCarlo(bank),
            },
        })
    }

    /// Same kind of mean, for another component.
    pub fn with_component(&self, k: usize) -> Self {
        Self {
            component: k,
            kind: self.kind.clone(),
        }
    }

    pub fn component(&self) -> usize {
        self.component
    }

    pub fn kind(&self) -> &MeanKind {
        &self.kind
    }

    /// True for the kinds whose gradient is exact (unbiased and affine).
    pub fn is_affine(&self) -> bool {
        matches!(self.kind, MeanKind::Unbiased | MeanKind::Affine { .. })
    }

    /// `gamma_k(x)`.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        let k = self.component;
        if k >= x.len() {
            return Err(Error::Dimension(format!(
                "component {} out of range for a length-{} parameter",
                k + 1,
                x.len()
            )));
        }
        match &self.kind {
            MeanKind::Unbiased => Ok(x[k]),
            MeanKind::Affine {
                coefficients,
                offset,
            } => {
                if coefficients.len() != x.len() {
                    return Err(Error::Dimension(format!(
                        "affine mean has {} coefficients, parameter has length {}",
                        coefficients.len(),
                        x.len()
                    )));
                }
                Ok(coefficients.dot(x) + offset)
            }
            MeanKind::HtInduced { threshold, sigma } => Ok(ht_mean(x[k], *threshold, *sigma)),
            MeanKind::MlInduced {
                sparsity,
                sigma,
                method,
            } => match method {
                MlMeanMethod::Quadrature(cfg) => ml_mean(x, k, *sparsity, *sigma, cfg),
                MlMeanMethod::MonteCarlo(bank) => ml_mean_monte_carlo(x, k, *sparsity, *sigma, bank),
            },
        }
    }
}

impl fmt::Display for MeanFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let k = self.component + 1;
        match &self.kind {
            MeanKind::Unbiased => write!(f, "unbiased({k})"),
            MeanKind::Affine { offset, .. } => write!(f, "affine({k}; b = {offset})"),
            MeanKind::HtInduced { threshold, .. } => write!(f, "ht({k}; T = {threshold})"),
            MeanKind::MlInduced { sparsity, .. } => write!(f, "ml({k}; S = {sparsity})"),
        }
    }
}

/// `E[y 1{|y| >= T}]` for `y ~ N(mu, sigma^2)`.
///
/// With `a = (T - mu)/sigma` and `b = (-T - mu)/sigma` this is
/// `mu (Q(a) + Phi(b)) + sigma (phi(a) - phi(b))`.
pub fn ht_mean(mu: f64, threshold: f64, sigma: f64) -> f64 {
    let a = (threshold - mu) / sigma;
    let b = (-threshold - mu) / sigma;
    mu * (normal::sf(a) + normal::cdf(b)) + sigma * (normal::pdf(a) - normal::pdf(b))
}

/// Mean of component `k` of the best-`S` selection applied to `y = x + n`.
///
/// For `S = 1` component `k` is kept iff `|y_k|` beats every other entry, so
/// the mean is `int y phi_sigma(y - x_k) prod_{l != k} P(|y_l| < |y|) dy`,
/// integrated with composite Simpson over `x_k +- half_width * sigma`, split
/// at the kink `y = 0`.
pub fn ml_mean(x: &[f64], k: usize, sparsity: usize, sigma: f64, cfg: &QuadratureConfig) -> Result<f64> {
    if sparsity != 1 {
        return Err(Error::Unsupported(format!(
            "quadrature mean of the best-S selection needs S = 1 (got S = {sparsity}); \
             use the Monte Carlo mean estimator"
        )));
    }
    if k >= x.len() {
        return Err(Error::Dimension(format!("component {} out of range", k + 1)));
    }
    cfg.validate()?;
    let xk = x[k];
    let others: Vec<f64> = x
        .iter()
        .enumerate()
        .filter(|(l, _)| *l != k)
        .map(|(_, v)| *v)
        .collect();
    let integrand = |y: f64| {
        let m = y.abs();
        let mut p = normal::pdf((y - xk) / sigma) / sigma;
        for &xl in &others {
            p *= normal::interval((-m - xl) / sigma, (m - xl) / sigma);
        }
        y * p
    };
    let lo = xk - cfg.half_width * sigma;
    let hi = xk + cfg.half_width * sigma;
    let value = if lo < 0.0 && hi > 0.0 {
        simpson(integrand, lo, 0.0, cfg.nodes) + simpson(integrand, 0.0, hi, cfg.nodes)
    } else {
        simpson(integrand, lo, hi, cfg.nodes)
    };
    Ok(value)
}

/// Whether the best-`S` selection keeps entry `k` of `y` (ties: smaller index wins).
#[inline]
pub(crate) fn selection_keeps(y: &[f64], k: usize, sparsity: usize) -> bool {
    let mk = y[k].abs();
    let mut ahead = 0;
    for (l, v) in y.iter().enumerate() {
        let m = v.abs();
        if m > mk || (m == mk && l < k) {
            ahead += 1;
            if ahead >= sparsity {
                return false;
            }
        }
    }
    true
}

fn ml_mean_monte_carlo(x: &[f64], k: usize, sparsity: usize, sigma: f64, bank: &NoiseBank) -> Result<f64> {
    if bank.dim() != x.len() {
        return Err(Error::Dimension(format!(
            "noise bank has dimension {}, parameter has length {}",
            bank.dim(),
            x.len()
        )));
    }
    let mut y = vec![0.0; x.len()];
    let mut sum = 0.0;
    for t in 0..bank.trials() {
        for ((yi, xi), ni) in y.iter_mut().zip(x).zip(bank.trial(t)) {
            *yi = xi + sigma * ni;
        }
        if selection_keeps(&y, k, sparsity) {
            sum += y[k];
        }
    }
    Ok(sum / bank.trials() as f64)
}

/// `beta * gamma(x(s))`: the image of `gamma` in the linear Gaussian model RKHS.
pub fn tilde_gamma(gamma: &MeanFunction, k: &SupportSet, iso: &IsometryData, s: &[f64], n: usize) -> Result<f64> {
    Ok(iso.beta * gamma.evaluate(embed(s, k, n)?.entries())?)
}

/// Raised when halving the finite-difference step moves the derivative by
/// more than the Richardson tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct FdWarning {
    pub coordinate: usize,
    pub coarse: f64,
    pub fine: f64,
}

impl fmt::Display for FdWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "finite-difference derivative along s_{} unstable: {:e} at h vs {:e} at h/2",
            self.coordinate + 1,
            self.coarse,
            self.fine
        )
    }
}

/// Relative change tolerated between steps `h` and `h/2`.
pub const RICHARDSON_REL_TOL: f64 = 1e-5;

/// `r(s0)` together with an optional accuracy warning.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub r: Vector,
    pub warning: Option<FdWarning>,
}

/// Central differences of `f` at `s0` with a Richardson consistency check.
pub fn finite_difference_gradient<F>(mut f: F, s0: &[f64], rel_step: f64) -> Result<Gradient>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let mut r = vec![0.0; s0.len()];
    let mut warning = None;
    let mut s = s0.to_vec();
    for l in 0..s0.len() {
        let h = rel_step * s0[l].abs().max(1.0);
        let mut central = |step: f64| -> Result<f64> {
            s[l] = s0[l] + step;
            let up = f(&s)?;
            s[l] = s0[l] - step;
            let down = f(&s)?;
            s[l] = s0[l];
            Ok((up - down) / (2.0 * step))
        };
        let coarse = central(h)?;
        let fine = central(0.5 * h)?;
        if (coarse - fine).abs() > RICHARDSON_REL_TOL * fine.abs().max(coarse.abs()) + 1e-12 && warning.is_none() {
            warning = Some(FdWarning {
                coordinate: l,
                coarse,
                fine,
            });
        }
        r[l] = coarse;
    }
    Ok(Gradient {
        r: r.into(),
        warning,
    })
}

/// `r(s0) = d gamma(x(s)) / ds` at `s0`.
///
/// Exact for unbiased and affine means, central differences for the
/// quadrature-based means, and the score-function identity
/// `d/ds_l E[xhat_k] = E[xhat_k n_l] / sigma` for Monte Carlo means.
pub fn gradient_r(
    gamma: &MeanFunction,
    k: &SupportSet,
    s0: &[f64],
    n: usize,
    cfg: &QuadratureConfig,
) -> Result<Gradient> {
    if s0.len() != k.len() {
        return Err(Error::Dimension(format!("|s0| = {} but |K| = {}", s0.len(), k.len())));
    }
    let comp = gamma.component();
    match gamma.kind() {
        MeanKind::Unbiased => {
            let mut r = vec![0.0; k.len()];
            if let Some(p) = k.position(comp) {
                r[p] = 1.0;
            }
            Ok(Gradient {
                r: r.into(),
                warning: None,
            })
        }
        MeanKind::Affine { coefficients, .. } => {
            if coefficients.len() != n {
                return Err(Error::Dimension("affine coefficient length differs from N".into()));
            }
            Ok(Gradient {
                r: crate::model::restrict(coefficients, k),
                warning: None,
            })
        }
        MeanKind::MlInduced {
            sparsity,
            sigma,
            method: MlMeanMethod::MonteCarlo(bank),
        } => {
            let x = embed(s0, k, n)?;
            score_gradient(x.entries(), comp, *sparsity, *sigma, bank, k)
        }
        MeanKind::HtInduced { .. } | MeanKind::MlInduced { .. } => {
            cfg.validate()?;
            finite_difference_gradient(
                |s| gamma.evaluate(embed(s, k, n)?.entries()),
                s0,
                cfg.fd_rel_step,
            )
        }
    }
}

fn score_gradient(
    x: &[f64],
    comp: usize,
    sparsity: usize,
    sigma: f64,
    bank: &NoiseBank,
    k: &SupportSet,
) -> Result<Gradient> {
    if bank.dim() != x.len() {
        return Err(Error::Dimension("noise bank dimension differs from N".into()));
    }
    let mut y = vec![0.0; x.len()];
    let mut acc = vec![0.0; k.len()];
    for t in 0..bank.trials() {
        let noise = bank.trial(t);
        for ((yi, xi), ni) in y.iter_mut().zip(x).zip(noise) {
            *yi = xi + sigma * ni;
        }
        if selection_keeps(&y, comp, sparsity) {
            for (a, &l) in acc.iter_mut().zip(k.indices()) {
                *a += y[comp] * noise[l];
            }
        }
    }
    let scale = 1.0 / (sigma * bank.trials() as f64);
    Ok(Gradient {
        r: acc.into_iter().map(|a| a * scale).collect::<Vec<_>>().into(),
        warning: None,
    })
}
