//! Variance lower bounds: the linear Gaussian model CRB, the support-restricted
//! bound `L^K`, its maximum over supports, the per-component sum, and the
//! closed forms for the sparse signal in noise model.

use itertools::Itertools;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{gram, Cholesky, Matrix, Vector};
use crate::mean::{
    finite_difference_gradient, gradient_r, tilde_gamma, FdWarning, MeanFunction, MeanKind, MlMeanMethod,
    QuadratureConfig,
};
use crate::model::{embed, isometry_data, submatrix, xi_and_j, SparseLinearModel, SparseVector, SupportSet};

/// Relative agreement required between the two algebraic forms of `L^K`.
pub const FORM_REL_TOL: f64 = 1e-10;

/// How `L*` searches over supports of size `S`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SupportSearch {
    /// All `C(N, S)` supports; fails when there are more than `budget`.
    Exhaustive { budget: u64 },
    /// Only `{k}` plus the `S - 1` largest-magnitude other entries of `x0`.
    Greedy,
}

impl Default for SupportSearch {
    fn default() -> Self {
        SupportSearch::Exhaustive { budget: 1_000_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BoundConfig {
    pub quadrature: QuadratureConfig,
    pub search: SupportSearch,
}

/// The pieces that make up `L^K`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundIngredients {
    pub support: SupportSet,
    pub s0: Vector,
    pub beta2: f64,
    pub crb_term: f64,
    pub gamma_at_xs0: f64,
    pub gamma_at_x0: f64,
    pub warning: Option<FdWarning>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundResult {
    /// `beta^2 [C + gamma(x(s0))^2] - gamma(x0)^2`.
    pub value: f64,
    /// `C_tilde + gamma_tilde(s0)^2 - gamma(x0)^2`, computed from `beta * gamma(x(s))`.
    pub value_tilde_form: f64,
    pub ingredients: BoundIngredients,
}

impl BoundResult {
    /// Whether the two forms agree to [`FORM_REL_TOL`].
    pub fn forms_agree(&self) -> bool {
        let ing = &self.ingredients;
        let scale = (ing.beta2 * (ing.crb_term + ing.gamma_at_xs0 * ing.gamma_at_xs0))
            .abs()
            .max(ing.gamma_at_x0 * ing.gamma_at_x0)
            .max(f64::MIN_POSITIVE);
        (self.value - self.value_tilde_form).abs() <= FORM_REL_TOL * scale
    }
}

/// `sigma2 r^T (A^T A)^{-1} r`.
pub fn crb_lgm(a: &Matrix, r: &[f64], sigma2: f64) -> Result<f64> {
    if r.len() != a.cols() {
        return Err(Error::Dimension(format!(
            "gradient has length {}, matrix has {} columns",
            r.len(),
            a.cols()
        )));
    }
    let chol = Cholesky::factor(&gram(a)?)?;
    Ok(sigma2 * chol.inverse_quadratic_form(r)?)
}

/// CRB of the linear Gaussian model with `A = H_K` for the mean `s -> gamma(x(s))`.
pub fn crb_restricted(
    model: &SparseLinearModel,
    k: &SupportSet,
    gamma: &MeanFunction,
    s0: &[f64],
    cfg: &BoundConfig,
) -> Result<f64> {
    if k.len() != model.sparsity() {
        return Err(Error::InvalidArgument(format!("|K| = {} but S = {}", k.len(), model.sparsity())));
    }
    let grad = gradient_r(gamma, k, s0, model.n(), &cfg.quadrature)?;
    crb_lgm(&submatrix(model.h(), k)?, &grad.r, model.sigma2())
}

/// `L^K_gamma(x0)`.
pub fn bound_l_k(
    model: &SparseLinearModel,
    gamma: &MeanFunction,
    k: &SupportSet,
    x0: &SparseVector,
    cfg: &BoundConfig,
) -> Result<BoundResult> {
    let n = model.n();
    let sigma2 = model.sigma2();
    let iso = isometry_data(model, k, x0)?;
    let hk = submatrix(model.h(), k)?;
    let chol = Cholesky::factor(&gram(&hk)?)?;

    let grad = gradient_r(gamma, k, &iso.s0, n, &cfg.quadrature)?;
    let crb_term = sigma2 * chol.inverse_quadratic_form(&grad.r)?;
    let gamma_at_xs0 = gamma.evaluate(embed(&iso.s0, k, n)?.entries())?;
    let gamma_at_x0 = gamma.evaluate(x0.entries())?;
    let beta2 = (-iso.residual_energy / sigma2).exp();
    let value = beta2 * (crb_term + gamma_at_xs0 * gamma_at_xs0) - gamma_at_x0 * gamma_at_x0;

    // the same bound written through gamma_tilde(s) = beta * gamma(x(s))
    let tilde_r: Vector = match gamma.kind() {
        MeanKind::HtInduced { .. }
        | MeanKind::MlInduced {
            method: MlMeanMethod::Quadrature(_),
            ..
        } => {
            finite_difference_gradient(
                |s| tilde_gamma(gamma, k, &iso, s, n),
                &iso.s0,
                cfg.quadrature.fd_rel_step,
            )?
            .r
        }
        _ => grad.r.iter().map(|v| iso.beta * v).collect::<Vec<_>>().into(),
    };
    let crb_tilde = sigma2 * chol.inverse_quadratic_form(&tilde_r)?;
    let gt = tilde_gamma(gamma, k, &iso, &iso.s0, n)?;
    let value_tilde_form = crb_tilde + gt * gt - gamma_at_x0 * gamma_at_x0;

    Ok(BoundResult {
        value,
        value_tilde_form,
        ingredients: BoundIngredients {
            support: k.clone(),
            s0: iso.s0,
            beta2,
            crb_term,
            gamma_at_xs0,
            gamma_at_x0,
            warning: grad.warning,
        },
    })
}

/// `{k}` plus the `S - 1` largest-magnitude entries of `x0` other than `k`.
pub fn greedy_support(x0: &SparseVector, k: usize, sparsity: usize) -> Result<SupportSet> {
    let n = x0.len();
    let mut others: Vec<usize> = (0..n).filter(|&l| l != k).collect();
    others.sort_by(|&a, &b| x0.get(b).abs().total_cmp(&x0.get(a).abs()).then(a.cmp(&b)));
    let mut idx: Vec<usize> = others.into_iter().take(sparsity.saturating_sub(1)).collect();
    idx.push(k);
    idx.sort_unstable();
    SupportSet::new(idx, n)
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i as u128 + 1))
}

/// `L*_gamma(x0) = max_{|K| = S} L^K_gamma(x0)`.
///
/// Supports are visited in lexicographic order and the first maximizer wins,
/// so the result does not depend on how the evaluations are scheduled.
pub fn bound_l_star(
    model: &SparseLinearModel,
    gamma: &MeanFunction,
    x0: &SparseVector,
    cfg: &BoundConfig,
) -> Result<BoundResult> {
    let n = model.n();
    let s = model.sparsity();
    match cfg.search {
        SupportSearch::Greedy => {
            let k = greedy_support(x0, gamma.component(), s)?;
            bound_l_k(model, gamma, &k, x0, cfg)
        }
        SupportSearch::Exhaustive { budget } => {
            let required = binomial(n, s);
            if required > budget as u128 {
                return Err(Error::Budget { required, budget });
            }
            let supports: Vec<Vec<usize>> = (0..n).combinations(s).collect();
            let results: Vec<Result<BoundResult>> = supports
                .into_par_iter()
                .map(|idx| bound_l_k(model, gamma, &SupportSet::new(idx, n)?, x0, cfg))
                .collect();
            let mut best: Option<BoundResult> = None;
            for r in results {
                let r = r?;
                if best.as_ref().is_none_or(|b| r.value > b.value) {
                    best = Some(r);
                }
            }
            best.ok_or_else(|| Error::InvalidArgument("no support of size S".into()))
        }
    }
}

/// Per-component `L*` values and their sum.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoremBound {
    pub total: f64,
    pub components: Vec<BoundResult>,
}

/// `sum_k L*_{gamma_k}(x0)`, a lower bound on the total variance of any
/// estimator whose mean is `gamma` on the whole sparse parameter set.
pub fn theorem_bound(
    model: &SparseLinearModel,
    gammas: &[MeanFunction],
    x0: &SparseVector,
    cfg: &BoundConfig,
) -> Result<TheoremBound> {
    if gammas.len() != model.n() {
        return Err(Error::Dimension(format!(
            "need one mean function per component ({}), got {}",
            model.n(),
            gammas.len()
        )));
    }
    if let Some((pos, g)) = gammas.iter().enumerate().find(|(i, g)| g.component() != *i) {
        return Err(Error::InvalidArgument(format!(
            "mean function at position {} is for component {}",
            pos + 1,
            g.component() + 1
        )));
    }
    let components = gammas
        .iter()
        .map(|g| bound_l_star(model, g, x0, cfg))
        .collect::<Result<Vec<_>>>()?;
    let total = components.iter().map(|c| c.value).sum();
    Ok(TheoremBound { total, components })
}

/// `[S + (N - S) exp(-xi^2 / sigma2)] sigma2`: unbiased estimation in the SSNM.
pub fn ssnm_unbiased_bound(n: usize, s: usize, xi: f64, sigma2: f64) -> Result<f64> {
    if s == 0 || s >= n || !(sigma2 > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= S < N and sigma2 > 0, got N = {n}, S = {s}, sigma2 = {sigma2}"
        )));
    }
    Ok((s as f64 + (n - s) as f64 * (-xi * xi / sigma2).exp()) * sigma2)
}

/// The `S = 1` SSNM bound with supports `{j(x0)}` and `{i}`.
#[derive(Debug, Clone, PartialEq)]
pub struct S1Bound {
    pub value: f64,
    pub on_support: BoundResult,
    /// Bound for the representative off-support index (smallest `i != j`).
    pub off_support: BoundResult,
    /// Largest deviation of any other off-support index from the representative.
    pub off_support_spread: f64,
}

/// `L^{{j}}_{gamma_j}(x0) + (N - 1) L^{{i}}_{gamma_i}(x0)` for the SSNM with `S = 1`.
///
/// `gamma_i` is used as a template and re-targeted to every `i != j`; the
/// off-support values must coincide, which is checked rather than assumed
/// (except for Monte Carlo means, whose noise differs per component).
pub fn ssnm_s1_estimator_bound(
    model: &SparseLinearModel,
    gamma_j: &MeanFunction,
    gamma_i: &MeanFunction,
    x0: &SparseVector,
    cfg: &BoundConfig,
) -> Result<S1Bound> {
    if !model.is_ssnm() || model.sparsity() != 1 {
        return Err(Error::Unsupported(
            "the single-support estimator bound needs H = I and S = 1".into(),
        ));
    }
    model.check_parameter(x0)?;
    let n = model.n();
    let (_, j) = xi_and_j(x0, 1);
    if gamma_j.component() != j {
        return Err(Error::InvalidArgument(format!(
            "on-support mean is for component {}, but j(x0) = {}",
            gamma_j.component() + 1,
            j + 1
        )));
    }
    let on_support = bound_l_k(model, gamma_j, &SupportSet::new(vec![j], n)?, x0, cfg)?;
    let off: Vec<BoundResult> = (0..n)
        .filter(|&i| i != j)
        .map(|i| bound_l_k(model, &gamma_i.with_component(i), &SupportSet::new(vec![i], n)?, x0, cfg))
        .collect::<Result<_>>()?;
    let off_support = off[0].clone();
    let off_support_spread = off
        .iter()
        .map(|b| (b.value - off_support.value).abs())
        .fold(0.0, f64::max);
    let checked = !matches!(
        gamma_i.kind(),
        MeanKind::MlInduced {
            method: MlMeanMethod::MonteCarlo(_),
            ..
        }
    );
    if checked && off_support_spread > 1e-10 * off_support.value.abs() + 1e-300 {
        return Err(Error::InvalidArgument(format!(
            "off-support bounds differ by {off_support_spread:e}; the mean is not symmetric across components"
        )));
    }
    let value = on_support.value + (n - 1) as f64 * off_support.value;
    Ok(S1Bound {
        value,
        on_support,
        off_support,
        off_support_spread,
    })
}
