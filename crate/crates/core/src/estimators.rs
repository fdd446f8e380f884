//! Reference estimators: best-`S` selection (ML), hard thresholding, the
//! `S = 1` LMVU estimator and least squares for the linear Gaussian model.

use std::fmt;

use itertools::Itertools;

use crate::error::{Error, Result};
use crate::linalg::{pseudo_inverse, Matrix, Vector};
use crate::mean::selection_keeps;
use crate::model::{submatrix, xi_and_j, SparseLinearModel, SparseVector, SupportSet};

/// A deterministic map `y -> xhat(y)`.
#[derive(Debug, Clone)]
pub enum Estimator {
    /// `xhat = y`.
    Identity,
    /// Keep the `S` largest-magnitude entries of `y` (ML for `H = I`).
    MlSsnm { sparsity: usize },
    /// Exhaustive least squares over all supports of size `S`.
    MlSlm {
        h: Matrix,
        supports: Vec<(SupportSet, Matrix)>,
    },
    /// Keep entries with `|y_k| >= T`.
    Ht { threshold: f64 },
    /// The LMVU estimator at `x0 = xi e_j` for `S = 1`.
    LmvuS1 { j: usize, xi: f64, sigma2: f64 },
    /// `A^+ z`.
    LsLgm { pinv: Matrix },
}

impl Estimator {
    pub fn ml_ssnm(sparsity: usize) -> Result<Self> {
        if sparsity == 0 {
            return Err(Error::InvalidArgument("S must be at least 1".into()));
        }
        Ok(Estimator::MlSsnm { sparsity })
    }

    /// Precomputes `H_K^+` for every support; fails when `C(N, S) > budget`.
    pub fn ml_slm(model: &SparseLinearModel, budget: u64) -> Result<Self> {
        let n = model.n();
        let s = model.sparsity();
        let required = (0..s).fold(1u128, |acc, i| acc * (n - i) as u128 / (i as u128 + 1));
        if required > budget as u128 {
            return Err(Error::Budget { required, budget });
        }
        let supports = (0..n)
            .combinations(s)
            .map(|idx| {
                let k = SupportSet::new(idx, n)?;
                let pinv = pseudo_inverse(&submatrix(model.h(), &k)?)?;
                Ok((k, pinv))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Estimator::MlSlm {
            h: model.h().clone(),
            supports,
        })
    }

    pub fn ht(threshold: f64) -> Result<Self> {
        if !(threshold >= 0.0) || !threshold.is_finite() {
            return Err(Error::InvalidArgument(format!("threshold must be finite and >= 0, got {threshold}")));
        }
        Ok(Estimator::Ht { threshold })
    }

    /// Needs `||x0||_0 = 1`; `xi` is the signed nonzero entry.
    pub fn lmvu_s1(x0: &SparseVector, sigma2: f64) -> Result<Self> {
        if x0.l0() != 1 {
            return Err(Error::Unsupported(format!(
                "the LMVU estimator is defined for exactly one nonzero entry, x0 has {}",
                x0.l0()
            )));
        }
        if !(sigma2 > 0.0) {
            return Err(Error::InvalidArgument("sigma2 must be positive".into()));
        }
        let (_, j) = xi_and_j(x0, 1);
        Ok(Estimator::LmvuS1 {
            j,
            xi: x0.get(j),
            sigma2,
        })
    }

    pub fn ls_lgm(a: &Matrix) -> Result<Self> {
        Ok(Estimator::LsLgm {
            pinv: pseudo_inverse(a)?,
        })
    }

    /// Dimension of `xhat` for an observation of length `m`.
    pub fn output_dim(&self, m: usize) -> usize {
        match self {
            Estimator::MlSlm { h, .. } => h.cols(),
            Estimator::LsLgm { pinv } => pinv.rows(),
            _ => m,
        }
    }

    /// Expected observation length, when fixed by the estimator.
    pub fn input_dim(&self) -> Option<usize> {
        match self {
            Estimator::MlSlm { h, .. } => Some(h.rows()),
            Estimator::LsLgm { pinv } => Some(pinv.cols()),
            _ => None,
        }
    }

    /// Writes `xhat(y)` into `out`, which must have length `output_dim(y.len())`.
    pub fn apply_into(&self, y: &[f64], out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.output_dim(y.len()));
        match self {
            Estimator::Identity => out.copy_from_slice(y),
            Estimator::MlSsnm { sparsity } => {
                for (k, o) in out.iter_mut().enumerate() {
                    *o = if selection_keeps(y, k, *sparsity) { y[k] } else { 0.0 };
                }
            }
            Estimator::MlSlm { h, supports } => {
                let width = supports.first().map_or(0, |(k, _)| k.len());
                let mut s = vec![0.0; width];
                let mut best_s = vec![0.0; width];
                let mut best: Option<(f64, usize)> = None;
                for (i, (k, pinv)) in supports.iter().enumerate() {
                    pinv.matvec_into(y, &mut s);
                    let mut res = 0.0;
                    for (m, ym) in y.iter().enumerate() {
                        let fit: f64 = k.indices().iter().zip(&s).map(|(&c, v)| h.get(m, c) * v).sum();
                        res += (ym - fit) * (ym - fit);
                    }
                    // strict: the lexicographically first minimizer wins
                    if best.is_none_or(|(r, _)| res < r) {
                        best = Some((res, i));
                        best_s.copy_from_slice(&s);
                    }
                }
                out.fill(0.0);
                if let Some((_, i)) = best {
                    for (&c, v) in supports[i].0.indices().iter().zip(&best_s) {
                        out[c] = *v;
                    }
                }
            }
            Estimator::Ht { threshold } => {
                for (o, v) in out.iter_mut().zip(y) {
                    *o = if v.abs() >= *threshold { *v } else { 0.0 };
                }
            }
            Estimator::LmvuS1 { j, xi, sigma2 } => {
                let alpha = (-(2.0 * y[*j] * xi + xi * xi) / (2.0 * sigma2)).exp();
                for (k, (o, v)) in out.iter_mut().zip(y).enumerate() {
                    *o = if k == *j { *v } else { alpha * v };
                }
            }
            Estimator::LsLgm { pinv } => {
                for (r, o) in out.iter_mut().enumerate() {
                    *o = crate::linalg::dot(pinv.row(r), y);
                }
            }
        }
    }

    /// `xhat(y)`.
    pub fn estimate(&self, y: &[f64]) -> Result<Vector> {
        if let Some(m) = self.input_dim() {
            if y.len() != m {
                return Err(Error::Dimension(format!("observation has length {}, expected {m}", y.len())));
            }
        }
        let mut out = vec![0.0; self.output_dim(y.len())];
        self.apply_into(y, &mut out);
        Ok(out.into())
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Estimator::Identity => write!(f, "identity"),
            Estimator::MlSsnm { sparsity } => write!(f, "ml_ssnm(S={sparsity})"),
            Estimator::MlSlm { supports, .. } => {
                write!(f, "ml_slm(S={})", supports.first().map_or(0, |(k, _)| k.len()))
            }
            Estimator::Ht { threshold } => write!(f, "ht(T={threshold})"),
            Estimator::LmvuS1 { j, xi, .. } => write!(f, "lmvu_s1(j={}, xi={xi})", j + 1),
            Estimator::LsLgm { .. } => write!(f, "ls_lgm"),
        }
    }
}

/// `P_S(y)`: keep the `S` largest magnitudes, ties to the smaller index.
pub fn ml_ssnm(y: &[f64], sparsity: usize) -> Result<SparseVector> {
    if sparsity == 0 || sparsity >= y.len() {
        return Err(Error::InvalidArgument(format!("need 1 <= S < N, got S = {sparsity}, N = {}", y.len())));
    }
    SparseVector::new(Estimator::MlSsnm { sparsity }.estimate(y)?.into_inner())
}

/// ML for the general sparse linear model by exhaustive support search.
pub fn ml_slm(y: &[f64], model: &SparseLinearModel, budget: u64) -> Result<SparseVector> {
    SparseVector::new(Estimator::ml_slm(model, budget)?.estimate(y)?.into_inner())
}

/// Hard thresholding at `T` (entries with `|y_k| = T` are kept).
pub fn ht(y: &[f64], threshold: f64) -> Result<SparseVector> {
    SparseVector::new(Estimator::ht(threshold)?.estimate(y)?.into_inner())
}

/// The `S = 1` LMVU estimator at `x0`.
pub fn lmvu_s1(y: &[f64], x0: &SparseVector, sigma2: f64) -> Result<Vector> {
    if y.len() != x0.len() {
        return Err(Error::Dimension(format!("y has length {}, x0 has length {}", y.len(), x0.len())));
    }
    Estimator::lmvu_s1(x0, sigma2)?.estimate(y)
}

/// Least squares `A^+ z`.
pub fn ls_lgm(z: &[f64], a: &Matrix) -> Result<Vector> {
    Estimator::ls_lgm(a)?.estimate(z)
}
