//! Finite-test-point Barankin bound.
//!
//! Projecting `gamma` onto `span{R(., x_i)}` gives `g^T R^{-1} g - gamma(x0)^2`
//! with `R_ij = R_{x0}(x_i, x_j)` and `g_i = gamma(x_i)`. The kernel grows like
//! `exp(u_i . u_j / sigma^2)` with `u_i = H (x_i - x0)`, so the computation runs
//! on the congruent matrix `exp(-|u_i - u_j|^2 / (2 sigma^2))` (unit diagonal)
//! with `g` scaled by `exp(-|u_i|^2 / (2 sigma^2))`.
//!
//! The solve is a pivoted Cholesky with `x0` as first pivot. Adding jitter and
//! dropping trailing pivots both shrink the projection, so the value can only
//! move down: a truncated result is still a valid lower bound.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::mean::MeanFunction;
use crate::model::{embed, restrict, SparseLinearModel, SparseVector, SupportSet};

/// Default diagonal jitter, relative to `trace / P` of the normalized Gram.
pub const DEFAULT_JITTER: f64 = 1e-12;
/// Largest tolerated ratio of first to last squared pivot.
pub const MAX_CONDITION: f64 = 1e12;

/// Test points `x_1 = x0, x_2, ...` in `X_S`.
#[derive(Debug, Clone, PartialEq)]
pub struct TestPointSet {
    points: Vec<SparseVector>,
    jitter: f64,
}

impl TestPointSet {
    /// Checks that the points are distinct, have equal length, and that
    /// there is at least one.
    pub fn new(points: Vec<SparseVector>) -> Result<Self> {
        let Some(first) = points.first() else {
            return Err(Error::InvalidArgument("test point set is empty".into()));
        };
        let n = first.len();
        let mut seen = HashSet::with_capacity(points.len());
        for p in &points {
            if p.len() != n {
                return Err(Error::Dimension("test points differ in length".into()));
            }
            let key: Vec<u64> = p.entries().iter().map(|v| (v + 0.0).to_bits()).collect();
            if !seen.insert(key) {
                return Err(Error::InvalidArgument(format!("duplicate test point {p:?}")));
            }
        }
        Ok(Self {
            points,
            jitter: DEFAULT_JITTER,
        })
    }

    pub fn with_jitter(mut self, jitter: f64) -> Result<Self> {
        if !(jitter >= 0.0) || !jitter.is_finite() {
            return Err(Error::InvalidArgument(format!("jitter must be finite and >= 0, got {jitter}")));
        }
        self.jitter = jitter;
        Ok(self)
    }

    pub fn points(&self) -> &[SparseVector] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }
}

/// Axis-aligned grid of `per_axis^|K|` points on `X_S^K`, centered at the
/// restriction of `x0` to `K`, with `x0` itself first. Grid points equal to
/// `x0` are not repeated.
pub fn grid_points(k: &SupportSet, x0: &SparseVector, half_width: f64, per_axis: usize) -> Result<TestPointSet> {
    if per_axis == 0 {
        return Err(Error::InvalidArgument("per_axis must be at least 1".into()));
    }
    if !(half_width > 0.0) || !half_width.is_finite() {
        return Err(Error::InvalidArgument(format!("half-width must be positive, got {half_width}")));
    }
    let n = x0.len();
    let mut points = vec![x0.clone()];
    if per_axis == 1 {
        return TestPointSet::new(points);
    }
    let center = restrict(x0.entries(), k);
    let offsets: Vec<f64> = (0..per_axis)
        .map(|i| half_width * (2.0 * i as f64 / (per_axis - 1) as f64 - 1.0))
        .collect();
    let dim = k.len();
    let total = per_axis.pow(dim as u32);
    let mut s = vec![0.0; dim];
    for mut idx in 0..total {
        // last coordinate varies fastest
        for a in (0..dim).rev() {
            s[a] = center[a] + offsets[idx % per_axis];
            idx /= per_axis;
        }
        let p = embed(&s, k, n)?;
        if p.entries() != x0.entries() {
            points.push(p);
        }
    }
    TestPointSet::new(points)
}

/// Value and numerical diagnostics of the finite-point bound.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub value: f64,
    /// Points kept by the pivoted factorization.
    pub usable: usize,
    pub total: usize,
    /// Ratio of largest to smallest accepted squared pivot.
    pub condition: f64,
    /// Absolute jitter added to the normalized Gram diagonal.
    pub jitter: f64,
}

impl OracleResult {
    /// Fails when pivots had to be dropped.
    pub fn require_well_conditioned(self) -> Result<Self> {
        if self.usable < self.total {
            return Err(Error::IllConditioned {
                usable: self.usable,
                total: self.total,
                condition: self.condition,
            });
        }
        Ok(self)
    }
}

/// `g^T R^{-1} g - gamma(x0)^2` over the usable subset of `pts`.
pub fn finite_point_bound(
    model: &SparseLinearModel,
    gamma: &MeanFunction,
    x0: &SparseVector,
    pts: &TestPointSet,
) -> Result<OracleResult> {
    model.check_parameter(x0)?;
    if pts.points[0].entries() != x0.entries() {
        return Err(Error::InvalidArgument("the first test point must equal x0".into()));
    }
    for p in &pts.points {
        model.check_parameter(p)?;
    }
    let p_count = pts.len();
    let two_sigma2 = 2.0 * model.sigma2();
    let hx0 = model.apply(x0.entries())?;
    let u: Vec<Vec<f64>> = pts
        .points
        .iter()
        .map(|p| {
            let hp = model.apply(p.entries())?;
            Ok(hp.iter().zip(hx0.iter()).map(|(a, b)| a - b).collect())
        })
        .collect::<Result<_>>()?;
    let g: Vec<f64> = pts
        .points
        .iter()
        .zip(&u)
        .map(|(p, ui)| Ok(gamma.evaluate(p.entries())? * (-dot(ui, ui) / two_sigma2).exp()))
        .collect::<Result<_>>()?;
    let gamma_x0 = g[0];

    let jitter = pts.jitter; // trace / P = 1
    let kernel_col = |p: usize, out: &mut [f64]| {
        for (i, o) in out.iter_mut().enumerate() {
            let d2: f64 = u[i].iter().zip(&u[p]).map(|(a, b)| (a - b) * (a - b)).sum();
            *o = (-d2 / two_sigma2).exp();
        }
        out[p] += jitter;
    };

    let mut diag = vec![1.0 + jitter; p_count];
    let mut selected = vec![false; p_count];
    let mut cols: Vec<Vec<f64>> = Vec::new();
    let mut pivots: Vec<usize> = Vec::new();
    let mut v: Vec<f64> = Vec::new();
    let mut value = 0.0;
    let first_pivot = 1.0 + jitter;
    let mut last_pivot = first_pivot;

    loop {
        let p = if pivots.is_empty() {
            0
        } else {
            match (0..p_count)
                .filter(|&i| !selected[i])
                .max_by(|&a, &b| diag[a].total_cmp(&diag[b]).then(b.cmp(&a)))
            {
                Some(p) => p,
                None => break,
            }
        };
        let d = diag[p];
        // the jitter floor is not information; stop once the rest is negligible
        if !(d - jitter > first_pivot / MAX_CONDITION) {
            break;
        }
        let mut col = vec![0.0; p_count];
        kernel_col(p, &mut col);
        for c in &cols {
            let cp = c[p];
            for (o, ci) in col.iter_mut().zip(c) {
                *o -= cp * ci;
            }
        }
        let root = d.sqrt();
        for o in col.iter_mut() {
            *o /= root;
        }
        for (i, o) in col.iter().enumerate() {
            diag[i] -= o * o;
        }
        let residual = g[p] - cols.iter().zip(&v).map(|(c, vm)| c[p] * vm).sum::<f64>();
        let vj = residual / root;
        value += vj * vj;
        v.push(vj);
        selected[p] = true;
        pivots.push(p);
        cols.push(col);
        last_pivot = d;
    }

    if !value.is_finite() {
        return Err(Error::NonFinite("finite-point bound"));
    }
    Ok(OracleResult {
        value: value - gamma_x0 * gamma_x0,
        usable: pivots.len(),
        total: p_count,
        condition: first_pivot / last_pivot,
        jitter,
    })
}
