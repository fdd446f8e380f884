//! Small dense linear algebra: Gram matrices, Cholesky solves, pseudo-inverses,
//! orthogonal projectors and the spark test.
//!
//! Every matrix in this crate is at most a few hundred rows wide, so storage is
//! a plain row-major `Vec<f64>` and the kernels are straightforward loops.

use std::fmt;
use std::ops::{Deref, DerefMut};

use itertools::Itertools;

use crate::error::{Error, Result};

/// Relative pivot tolerance for the Cholesky factorization.
pub const CHOLESKY_REL_TOL: f64 = 1e-12;
/// Relative tolerance on `|r_jj|` used by the spark test.
pub const RANK_REL_TOL: f64 = 1e-10;

/// Dense real vector with finite entries.
#[derive(Clone, Default, PartialEq)]
pub struct Vector(Vec<f64>);

impl Vector {
    /// Checked constructor: rejects NaN and infinities.
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.iter().all(|v| v.is_finite()) {
            Ok(Self(entries))
        } else {
            Err(Error::NonFinite("vector"))
        }
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    /// Standard basis vector `e_index` (0-based).
    pub fn basis(len: usize, index: usize) -> Self {
        let mut v = vec![0.0; len];
        v[index] = 1.0;
        Self(v)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        dot(&self.0, other)
    }

    pub fn norm_sq(&self) -> f64 {
        dot(&self.0, &self.0)
    }
}

impl From<Vec<f64>> for Vector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl Deref for Vector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for Vector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl fmt::Debug for Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.0.iter()).finish()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Dense row-major matrix with finite entries.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("matrix"));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, d) in diag.iter().enumerate() {
            m.data[i * n + i] = *d;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.cols + j] = value;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.get(i, j);
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, a) in self.row(i).iter().enumerate() {
                if *a == 0.0 {
                    continue;
                }
                for (o, b) in out_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, v: &[f64]) -> Result<Vector> {
        if v.len() != self.cols {
            return Err(Error::Dimension(format!(
                "{}x{} matrix applied to length-{} vector",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), v)).collect::<Vec<_>>().into())
    }

    /// `self * v` without the dimension check; `out` must have `rows` entries.
    #[inline]
    pub(crate) fn matvec_into(&self, v: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(self.row(i), v);
        }
    }

    pub fn scale(&self, factor: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }

    /// Largest absolute entrywise difference; `INFINITY` on shape mismatch.
    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        if self.rows != other.rows || self.cols != other.cols {
            return f64::INFINITY;
        }
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Columns `indices` (0-based) in the given order.
    pub fn select_columns(&self, indices: &[usize]) -> Result<Matrix> {
        if let Some(&bad) = indices.iter().find(|&&j| j >= self.cols) {
            return Err(Error::InvalidArgument(format!(
                "column {} out of range for {} columns",
                bad + 1,
                self.cols
            )));
        }
        let mut out = Self::zeros(self.rows, indices.len());
        for i in 0..self.rows {
            for (c, &j) in indices.iter().enumerate() {
                out.data[i * indices.len() + c] = self.get(i, j);
            }
        }
        Ok(out)
    }

    pub fn is_identity(&self) -> bool {
        self.is_square()
            && (0..self.rows)
                .all(|i| (0..self.cols).all(|j| self.get(i, j) == if i == j { 1.0 } else { 0.0 }))
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

/// `A^T A`, symmetrized on output.
pub fn gram(a: &Matrix) -> Result<Matrix> {
    if a.cols == 0 || a.rows < a.cols {
        return Err(Error::Dimension(format!(
            "gram needs rows >= cols >= 1, got {}x{}",
            a.rows, a.cols
        )));
    }
    let s = a.cols;
    let mut g = Matrix::zeros(s, s);
    for m in 0..a.rows {
        let row = a.row(m);
        for i in 0..s {
            if row[i] == 0.0 {
                continue;
            }
            for j in i..s {
                g.data[i * s + j] += row[i] * row[j];
            }
        }
    }
    for i in 0..s {
        for j in 0..i {
            g.data[i * s + j] = g.data[j * s + i];
        }
    }
    Ok(g)
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    /// Factors `g = L L^T` using the lower triangle of `g`.
    ///
    /// A pivot below `1e-12 * trace(g) / n` is reported as singular.
    pub fn factor(g: &Matrix) -> Result<Self> {
        if !g.is_square() || g.rows == 0 {
            return Err(Error::Dimension(format!(
                "Cholesky needs a non-empty square matrix, got {}x{}",
                g.rows, g.cols
            )));
        }
        let n = g.rows;
        let tolerance = CHOLESKY_REL_TOL * (g.trace() / n as f64).abs();
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let mut d = g.get(j, j);
            for k in 0..j {
                d -= l[j * n + k] * l[j * n + k];
            }
            if !(d > tolerance) {
                return Err(Error::Singular { pivot: d, tolerance });
            }
            let djj = d.sqrt();
            l[j * n + j] = djj;
            for i in j + 1..n {
                let mut v = g.get(i, j);
                for k in 0..j {
                    v -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = v / djj;
            }
        }
        Ok(Self { n, l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `L w = b`.
    pub fn forward(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut w = b.to_vec();
        for i in 0..n {
            let mut v = w[i];
            for k in 0..i {
                v -= self.l[i * n + k] * w[k];
            }
            w[i] = v / self.l[i * n + i];
        }
        w
    }

    /// Solves `L^T u = w`.
    pub fn backward(&self, w: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut u = w.to_vec();
        for i in (0..n).rev() {
            let mut v = u[i];
            for k in i + 1..n {
                v -= self.l[k * n + i] * u[k];
            }
            u[i] = v / self.l[i * n + i];
        }
        u
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vector> {
        if b.len() != self.n {
            return Err(Error::Dimension(format!(
                "right-hand side has length {}, expected {}",
                b.len(),
                self.n
            )));
        }
        Ok(self.backward(&self.forward(b)).into())
    }

    /// `b^T G^{-1} b` computed as `|L^{-1} b|^2`, which is never negative.
    pub fn inverse_quadratic_form(&self, b: &[f64]) -> Result<f64> {
        if b.len() != self.n {
            return Err(Error::Dimension(format!(
                "vector has length {}, expected {}",
                b.len(),
                self.n
            )));
        }
        let w = self.forward(b);
        Ok(dot(&w, &w))
    }
}

/// Solves `G u = b` for symmetric positive definite `G`.
pub fn sym_solve(g: &Matrix, b: &[f64]) -> Result<Vector> {
    Cholesky::factor(g)?.solve(b)
}

/// Moore–Penrose pseudo-inverse `(A^T A)^{-1} A^T` of a full-column-rank matrix.
pub fn pseudo_inverse(a: &Matrix) -> Result<Matrix> {
    let chol = Cholesky::factor(&gram(a)?)?;
    let (m, s) = (a.rows, a.cols);
    let mut out = Matrix::zeros(s, m);
    for i in 0..m {
        let col = chol.solve(a.row(i))?;
        for (r, v) in col.iter().enumerate() {
            out.data[r * m + i] = *v;
        }
    }
    Ok(out)
}

/// Orthogonal projector `A A^†` onto the range of `A`, symmetrized.
pub fn projector(a: &Matrix) -> Result<Matrix> {
    let mut p = a.matmul(&pseudo_inverse(a)?)?;
    let m = p.rows;
    for i in 0..m {
        for j in 0..i {
            let avg = 0.5 * (p.data[i * m + j] + p.data[j * m + i]);
            p.data[i * m + j] = avg;
            p.data[j * m + i] = avg;
        }
    }
    Ok(p)
}

/// Whether the given columns are linearly independent.
///
/// Modified Gram–Schmidt; a column is dependent when its residual norm falls
/// below `1e-10` times the largest column norm of the selection.
pub fn columns_independent(h: &Matrix, columns: &[usize]) -> bool {
    if columns.len() > h.rows {
        return false;
    }
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(columns.len());
    let cols: Vec<Vec<f64>> = columns.iter().map(|&j| h.col(j)).collect();
    let max_norm = cols
        .iter()
        .map(|c| dot(c, c).sqrt())
        .fold(0.0, f64::max);
    if max_norm == 0.0 {
        return false;
    }
    let threshold = RANK_REL_TOL * max_norm;
    for mut v in cols {
        // two passes of orthogonalization keep the residual accurate
        for _ in 0..2 {
            for q in &basis {
                let c = dot(q, &v);
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= c * qi;
                }
            }
        }
        let norm = dot(&v, &v).sqrt();
        if norm <= threshold {
            return false;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        basis.push(v);
    }
    true
}

/// True iff every set of `s` columns of `h` is linearly independent, i.e.
/// `spark(h) > s`.
pub fn spark_exceeds(h: &Matrix, s: usize) -> Result<bool> {
    if s == 0 || s >= h.cols {
        return Err(Error::InvalidArgument(format!(
            "spark test needs 1 <= S < N, got S = {s}, N = {}",
            h.cols
        )));
    }
    if h.rows < s {
        return Ok(false);
    }
    Ok((0..h.cols)
        .combinations(s)
        .all(|cols| columns_independent(h, &cols)))
}
