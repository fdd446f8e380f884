//! Problem instances: the sparse linear model `y = Hx + n`, sparse parameter
//! vectors, support sets, the isometry ingredients `s0` and `beta`, and the two
//! RKHS kernels.
//!
//! Indices are 0-based inside the library. Everything rendered for people
//! (`Display`, the CLI, CSV files) is 1-based.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{dot, pseudo_inverse, spark_exceeds, Cholesky, Matrix, Vector};

/// Sparse linear model `y = H x + n`, `n ~ N(0, sigma2 I)`, `||x||_0 <= S`.
#[derive(Debug, Clone)]
pub struct SparseLinearModel {
    h: Matrix,
    sigma2: f64,
    sparsity: usize,
    identity: bool,
}

impl SparseLinearModel {
    /// Validates `sigma2 > 0`, `1 <= S < N` and `spark(H) > S`.
    pub fn new(h: Matrix, sigma2: f64, sparsity: usize) -> Result<Self> {
        if !(sigma2 > 0.0) || !sigma2.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "noise variance must be positive, got {sigma2}"
            )));
        }
        if sparsity == 0 || sparsity >= h.cols() {
            return Err(Error::InvalidArgument(format!(
                "sparsity must satisfy 1 <= S < N, got S = {sparsity}, N = {}",
                h.cols()
            )));
        }
        // spark(I_N) = N + 1 > S
        let identity = h.is_identity();
        if !identity && !spark_exceeds(&h, sparsity)? {
            return Err(Error::Spark(sparsity));
        }
        Ok(Self {
            h,
            sigma2,
            sparsity,
            identity,
        })
    }

    /// Sparse signal in noise: `H = I_N`.
    pub fn ssnm(n: usize, sparsity: usize, sigma2: f64) -> Result<Self> {
        Self::new(Matrix::identity(n), sigma2, sparsity)
    }

    pub fn h(&self) -> &Matrix {
        &self.h
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }

    pub fn sparsity(&self) -> usize {
        self.sparsity
    }

    /// Parameter dimension `N`.
    pub fn n(&self) -> usize {
        self.h.cols()
    }

    /// Observation dimension `M`.
    pub fn m(&self) -> usize {
        self.h.rows()
    }

    pub fn is_ssnm(&self) -> bool {
        self.identity
    }

    /// `H x`.
    pub fn apply(&self, x: &[f64]) -> Result<Vector> {
        if self.identity {
            if x.len() != self.n() {
                return Err(Error::Dimension(format!(
                    "parameter has length {}, expected {}",
                    x.len(),
                    self.n()
                )));
            }
            return Ok(x.to_vec().into());
        }
        self.h.matvec(x)
    }

    pub(crate) fn check_parameter(&self, x: &SparseVector) -> Result<()> {
        if x.len() != self.n() {
            return Err(Error::Dimension(format!(
                "parameter has length {}, model has N = {}",
                x.len(),
                self.n()
            )));
        }
        if x.l0() > self.sparsity {
            return Err(Error::InvalidArgument(format!(
                "parameter has {} nonzeros but S = {}",
                x.l0(),
                self.sparsity
            )));
        }
        Ok(())
    }
}

/// Linear Gaussian model `z = A s + n` with an unconstrained parameter `s`.
#[derive(Debug, Clone)]
pub struct LinearGaussianModel {
    a: Matrix,
    sigma2: f64,
}

impl LinearGaussianModel {
    pub fn new(a: Matrix, sigma2: f64) -> Result<Self> {
        if !(sigma2 > 0.0) || !sigma2.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "noise variance must be positive, got {sigma2}"
            )));
        }
        // full column rank
        Cholesky::factor(&crate::linalg::gram(&a)?)?;
        Ok(Self { a, sigma2 })
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }
}

/// Parameter vector of the sparse linear model.
#[derive(Clone, PartialEq)]
pub struct SparseVector {
    entries: Vector,
}

impl SparseVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        Ok(Self {
            entries: Vector::new(entries)?,
        })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            entries: Vector::zeros(n),
        }
    }

    /// Builds a length-`n` vector from `(index, value)` pairs.
    pub fn from_pairs(n: usize, pairs: &[(usize, f64)]) -> Result<Self> {
        let mut entries = vec![0.0; n];
        for &(i, v) in pairs {
            if i >= n {
                return Err(Error::InvalidArgument(format!(
                    "index {} out of range for N = {n}",
                    i + 1
                )));
            }
            entries[i] = v;
        }
        Self::new(entries)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn get(&self, k: usize) -> f64 {
        self.entries[k]
    }

    /// Indices of the nonzero entries, increasing.
    pub fn support(&self) -> Vec<usize> {
        self.entries
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn l0(&self) -> usize {
        self.entries.iter().filter(|v| **v != 0.0).count()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            entries: self.entries.iter().map(|v| v * c).collect::<Vec<_>>().into(),
        }
    }
}

impl fmt::Debug for SparseVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SparseVector({:?})", &*self.entries)
    }
}

/// Strictly increasing set of column indices `K`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SupportSet {
    indices: Vec<usize>,
}

impl SupportSet {
    /// `indices` must be strictly increasing and below `n`.
    pub fn new(indices: Vec<usize>, n: usize) -> Result<Self> {
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(format!(
                "support indices must be strictly increasing: {indices:?}"
            )));
        }
        if indices.last().is_some_and(|&i| i >= n) {
            return Err(Error::InvalidArgument(format!(
                "support index {} out of range for N = {n}",
                indices.last().unwrap() + 1
            )));
        }
        Ok(Self { indices })
    }

    /// From 1-based indices in any order.
    pub fn from_one_based(indices: &[usize], n: usize) -> Result<Self> {
        if indices.contains(&0) {
            return Err(Error::InvalidArgument("1-based index 0".into()));
        }
        let mut v: Vec<usize> = indices.iter().map(|i| i - 1).collect();
        v.sort_unstable();
        Self::new(v, n)
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, k: usize) -> bool {
        self.indices.binary_search(&k).is_ok()
    }

    /// Position of `k` within the set.
    pub fn position(&self, k: usize) -> Option<usize> {
        self.indices.binary_search(&k).ok()
    }

    pub fn one_based(&self) -> Vec<usize> {
        self.indices.iter().map(|i| i + 1).collect()
    }
}

impl fmt::Debug for SupportSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for SupportSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, k) in self.indices.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", k + 1)?;
        }
        write!(f, "}}")
    }
}

/// `s0 = H_K^† H x0`, `beta = exp(-||(I - P_K) H x0||^2 / (2 sigma2))`.
#[derive(Debug, Clone, PartialEq)]
pub struct IsometryData {
    pub s0: Vector,
    pub beta: f64,
    pub residual_energy: f64,
}

/// Value and index of the `S`-largest-magnitude entry of `x0`.
///
/// Magnitude ties go to the smaller index. When `x0` has fewer than `S`
/// nonzeros the value is 0 and the index is the smallest one outside the
/// support.
pub fn xi_and_j(x0: &SparseVector, s: usize) -> (f64, usize) {
    let n = x0.len();
    if x0.l0() < s || s == 0 {
        let j = (0..n).find(|&i| x0.get(i) == 0.0).unwrap_or(0);
        return (0.0, j);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        x0.get(b)
            .abs()
            .total_cmp(&x0.get(a).abs())
            .then(a.cmp(&b))
    });
    let j = order[s - 1];
    (x0.get(j), j)
}

/// `H_K`: column `i` is column `k_i` of `H`.
pub fn submatrix(h: &Matrix, k: &SupportSet) -> Result<Matrix> {
    h.select_columns(k.indices())
}

/// `x(s)`: the length-`n` vector with `x^K = s` and zeros off `K`.
pub fn embed(s: &[f64], k: &SupportSet, n: usize) -> Result<SparseVector> {
    if s.len() != k.len() {
        return Err(Error::Dimension(format!(
            "|s| = {} but |K| = {}",
            s.len(),
            k.len()
        )));
    }
    if k.indices().last().is_some_and(|&i| i >= n) {
        return Err(Error::InvalidArgument(format!("support {k} exceeds N = {n}")));
    }
    let mut entries = vec![0.0; n];
    for (v, &i) in s.iter().zip(k.indices()) {
        entries[i] = *v;
    }
    SparseVector::new(entries)
}

/// `x^K`: the entries of `x` at the positions in `K`.
pub fn restrict(x: &[f64], k: &SupportSet) -> Vector {
    k.indices().iter().map(|&i| x[i]).collect::<Vec<_>>().into()
}

pub fn isometry_data(
    model: &SparseLinearModel,
    k: &SupportSet,
    x0: &SparseVector,
) -> Result<IsometryData> {
    if k.len() != model.sparsity() {
        return Err(Error::InvalidArgument(format!(
            "|K| = {} but S = {}",
            k.len(),
            model.sparsity()
        )));
    }
    model.check_parameter(x0)?;
    let sigma2 = model.sigma2();
    if model.is_ssnm() {
        let s0 = restrict(x0.entries(), k);
        let residual_energy: f64 = (0..model.n())
            .filter(|i| !k.contains(*i))
            .map(|i| x0.get(i) * x0.get(i))
            .sum();
        return Ok(IsometryData {
            s0,
            beta: (-residual_energy / (2.0 * sigma2)).exp(),
            residual_energy,
        });
    }
    let hk = submatrix(model.h(), k)?;
    let pinv = pseudo_inverse(&hk)?;
    let hx0 = model.apply(x0.entries())?;
    let s0 = pinv.matvec(&hx0)?;
    let fitted = hk.matvec(&s0)?;
    let residual_energy: f64 = hx0
        .iter()
        .zip(fitted.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(IsometryData {
        s0,
        beta: (-residual_energy / (2.0 * sigma2)).exp(),
        residual_energy,
    })
}

/// `R_{x0}(x, x') = exp((H(x - x0))^T (H(x' - x0)) / sigma2)`.
pub fn kernel_slm(
    x: &SparseVector,
    x2: &SparseVector,
    x0: &SparseVector,
    model: &SparseLinearModel,
) -> Result<f64> {
    let n = model.n();
    if x.len() != n || x2.len() != n || x0.len() != n {
        return Err(Error::Dimension("kernel arguments must have length N".into()));
    }
    let d1: Vec<f64> = x.entries().iter().zip(x0.entries()).map(|(a, b)| a - b).collect();
    let d2: Vec<f64> = x2.entries().iter().zip(x0.entries()).map(|(a, b)| a - b).collect();
    let u1 = model.apply(&d1)?;
    let u2 = model.apply(&d2)?;
    Ok((dot(&u1, &u2) / model.sigma2()).exp())
}

/// `R^LGM_{s0}(s, s') = exp((A(s - s0))^T (A(s' - s0)) / sigma2)`.
pub fn kernel_lgm(s: &[f64], s2: &[f64], s0: &[f64], a: &Matrix, sigma2: f64) -> Result<f64> {
    let d1: Vec<f64> = s.iter().zip(s0).map(|(p, q)| p - q).collect();
    let d2: Vec<f64> = s2.iter().zip(s0).map(|(p, q)| p - q).collect();
    if d1.len() != a.cols() || d2.len() != a.cols() || s.len() != s0.len() || s2.len() != s0.len() {
        return Err(Error::Dimension("kernel arguments must have length S".into()));
    }
    let u1 = a.matvec(&d1)?;
    let u2 = a.matvec(&d2)?;
    Ok((dot(&u1, &u2) / sigma2).exp())
}

/// Noise whitening: returns `(W y, W H)` with `W = L^{-1}`, `Sigma = L L^T`.
pub fn whiten(y: &[f64], h: &Matrix, sigma: &Matrix) -> Result<(Vector, Matrix)> {
    if !sigma.is_square() || sigma.rows() != y.len() || h.rows() != y.len() {
        return Err(Error::Dimension(format!(
            "whitening needs an MxM covariance for M = {}",
            y.len()
        )));
    }
    let chol = Cholesky::factor(sigma)?;
    let wy = chol.forward(y);
    let mut wh = Matrix::zeros(h.rows(), h.cols());
    for j in 0..h.cols() {
        let col = chol.forward(&h.col(j));
        for (i, v) in col.into_iter().enumerate() {
            wh.set(i, j, v);
        }
    }
    Ok((wy.into(), wh))
}

/// Seeded i.i.d. `N(0, 1/M)` matrix (columns have roughly unit norm).
pub fn gaussian_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1.0 / (rows as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z * scale
        })
        .collect();
    Matrix::new(rows, cols, data).expect("finite gaussian entries")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sv(v: &[f64]) -> SparseVector {
        SparseVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn xi_and_j_examples() {
        // 1-based (-1, 3)
        assert_eq!(xi_and_j(&sv(&[3.0, 0.0, -1.0]), 2), (-1.0, 2));
        // 1-based (0, 2)
        assert_eq!(xi_and_j(&sv(&[3.0, 0.0, 0.0]), 2), (0.0, 1));
        assert_eq!(xi_and_j(&sv(&[0.0, 0.0, 0.0]), 1), (0.0, 0));
        // magnitude tie: smaller index ranks first
        assert_eq!(xi_and_j(&sv(&[2.0, -2.0, 0.0]), 2), (-2.0, 1));
        assert_eq!(xi_and_j(&sv(&[2.0, -2.0, 0.0]), 1), (2.0, 0));
    }

    #[test]
    fn submatrix_examples() {
        let h = Matrix::identity(3);
        let k = SupportSet::from_one_based(&[2], 3).unwrap();
        assert_eq!(submatrix(&h, &k).unwrap().col(0), vec![0.0, 1.0, 0.0]);
        let all = SupportSet::new(vec![0, 1, 2], 3).unwrap();
        assert_eq!(submatrix(&h, &all).unwrap(), h);
        let g = gaussian_matrix(3, 4, 2);
        let k13 = SupportSet::from_one_based(&[1, 3], 4).unwrap();
        let sub = submatrix(&g, &k13).unwrap();
        for i in 0..3 {
            assert_eq!(sub.get(i, 0), g.get(i, 0));
            assert_eq!(sub.get(i, 1), g.get(i, 2));
        }
        assert!(submatrix(&g, &SupportSet { indices: vec![7] }).is_err());
    }

    #[test]
    fn support_set_validation() {
        assert!(SupportSet::new(vec![1, 1], 3).is_err());
        assert!(SupportSet::new(vec![2, 1], 3).is_err());
        assert!(SupportSet::new(vec![3], 3).is_err());
        assert_eq!(SupportSet::from_one_based(&[3, 1], 3).unwrap().indices(), &[0, 2]);
        assert_eq!(format!("{}", SupportSet::new(vec![0, 2], 3).unwrap()), "{1,3}");
    }

    #[test]
    fn embed_examples() {
        let k = SupportSet::from_one_based(&[3], 4).unwrap();
        assert_eq!(embed(&[5.0], &k, 4).unwrap().entries(), &[0.0, 0.0, 5.0, 0.0]);
        assert_eq!(embed(&[0.0], &k, 4).unwrap().l0(), 0);
        assert!(embed(&[1.0, 2.0], &k, 4).is_err());
    }

    #[test]
    fn model_validation() {
        assert!(SparseLinearModel::ssnm(3, 0, 1.0).is_err());
        assert!(SparseLinearModel::ssnm(3, 3, 1.0).is_err());
        assert!(SparseLinearModel::ssnm(3, 1, 0.0).is_err());
        let dup = Matrix::from_rows(&[&[1.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]).unwrap();
        assert_eq!(SparseLinearModel::new(dup, 1.0, 2).unwrap_err(), Error::Spark(2));
        assert!(SparseLinearModel::ssnm(3, 1, 1.0).unwrap().is_ssnm());
    }

    #[test]
    fn isometry_ssnm_examples() {
        let model = SparseLinearModel::ssnm(3, 1, 1.0).unwrap();
        let x0 = sv(&[2.0, 0.0, 0.0]);
        let iso = isometry_data(&model, &SupportSet::new(vec![0], 3).unwrap(), &x0).unwrap();
        assert_eq!(&*iso.s0, &[2.0]);
        assert_eq!(iso.beta, 1.0);
        let iso = isometry_data(&model, &SupportSet::new(vec![1], 3).unwrap(), &x0).unwrap();
        assert_eq!(&*iso.s0, &[0.0]);
        assert_eq!(iso.residual_energy, 4.0);
        assert_relative_eq!(iso.beta, (-2.0f64).exp(), max_relative = 1e-15);
    }

    #[test]
    fn isometry_general_matches_normal_equations() {
        // H = [[1,1,0],[0,1,1]], x0 = e1, K = {2,3}
        let h = Matrix::from_rows(&[&[1.0, 1.0, 0.0], &[0.0, 1.0, 1.0]]).unwrap();
        let model = SparseLinearModel::new(h, 1.0, 2).unwrap();
        let x0 = sv(&[1.0, 0.0, 0.0]);
        let k = SupportSet::from_one_based(&[2, 3], 3).unwrap();
        let iso = isometry_data(&model, &k, &x0).unwrap();
        // H_K = [[1,0],[1,1]] is invertible: s0 solves H_K s = (1,0), so s0 = (1,-1)
        assert_relative_eq!(iso.s0[0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(iso.s0[1], -1.0, epsilon = 1e-14);
        assert!(iso.residual_energy < 1e-28);
        assert_relative_eq!(iso.beta, 1.0, epsilon = 1e-14);

        // 3x3 case with a nonzero residual
        let h = Matrix::from_rows(&[&[1.0, 1.0, 0.0], &[0.0, 1.0, 1.0], &[1.0, 0.0, 1.0]]).unwrap();
        let model = SparseLinearModel::new(h, 1.0, 1).unwrap();
        let k = SupportSet::from_one_based(&[2], 3).unwrap();
        let iso = isometry_data(&model, &k, &x0).unwrap();
        // H x0 = (1,0,1), h2 = (1,1,0): s0 = <h2,Hx0>/|h2|^2 = 1/2, residual (1/2,-1/2,1)
        assert_relative_eq!(iso.s0[0], 0.5, epsilon = 1e-14);
        assert_relative_eq!(iso.residual_energy, 1.5, epsilon = 1e-14);
        assert_relative_eq!(iso.beta, (-0.75f64).exp(), epsilon = 1e-14);
    }

    #[test]
    fn kernel_examples() {
        let model = SparseLinearModel::ssnm(3, 1, 1.0).unwrap();
        let zero = SparseVector::zeros(3);
        let e1 = sv(&[1.0, 0.0, 0.0]);
        assert_eq!(kernel_slm(&zero, &e1, &zero, &model).unwrap(), 1.0);
        assert_relative_eq!(kernel_slm(&e1, &e1, &zero, &model).unwrap(), 1f64.exp(), max_relative = 1e-15);
        let a = sv(&[2.0, 0.0, 0.0]);
        let b = sv(&[3.0, 0.0, 0.0]);
        assert_relative_eq!(kernel_slm(&a, &b, &zero, &model).unwrap(), 6f64.exp(), max_relative = 1e-14);

        let ident = Matrix::identity(1);
        assert_eq!(kernel_lgm(&[0.3], &[0.7], &[0.3], &ident, 1.0).unwrap(), 1.0);
        assert_relative_eq!(kernel_lgm(&[1.0], &[1.0], &[0.0], &ident, 1.0).unwrap(), 1f64.exp(), max_relative = 1e-15);
    }

    #[test]
    fn whiten_examples() {
        let y = [2.0, -4.0];
        let h = Matrix::from_rows(&[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]]).unwrap();
        let (wy, wh) = whiten(&y, &h, &Matrix::identity(2)).unwrap();
        assert_eq!(&*wy, &y);
        assert_eq!(wh, h);
        let (wy, wh) = whiten(&y, &h, &Matrix::from_diag(&[4.0, 4.0])).unwrap();
        assert_eq!(&*wy, &[1.0, -2.0]);
        assert_eq!(wh, h.scale(0.5));
        let not_spd = Matrix::from_rows(&[&[1.0, 2.0], &[2.0, 1.0]]).unwrap();
        assert!(matches!(whiten(&y, &h, &not_spd), Err(Error::Singular { .. })));
    }
}
