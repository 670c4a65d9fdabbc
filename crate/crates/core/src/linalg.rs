//! Dense small-matrix utilities.
//!
//! Everything here works on `nalgebra` dense storage and is sized for
//! exhaustive subset enumeration (a few dozen predictors at most).
//! Determinants are always carried as logarithms; a principal minor whose
//! Cholesky pivot falls below [`PIVOT_TOL`] times its diagonal entry is
//! treated as exactly singular and reported as `-inf`.

use std::cmp::Ordering;
use std::fmt;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative Cholesky pivot tolerance that defines "numerically singular".
pub const PIVOT_TOL: f64 = 1e-12;
const ABS_PIVOT_FLOOR: f64 = 1e-300;

/// Widest mask representable by [`SubsetMask`].
pub const MAX_MASK_BITS: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    values: DMatrix<f64>,
}

impl DesignMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::InvalidInput("design matrix must be at least 1x1".into()));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            let (r, c) = (pos % values.nrows(), pos / values.nrows());
            return Err(Error::InvalidInput(format!("non-finite entry at row {r}, column {c}")));
        }
        Ok(Self { values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != p) {
            return Err(Error::DimensionMismatch { expected: p, found: bad.len() });
        }
        Self::new(DMatrix::from_fn(n, p, |i, j| rows[i][j]))
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    pub fn row(&self, k: usize) -> DVector<f64> {
        self.values.row(k).transpose()
    }

    /// Rows in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> DesignMatrix {
        DesignMatrix { values: self.values.select_rows(rows.iter()) }
    }

    /// The first `n` rows.
    pub fn head(&self, n: usize) -> DesignMatrix {
        DesignMatrix { values: self.values.rows(0, n).into_owned() }
    }

    /// Columns selected by `mask`, in index order.
    pub fn columns(&self, mask: &SubsetMask) -> DMatrix<f64> {
        self.values.select_columns(mask.indices().iter())
    }
}

/// Column-centred, unit-norm design together with the transform that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizedDesign {
    pub values: DMatrix<f64>,
    pub means: DVector<f64>,
    pub scales: DVector<f64>,
}

impl StandardizedDesign {
    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    /// Apply the stored transform to a raw observation.
    pub fn transform_row(&self, x: &DVector<f64>) -> DVector<f64> {
        x.zip_zip_map(&self.means, &self.scales, |v, m, s| (v - m) / s)
    }
}

/// Symmetric positive semidefinite kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix(DMatrix<f64>);

impl KernelMatrix {
    /// Validates squareness, symmetry (1e-12) and PSD-ness (smallest eigenvalue >= -1e-10).
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if !values.is_square() {
            return Err(Error::DimensionMismatch { expected: values.nrows(), found: values.ncols() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("kernel has non-finite entries".into()));
        }
        let p = values.nrows();
        for i in 0..p {
            for j in 0..i {
                if (values[(i, j)] - values[(j, i)]).abs() > 1e-12 {
                    return Err(Error::InvalidInput(format!("kernel is not symmetric at ({i}, {j})")));
                }
            }
        }
        let kernel = Self::trusted(values);
        let min_eig = kernel.eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
        if min_eig < -1e-10 {
            return Err(Error::InvalidInput(format!(
                "kernel is not positive semidefinite (smallest eigenvalue {min_eig:e})"
            )));
        }
        Ok(kernel)
    }

    /// Wraps a matrix known to be PSD by construction, forcing exact symmetry.
    pub(crate) fn trusted(values: DMatrix<f64>) -> Self {
        let sym = (&values + values.transpose()) * 0.5;
        Self(sym)
    }

    pub fn identity(p: usize) -> Self {
        Self(DMatrix::identity(p, p))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn eigenvalues(&self) -> DVector<f64> {
        SymmetricEigen::new(self.0.clone()).eigenvalues
    }

    /// Same kernel with rows and columns reordered by `perm` (new index i takes old `perm[i]`).
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let p = self.dim();
        Self(DMatrix::from_fn(p, p, |i, j| self.0[(perm[i], perm[j])]))
    }
}

/// Inclusion indicator over at most [`MAX_MASK_BITS`] predictors.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct SubsetMask {
    bits: u64,
    len: usize,
}

impl SubsetMask {
    pub fn empty(len: usize) -> Self {
        assert!(len <= MAX_MASK_BITS, "mask length {len} exceeds {MAX_MASK_BITS}");
        Self { bits: 0, len }
    }

    pub fn full(len: usize) -> Self {
        let bits = if len == 64 { u64::MAX } else { (1u64 << len) - 1 };
        Self { bits, ..Self::empty(len) }
    }

    pub fn from_bits(len: usize, bits: u64) -> Result<Self> {
        if len > MAX_MASK_BITS {
            return Err(Error::TooLarge { p: len, limit: MAX_MASK_BITS });
        }
        if len < 64 && bits >> len != 0 {
            return Err(Error::InvalidInput(format!("bits {bits:#b} exceed mask length {len}")));
        }
        Ok(Self { bits, len })
    }

    pub fn from_indices(len: usize, indices: &[usize]) -> Result<Self> {
        if len > MAX_MASK_BITS {
            return Err(Error::TooLarge { p: len, limit: MAX_MASK_BITS });
        }
        let mut bits = 0u64;
        for &i in indices {
            if i >= len {
                return Err(Error::DimensionMismatch { expected: len, found: i + 1 });
            }
            bits |= 1 << i;
        }
        Ok(Self { bits, len })
    }

    pub fn from_bools(flags: &[bool]) -> Result<Self> {
        let idx: Vec<usize> = flags.iter().enumerate().filter(|(_, &f)| f).map(|(i, _)| i).collect();
        Self::from_indices(flags.len(), &idx)
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.bits == 0
    }

    pub fn cardinality(&self) -> usize {
        self.bits.count_ones() as usize
    }

    pub fn contains(&self, i: usize) -> bool {
        i < self.len && self.bits >> i & 1 == 1
    }

    pub fn indices(&self) -> Vec<usize> {
        (0..self.len).filter(|&i| self.contains(i)).collect()
    }

    pub fn to_bools(&self) -> Vec<bool> {
        (0..self.len).map(|i| self.contains(i)).collect()
    }

    pub fn is_subset_of(&self, other: &SubsetMask) -> bool {
        self.bits & !other.bits == 0
    }

    /// Every mask whose active bits lie inside `self`, starting from the empty mask.
    pub fn submasks(&self) -> impl Iterator<Item = SubsetMask> + '_ {
        let support = self.bits;
        let len = self.len;
        let mut next = Some(0u64);
        std::iter::from_fn(move || {
            let cur = next?;
            next = if cur == support { None } else { Some(cur.wrapping_sub(support) & support) };
            Some(SubsetMask { bits: cur, len })
        })
    }

    /// Smaller cardinality first, then lexicographic on the sorted index lists.
    pub fn parsimony_cmp(&self, other: &SubsetMask) -> Ordering {
        self.cardinality()
            .cmp(&other.cardinality())
            .then_with(|| self.indices().cmp(&other.indices()))
    }
}

impl fmt::Debug for SubsetMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SubsetMask({self})")
    }
}

/// Serialized as the list of zero-based active indices.
impl serde::Serialize for SubsetMask {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.indices())
    }
}

/// One-based set notation, e.g. `{1,3}`.
impl fmt::Display for SubsetMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let items: Vec<String> = self.indices().iter().map(|i| (i + 1).to_string()).collect();
        write!(f, "{{{}}}", items.join(","))
    }
}

/// Centre each column and scale it to unit Euclidean norm.
pub fn standardize(x: &DesignMatrix) -> Result<StandardizedDesign> {
    let v = x.values();
    let n = v.nrows() as f64;
    let mut out = v.clone();
    let mut means = DVector::zeros(v.ncols());
    let mut scales = DVector::zeros(v.ncols());
    for (j, col) in v.column_iter().enumerate() {
        let first = col[0];
        if col.iter().all(|&c| c == first) {
            return Err(Error::ConstantColumn(j));
        }
        let m = col.sum() / n;
        let s = col.iter().map(|c| (c - m) * (c - m)).sum::<f64>().sqrt();
        means[j] = m;
        scales[j] = s;
        out.column_mut(j).apply(|c| *c = (*c - m) / s);
    }
    Ok(StandardizedDesign { values: out, means, scales })
}

/// `R = X̃ᵀX̃` for a standardized design.
pub fn correlation_kernel(xs: &StandardizedDesign) -> KernelMatrix {
    let mut r = xs.values.tr_mul(&xs.values);
    for i in 0..r.nrows() {
        r[(i, i)] = 1.0;
        for j in 0..i {
            let v = r[(i, j)].clamp(-1.0, 1.0);
            r[(i, j)] = v;
            r[(j, i)] = v;
        }
    }
    KernelMatrix::trusted(r)
}

/// In-place lower Cholesky of a row-major `k×k` buffer (only the lower triangle is read).
/// Returns `log det` or `None` when a pivot is below tolerance.
fn cholesky_in_place(l: &mut [f64], k: usize) -> Option<f64> {
    let mut log_det = 0.0;
    for j in 0..k {
        let diag = l[j * k + j];
        let mut d = diag;
        for m in 0..j {
            d -= l[j * k + m] * l[j * k + m];
        }
        if !(d > PIVOT_TOL * diag) || d <= ABS_PIVOT_FLOOR {
            return None;
        }
        let ljj = d.sqrt();
        l[j * k + j] = ljj;
        log_det += d.ln();
        for i in (j + 1)..k {
            let mut s = l[i * k + j];
            for m in 0..j {
                s -= l[i * k + m] * l[j * k + m];
            }
            l[i * k + j] = s / ljj;
        }
    }
    Some(log_det)
}

/// Forward substitution `L z = b` for a row-major lower factor; returns `‖z‖²`.
fn forward_sq_norm(l: &[f64], k: usize, b: &mut [f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..k {
        let mut s = b[i];
        for m in 0..i {
            s -= l[i * k + m] * b[m];
        }
        b[i] = s / l[i * k + i];
        acc += b[i] * b[i];
    }
    acc
}

fn gather_principal(a: &DMatrix<f64>, idx: &[usize], work: &mut Vec<f64>) {
    let k = idx.len();
    work.clear();
    work.resize(k * k, 0.0);
    for (r, &i) in idx.iter().enumerate() {
        for (c, &j) in idx.iter().enumerate().take(r + 1) {
            work[r * k + c] = a[(i, j)];
        }
    }
}

/// `log det(A_idx)` using `work` as scratch; `-inf` when numerically singular.
pub(crate) fn principal_log_det(a: &DMatrix<f64>, idx: &[usize], work: &mut Vec<f64>) -> f64 {
    if idx.is_empty() {
        return 0.0;
    }
    gather_principal(a, idx, work);
    cholesky_in_place(work, idx.len()).unwrap_or(f64::NEG_INFINITY)
}

/// `log det(L_γ)`; zero for the empty set, `-inf` for a singular minor.
pub fn log_det_principal_submatrix(l: &KernelMatrix, mask: &SubsetMask) -> Result<f64> {
    if mask.len() != l.dim() {
        return Err(Error::DimensionMismatch { expected: l.dim(), found: mask.len() });
    }
    let mut work = Vec::new();
    Ok(principal_log_det(l.values(), &mask.indices(), &mut work))
}

/// `log det(A)` for a symmetric PSD matrix; `-inf` when singular.
pub fn log_det_psd(a: &DMatrix<f64>) -> f64 {
    let idx: Vec<usize> = (0..a.nrows()).collect();
    let mut work = Vec::new();
    principal_log_det(a, &idx, &mut work)
}

/// `log det(L + I)`, the log of the subset-sum of all principal minors.
pub fn log_det_plus_identity(l: &KernelMatrix) -> f64 {
    let mut a = l.values().clone();
    for i in 0..a.nrows() {
        a[(i, i)] += 1.0;
    }
    log_det_psd(&a)
}

/// Cached eigendecomposition for evaluating many fractional powers of one kernel.
#[derive(Debug, Clone)]
pub struct SpectralKernel {
    vectors: DMatrix<f64>,
    values: DVector<f64>,
}

impl SpectralKernel {
    pub fn new(r: &KernelMatrix) -> Self {
        let eig = SymmetricEigen::new(r.values().clone());
        let values = eig.eigenvalues.map(|v| v.max(0.0));
        Self { vectors: eig.eigenvectors, values }
    }

    /// Clamped eigenvalues.
    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn power(&self, alpha: f64) -> KernelMatrix {
        // powf(0, 0) == 1, so alpha = 0 gives the identity.
        let lam = self.values.map(|v| v.powf(alpha));
        let scaled = DMatrix::from_fn(self.vectors.nrows(), self.vectors.ncols(), |i, j| {
            self.vectors[(i, j)] * lam[j]
        });
        KernelMatrix::trusted(scaled * self.vectors.transpose())
    }
}

/// `R^α` via eigendecomposition with eigenvalues clamped at zero.
pub fn fractional_power(r: &KernelMatrix, alpha: f64) -> Result<KernelMatrix> {
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidParameter(format!("power must be finite and >= 0, got {alpha}")));
    }
    Ok(SpectralKernel::new(r).power(alpha))
}

/// Precomputed `XᵀX`, `Xᵀy` and `yᵀy` so projection sums of squares of any
/// column subset cost one small Cholesky.
#[derive(Debug, Clone)]
pub struct GramSystem {
    gram: DMatrix<f64>,
    xty: DVector<f64>,
    yty: f64,
}

impl GramSystem {
    pub fn new(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::DimensionMismatch { expected: x.nrows(), found: y.len() });
        }
        Ok(Self { gram: x.tr_mul(x), xty: x.tr_mul(y), yty: y.dot(y) })
    }

    pub fn yty(&self) -> f64 {
        self.yty
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn xty(&self) -> &DVector<f64> {
        &self.xty
    }

    /// `yᵀX_γ(X_γᵀX_γ)⁻¹X_γᵀy`, or `None` when `X_γ` is rank deficient.
    pub fn projection_ss(&self, idx: &[usize], work: &mut Vec<f64>, rhs: &mut Vec<f64>) -> Option<f64> {
        if idx.is_empty() {
            return Some(0.0);
        }
        let k = idx.len();
        gather_principal(&self.gram, idx, work);
        cholesky_in_place(work, k)?;
        rhs.clear();
        rhs.extend(idx.iter().map(|&i| self.xty[i]));
        Some(forward_sq_norm(work, k, rhs).clamp(0.0, self.yty))
    }
}

/// Squared norm of the orthogonal projection of `y` onto the columns of `xg`.
pub fn projection_ss(xg: &DMatrix<f64>, y: &DVector<f64>) -> Result<f64> {
    if xg.ncols() == 0 {
        return Ok(0.0);
    }
    let sys = GramSystem::new(xg, y)?;
    let idx: Vec<usize> = (0..xg.ncols()).collect();
    sys.projection_ss(&idx, &mut Vec::new(), &mut Vec::new()).ok_or(Error::RankDeficient)
}

/// Solve `A x = b` for symmetric positive definite `A` by Cholesky.
pub fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let k = a.nrows();
    if !a.is_square() || b.len() != k {
        return Err(Error::DimensionMismatch { expected: k, found: b.len() });
    }
    if k == 0 {
        return Ok(DVector::zeros(0));
    }
    let mut l = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..=i {
            l[i * k + j] = a[(i, j)];
        }
    }
    cholesky_in_place(&mut l, k).ok_or(Error::RankDeficient)?;
    let mut z = b.as_slice().to_vec();
    forward_sq_norm(&l, k, &mut z);
    // back substitution with Lᵀ
    for i in (0..k).rev() {
        let mut s = z[i];
        for m in (i + 1)..k {
            s -= l[m * k + i] * z[m];
        }
        z[i] = s / l[i * k + i];
    }
    Ok(DVector::from_vec(z))
}

/// Column means of a design.
pub fn column_means(x: &DMatrix<f64>) -> DVector<f64> {
    let n = x.nrows() as f64;
    DVector::from_iterator(x.ncols(), x.column_iter().map(|c| c.sum() / n))
}

/// Mahalanobis distance of every row from the column mean, using the
/// sample covariance with divisor `n - 1`.
pub fn mahalanobis_distances(x: &DesignMatrix) -> Result<Vec<f64>> {
    let (n, p) = (x.nrows(), x.ncols());
    if n < p + 2 {
        return Err(Error::InvalidInput(format!("need at least {} rows for {p} columns, got {n}", p + 2)));
    }
    let mean = column_means(x.values());
    let centred = DMatrix::from_fn(n, p, |i, j| x.values()[(i, j)] - mean[j]);
    let cov = centred.tr_mul(&centred) / (n as f64 - 1.0);
    let mut l = vec![0.0; p * p];
    for i in 0..p {
        for j in 0..=i {
            l[i * p + j] = cov[(i, j)];
        }
    }
    cholesky_in_place(&mut l, p).ok_or(Error::SingularCovariance)?;
    let mut buf = vec![0.0; p];
    Ok((0..n)
        .map(|k| {
            buf.iter_mut().enumerate().for_each(|(j, b)| *b = centred[(k, j)]);
            forward_sq_norm(&l, p, &mut buf).sqrt()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example2() -> KernelMatrix {
        KernelMatrix::new(DMatrix::from_row_slice(3, 3, &[1.0, 0.9, 0.0, 0.9, 1.0, 0.0, 0.0, 0.0, 1.0])).unwrap()
    }

    fn lcg_matrix(n: usize, p: usize, seed: u64) -> DMatrix<f64> {
        let mut s = seed;
        DMatrix::from_fn(n, p, |_, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        })
    }

    #[test]
    fn standardize_two_point_column() {
        let x = DesignMatrix::from_rows(&[vec![1.0], vec![-1.0]]).unwrap();
        let s = standardize(&x).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((s.values[(0, 0)] - h).abs() < 1e-15);
        assert!((s.values[(1, 0)] + h).abs() < 1e-15);
    }

    #[test]
    fn standardize_rejects_constant_column() {
        let x = DesignMatrix::from_rows(&[vec![1.0, 3.0], vec![2.0, 3.0], vec![4.0, 3.0]]).unwrap();
        assert_eq!(standardize(&x), Err(Error::ConstantColumn(1)));
    }

    #[test]
    fn standardize_matches_definition() {
        let raw = lcg_matrix(5, 3, 7);
        let s = standardize(&DesignMatrix::new(raw.clone()).unwrap()).unwrap();
        for j in 0..3 {
            let m: f64 = (0..5).map(|i| raw[(i, j)]).sum::<f64>() / 5.0;
            let sd: f64 = (0..5).map(|i| (raw[(i, j)] - m).powi(2)).sum::<f64>().sqrt();
            for i in 0..5 {
                assert!((s.values[(i, j)] - (raw[(i, j)] - m) / sd).abs() < 1e-14);
            }
            assert!(s.values.column(j).sum().abs() < 1e-10 * 5.0);
            assert!((s.values.column(j).norm() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn correlation_of_duplicate_columns_is_one() {
        let mut raw = lcg_matrix(8, 3, 3);
        let c0 = raw.column(0).into_owned();
        raw.set_column(2, &c0);
        let r = correlation_kernel(&standardize(&DesignMatrix::new(raw).unwrap()).unwrap());
        assert!((r.get(0, 2) - 1.0).abs() < 1e-12);
        assert!((r.get(1, 1) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn orthogonal_columns_give_identity_kernel() {
        let x = DesignMatrix::from_rows(&[
            vec![1.0, 1.0],
            vec![1.0, -1.0],
            vec![-1.0, 1.0],
            vec![-1.0, -1.0],
        ])
        .unwrap();
        let r = correlation_kernel(&standardize(&x).unwrap());
        assert!((r.values() - DMatrix::identity(2, 2)).abs().max() < 1e-15);
    }

    #[test]
    fn principal_log_dets() {
        let l = example2();
        assert_eq!(log_det_principal_submatrix(&l, &SubsetMask::empty(3)).unwrap(), 0.0);
        let m12 = SubsetMask::from_indices(3, &[0, 1]).unwrap();
        assert!((log_det_principal_submatrix(&l, &m12).unwrap() - 0.19f64.ln()).abs() < 1e-12);
        let d = KernelMatrix::new(DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 3.0]))).unwrap();
        let full = SubsetMask::full(2);
        assert!((log_det_principal_submatrix(&d, &full).unwrap() - 6f64.ln()).abs() < 1e-12);
        assert!(log_det_principal_submatrix(&d, &SubsetMask::full(3)).is_err());
    }

    #[test]
    fn singular_minor_is_negative_infinity() {
        let l = KernelMatrix::new(DMatrix::from_element(2, 2, 1.0)).unwrap();
        assert_eq!(log_det_principal_submatrix(&l, &SubsetMask::full(2)).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn log_det_plus_identity_cases() {
        assert!((log_det_plus_identity(&example2()) - 6.38f64.ln()).abs() < 1e-12);
        assert_eq!(log_det_plus_identity(&KernelMatrix::trusted(DMatrix::zeros(3, 3))), 0.0);
        let w: f64 = 0.3;
        let l = KernelMatrix::trusted(DMatrix::identity(4, 4) * (w / (1.0 - w)));
        assert!((log_det_plus_identity(&l) - 4.0 * (1.0 / (1.0 - w)).ln()).abs() < 1e-12);
    }

    #[test]
    fn fractional_power_endpoints_and_square_root() {
        let r = example2();
        let one = fractional_power(&r, 1.0).unwrap();
        assert!((one.values() - r.values()).abs().max() < 1e-10);
        let zero = fractional_power(&r, 0.0).unwrap();
        assert!((zero.values() - DMatrix::identity(3, 3)).abs().max() < 1e-12);
        let half = fractional_power(&r, 0.5).unwrap();
        assert!((half.values() * half.values() - r.values()).abs().max() < 1e-8);
        assert!(fractional_power(&r, -1.0).is_err());
    }

    #[test]
    fn projection_ss_cases() {
        let x = lcg_matrix(10, 2, 11);
        let y = DVector::from_iterator(10, lcg_matrix(10, 1, 5).iter().copied());
        assert_eq!(projection_ss(&DMatrix::zeros(10, 0), &y).unwrap(), 0.0);
        // y in the column span
        let inside = &x * DVector::from_vec(vec![2.0, -1.0]);
        assert!((projection_ss(&x, &inside).unwrap() - inside.dot(&inside)).abs() < 1e-10);
        // explicit normal equations
        let beta = (x.transpose() * &x).try_inverse().unwrap() * x.transpose() * &y;
        let fitted = &x * beta;
        assert!((projection_ss(&x, &y).unwrap() - fitted.dot(&fitted)).abs() < 1e-12);
    }

    #[test]
    fn projection_ss_rank_deficient() {
        let mut x = lcg_matrix(6, 2, 2);
        let c = x.column(0) * 3.0;
        x.set_column(1, &c);
        let y = DVector::from_element(6, 1.0);
        assert_eq!(projection_ss(&x, &y), Err(Error::RankDeficient));
    }

    #[test]
    fn mahalanobis_cases() {
        let raw = lcg_matrix(50, 3, 9);
        let x = DesignMatrix::new(raw.clone()).unwrap();
        let d = mahalanobis_distances(&x).unwrap();
        let total: f64 = d.iter().map(|v| v * v).sum();
        assert!((total - 3.0 * 49.0).abs() < 1e-8);

        // one-dimensional reduction
        let col = DMatrix::from_column_slice(5, 1, &[1.0, 2.0, 4.0, 7.0, 11.0]);
        let d1 = mahalanobis_distances(&DesignMatrix::new(col.clone()).unwrap()).unwrap();
        let m = col.mean();
        let sd = (col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / 4.0).sqrt();
        for (k, dk) in d1.iter().enumerate() {
            assert!((dk - (col[k] - m).abs() / sd).abs() < 1e-12);
        }

        // appending the mean row leaves the mean unchanged, so its distance is zero
        let mut with_mean = raw.clone().insert_row(50, 0.0);
        let mu = column_means(&raw);
        with_mean.row_mut(50).copy_from(&mu.transpose());
        let dm = mahalanobis_distances(&DesignMatrix::new(with_mean).unwrap()).unwrap();
        assert!(dm[50] < 1e-12);
    }

    #[test]
    fn submask_enumeration() {
        let s = SubsetMask::from_indices(5, &[1, 3, 4]).unwrap();
        let subs: Vec<SubsetMask> = s.submasks().collect();
        assert_eq!(subs.len(), 8);
        assert!(subs.iter().all(|m| m.is_subset_of(&s)));
        assert_eq!(subs[0], SubsetMask::empty(5));
        assert_eq!(SubsetMask::full(3).to_string(), "{1,2,3}");
    }

    #[test]
    fn parsimony_ordering() {
        let a = SubsetMask::from_indices(4, &[0, 3]).unwrap();
        let b = SubsetMask::from_indices(4, &[1, 2]).unwrap();
        let c = SubsetMask::from_indices(4, &[3]).unwrap();
        assert_eq!(a.parsimony_cmp(&b), Ordering::Less);
        assert_eq!(c.parsimony_cmp(&a), Ordering::Less);
    }

    #[test]
    fn kernel_validation() {
        assert!(KernelMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0])).is_err());
        assert!(KernelMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0])).is_err());
        assert!(KernelMatrix::new(DMatrix::zeros(2, 3)).is_err());
    }
}
