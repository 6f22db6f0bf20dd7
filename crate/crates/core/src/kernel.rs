//! Dense complex matrices, Hermitian eigendecomposition, norms and
//! tolerance-aware predicates.
//!
//! Everything above this module talks to matrices through [`ComplexMatrix`],
//! a thin newtype over `nalgebra::DMatrix<Complex64>`. The newtype pins down
//! the serialized form (rows of `[re, im]` pairs) and keeps the arithmetic
//! surface small.

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Complex scalar used throughout the crate.
pub type Scalar = Complex64;

pub const ZERO: Scalar = Complex64::new(0.0, 0.0);
pub const ONE: Scalar = Complex64::new(1.0, 0.0);
pub const I: Scalar = Complex64::new(0.0, 1.0);

/// Absolute and relative tolerance used by every predicate in the crate.
///
/// A quantity `q` derived from inputs of magnitude `s` passes when
/// `q <= absolute + relative * s`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub absolute: f64,
    pub relative: f64,
}

impl Tolerance {
    pub fn new(absolute: f64, relative: f64) -> Result<Self> {
        if !(absolute.is_finite() && relative.is_finite() && absolute >= 0.0 && relative >= 0.0) {
            return Err(Error::InvalidTolerance { absolute, relative });
        }
        Ok(Self { absolute, relative })
    }

    /// Purely absolute tolerance.
    pub fn absolute(absolute: f64) -> Self {
        Self { absolute, relative: 0.0 }
    }

    /// Allowed defect for a quantity at magnitude `scale`.
    pub fn bound(&self, scale: f64) -> f64 {
        self.absolute + self.relative * scale
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Self { absolute: 1e-9, relative: 1e-9 }
    }
}

/// Dense complex matrix.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix(DMatrix<Scalar>);

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self(DMatrix::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> Scalar) -> Self {
        Self(DMatrix::from_fn(rows, cols, f))
    }

    /// Matrix unit `E_ij` of size `n x n`.
    pub fn unit(n: usize, i: usize, j: usize) -> Self {
        let mut m = Self::zeros(n, n);
        m[(i, j)] = ONE;
        m
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self::from_fn(n, n, |i, j| if i == j { Scalar::new(diag[i], 0.0) } else { ZERO })
    }

    /// Builds a matrix from real row slices. Panics on ragged input.
    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Self::from_fn(r, c, |i, j| Scalar::new(rows[i][j], 0.0))
    }

    /// Builds a matrix from complex rows. Panics on ragged input.
    pub fn from_rows(rows: &[Vec<Scalar>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Self::from_fn(r, c, |i, j| rows[i][j])
    }

    /// Column vector.
    pub fn column(entries: &[Scalar]) -> Self {
        Self::from_fn(entries.len(), 1, |i, _| entries[i])
    }

    /// Rank-one operator `v v*` for a column vector given by its entries.
    pub fn outer(v: &[Scalar]) -> Self {
        let n = v.len();
        Self::from_fn(n, n, |i, j| v[i] * v[j].conj())
    }

    pub fn from_inner(inner: DMatrix<Scalar>) -> Self {
        Self(inner)
    }

    pub fn inner(&self) -> &DMatrix<Scalar> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<Scalar> {
        self.0
    }

    pub fn nrows(&self) -> usize {
        self.0.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.0.ncols()
    }

    pub fn is_square(&self) -> bool {
        self.nrows() == self.ncols()
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn conj(&self) -> Self {
        Self(self.0.map(|z| z.conj()))
    }

    pub fn trace(&self) -> Scalar {
        self.0.trace()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn scale(&self, s: Scalar) -> Self {
        Self(&self.0 * s)
    }

    pub fn scale_real(&self, s: f64) -> Self {
        Self(&self.0 * Scalar::new(s, 0.0))
    }

    /// `(A + A*) / 2`.
    pub fn hermitian_part(&self) -> Self {
        Self((&self.0 + self.0.adjoint()) * Scalar::new(0.5, 0.0))
    }

    /// `||A - A*||_F`.
    pub fn hermitian_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        (&self.0 - self.0.adjoint()).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Kronecker product `self ⊗ rhs`.
    pub fn kron(&self, rhs: &Self) -> Self {
        Self(self.0.kronecker(&rhs.0))
    }

    /// Copy of the square diagonal block starting at `offset`.
    pub fn diagonal_block(&self, offset: usize, size: usize) -> Self {
        Self(self.0.view((offset, offset), (size, size)).into_owned())
    }

    /// Overwrites the square diagonal block starting at `offset`.
    pub fn set_diagonal_block(&mut self, offset: usize, block: &Self) {
        let size = block.nrows();
        self.0.view_mut((offset, offset), (size, size)).copy_from(&block.0);
    }

    /// Direct sum `self ⊕ rhs`.
    pub fn direct_sum(&self, rhs: &Self) -> Self {
        let mut out = Self::zeros(self.nrows() + rhs.nrows(), self.ncols() + rhs.ncols());
        out.0.view_mut((0, 0), (self.nrows(), self.ncols())).copy_from(&self.0);
        out.0
            .view_mut((self.nrows(), self.ncols()), (rhs.nrows(), rhs.ncols()))
            .copy_from(&rhs.0);
        out
    }

    /// `tr(self * rhs)` without forming the product.
    pub fn trace_product(&self, rhs: &Self) -> Scalar {
        assert_eq!(self.ncols(), rhs.nrows());
        assert_eq!(self.nrows(), rhs.ncols());
        let mut acc = ZERO;
        for i in 0..self.nrows() {
            for k in 0..self.ncols() {
                acc += self.0[(i, k)] * rhs.0[(k, i)];
            }
        }
        acc
    }

    /// Frobenius norm of `self - rhs`.
    pub fn distance(&self, rhs: &Self) -> f64 {
        assert_eq!(self.shape(), rhs.shape(), "shape mismatch");
        self.0
            .iter()
            .zip(rhs.0.iter())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }

    /// Entries in row-major order.
    pub fn row_major(&self) -> Vec<Scalar> {
        let mut out = Vec::with_capacity(self.nrows() * self.ncols());
        for i in 0..self.nrows() {
            for j in 0..self.ncols() {
                out.push(self.0[(i, j)]);
            }
        }
        out
    }

    /// Matrix-vector product on raw entries.
    pub fn apply(&self, v: &[Scalar]) -> Vec<Scalar> {
        assert_eq!(self.ncols(), v.len());
        (0..self.nrows())
            .map(|i| (0..self.ncols()).map(|j| self.0[(i, j)] * v[j]).sum())
            .collect()
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ComplexMatrix{:?}", self.shape())?;
        let mut list = f.debug_list();
        for i in 0..self.nrows() {
            let row: Vec<String> = (0..self.ncols())
                .map(|j| {
                    let z = self.0[(i, j)];
                    format!("{:.4}{:+.4}i", z.re, z.im)
                })
                .collect();
            list.entry(&row);
        }
        list.finish()
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Scalar;
    fn index(&self, idx: (usize, usize)) -> &Scalar {
        &self.0[idx]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, idx: (usize, usize)) -> &mut Scalar {
        &mut self.0[idx]
    }
}

macro_rules! forward_binop {
    ($trait:ident, $method:ident, $op:tt) => {
        impl $trait<&ComplexMatrix> for &ComplexMatrix {
            type Output = ComplexMatrix;
            fn $method(self, rhs: &ComplexMatrix) -> ComplexMatrix {
                ComplexMatrix(&self.0 $op &rhs.0)
            }
        }
        impl $trait<ComplexMatrix> for ComplexMatrix {
            type Output = ComplexMatrix;
            fn $method(self, rhs: ComplexMatrix) -> ComplexMatrix {
                ComplexMatrix(self.0 $op rhs.0)
            }
        }
        impl $trait<&ComplexMatrix> for ComplexMatrix {
            type Output = ComplexMatrix;
            fn $method(self, rhs: &ComplexMatrix) -> ComplexMatrix {
                ComplexMatrix(self.0 $op &rhs.0)
            }
        }
        impl $trait<ComplexMatrix> for &ComplexMatrix {
            type Output = ComplexMatrix;
            fn $method(self, rhs: ComplexMatrix) -> ComplexMatrix {
                ComplexMatrix(&self.0 $op rhs.0)
            }
        }
    };
}

forward_binop!(Add, add, +);
forward_binop!(Sub, sub, -);
forward_binop!(Mul, mul, *);

impl AddAssign<&ComplexMatrix> for ComplexMatrix {
    fn add_assign(&mut self, rhs: &ComplexMatrix) {
        self.0 += &rhs.0;
    }
}

impl SubAssign<&ComplexMatrix> for ComplexMatrix {
    fn sub_assign(&mut self, rhs: &ComplexMatrix) {
        self.0 -= &rhs.0;
    }
}

impl Neg for ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        ComplexMatrix(-self.0)
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        ComplexMatrix(-&self.0)
    }
}

// Serialized as an array of rows, each an array of `[re, im]` pairs.
impl Serialize for ComplexMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<[f64; 2]>> = (0..self.nrows())
            .map(|i| (0..self.ncols()).map(|j| [self.0[(i, j)].re, self.0[(i, j)].im]).collect())
            .collect();
        rows.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ComplexMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rows: Vec<Vec<[f64; 2]>> = Vec::deserialize(deserializer)?;
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(serde::de::Error::custom("ragged matrix rows"));
        }
        let m = ComplexMatrix::from_fn(r, c, |i, j| Scalar::new(rows[i][j][0], rows[i][j][1]));
        if !m.is_finite() {
            return Err(serde::de::Error::custom("non-finite matrix entry"));
        }
        Ok(m)
    }
}

/// Eigenvalues (ascending) and orthonormal eigenvectors of a Hermitian matrix.
#[derive(Clone, Debug)]
pub struct EigenSystem {
    pub values: Vec<f64>,
    /// Column `k` is the eigenvector for `values[k]`.
    pub vectors: ComplexMatrix,
}

impl EigenSystem {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    pub fn eigenvector(&self, k: usize) -> Vec<Scalar> {
        (0..self.dim()).map(|i| self.vectors[(i, k)]).collect()
    }

    /// `Σ_k f(λ_k) v_k v_k*`.
    pub fn apply_function(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let n = self.dim();
        let mut out = ComplexMatrix::zeros(n, n);
        for (k, &lambda) in self.values.iter().enumerate() {
            let w = f(lambda);
            if w == 0.0 {
                continue;
            }
            for i in 0..n {
                let vi = self.vectors[(i, k)] * w;
                for j in 0..n {
                    out[(i, j)] += vi * self.vectors[(j, k)].conj();
                }
            }
        }
        out
    }

    /// Orthogonal projection onto the span of the listed eigenvectors.
    pub fn projection(&self, indices: impl IntoIterator<Item = usize>) -> ComplexMatrix {
        let n = self.dim();
        let mut out = ComplexMatrix::zeros(n, n);
        for k in indices {
            for i in 0..n {
                let vi = self.vectors[(i, k)];
                for j in 0..n {
                    out[(i, j)] += vi * self.vectors[(j, k)].conj();
                }
            }
        }
        out
    }

    /// `V Λ V*`.
    pub fn reconstruct(&self) -> ComplexMatrix {
        self.apply_function(|x| x)
    }
}

fn ensure_square(a: &ComplexMatrix) -> Result<()> {
    if a.is_square() {
        Ok(())
    } else {
        Err(Error::NotSquare { rows: a.nrows(), cols: a.ncols() })
    }
}

/// Rejects matrices whose Hermitian defect exceeds `tol` at the matrix's scale.
pub fn ensure_hermitian(a: &ComplexMatrix, tol: Tolerance) -> Result<()> {
    ensure_square(a)?;
    let defect = a.hermitian_defect();
    let allowed = tol.bound(a.frobenius_norm());
    if defect <= allowed {
        Ok(())
    } else {
        Err(Error::NotHermitian { defect, allowed })
    }
}

/// Eigendecomposition with the default tolerance for the Hermitian check.
pub fn hermitian_eig(a: &ComplexMatrix) -> Result<EigenSystem> {
    hermitian_eig_with(a, Tolerance::default())
}

/// Eigendecomposition of a matrix that is Hermitian within `tol`.
///
/// The residual skew part is discarded before decomposing. The result is
/// checked against the (symmetrized) input and a reconstruction error above
/// `1e-10 * max(1, ||A||_F)` is reported as [`Error::NumericalFailure`].
pub fn hermitian_eig_with(a: &ComplexMatrix, tol: Tolerance) -> Result<EigenSystem> {
    if !a.is_finite() {
        return Err(Error::NumericalFailure("non-finite entry".into()));
    }
    ensure_hermitian(a, tol)?;
    let n = a.nrows();
    if n == 0 {
        return Ok(EigenSystem { values: Vec::new(), vectors: ComplexMatrix::zeros(0, 0) });
    }
    let h = a.hermitian_part();
    let eig = SymmetricEigen::try_new(h.0.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| Error::NumericalFailure("eigenvalue iteration did not converge".into()))?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |i, c| eig.eigenvectors[(i, order[c])]);
    let system = EigenSystem { values, vectors };

    let scale = h.frobenius_norm().max(1.0);
    let residual = system.reconstruct().distance(&h);
    if !(residual <= 1e-10 * scale) {
        return Err(Error::NumericalFailure(format!(
            "eigendecomposition residual {residual:e} at scale {scale:e}"
        )));
    }
    Ok(system)
}

/// Largest singular value, as the square root of the top eigenvalue of `A*A`.
pub fn operator_norm(a: &ComplexMatrix) -> Result<f64> {
    if !a.is_finite() {
        return Err(Error::NumericalFailure("non-finite entry".into()));
    }
    if a.nrows() == 0 || a.ncols() == 0 {
        return Ok(0.0);
    }
    let gram = a.adjoint() * a;
    let eig = hermitian_eig_with(&gram, Tolerance::absolute(f64::INFINITY))?;
    Ok(eig.max().max(0.0).sqrt())
}

/// Operator norm for matrices known to be finite. Panics on numerical failure,
/// which cannot happen for finite input of the sizes used here.
pub(crate) fn norm(a: &ComplexMatrix) -> f64 {
    operator_norm(a).expect("operator norm of a finite matrix")
}

/// Outcome of a positive-semidefiniteness test.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsdCheck {
    /// Smallest eigenvalue; negative values quantify the violation.
    pub margin: f64,
    pub passed: bool,
}

/// `A ⪰ 0` within `tol.absolute`; the smallest eigenvalue is reported as margin.
pub fn is_psd(a: &ComplexMatrix, tol: Tolerance) -> Result<PsdCheck> {
    let eig = hermitian_eig_with(a, tol)?;
    let margin = eig.min();
    Ok(PsdCheck { margin, passed: margin >= -tol.absolute })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Scalar {
        Scalar::new(re, im)
    }

    #[test]
    fn eig_of_identity() {
        let e = hermitian_eig(&ComplexMatrix::identity(2)).unwrap();
        assert_eq!(e.values.len(), 2);
        for v in &e.values {
            assert!((v - 1.0).abs() < 1e-14);
        }
        let gram = e.vectors.adjoint() * &e.vectors;
        assert!(gram.distance(&ComplexMatrix::identity(2)) < 1e-14);
    }

    #[test]
    fn eig_of_diagonal_is_sorted() {
        let e = hermitian_eig(&ComplexMatrix::from_real_diagonal(&[2.0, -3.0])).unwrap();
        assert_eq!(e.values, vec![-3.0, 2.0]);
        // Standard basis up to phase.
        assert!((e.vectors[(1, 0)].norm() - 1.0).abs() < 1e-14);
        assert!((e.vectors[(0, 1)].norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn eig_of_swap_matches_characteristic_polynomial() {
        let x = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let e = hermitian_eig(&x).unwrap();
        assert!((e.values[0] + 1.0).abs() < 1e-14);
        assert!((e.values[1] - 1.0).abs() < 1e-14);
        for k in 0..2 {
            let v = e.eigenvector(k);
            let av = x.apply(&v);
            for i in 0..2 {
                assert!((av[i] - v[i] * e.values[k]).norm() < 1e-14);
            }
        }
        // Eigenvector for -1 is parallel to (1, -1)/sqrt 2.
        let v = e.eigenvector(0);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let overlap = v[0] * s - v[1] * s;
        assert!((overlap.norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn eig_rejects_bad_input() {
        let rect = ComplexMatrix::zeros(2, 3);
        assert!(matches!(hermitian_eig(&rect), Err(Error::NotSquare { .. })));
        let skew = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[-1.0, 0.0]]);
        assert!(matches!(hermitian_eig(&skew), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn eig_symmetrizes_small_defects() {
        let mut a = ComplexMatrix::from_real_rows(&[&[1.0, 0.5], &[0.5, 2.0]]);
        a[(0, 1)] += c(1e-12, 0.0);
        let e = hermitian_eig(&a).unwrap();
        assert!(e.reconstruct().distance(&a.hermitian_part()) < 1e-13);
    }

    #[test]
    fn operator_norm_cases() {
        assert_eq!(operator_norm(&ComplexMatrix::zeros(3, 3)).unwrap(), 0.0);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let u = ComplexMatrix::from_rows(&[vec![c(s, 0.0), c(0.0, s)], vec![c(0.0, s), c(s, 0.0)]]);
        assert!((operator_norm(&u).unwrap() - 1.0).abs() < 1e-12);
        let d = ComplexMatrix::from_real_diagonal(&[2.0, -3.0]);
        assert!((operator_norm(&d).unwrap() - 3.0).abs() < 1e-14);
        let rect = ComplexMatrix::from_real_rows(&[&[3.0, 0.0, 0.0], &[0.0, 0.0, 4.0]]);
        assert!((operator_norm(&rect).unwrap() - 4.0).abs() < 1e-14);
    }

    #[test]
    fn psd_cases() {
        let tol = Tolerance::default();
        let id = is_psd(&ComplexMatrix::identity(3), tol).unwrap();
        assert!(id.passed);
        assert!((id.margin - 1.0).abs() < 1e-14);

        let a = ComplexMatrix::from_real_rows(&[&[1.0, 2.0], &[2.0, 1.0]]);
        let check = is_psd(&a, tol).unwrap();
        assert!(!check.passed);
        assert!((check.margin + 1.0).abs() < 1e-14);

        let s = 1.0 / 3f64.sqrt();
        let v = [c(s, 0.0), c(0.0, s), c(-s, 0.0)];
        let check = is_psd(&ComplexMatrix::outer(&v), tol).unwrap();
        assert!(check.passed);
        assert!(check.margin >= -1e-15);

        let skew = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[-1.0, 0.0]]);
        assert!(matches!(is_psd(&skew, tol), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn tolerance_validation() {
        assert!(Tolerance::new(1e-9, 0.0).is_ok());
        assert!(Tolerance::new(-1.0, 0.0).is_err());
        assert!(Tolerance::new(f64::NAN, 0.0).is_err());
        assert!(Tolerance::new(0.0, f64::INFINITY).is_err());
    }

    #[test]
    fn serde_layout_is_rows_of_pairs() {
        let m = ComplexMatrix::from_rows(&[vec![c(1.0, 2.0), c(0.0, -1.0)]]);
        let json = serde_json::to_string(&m).unwrap();
        assert_eq!(json, "[[[1.0,2.0],[0.0,-1.0]]]");
        let back: ComplexMatrix = serde_json::from_str(&json).unwrap();
        assert_eq!(back, m);
        assert!(serde_json::from_str::<ComplexMatrix>("[[[1.0,2.0]],[]]").is_err());
    }
}
