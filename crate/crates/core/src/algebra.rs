//! Finite-dimensional von Neumann algebras as block-diagonal matrix
//! *-algebras, and the operator decompositions the measure theory is built
//! from: Cartesian parts, Jordan parts, finite spectral decompositions and
//! Riemann sums.
//!
//! A [`MatrixAlgebra`] with blocks `[n_1, ..., n_r]` is `M_{n_1} ⊕ ... ⊕ M_{n_r}`
//! acting on `C^{n_1 + ... + n_r}`, each block with multiplicity one.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{self, ComplexMatrix, EigenSystem, Scalar, Tolerance, I, ZERO};
use crate::random;

/// Block-diagonal *-subalgebra of `M_k(C)`.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct MatrixAlgebra {
    blocks: Vec<usize>,
}

/// Position of a matrix unit `E_ij` of one block, in block and ambient
/// coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MatrixUnit {
    pub block: usize,
    pub i: usize,
    pub j: usize,
    pub row: usize,
    pub col: usize,
}

impl MatrixAlgebra {
    pub fn new(blocks: Vec<usize>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidAlgebra("no blocks".into()));
        }
        if blocks.contains(&0) {
            return Err(Error::InvalidAlgebra("block of size zero".into()));
        }
        Ok(Self { blocks })
    }

    /// The full matrix algebra `M_n`.
    pub fn full(n: usize) -> Self {
        Self::new(vec![n]).expect("n >= 1")
    }

    /// `C`, realized as `M_1`.
    pub fn scalars() -> Self {
        Self::full(1)
    }

    /// `C^n` as diagonal matrices.
    pub fn diagonal(n: usize) -> Self {
        Self::new(vec![1; n]).expect("n >= 1")
    }

    pub fn blocks(&self) -> &[usize] {
        &self.blocks
    }

    /// Size of the matrices the algebra acts by.
    pub fn ambient_dim(&self) -> usize {
        self.blocks.iter().sum()
    }

    /// Complex dimension of the algebra, `Σ n_b²`.
    pub fn dim(&self) -> usize {
        self.blocks.iter().map(|b| b * b).sum()
    }

    pub fn offsets(&self) -> Vec<usize> {
        self.blocks
            .iter()
            .scan(0, |acc, &b| {
                let off = *acc;
                *acc += b;
                Some(off)
            })
            .collect()
    }

    /// Matrix-unit basis, block by block, row-major within each block.
    pub fn basis(&self) -> Vec<MatrixUnit> {
        let mut out = Vec::with_capacity(self.dim());
        for (block, (&n, off)) in self.blocks.iter().zip(self.offsets()).enumerate() {
            for i in 0..n {
                for j in 0..n {
                    out.push(MatrixUnit { block, i, j, row: off + i, col: off + j });
                }
            }
        }
        out
    }

    /// Index of the unit `E_ij` of `block` in [`basis`](Self::basis).
    pub fn basis_index(&self, block: usize, i: usize, j: usize) -> usize {
        let before: usize = self.blocks[..block].iter().map(|b| b * b).sum();
        before + i * self.blocks[block] + j
    }

    /// Block index of each ambient coordinate.
    fn block_of(&self) -> Vec<usize> {
        self.blocks
            .iter()
            .enumerate()
            .flat_map(|(b, &n)| std::iter::repeat_n(b, n))
            .collect()
    }

    /// Largest entry modulus outside the block pattern.
    pub fn pattern_defect(&self, m: &ComplexMatrix) -> f64 {
        let owner = self.block_of();
        let mut worst: f64 = 0.0;
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                if owner[r] != owner[c] {
                    worst = worst.max(m[(r, c)].norm());
                }
            }
        }
        worst
    }

    pub fn contains(&self, m: &ComplexMatrix, tol: Tolerance) -> bool {
        m.shape() == (self.ambient_dim(), self.ambient_dim())
            && self.pattern_defect(m) <= tol.bound(m.max_abs())
    }

    /// Wraps a matrix as an element, after checking shape and pattern with the
    /// default tolerance. Entries outside the pattern are zeroed.
    pub fn element(&self, m: ComplexMatrix) -> Result<AlgebraElement> {
        AlgebraElement::new(self.clone(), m)
    }

    pub fn zero(&self) -> AlgebraElement {
        let n = self.ambient_dim();
        AlgebraElement { algebra: self.clone(), matrix: ComplexMatrix::zeros(n, n) }
    }

    pub fn identity(&self) -> AlgebraElement {
        let n = self.ambient_dim();
        AlgebraElement { algebra: self.clone(), matrix: ComplexMatrix::identity(n) }
    }

    /// Basis element number `k`.
    pub fn unit(&self, k: usize) -> AlgebraElement {
        let u = self.basis()[k];
        let n = self.ambient_dim();
        AlgebraElement { algebra: self.clone(), matrix: ComplexMatrix::unit(n, u.row, u.col) }
    }

    /// Element from coordinates in the matrix-unit basis.
    pub fn from_coefficients(&self, coeffs: &[Scalar]) -> AlgebraElement {
        assert_eq!(coeffs.len(), self.dim(), "coefficient count");
        let n = self.ambient_dim();
        let mut m = ComplexMatrix::zeros(n, n);
        for (u, &c) in self.basis().iter().zip(coeffs) {
            m[(u.row, u.col)] = c;
        }
        AlgebraElement { algebra: self.clone(), matrix: m }
    }

    /// Assembles an element from one matrix per block.
    pub fn from_blocks(&self, blocks: &[ComplexMatrix]) -> AlgebraElement {
        assert_eq!(blocks.len(), self.blocks.len(), "block count");
        let n = self.ambient_dim();
        let mut m = ComplexMatrix::zeros(n, n);
        for ((b, &size), off) in blocks.iter().zip(&self.blocks).zip(self.offsets()) {
            assert_eq!(b.shape(), (size, size), "block shape");
            m.set_diagonal_block(off, b);
        }
        AlgebraElement { algebra: self.clone(), matrix: m }
    }

    /// Positive element `G*G` with i.i.d. complex Gaussian `G` per block,
    /// rescaled to unit operator norm.
    pub fn sample_positive(&self, seed: u64) -> AlgebraElement {
        self.sample_positive_with(&mut random::rng(seed))
    }

    pub fn sample_positive_with<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> AlgebraElement {
        loop {
            let blocks: Vec<ComplexMatrix> = self
                .blocks
                .iter()
                .map(|&n| {
                    let g = random::gaussian_matrix(rng, n, n);
                    (g.adjoint() * &g).hermitian_part()
                })
                .collect();
            let a = self.from_blocks(&blocks);
            let norm = a.norm();
            if norm > 1e-8 {
                return a.scale_real(1.0 / norm);
            }
        }
    }

    /// Hermitian projection `U D U*` per block, with `D` a random 0/1 diagonal
    /// and `U` a random unitary.
    pub fn sample_projection(&self, seed: u64) -> AlgebraElement {
        self.sample_projection_with(&mut random::rng(seed))
    }

    pub fn sample_projection_with<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> AlgebraElement {
        let blocks: Vec<ComplexMatrix> = self
            .blocks
            .iter()
            .map(|&n| {
                let bits: Vec<f64> = (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { 0.0 }).collect();
                let u = random::unitary(rng, n);
                conjugate_diagonal(&u, &bits)
            })
            .collect();
        self.from_blocks(&blocks)
    }

    /// Projections `U D_k U*` sharing one random unitary per block, so they
    /// pairwise commute.
    pub fn sample_commuting_projections<R: rand::Rng + ?Sized>(
        &self,
        rng: &mut R,
        count: usize,
    ) -> Vec<AlgebraElement> {
        let unitaries: Vec<ComplexMatrix> = self.blocks.iter().map(|&n| random::unitary(rng, n)).collect();
        (0..count)
            .map(|_| {
                let blocks: Vec<ComplexMatrix> = self
                    .blocks
                    .iter()
                    .zip(&unitaries)
                    .map(|(&n, u)| {
                        let bits: Vec<f64> =
                            (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { 0.0 }).collect();
                        conjugate_diagonal(u, &bits)
                    })
                    .collect();
                self.from_blocks(&blocks)
            })
            .collect()
    }

    /// `count` mutually orthogonal projections `U D_k U*` summing to the
    /// identity: each eigenvector of a random unitary per block is assigned to
    /// one of them at random. Some may be zero.
    pub fn sample_orthogonal_projections<R: rand::Rng + ?Sized>(
        &self,
        rng: &mut R,
        count: usize,
    ) -> Vec<AlgebraElement> {
        let count = count.max(1);
        let mut per_part: Vec<Vec<ComplexMatrix>> = vec![Vec::new(); count];
        for &n in &self.blocks {
            let u = random::unitary(rng, n);
            let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..count)).collect();
            for (k, part) in per_part.iter_mut().enumerate() {
                let bits: Vec<f64> = labels.iter().map(|&l| if l == k { 1.0 } else { 0.0 }).collect();
                part.push(conjugate_diagonal(&u, &bits));
            }
        }
        per_part.iter().map(|blocks| self.from_blocks(blocks)).collect()
    }

    /// Random element with Gaussian entries in every block.
    pub fn sample_element<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> AlgebraElement {
        let blocks: Vec<ComplexMatrix> =
            self.blocks.iter().map(|&n| random::gaussian_matrix(rng, n, n)).collect();
        self.from_blocks(&blocks)
    }

    /// Random Hermitian element.
    pub fn sample_hermitian<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> AlgebraElement {
        self.sample_element(rng).real_part()
    }

    /// Random unitary element.
    pub fn sample_unitary<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> AlgebraElement {
        let blocks: Vec<ComplexMatrix> = self.blocks.iter().map(|&n| random::unitary(rng, n)).collect();
        self.from_blocks(&blocks)
    }
}

/// `U diag(d) U*`, symmetrized.
pub(crate) fn conjugate_diagonal(u: &ComplexMatrix, d: &[f64]) -> ComplexMatrix {
    let n = d.len();
    let mut out = ComplexMatrix::zeros(n, n);
    for (k, &w) in d.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        for i in 0..n {
            let uik = u[(i, k)] * w;
            for j in 0..n {
                out[(i, j)] += uik * u[(j, k)].conj();
            }
        }
    }
    out.hermitian_part()
}

impl fmt::Debug for MatrixAlgebra {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.blocks.iter().map(|n| format!("M{n}")).collect();
        write!(f, "{}", parts.join("⊕"))
    }
}

impl TryFrom<Vec<usize>> for MatrixAlgebra {
    type Error = Error;
    fn try_from(blocks: Vec<usize>) -> Result<Self> {
        Self::new(blocks)
    }
}

impl From<MatrixAlgebra> for Vec<usize> {
    fn from(a: MatrixAlgebra) -> Self {
        a.blocks
    }
}

/// A matrix in the block pattern of its algebra.
#[derive(Clone, Debug, PartialEq)]
pub struct AlgebraElement {
    algebra: MatrixAlgebra,
    matrix: ComplexMatrix,
}

impl AlgebraElement {
    /// Checks shape and pattern (default tolerance); zeroes entries outside
    /// the pattern.
    pub fn new(algebra: MatrixAlgebra, matrix: ComplexMatrix) -> Result<Self> {
        let n = algebra.ambient_dim();
        if matrix.shape() != (n, n) {
            return Err(Error::ShapeMismatch(format!(
                "expected {n}x{n} for {algebra:?}, got {:?}",
                matrix.shape()
            )));
        }
        if !matrix.is_finite() {
            return Err(Error::NumericalFailure("non-finite entry".into()));
        }
        if !algebra.contains(&matrix, Tolerance::default()) {
            return Err(Error::DomainMismatch(format!(
                "matrix leaves the block pattern of {algebra:?} (defect {:e})",
                algebra.pattern_defect(&matrix)
            )));
        }
        let mut matrix = matrix;
        let owner = algebra.block_of();
        for r in 0..n {
            for c in 0..n {
                if owner[r] != owner[c] {
                    matrix[(r, c)] = ZERO;
                }
            }
        }
        Ok(Self { algebra, matrix })
    }

    pub fn algebra(&self) -> &MatrixAlgebra {
        &self.algebra
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn block(&self, b: usize) -> ComplexMatrix {
        let off = self.algebra.offsets()[b];
        self.matrix.diagonal_block(off, self.algebra.blocks[b])
    }

    /// Coordinates in the matrix-unit basis.
    pub fn coefficients(&self) -> Vec<Scalar> {
        self.algebra.basis().iter().map(|u| self.matrix[(u.row, u.col)]).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self { algebra: self.algebra.clone(), matrix: self.matrix.adjoint() }
    }

    pub fn scale(&self, s: Scalar) -> Self {
        Self { algebra: self.algebra.clone(), matrix: self.matrix.scale(s) }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        Self { algebra: self.algebra.clone(), matrix: self.matrix.scale_real(s) }
    }

    /// Operator norm.
    pub fn norm(&self) -> f64 {
        kernel::norm(&self.matrix)
    }

    pub fn is_hermitian(&self, tol: Tolerance) -> bool {
        kernel::ensure_hermitian(&self.matrix, tol).is_ok()
    }

    /// `||P² - P||` and `||P - P*||` combined (max).
    pub fn projection_defect(&self) -> f64 {
        let sq = &self.matrix * &self.matrix;
        kernel::norm(&(sq - &self.matrix)).max(kernel::norm(&(&self.matrix - self.matrix.adjoint())))
    }

    pub fn is_projection(&self, tol: Tolerance) -> bool {
        self.projection_defect() <= tol.absolute
    }

    /// Smallest eigenvalue; fails if not Hermitian within `tol`.
    pub fn psd_margin(&self, tol: Tolerance) -> Result<f64> {
        Ok(kernel::is_psd(&self.matrix, tol)?.margin)
    }

    /// `re(A) = (A + A*)/2`.
    pub fn real_part(&self) -> Self {
        Self { algebra: self.algebra.clone(), matrix: self.matrix.hermitian_part() }
    }

    /// `im(A) = i(A* - A)/2`.
    pub fn imaginary_part(&self) -> Self {
        let m = (self.matrix.adjoint() - &self.matrix).scale(I * 0.5);
        Self { algebra: self.algebra.clone(), matrix: m }
    }

    /// Cartesian decomposition `A = re(A) + i·im(A)`, both parts Hermitian.
    pub fn cartesian_parts(&self) -> (Self, Self) {
        (self.real_part(), self.imaginary_part())
    }

    /// Per-block eigendecompositions of a Hermitian element.
    pub fn block_eigensystems(&self) -> Result<Vec<EigenSystem>> {
        kernel::ensure_hermitian(&self.matrix, Tolerance::default())?;
        (0..self.algebra.blocks.len())
            .map(|b| kernel::hermitian_eig_with(&self.block(b), Tolerance::absolute(f64::INFINITY)))
            .collect()
    }

    /// Applies a real function through the spectral calculus, block by block.
    pub fn functional_calculus(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        let systems = self.block_eigensystems()?;
        let blocks: Vec<ComplexMatrix> =
            systems.iter().map(|s| s.apply_function(&f).hermitian_part()).collect();
        Ok(self.algebra.from_blocks(&blocks))
    }

    /// Jordan decomposition `A = A₊ - A₋` with `A₊, A₋ ⪰ 0` and `A₊A₋ = 0`.
    ///
    /// Eigenvalues within the default absolute tolerance of zero are treated
    /// as zero.
    pub fn jordan_parts(&self) -> Result<(Self, Self)> {
        let clamp = Tolerance::default().absolute;
        let plus = self.functional_calculus(|x| if x > clamp { x } else { 0.0 })?;
        let minus = self.functional_calculus(|x| if x < -clamp { -x } else { 0.0 })?;
        Ok((plus, minus))
    }

    /// The four positive operators `re₊, re₋, im₊, im₋` with
    /// `A = (re₊ - re₋) + i(im₊ - im₋)`.
    pub fn four_positive_parts(&self) -> Result<[Self; 4]> {
        let (re, im) = self.cartesian_parts();
        let (re_plus, re_minus) = re.jordan_parts()?;
        let (im_plus, im_minus) = im.jordan_parts()?;
        Ok([re_plus, re_minus, im_plus, im_minus])
    }

    /// Finite spectral decomposition `A = Σ λ_k P_k` with distinct `λ_k` and
    /// mutually orthogonal projections summing to the identity.
    ///
    /// Eigenvalues closer than `1e-8 · max(1, ||A||)` are merged; eigenvalues
    /// within `1e-9` of zero are clamped to zero.
    pub fn spectral_decomposition(&self) -> Result<SpectralDecomposition> {
        let systems = self.block_eigensystems()?;
        let norm = systems
            .iter()
            .flat_map(|s| s.values.iter().map(|v| v.abs()))
            .fold(0.0, f64::max);
        let merge_gap = 1e-8 * norm.max(1.0);
        let clamp = Tolerance::default().absolute;

        let mut entries: Vec<(f64, usize, usize)> = Vec::new();
        for (b, s) in systems.iter().enumerate() {
            for (k, &v) in s.values.iter().enumerate() {
                let v = if v.abs() <= clamp { 0.0 } else { v };
                entries.push((v, b, k));
            }
        }
        entries.sort_by(|x, y| x.0.total_cmp(&y.0));

        let mut clusters: Vec<Vec<(f64, usize, usize)>> = Vec::new();
        for e in entries {
            match clusters.last_mut() {
                Some(c) if e.0 - c.last().expect("nonempty").0 < merge_gap => c.push(e),
                _ => clusters.push(vec![e]),
            }
        }

        let terms = clusters
            .into_iter()
            .map(|c| {
                let value = if c.iter().any(|e| e.0 == 0.0) {
                    0.0
                } else {
                    c.iter().map(|e| e.0).sum::<f64>() / c.len() as f64
                };
                let projection = self.eigen_projection(&systems, c.iter().map(|e| (e.1, e.2)));
                SpectralTerm { value, projection }
            })
            .collect();
        Ok(SpectralDecomposition { terms })
    }

    fn eigen_projection(
        &self,
        systems: &[EigenSystem],
        members: impl Iterator<Item = (usize, usize)>,
    ) -> Self {
        let mut per_block: Vec<Vec<usize>> = vec![Vec::new(); systems.len()];
        for (b, k) in members {
            per_block[b].push(k);
        }
        let blocks: Vec<ComplexMatrix> = systems
            .iter()
            .zip(per_block)
            .map(|(s, ks)| s.projection(ks).hermitian_part())
            .collect();
        self.algebra.from_blocks(&blocks)
    }

    /// Riemann sum `S_ℓ(A) = Σ_k ζ_k (E(λ_k) - E(λ_{k-1}))` on the grid
    /// `(1/ℓ)·Z`.
    ///
    /// Each eigenvalue is assigned the left endpoint of its grid cell, so
    /// `0 ⪯ A - S_ℓ(A) ⪯ (1/ℓ)·I` and `ζ_k ≥ 0` whenever `A ⪰ 0`. The grid for
    /// `2ℓ` refines the grid for `ℓ`. Eigenvalues within `1e-9·max(1, ||A||)`
    /// of a grid point are snapped onto it.
    pub fn riemann_sum(&self, level: u32) -> Result<RiemannSum> {
        if level == 0 {
            return Err(Error::BadConfig("Riemann level must be at least 1".into()));
        }
        let systems = self.block_eigensystems()?;
        let norm = systems
            .iter()
            .flat_map(|s| s.values.iter().map(|v| v.abs()))
            .fold(0.0, f64::max);
        let snap = Tolerance::default().absolute * norm.max(1.0);
        let clamp = Tolerance::default().absolute;
        let l = f64::from(level);

        let mut cells: Vec<(i64, usize, usize)> = Vec::new();
        for (b, s) in systems.iter().enumerate() {
            for (k, &v) in s.values.iter().enumerate() {
                let v = if v.abs() <= clamp { 0.0 } else { v };
                let t = v * l;
                let nearest = t.round();
                let cell = if (t - nearest).abs() <= snap * l { nearest } else { t.floor() };
                cells.push((cell as i64, b, k));
            }
        }
        cells.sort_by_key(|c| c.0);

        let mut terms = Vec::new();
        let mut start = 0;
        while start < cells.len() {
            let cell = cells[start].0;
            let end = start + cells[start..].iter().take_while(|c| c.0 == cell).count();
            let projection = self.eigen_projection(&systems, cells[start..end].iter().map(|c| (c.1, c.2)));
            terms.push(SpectralTerm { value: cell as f64 / l, projection });
            start = end;
        }
        Ok(RiemannSum {
            level,
            terms: SpectralDecomposition { terms },
            error_bound: 1.0 / l,
        })
    }

    fn check_same_algebra(&self, rhs: &Self) {
        assert_eq!(self.algebra, rhs.algebra, "operands live in different algebras");
    }
}

macro_rules! element_binop {
    ($trait:ident, $method:ident, $op:tt) => {
        impl $trait<&AlgebraElement> for &AlgebraElement {
            type Output = AlgebraElement;
            /// Panics if the operands live in different algebras.
            fn $method(self, rhs: &AlgebraElement) -> AlgebraElement {
                self.check_same_algebra(rhs);
                AlgebraElement { algebra: self.algebra.clone(), matrix: &self.matrix $op &rhs.matrix }
            }
        }
        impl $trait<AlgebraElement> for AlgebraElement {
            type Output = AlgebraElement;
            fn $method(self, rhs: AlgebraElement) -> AlgebraElement {
                (&self).$method(&rhs)
            }
        }
        impl $trait<&AlgebraElement> for AlgebraElement {
            type Output = AlgebraElement;
            fn $method(self, rhs: &AlgebraElement) -> AlgebraElement {
                (&self).$method(rhs)
            }
        }
    };
}

element_binop!(Add, add, +);
element_binop!(Sub, sub, -);
element_binop!(Mul, mul, *);

/// One eigenvalue and its spectral projection.
#[derive(Clone, Debug)]
pub struct SpectralTerm {
    pub value: f64,
    pub projection: AlgebraElement,
}

/// `A = Σ λ_k P_k`.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    pub terms: Vec<SpectralTerm>,
}

/// Worst-case invariant defects of a spectral decomposition.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DecompositionDefects {
    pub projection: f64,
    pub orthogonality: f64,
    pub completeness: f64,
}

impl SpectralDecomposition {
    pub fn values(&self) -> Vec<f64> {
        self.terms.iter().map(|t| t.value).collect()
    }

    /// `Σ λ_k P_k`.
    pub fn reconstruct(&self) -> Option<AlgebraElement> {
        let first = self.terms.first()?;
        let mut acc = first.projection.algebra().zero();
        for t in &self.terms {
            acc = acc + t.projection.scale_real(t.value);
        }
        Some(acc)
    }

    pub fn defects(&self) -> DecompositionDefects {
        let mut d = DecompositionDefects::default();
        let Some(first) = self.terms.first() else {
            return d;
        };
        let mut sum = first.projection.algebra().zero();
        for (a, ta) in self.terms.iter().enumerate() {
            d.projection = d.projection.max(ta.projection.projection_defect());
            for tb in &self.terms[a + 1..] {
                let prod = &ta.projection * &tb.projection;
                d.orthogonality = d.orthogonality.max(prod.norm());
            }
            sum = sum + &ta.projection;
        }
        d.completeness = (sum - first.projection.algebra().identity()).norm();
        d
    }
}

/// `S_ℓ(A)` together with its level and guaranteed error `1/ℓ`.
#[derive(Clone, Debug)]
pub struct RiemannSum {
    pub level: u32,
    pub terms: SpectralDecomposition,
    pub error_bound: f64,
}

impl RiemannSum {
    pub fn operator(&self) -> AlgebraElement {
        self.terms.reconstruct().expect("Riemann sum has at least one cell")
    }

    /// Cell coefficients `ζ_k`.
    pub fn coefficients(&self) -> Vec<f64> {
        self.terms.values()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random;
    use proptest::prelude::*;

    fn el(alg: &MatrixAlgebra, rows: &[&[f64]]) -> AlgebraElement {
        alg.element(ComplexMatrix::from_real_rows(rows)).unwrap()
    }

    fn c(re: f64, im: f64) -> Scalar {
        Scalar::new(re, im)
    }

    #[test]
    fn algebra_shape() {
        let alg = MatrixAlgebra::new(vec![2, 1]).unwrap();
        assert_eq!(alg.ambient_dim(), 3);
        assert_eq!(alg.dim(), 5);
        assert_eq!(alg.offsets(), vec![0, 2]);
        let basis = alg.basis();
        assert_eq!(basis.len(), 5);
        assert_eq!((basis[4].row, basis[4].col), (2, 2));
        assert_eq!(alg.basis_index(1, 0, 0), 4);
        assert_eq!(alg.basis_index(0, 1, 0), 2);
        assert!(MatrixAlgebra::new(vec![]).is_err());
        assert!(MatrixAlgebra::new(vec![2, 0]).is_err());
    }

    #[test]
    fn membership_is_checked() {
        let alg = MatrixAlgebra::diagonal(2);
        assert!(alg.element(ComplexMatrix::from_real_rows(&[&[1.0, 0.0], &[0.0, 2.0]])).is_ok());
        let off = ComplexMatrix::from_real_rows(&[&[1.0, 0.5], &[0.0, 2.0]]);
        assert!(matches!(alg.element(off), Err(Error::DomainMismatch(_))));
        assert!(matches!(alg.element(ComplexMatrix::zeros(3, 3)), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn cartesian_parts_of_hermitian() {
        let alg = MatrixAlgebra::full(2);
        let a = el(&alg, &[&[1.0, 2.0], &[2.0, -1.0]]);
        let (re, im) = a.cartesian_parts();
        assert_eq!(re, a);
        assert!(im.matrix().max_abs() == 0.0);
    }

    #[test]
    fn cartesian_parts_of_nilpotent() {
        let alg = MatrixAlgebra::full(2);
        let a = alg
            .element(ComplexMatrix::from_rows(&[vec![ZERO, c(0.0, 2.0)], vec![ZERO, ZERO]]))
            .unwrap();
        let (re, im) = a.cartesian_parts();
        let expected_re = ComplexMatrix::from_rows(&[vec![ZERO, c(0.0, 1.0)], vec![c(0.0, -1.0), ZERO]]);
        let expected_im = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        assert!(re.matrix().distance(&expected_re) < 1e-15);
        assert!(im.matrix().distance(&expected_im) < 1e-15);
        let back = &re + &im.scale(I);
        assert!(back.matrix().distance(a.matrix()) < 1e-15);
    }

    #[test]
    fn cartesian_parts_of_imaginary_scalar() {
        let alg = MatrixAlgebra::full(3);
        let a = alg.identity().scale(I);
        let (re, im) = a.cartesian_parts();
        assert!(re.matrix().max_abs() < 1e-15);
        assert!(im.matrix().distance(&ComplexMatrix::identity(3)) < 1e-15);
    }

    #[test]
    fn jordan_parts_cases() {
        let alg = MatrixAlgebra::full(2);
        let (p, m) = el(&alg, &[&[2.0, 0.0], &[0.0, -3.0]]).jordan_parts().unwrap();
        assert!(p.matrix().distance(&ComplexMatrix::from_real_diagonal(&[2.0, 0.0])) < 1e-14);
        assert!(m.matrix().distance(&ComplexMatrix::from_real_diagonal(&[0.0, 3.0])) < 1e-14);

        let (p, m) = el(&alg, &[&[0.0, 1.0], &[1.0, 0.0]]).jordan_parts().unwrap();
        let half_plus = ComplexMatrix::from_real_rows(&[&[0.5, 0.5], &[0.5, 0.5]]);
        let half_minus = ComplexMatrix::from_real_rows(&[&[0.5, -0.5], &[-0.5, 0.5]]);
        assert!(p.matrix().distance(&half_plus) < 1e-14);
        assert!(m.matrix().distance(&half_minus) < 1e-14);

        let psd = alg.sample_positive(5);
        let (p, m) = psd.jordan_parts().unwrap();
        assert!(p.matrix().distance(psd.matrix()) < 1e-12);
        assert!(m.matrix().max_abs() < 1e-12);
    }

    #[test]
    fn jordan_parts_reject_non_hermitian() {
        let alg = MatrixAlgebra::full(2);
        let a = el(&alg, &[&[0.0, 1.0], &[0.0, 0.0]]);
        assert!(matches!(a.jordan_parts(), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn jordan_parts_stay_in_block_pattern() {
        let alg = MatrixAlgebra::new(vec![2, 1, 2]).unwrap();
        let a = alg.sample_hermitian(&mut random::rng(4));
        let (p, m) = a.jordan_parts().unwrap();
        assert_eq!(alg.pattern_defect(p.matrix()), 0.0);
        assert_eq!(alg.pattern_defect(m.matrix()), 0.0);
    }

    #[test]
    fn spectral_decomposition_cases() {
        let alg = MatrixAlgebra::full(3);
        let d = alg.identity().spectral_decomposition().unwrap();
        assert_eq!(d.terms.len(), 1);
        assert!((d.terms[0].value - 1.0).abs() < 1e-14);
        assert!(d.terms[0].projection.matrix().distance(&ComplexMatrix::identity(3)) < 1e-14);

        let d = el(&alg, &[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 4.0]])
            .spectral_decomposition()
            .unwrap();
        assert_eq!(d.terms.len(), 2);
        assert!((d.terms[0].value - 1.0).abs() < 1e-14);
        assert!((d.terms[1].value - 4.0).abs() < 1e-14);
        assert!(d.terms[0].projection.matrix().distance(&ComplexMatrix::from_real_diagonal(&[1.0, 1.0, 0.0])) < 1e-14);
        assert!(d.terms[1].projection.matrix().distance(&ComplexMatrix::from_real_diagonal(&[0.0, 0.0, 1.0])) < 1e-14);

        let alg2 = MatrixAlgebra::full(2);
        let d = el(&alg2, &[&[0.0, 1.0], &[1.0, 0.0]]).spectral_decomposition().unwrap();
        assert_eq!(d.values().len(), 2);
        assert!((d.terms[0].value + 1.0).abs() < 1e-14);
        let minus = ComplexMatrix::from_real_rows(&[&[0.5, -0.5], &[-0.5, 0.5]]);
        let plus = ComplexMatrix::from_real_rows(&[&[0.5, 0.5], &[0.5, 0.5]]);
        assert!(d.terms[0].projection.matrix().distance(&minus) < 1e-14);
        assert!(d.terms[1].projection.matrix().distance(&plus) < 1e-14);
    }

    #[test]
    fn spectral_decomposition_merges_across_blocks() {
        // Eigenvalue 2 appears in both blocks; one term must cover both.
        let alg = MatrixAlgebra::new(vec![1, 2]).unwrap();
        let a = el(&alg, &[&[2.0, 0.0, 0.0], &[0.0, 2.0, 0.0], &[0.0, 0.0, 5.0]]);
        let d = a.spectral_decomposition().unwrap();
        assert_eq!(d.terms.len(), 2);
        let defects = d.defects();
        assert!(defects.projection < 1e-14 && defects.orthogonality < 1e-14 && defects.completeness < 1e-14);
    }

    #[test]
    fn projections_decompose_into_zero_and_one() {
        let alg = MatrixAlgebra::new(vec![3, 2]).unwrap();
        for seed in 0..20 {
            let p = alg.sample_projection(seed);
            for t in p.spectral_decomposition().unwrap().terms {
                assert!(t.value.abs() < 1e-12 || (t.value - 1.0).abs() < 1e-12, "value {}", t.value);
            }
        }
    }

    #[test]
    fn riemann_sum_integer_spectrum_level_one() {
        let alg = MatrixAlgebra::full(3);
        let a = el(&alg, &[&[1.0, 0.0, 0.0], &[0.0, -2.0, 0.0], &[0.0, 0.0, 3.0]]);
        let s = a.riemann_sum(1).unwrap();
        assert!((a - s.operator()).norm() <= 1.0);
    }

    #[test]
    fn riemann_sum_on_aligned_grid_is_exact() {
        let alg = MatrixAlgebra::full(2);
        let a = alg.element(ComplexMatrix::from_real_diagonal(&[0.3, 0.7])).unwrap();
        let s = a.riemann_sum(10).unwrap();
        assert!((&a - &s.operator()).norm() < 1e-12);
        // Off-grid level: within the bound.
        let s = a.riemann_sum(7).unwrap();
        assert!((&a - &s.operator()).norm() <= 1.0 / 7.0 + 1e-12);
    }

    #[test]
    fn riemann_coefficients_nonnegative_for_positive_input() {
        let alg = MatrixAlgebra::new(vec![2, 3]).unwrap();
        for seed in 0..10 {
            let a = alg.sample_positive(seed);
            for level in [1, 3, 10, 64] {
                let s = a.riemann_sum(level).unwrap();
                assert!(s.coefficients().iter().all(|&z| z >= 0.0));
                // 0 ⪯ A - S ⪯ I/ℓ
                let gap = &a - &s.operator();
                assert!(gap.psd_margin(Tolerance::default()).unwrap() >= -1e-9);
                let upper = alg.identity().scale_real(1.0 / f64::from(level)) - gap;
                assert!(upper.psd_margin(Tolerance::default()).unwrap() >= -1e-9);
            }
        }
    }

    #[test]
    fn riemann_levels_refine() {
        let alg = MatrixAlgebra::full(4);
        let a = alg.sample_hermitian(&mut random::rng(11));
        let mut level = 1;
        while level < 512 {
            let coarse = a.riemann_sum(level).unwrap();
            let fine = a.riemann_sum(2 * level).unwrap();
            // Every fine cell projection sits under some coarse cell projection.
            for q in &fine.terms.terms {
                let covered = coarse
                    .terms
                    .terms
                    .iter()
                    .any(|p| (&p.projection * &q.projection - &q.projection).norm() < 1e-9);
                assert!(covered, "level {level}");
            }
            level *= 2;
        }
    }

    #[test]
    fn riemann_rejects_level_zero() {
        let alg = MatrixAlgebra::full(2);
        assert!(alg.identity().riemann_sum(0).is_err());
    }

    #[test]
    fn positive_sampler_contract() {
        let scalars = MatrixAlgebra::scalars();
        let a = scalars.sample_positive(9);
        assert!(a.matrix()[(0, 0)].re >= 0.0 && a.matrix()[(0, 0)].im == 0.0);

        let alg = MatrixAlgebra::new(vec![3, 1, 2]).unwrap();
        assert_eq!(alg.sample_positive(42), alg.sample_positive(42));
        for seed in 0..25 {
            let a = alg.sample_positive(seed);
            assert!(a.psd_margin(Tolerance::default()).unwrap() >= -1e-12);
            assert!((a.norm() - 1.0).abs() < 1e-12);
            assert_eq!(alg.pattern_defect(a.matrix()), 0.0);
        }
    }

    #[test]
    fn projection_sampler_contract() {
        let alg = MatrixAlgebra::new(vec![2, 2]).unwrap();
        let mut saw_identity = false;
        let mut saw_zero = false;
        for seed in 0..64 {
            let p = alg.sample_projection(seed);
            assert!(p.projection_defect() <= 1e-12);
            let rank = p.matrix().trace().re.round();
            if rank == 4.0 {
                saw_identity = true;
                assert!(p.matrix().distance(&ComplexMatrix::identity(4)) < 1e-12);
            }
            if rank == 0.0 {
                saw_zero = true;
                assert!(p.matrix().max_abs() < 1e-12);
            }
        }
        assert!(saw_identity && saw_zero);
        assert_eq!(alg.sample_projection(3), alg.sample_projection(3));
    }

    #[test]
    fn commuting_projections_commute() {
        let alg = MatrixAlgebra::new(vec![3, 2]).unwrap();
        let ps = alg.sample_commuting_projections(&mut random::rng(1), 4);
        for p in &ps {
            for q in &ps {
                assert!((p * q - q * p).norm() < 1e-12);
            }
        }
    }

    fn small_algebra() -> impl Strategy<Value = MatrixAlgebra> {
        prop::collection::vec(1usize..=3, 1..=3)
            .prop_filter("ambient at most 6", |b| b.iter().sum::<usize>() <= 6)
            .prop_map(|b| MatrixAlgebra::new(b).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn jordan_identity_holds(alg in small_algebra(), seed in any::<u64>()) {
            let mut rng = random::rng(seed);
            let a = alg.sample_hermitian(&mut rng);
            let b = alg.sample_hermitian(&mut rng);
            let (ap, am) = a.jordan_parts().unwrap();
            let (bp, bm) = b.jordan_parts().unwrap();
            let (sp, sm) = (&a + &b).jordan_parts().unwrap();
            let lhs = &sp + &am + &bm;
            let rhs = &sm + &ap + &bp;
            prop_assert!((lhs - rhs).norm() <= 1e-9);
        }

        #[test]
        fn jordan_parts_are_bounded_and_orthogonal(alg in small_algebra(), seed in any::<u64>()) {
            let a = alg.sample_hermitian(&mut random::rng(seed));
            let (p, m) = a.jordan_parts().unwrap();
            let norm = a.norm();
            prop_assert!(p.norm() <= norm + 1e-12);
            prop_assert!(m.norm() <= norm + 1e-12);
            prop_assert!((&p * &m).norm() <= 1e-9);
            prop_assert!((&p - &m - &a).norm() <= 1e-9 * norm.max(1.0));
            prop_assert!(p.psd_margin(Tolerance::default()).unwrap() >= -1e-12);
            prop_assert!(m.psd_margin(Tolerance::default()).unwrap() >= -1e-12);
        }

        #[test]
        fn riemann_sums_converge(seed in any::<u64>()) {
            let alg = MatrixAlgebra::new(vec![2, 3]).unwrap();
            let a = alg.sample_hermitian(&mut random::rng(seed));
            let mut level = 1;
            while level <= 1024 {
                let s = a.riemann_sum(level).unwrap();
                prop_assert!((&a - &s.operator()).norm() <= 1.0 / f64::from(level) + 1e-12);
                level *= 2;
            }
        }

        #[test]
        fn spectral_decomposition_invariants(alg in small_algebra(), seed in any::<u64>()) {
            let a = alg.sample_hermitian(&mut random::rng(seed));
            let d = a.spectral_decomposition().unwrap();
            let defects = d.defects();
            prop_assert!(defects.projection <= 1e-9);
            prop_assert!(defects.orthogonality <= 1e-9);
            prop_assert!(defects.completeness <= 1e-9);
            prop_assert!((d.reconstruct().unwrap() - a).norm() <= 1e-9);
        }
    }
}
