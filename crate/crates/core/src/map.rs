//! Linear maps between matrix algebras, stored by their values on the
//! matrix-unit basis of the domain.

use serde::{Deserialize, Serialize};

use crate::algebra::{AlgebraElement, MatrixAlgebra};
use crate::error::{Error, Result};
use crate::kernel::{ComplexMatrix, Scalar, Tolerance, ZERO};

/// `T: W₁ → W₂` with `images[k] = T(e_k)` for the `k`-th matrix unit of `W₁`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearMap {
    domain: MatrixAlgebra,
    codomain: MatrixAlgebra,
    images: Vec<ComplexMatrix>,
}

impl LinearMap {
    pub fn from_images(domain: MatrixAlgebra, codomain: MatrixAlgebra, images: Vec<ComplexMatrix>) -> Result<Self> {
        if images.len() != domain.dim() {
            return Err(Error::ShapeMismatch(format!(
                "{} basis images for a domain of dimension {}",
                images.len(),
                domain.dim()
            )));
        }
        for (k, m) in images.iter().enumerate() {
            if !codomain.contains(m, Tolerance::default()) {
                return Err(Error::DomainMismatch(format!(
                    "image of basis element {k} is not in {codomain:?}"
                )));
            }
        }
        Ok(Self { domain, codomain, images })
    }

    /// Tabulates `f` on the matrix-unit basis.
    pub fn from_fn(
        domain: MatrixAlgebra,
        codomain: MatrixAlgebra,
        mut f: impl FnMut(&AlgebraElement) -> ComplexMatrix,
    ) -> Result<Self> {
        let images = (0..domain.dim()).map(|k| f(&domain.unit(k))).collect();
        Self::from_images(domain, codomain, images)
    }

    pub fn zero(domain: MatrixAlgebra, codomain: MatrixAlgebra) -> Self {
        let n = codomain.ambient_dim();
        let images = vec![ComplexMatrix::zeros(n, n); domain.dim()];
        Self { domain, codomain, images }
    }

    pub fn identity(algebra: MatrixAlgebra) -> Self {
        Self::from_fn(algebra.clone(), algebra, |a| a.matrix().clone()).expect("identity map")
    }

    /// `A ↦ V A V*` into the full matrix algebra on `V`'s row space.
    pub fn conjugation(domain: MatrixAlgebra, v: &ComplexMatrix) -> Result<Self> {
        if v.ncols() != domain.ambient_dim() {
            return Err(Error::ShapeMismatch("conjugating matrix has the wrong column count".into()));
        }
        let vd = v.adjoint();
        Self::from_fn(domain, MatrixAlgebra::full(v.nrows()), |a| v * a.matrix() * &vd)
    }

    /// `A ↦ V Aᵀ V*`: positive, not completely positive.
    pub fn transpose_conjugation(domain: MatrixAlgebra, v: &ComplexMatrix) -> Result<Self> {
        if v.ncols() != domain.ambient_dim() {
            return Err(Error::ShapeMismatch("conjugating matrix has the wrong column count".into()));
        }
        let vd = v.adjoint();
        Self::from_fn(domain, MatrixAlgebra::full(v.nrows()), |a| v * a.matrix().transpose() * &vd)
    }

    pub fn domain(&self) -> &MatrixAlgebra {
        &self.domain
    }

    pub fn codomain(&self) -> &MatrixAlgebra {
        &self.codomain
    }

    pub fn images(&self) -> &[ComplexMatrix] {
        &self.images
    }

    /// Image of an element of the domain.
    pub fn apply(&self, a: &AlgebraElement) -> Result<AlgebraElement> {
        if a.algebra() != &self.domain {
            return Err(Error::DomainMismatch(format!(
                "map defined on {:?}, argument in {:?}",
                self.domain,
                a.algebra()
            )));
        }
        Ok(self.apply_unchecked(a))
    }

    pub(crate) fn apply_unchecked(&self, a: &AlgebraElement) -> AlgebraElement {
        let n = self.codomain.ambient_dim();
        let mut out = ComplexMatrix::zeros(n, n);
        for (u, img) in self.domain.basis().iter().zip(&self.images) {
            let c = a.matrix()[(u.row, u.col)];
            if c != ZERO {
                out += &img.scale(c);
            }
        }
        self.codomain.element(out).expect("images lie in the codomain")
    }

    /// Hilbert-Schmidt adjoint `T*(Y)`, an element of the domain.
    pub fn adjoint_apply(&self, y: &ComplexMatrix) -> AlgebraElement {
        let coeffs: Vec<Scalar> = self.images.iter().map(|img| img.adjoint().trace_product(y)).collect();
        self.domain.from_coefficients(&coeffs)
    }

    /// Choi-type matrices `Σ_ij E_ij ⊗ T(E_ij)`, one per domain block.
    pub fn choi_blocks(&self) -> Vec<ComplexMatrix> {
        let d = self.codomain.ambient_dim();
        self.domain
            .blocks()
            .iter()
            .enumerate()
            .map(|(b, &n)| {
                let mut choi = ComplexMatrix::zeros(n * d, n * d);
                for i in 0..n {
                    for j in 0..n {
                        let img = &self.images[self.domain.basis_index(b, i, j)];
                        for r in 0..d {
                            for c in 0..d {
                                choi[(i * d + r, j * d + c)] = img[(r, c)];
                            }
                        }
                    }
                }
                choi
            })
            .collect()
    }

    pub fn scale(&self, s: Scalar) -> Self {
        Self {
            domain: self.domain.clone(),
            codomain: self.codomain.clone(),
            images: self.images.iter().map(|m| m.scale(s)).collect(),
        }
    }

    pub fn add(&self, rhs: &Self) -> Result<Self> {
        self.check_compatible(rhs)?;
        Ok(Self {
            domain: self.domain.clone(),
            codomain: self.codomain.clone(),
            images: self.images.iter().zip(&rhs.images).map(|(a, b)| a + b).collect(),
        })
    }

    /// Largest Frobenius distance between corresponding basis images.
    pub fn distance(&self, rhs: &Self) -> Result<f64> {
        self.check_compatible(rhs)?;
        Ok(self
            .images
            .iter()
            .zip(&rhs.images)
            .map(|(a, b)| a.distance(b))
            .fold(0.0, f64::max))
    }

    /// `A ↦ T(Aᵀ)`, with the transpose taken in ambient coordinates.
    pub fn precompose_transpose(&self) -> Self {
        let images = self
            .domain
            .basis()
            .iter()
            .map(|u| {
                let k = self.domain.basis_index(u.block, u.j, u.i);
                self.images[k].clone()
            })
            .collect();
        Self { domain: self.domain.clone(), codomain: self.codomain.clone(), images }
    }

    fn check_compatible(&self, rhs: &Self) -> Result<()> {
        if self.domain != rhs.domain || self.codomain != rhs.codomain {
            return Err(Error::DomainMismatch("maps act between different algebras".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::is_psd;
    use crate::random;

    #[test]
    fn apply_extends_linearly() {
        let dom = MatrixAlgebra::new(vec![2, 1]).unwrap();
        let v = random::gaussian_matrix(&mut random::rng(1), 4, 3);
        let map = LinearMap::conjugation(dom.clone(), &v).unwrap();
        let a = dom.sample_element(&mut random::rng(2));
        let direct = &v * a.matrix() * v.adjoint();
        assert!(map.apply(&a).unwrap().matrix().distance(&direct) < 1e-12);
    }

    #[test]
    fn apply_rejects_foreign_elements() {
        let map = LinearMap::identity(MatrixAlgebra::full(2));
        let other = MatrixAlgebra::diagonal(2).identity();
        assert!(matches!(map.apply(&other), Err(Error::DomainMismatch(_))));
    }

    #[test]
    fn adjoint_matches_trace_duality() {
        let dom = MatrixAlgebra::new(vec![2, 2]).unwrap();
        let v = random::gaussian_matrix(&mut random::rng(3), 3, 4);
        let map = LinearMap::conjugation(dom.clone(), &v).unwrap();
        let mut rng = random::rng(4);
        let a = dom.sample_element(&mut rng);
        let y = random::gaussian_matrix(&mut rng, 3, 3);
        // <Y, T(A)> = <T*(Y), A> with <X, Z> = tr(X* Z).
        let lhs = y.adjoint().trace_product(map.apply(&a).unwrap().matrix());
        let rhs = map.adjoint_apply(&y).matrix().adjoint().trace_product(a.matrix());
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn choi_of_conjugation_is_psd_and_of_transpose_is_not() {
        let dom = MatrixAlgebra::full(2);
        let id = ComplexMatrix::identity(2);
        let conj = LinearMap::conjugation(dom.clone(), &id).unwrap();
        for c in conj.choi_blocks() {
            assert!(is_psd(&c, Tolerance::default()).unwrap().passed);
        }
        let transpose = LinearMap::transpose_conjugation(dom, &id).unwrap();
        let margin = is_psd(&transpose.choi_blocks()[0], Tolerance::default()).unwrap().margin;
        assert!((margin + 1.0).abs() < 1e-12);
    }

    #[test]
    fn precompose_transpose_matches_transpose_conjugation() {
        let dom = MatrixAlgebra::full(3);
        let v = random::gaussian_matrix(&mut random::rng(5), 3, 3);
        let a = LinearMap::conjugation(dom.clone(), &v).unwrap().precompose_transpose();
        let b = LinearMap::transpose_conjugation(dom, &v).unwrap();
        assert!(a.distance(&b).unwrap() < 1e-14);
    }
}
