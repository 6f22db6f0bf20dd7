//! Seeded generators for matrices, vectors and unitaries.
//!
//! All generators draw from `ChaCha8Rng`, so a seed reproduces the same
//! stream on every platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::kernel::{ComplexMatrix, Scalar, ZERO};

pub type SeededRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent stream for sub-task `index` of a seeded run.
pub fn substream(seed: u64, index: u64) -> SeededRng {
    // SplitMix64 finalizer spreads neighbouring (seed, index) pairs apart.
    let mut z = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    ChaCha8Rng::seed_from_u64(z ^ (z >> 31))
}

/// Standard complex Gaussian scalar (real and imaginary parts i.i.d. N(0, 1/2)).
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Scalar {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Scalar::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| complex_gaussian(rng))
}

pub fn unit_vector<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<Scalar> {
    loop {
        let v: Vec<Scalar> = (0..n).map(|_| complex_gaussian(rng)).collect();
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-8 {
            return v.into_iter().map(|z| z / norm).collect();
        }
    }
}

/// Random Hermitian matrix with Gaussian entries.
pub fn hermitian_matrix<R: Rng + ?Sized>(rng: &mut R, n: usize) -> ComplexMatrix {
    gaussian_matrix(rng, n, n).hermitian_part()
}

/// Haar-distributed unitary via Gram-Schmidt on a Gaussian matrix.
pub fn unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> ComplexMatrix {
    loop {
        let g = gaussian_matrix(rng, n, n);
        if let Some(q) = orthonormalize_columns(&g) {
            return q;
        }
    }
}

/// Modified Gram-Schmidt (run twice for stability). `None` if the columns are
/// numerically dependent.
pub fn orthonormalize_columns(m: &ComplexMatrix) -> Option<ComplexMatrix> {
    let (rows, cols) = m.shape();
    let mut q = m.clone();
    for k in 0..cols {
        for _ in 0..2 {
            for p in 0..k {
                let mut dot = ZERO;
                for i in 0..rows {
                    dot += q[(i, p)].conj() * q[(i, k)];
                }
                for i in 0..rows {
                    let qip = q[(i, p)];
                    q[(i, k)] -= dot * qip;
                }
            }
        }
        let norm = (0..rows).map(|i| q[(i, k)].norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-10 {
            return None;
        }
        for i in 0..rows {
            q[(i, k)] /= norm;
        }
    }
    Some(q)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let a = gaussian_matrix(&mut rng(7), 3, 3);
        let b = gaussian_matrix(&mut rng(7), 3, 3);
        assert_eq!(a, b);
        let c = gaussian_matrix(&mut rng(8), 3, 3);
        assert_ne!(a, c);
    }

    #[test]
    fn substreams_differ() {
        let a = gaussian_matrix(&mut substream(1, 0), 2, 2);
        let b = gaussian_matrix(&mut substream(1, 1), 2, 2);
        assert_ne!(a, b);
    }

    #[test]
    fn unitary_is_unitary() {
        let mut r = rng(3);
        for n in 1..=8 {
            let u = unitary(&mut r, n);
            let gram = u.adjoint() * &u;
            assert!(gram.distance(&ComplexMatrix::identity(n)) < 1e-13);
        }
    }
}
