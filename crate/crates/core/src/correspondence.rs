//! Unital *-representations `ρ: C(X, W₁) → W₂` and their correspondence with
//! normalized non-negative spectral measures.
//!
//! `C(X, W₁)` has the basis `χ_{x} ⊗ E_ij`, so a representation is stored as
//! one linear map `W₁ → W₂` per atom: `A ↦ ρ(χ_{x} ⊗ A)`.
//!
//! The two directions are computed along different paths. [`rep_to_measure`]
//! reads the projection family `P ↦ ρ(χ_{·} ⊗ P)` and assembles the measure
//! from spectral decompositions; [`measure_to_rep`] integrates `χ_{x} ⊗ E_ij`
//! through the four positive parts. Agreement after a round trip therefore
//! checks more than bookkeeping.

use serde::{Deserialize, Serialize};

use crate::algebra::{AlgebraElement, MatrixAlgebra};
use crate::error::{Error, Result};
use crate::family::{assemble_from_projection_family, ProbeConfig, ProjectionFamily};
use crate::integration::{integrate, integrate_four_part, OperatorFunction, ScalarFunction};
use crate::kernel::{ComplexMatrix, Tolerance, ONE};
use crate::map::LinearMap;
use crate::measure::{
    validate_nonneg_spectral, FiniteMeasurableSpace, NonNegativeMeasure, NonNegativeSpectralMeasure, PovMeasure,
    SpectralMeasure, SpectralProbeConfig,
};
use crate::random::{self, SeededRng};
use crate::report::{Check, Defect, Witness};

/// Linear map `C(X, W₁) → W₂` given by its action on `χ_{x} ⊗ E_ij`.
#[derive(Clone, Debug, PartialEq)]
pub struct Representation {
    space: FiniteMeasurableSpace,
    domain: MatrixAlgebra,
    codomain: MatrixAlgebra,
    maps: Vec<LinearMap>,
    certified: bool,
}

impl Representation {
    /// Wraps basis actions without certifying them.
    pub fn new(
        space: FiniteMeasurableSpace,
        domain: MatrixAlgebra,
        codomain: MatrixAlgebra,
        maps: Vec<LinearMap>,
    ) -> Result<Self> {
        // Same shape requirements as a measure's atom maps.
        let m = NonNegativeMeasure::new(space, domain, codomain, maps)?;
        Ok(Self::from_measure_maps(m))
    }

    fn from_measure_maps(m: NonNegativeMeasure) -> Self {
        Self {
            space: m.space(),
            domain: m.domain().clone(),
            codomain: m.codomain().clone(),
            maps: m.atom_maps().to_vec(),
            certified: false,
        }
    }

    pub fn space(&self) -> FiniteMeasurableSpace {
        self.space
    }

    pub fn domain(&self) -> &MatrixAlgebra {
        &self.domain
    }

    pub fn codomain(&self) -> &MatrixAlgebra {
        &self.codomain
    }

    /// `A ↦ ρ(χ_{x} ⊗ A)`.
    pub fn atom_map(&self, x: usize) -> &LinearMap {
        &self.maps[x]
    }

    pub fn atom_maps(&self) -> &[LinearMap] {
        &self.maps
    }

    /// Set only by [`certify_representation`] or the generator.
    pub fn is_certified(&self) -> bool {
        self.certified
    }

    /// `ρ(F) = Σ_x ρ(χ_{x} ⊗ F(x))`.
    pub fn apply(&self, f: &OperatorFunction) -> Result<AlgebraElement> {
        if f.algebra() != &self.domain || f.atom_count() != self.space.atom_count() {
            return Err(Error::DomainMismatch("function does not match the representation's domain".into()));
        }
        self.maps
            .iter()
            .zip(f.values())
            .try_fold(self.codomain.zero(), |acc, (m, v)| Ok(acc + m.apply(v)?))
    }

    /// `2ρ`-style rescaling; the result is uncertified.
    pub fn scale(&self, s: f64) -> Self {
        Self { maps: self.maps.iter().map(|m| m.scale(ONE * s)).collect(), certified: false, ..self.clone() }
    }

    /// `F ↦ ρ(Fᵀ)`; the result is uncertified.
    pub fn precompose_transpose(&self) -> Self {
        Self { maps: self.maps.iter().map(LinearMap::precompose_transpose).collect(), certified: false, ..self.clone() }
    }

    /// Largest Frobenius distance between corresponding basis images.
    pub fn distance(&self, rhs: &Self) -> Result<f64> {
        if self.space != rhs.space {
            return Err(Error::DomainMismatch("representations live on different spaces".into()));
        }
        self.maps
            .iter()
            .zip(&rhs.maps)
            .try_fold(0.0, |acc, (a, b)| Ok(f64::max(acc, a.distance(b)?)))
    }

    fn as_measure(&self) -> NonNegativeMeasure {
        NonNegativeMeasure::new(self.space, self.domain.clone(), self.codomain.clone(), self.maps.clone())
            .expect("same shape as the representation")
    }
}

/// `ρ(F) = U (⊕_x F(x) ⊗ I_{k_x}) U*`.
#[derive(Clone, Debug, PartialEq)]
pub struct RepresentationBlueprint {
    domain: MatrixAlgebra,
    multiplicities: Vec<usize>,
    intertwiner: ComplexMatrix,
}

impl RepresentationBlueprint {
    pub fn new(domain: MatrixAlgebra, multiplicities: Vec<usize>, intertwiner: ComplexMatrix) -> Result<Self> {
        let total = total_dim(&domain, &multiplicities);
        if intertwiner.shape() != (total, total) {
            return Err(Error::ShapeMismatch(format!(
                "intertwiner is {:?}, total dimension is {total}",
                intertwiner.shape()
            )));
        }
        let defect = (intertwiner.adjoint() * &intertwiner - ComplexMatrix::identity(total)).max_abs();
        if defect > 1e-12 {
            return Err(Error::BadConfig(format!("intertwiner is not unitary (defect {defect:e})")));
        }
        Ok(Self { domain, multiplicities, intertwiner })
    }

    /// Identity intertwiner.
    pub fn identity(domain: MatrixAlgebra, multiplicities: Vec<usize>) -> Self {
        let total = total_dim(&domain, &multiplicities);
        Self { domain, multiplicities, intertwiner: ComplexMatrix::identity(total) }
    }

    /// Haar-like random intertwiner.
    pub fn random(domain: MatrixAlgebra, multiplicities: Vec<usize>, rng: &mut SeededRng) -> Self {
        let total = total_dim(&domain, &multiplicities);
        let intertwiner = if total == 0 { ComplexMatrix::zeros(0, 0) } else { random::unitary(rng, total) };
        Self { domain, multiplicities, intertwiner }
    }

    pub fn domain(&self) -> &MatrixAlgebra {
        &self.domain
    }

    pub fn multiplicities(&self) -> &[usize] {
        &self.multiplicities
    }

    pub fn intertwiner(&self) -> &ComplexMatrix {
        &self.intertwiner
    }

    pub fn total_dim(&self) -> usize {
        total_dim(&self.domain, &self.multiplicities)
    }
}

fn total_dim(domain: &MatrixAlgebra, multiplicities: &[usize]) -> usize {
    multiplicities.iter().sum::<usize>() * domain.ambient_dim()
}

/// Builds the representation described by `bp`; it is certified by
/// construction.
pub fn generate_representation(bp: &RepresentationBlueprint) -> Result<Representation> {
    let total = bp.total_dim();
    if total == 0 {
        return Err(Error::EmptyBlueprint);
    }
    let space = FiniteMeasurableSpace::new(bp.multiplicities.len())?;
    let n = bp.domain.ambient_dim();
    let u = &bp.intertwiner;
    let ud = u.adjoint();
    let codomain = MatrixAlgebra::full(total);
    let mut offset = 0;
    let mut maps = Vec::with_capacity(bp.multiplicities.len());
    for &k in &bp.multiplicities {
        let ik = ComplexMatrix::identity(k);
        let map = LinearMap::from_fn(bp.domain.clone(), codomain.clone(), |a| {
            let mut big = ComplexMatrix::zeros(total, total);
            if k > 0 {
                big.set_diagonal_block(offset, &a.matrix().kron(&ik));
            }
            u * big * &ud
        })?;
        maps.push(map);
        offset += n * k;
    }
    let mut rep = Representation::new(space, bp.domain.clone(), codomain, maps)?;
    rep.certified = true;
    Ok(rep)
}

/// Defects of the unital *-representation axioms on the basis and on samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificationReport {
    /// `||ρ(1 ⊗ id) - id||`.
    pub unitality: f64,
    /// `||ρ(FG) - ρ(F)ρ(G)||` over basis pairs and sampled pairs.
    pub multiplicativity: Defect,
    /// `||ρ(F*) - ρ(F)*||` over the basis and samples.
    pub star: Defect,
    /// Multiplicativity and *-defects of `f ↦ ρ(f ⊗ P)` for sampled projections.
    pub projection_factorization: Defect,
    /// `max ||ρ(F)||` over sampled `F` with `||F||_∞ = 1`, including `1 ⊗ id`.
    pub norm_estimate: f64,
    pub passed: bool,
}

impl CertificationReport {
    pub fn checks(&self, tol: Tolerance) -> Vec<Check> {
        let unital = Check::at_most("representation.unitality", self.unitality, tol.absolute)
            .with_witness(Some(Witness::new("ρ(1 ⊗ id) differs from id")));
        vec![
            unital,
            Check::defect("representation.multiplicativity", &self.multiplicativity, tol.absolute),
            Check::defect("representation.star", &self.star, tol.absolute),
            Check::defect("representation.projection_factorization", &self.projection_factorization, tol.absolute),
            Check::at_most("representation.norm_estimate", self.norm_estimate, 1.0 + 1e-6)
                .with_witness(Some(Witness::new("sampled F with ||F||_∞ = 1 and ||ρ(F)|| > 1"))),
        ]
    }
}

/// Checks unitality, multiplicativity and *-preservation on every pair of
/// basis elements and on `cfg.samples` random pairs, and estimates `||ρ||`.
pub fn certify_representation(rho: &Representation, cfg: ProbeConfig, tol: Tolerance) -> CertificationReport {
    let space = rho.space;
    let alg = &rho.domain;
    let basis = alg.basis();
    let mut rng = random::rng(cfg.seed);

    let one = OperatorFunction::constant(space, &alg.identity());
    let rho_one = rho.apply(&one).expect("own domain");
    let unitality = (&rho_one - &rho.codomain.identity()).norm();
    let mut norm_estimate = rho_one.norm();

    // Basis: ρ(χ_x E_ij) ρ(χ_y E_kl) = δ_xy δ_jk ρ(χ_x E_il) (same block), 0 otherwise.
    let mut multiplicativity = Defect::default();
    let mut star = Defect::default();
    for x in space.atoms() {
        let images = rho.maps[x].images();
        for (a, ua) in basis.iter().enumerate() {
            let transpose = alg.basis_index(ua.block, ua.j, ua.i);
            star.offer((&images[transpose] - &images[a].adjoint()).frobenius_norm(), || {
                Witness::new("ρ(χ_{x} ⊗ E_ji) differs from ρ(χ_{x} ⊗ E_ij)*").atoms([x]).scalar(a as f64)
            });
            for y in space.atoms() {
                let other = rho.maps[y].images();
                for (b, ub) in basis.iter().enumerate() {
                    let lhs = &images[a] * &other[b];
                    let d = if x == y && ua.block == ub.block && ua.j == ub.i {
                        (&lhs - &images[alg.basis_index(ua.block, ua.i, ub.j)]).frobenius_norm()
                    } else {
                        lhs.frobenius_norm()
                    };
                    multiplicativity.offer(d, || {
                        Witness::new("ρ(χ_{x} ⊗ e_a) ρ(χ_{y} ⊗ e_b) differs from ρ of the product")
                            .atoms([x, y])
                            .scalar(a as f64)
                            .scalar(b as f64)
                    });
                }
            }
        }
    }

    for _ in 0..cfg.samples {
        let f = OperatorFunction::sample(space, alg, &mut rng);
        let g = OperatorFunction::sample(space, alg, &mut rng);
        let (rf, rg) = (rho.apply(&f).expect("own domain"), rho.apply(&g).expect("own domain"));
        let rfg = rho.apply(&f.mul(&g).expect("same shape")).expect("own domain");
        let witness = |desc: &str| {
            let mut w = Witness::new(desc);
            w.operators = f.values().iter().chain(g.values()).map(|v| v.matrix().clone()).collect();
            w
        };
        multiplicativity.offer((&rfg - &(&rf * &rg)).norm(), || witness("sampled F, G with ρ(FG) ≠ ρ(F)ρ(G)"));
        let rfs = rho.apply(&f.adjoint()).expect("own domain");
        star.offer((&rfs - &rf.adjoint()).norm(), || witness("sampled F with ρ(F*) ≠ ρ(F)*"));

        let unitary: Vec<AlgebraElement> = space.atoms().map(|_| alg.sample_unitary(&mut rng)).collect();
        let u = OperatorFunction::new(alg.clone(), unitary).expect("own domain");
        norm_estimate = norm_estimate.max(rho.apply(&u).expect("own domain").norm());
    }

    let mut projection_factorization = Defect::default();
    for _ in 0..cfg.samples.max(1) {
        let p = alg.sample_projection_with(&mut rng);
        let f = ScalarFunction::new((0..space.atom_count()).map(|_| random::complex_gaussian(&mut rng)).collect())
            .expect("finite");
        let g = ScalarFunction::new((0..space.atom_count()).map(|_| random::complex_gaussian(&mut rng)).collect())
            .expect("finite");
        let fg = ScalarFunction::new(f.values.iter().zip(&g.values).map(|(a, b)| a * b).collect()).expect("finite");
        let r = |h: &ScalarFunction| rho.apply(&h.tensor(&p)).expect("own domain");
        let fbar = ScalarFunction::new(f.values.iter().map(|z| z.conj()).collect()).expect("finite");
        let d = (r(&fg) - r(&f) * r(&g)).norm().max((r(&fbar) - r(&f).adjoint()).norm());
        projection_factorization.offer(d, || {
            Witness::new("f ↦ ρ(f ⊗ P) is not a *-homomorphism").operator(p.matrix().clone())
        });
    }

    let mut report = CertificationReport {
        unitality,
        multiplicativity,
        star,
        projection_factorization,
        norm_estimate,
        passed: false,
    };
    report.passed = report.checks(tol).iter().all(|c| c.passed);
    report
}

/// Runs [`certify_representation`] and records the outcome on `rho`.
pub fn certify_in_place(rho: &mut Representation, cfg: ProbeConfig, tol: Tolerance) -> CertificationReport {
    let report = certify_representation(rho, cfg, tol);
    rho.certified = report.passed;
    report
}

/// `P ↦ (Δ ↦ ρ(χ_Δ ⊗ P))`.
pub struct ProjectionsOf<'a>(pub &'a Representation);

impl ProjectionFamily for ProjectionsOf<'_> {
    fn space(&self) -> FiniteMeasurableSpace {
        self.0.space
    }
    fn domain(&self) -> &MatrixAlgebra {
        &self.0.domain
    }
    fn codomain(&self) -> &MatrixAlgebra {
        &self.0.codomain
    }
    fn evaluate(&self, p: &AlgebraElement) -> Result<SpectralMeasure> {
        let atoms = self.0.maps.iter().map(|m| m.apply(p)).collect::<Result<Vec<_>>>()?;
        Ok(SpectralMeasure::new(PovMeasure::new(self.0.space, self.0.codomain.clone(), atoms)?))
    }
}

/// The spectral measure `M` with `M_P({x}) = ρ(χ_{x} ⊗ P)`, assembled from the
/// projection family of `ρ`. Uncertified inputs are certified first.
pub fn rep_to_measure(rho: &Representation, cfg: ProbeConfig, tol: Tolerance) -> Result<NonNegativeSpectralMeasure> {
    if !rho.certified {
        let report = certify_representation(rho, cfg, tol);
        if !report.passed {
            return Err(Error::NotARepresentation(Box::new(report)));
        }
    }
    assemble_from_projection_family(&ProjectionsOf(rho))
}

/// `ρ(F) = ∫ F dM`, with each basis action `ρ(χ_{x} ⊗ E_ij)` integrated
/// through the four positive parts. `M` must validate as a normalized
/// non-negative spectral measure.
pub fn measure_to_rep(m: &NonNegativeSpectralMeasure, cfg: ProbeConfig, tol: Tolerance) -> Result<Representation> {
    let probe = SpectralProbeConfig { samples: cfg.samples.min(4), seed: cfg.seed, ..Default::default() };
    let report = validate_nonneg_spectral(m, &probe, tol);
    if !report.passed || !report.normalized(tol) {
        return Err(Error::InvalidMeasure(Box::new(report)));
    }
    let measure = m.as_measure();
    let space = measure.space();
    let alg = measure.domain().clone();
    let mut maps = Vec::with_capacity(space.atom_count());
    for x in space.atoms() {
        let delta = space.singleton(x);
        let images = (0..alg.dim())
            .map(|k| Ok(integrate_four_part(&OperatorFunction::indicator(space, &delta, &alg.unit(k)), measure)?.into_matrix()))
            .collect::<Result<Vec<_>>>()?;
        maps.push(LinearMap::from_images(alg.clone(), measure.codomain().clone(), images)?);
    }
    let mut rho = Representation::new(space, alg, measure.codomain().clone(), maps)?;
    let report = certify_in_place(&mut rho, cfg, tol);
    if !report.passed {
        return Err(Error::NotARepresentation(Box::new(report)));
    }
    Ok(rho)
}

/// `ρ(F) = ∫ F dM` by direct linear extension, used as an oracle.
pub fn integral_representation(m: &NonNegativeSpectralMeasure, f: &OperatorFunction) -> Result<AlgebraElement> {
    integrate(f, m.as_measure())
}

/// Domain block layouts with ambient dimension at most 3.
const SMALL_DOMAINS: [&[usize]; 7] = [&[1], &[2], &[3], &[1, 1], &[2, 1], &[1, 2], &[1, 1, 1]];

/// Seeded blueprint with `|X| ≤ 4`, ambient `W₁` dimension ≤ 3 and total
/// dimension ≤ 12; at least one multiplicity is nonzero.
pub fn sample_blueprint(rng: &mut SeededRng) -> RepresentationBlueprint {
    use rand::Rng;
    let atoms = rng.random_range(1..=4usize);
    let domain = MatrixAlgebra::new(SMALL_DOMAINS[rng.random_range(0..SMALL_DOMAINS.len())].to_vec())
        .expect("nonempty blocks");
    let n = domain.ambient_dim();
    let budget = 12 / n;
    let mut multiplicities = vec![0usize; atoms];
    let mut used = 0;
    for k in multiplicities.iter_mut() {
        let room = (budget - used).min(2);
        *k = rng.random_range(0..=room);
        used += *k;
    }
    if used == 0 {
        multiplicities[rng.random_range(0..atoms)] = 1;
    }
    RepresentationBlueprint::random(domain, multiplicities, rng)
}

/// Outcome of one seeded round trip.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundTrip {
    pub seed: u64,
    pub atoms: usize,
    pub domain: Vec<usize>,
    pub codomain_dim: usize,
    /// Basis defect of `measure_to_rep(rep_to_measure(ρ))` against `ρ`.
    pub rep_side: f64,
    /// Basis defect of `rep_to_measure(measure_to_rep(M))` against `M`.
    pub measure_side: f64,
}

/// Round trips in both directions for two representations drawn from `seed`.
pub fn roundtrip_defect(seed: u64, cfg: ProbeConfig, tol: Tolerance) -> Result<RoundTrip> {
    let rho = generate_representation(&sample_blueprint(&mut random::substream(seed, 0)))?;
    let back = measure_to_rep(&rep_to_measure(&rho, cfg, tol)?, cfg, tol)?;
    let rep_side = back.distance(&rho)?;

    let second = generate_representation(&sample_blueprint(&mut random::substream(seed, 1)))?;
    let m = rep_to_measure(&second, cfg, tol)?;
    let again = rep_to_measure(&measure_to_rep(&m, cfg, tol)?, cfg, tol)?;
    let measure_side = again.as_measure().distance(m.as_measure())?;

    Ok(RoundTrip {
        seed,
        atoms: rho.space.atom_count(),
        domain: rho.domain.blocks().to_vec(),
        codomain_dim: rho.codomain.ambient_dim(),
        rep_side,
        measure_side,
    })
}

/// `M` with `size` times a random Hermitian matrix added to the image of the
/// first matrix unit at the first atom; generally breaks the projection
/// property.
pub fn perturb_measure(m: &NonNegativeSpectralMeasure, size: f64, seed: u64) -> NonNegativeSpectralMeasure {
    let measure = m.as_measure();
    let mut maps = measure.atom_maps().to_vec();
    let d = measure.codomain().ambient_dim();
    let noise = random::hermitian_matrix(&mut random::rng(seed), d);
    let noise = noise.scale_real(size / noise.max_abs().max(f64::MIN_POSITIVE));
    let mut images = maps[0].images().to_vec();
    images[0] += &noise;
    maps[0] = LinearMap::from_images(measure.domain().clone(), measure.codomain().clone(), images)
        .expect("full codomain");
    NonNegativeSpectralMeasure::new(
        NonNegativeMeasure::new(measure.space(), measure.domain().clone(), measure.codomain().clone(), maps)
            .expect("same shape"),
    )
}

impl From<&Representation> for NonNegativeMeasure {
    /// Reinterprets basis actions as atom maps, without any checks.
    fn from(rho: &Representation) -> Self {
        rho.as_measure()
    }
}

impl From<NonNegativeMeasure> for Representation {
    /// Reinterprets atom maps as basis actions; the result is uncertified.
    fn from(m: NonNegativeMeasure) -> Self {
        Representation::from_measure_maps(m)
    }
}
