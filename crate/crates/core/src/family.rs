//! Building measures from families of operator-valued measures.
//!
//! A [`PositiveFamily`] assigns a POVM `E_A` to every positive `A`; when the
//! assignment is additive, positively homogeneous and bounded it extends to a
//! unique non-negative measure with `m(Δ)(A) = E_A(Δ)`. A
//! [`ProjectionFamily`] assigns a spectral measure `F_P` to every projection
//! `P`; when it respects linear relations among commuting projections and the
//! product law it extends to a non-negative spectral measure via
//! `M_A = Σ λ_k F_{P_k}` for `A = Σ λ_k P_k`.
//!
//! Families are evaluated at chosen operators, never enumerated, so
//! compatibility is always certified on a finite probe set.

use serde::{Deserialize, Serialize};

use crate::algebra::{AlgebraElement, MatrixAlgebra};
use crate::error::{Error, Result};
use crate::kernel::{ComplexMatrix, Tolerance, I};
use crate::map::LinearMap;
use crate::measure::{
    self, validate_pov, validate_spectral, FiniteMeasurableSpace, MeasurableSet, NonNegativeMeasure,
    NonNegativeSpectralMeasure, PovMeasure, SpectralMeasure,
};
use crate::random;
use crate::report::{Check, Defect, Witness};

/// `A ↦ E_A` for positive `A` in the domain.
pub trait PositiveFamily {
    fn space(&self) -> FiniteMeasurableSpace;
    fn domain(&self) -> &MatrixAlgebra;
    fn codomain(&self) -> &MatrixAlgebra;
    fn evaluate(&self, a: &AlgebraElement) -> Result<PovMeasure>;
}

/// `P ↦ F_P` for projections `P` in the domain.
pub trait ProjectionFamily {
    fn space(&self) -> FiniteMeasurableSpace;
    fn domain(&self) -> &MatrixAlgebra;
    fn codomain(&self) -> &MatrixAlgebra;
    fn evaluate(&self, p: &AlgebraElement) -> Result<SpectralMeasure>;
}

impl PositiveFamily for NonNegativeMeasure {
    fn space(&self) -> FiniteMeasurableSpace {
        NonNegativeMeasure::space(self)
    }
    fn domain(&self) -> &MatrixAlgebra {
        NonNegativeMeasure::domain(self)
    }
    fn codomain(&self) -> &MatrixAlgebra {
        NonNegativeMeasure::codomain(self)
    }
    fn evaluate(&self, a: &AlgebraElement) -> Result<PovMeasure> {
        self.restrict(a)
    }
}

impl ProjectionFamily for NonNegativeSpectralMeasure {
    fn space(&self) -> FiniteMeasurableSpace {
        self.as_measure().space()
    }
    fn domain(&self) -> &MatrixAlgebra {
        self.as_measure().domain()
    }
    fn codomain(&self) -> &MatrixAlgebra {
        self.as_measure().codomain()
    }
    fn evaluate(&self, p: &AlgebraElement) -> Result<SpectralMeasure> {
        self.projection_measure(p)
    }
}

/// Family given by a closure returning the atom values of `E_A`.
pub struct FnPositiveFamily<F> {
    space: FiniteMeasurableSpace,
    domain: MatrixAlgebra,
    codomain: MatrixAlgebra,
    f: F,
}

impl<F> FnPositiveFamily<F>
where
    F: Fn(&AlgebraElement) -> Vec<ComplexMatrix>,
{
    pub fn new(space: FiniteMeasurableSpace, domain: MatrixAlgebra, codomain: MatrixAlgebra, f: F) -> Self {
        Self { space, domain, codomain, f }
    }
}

impl<F> PositiveFamily for FnPositiveFamily<F>
where
    F: Fn(&AlgebraElement) -> Vec<ComplexMatrix>,
{
    fn space(&self) -> FiniteMeasurableSpace {
        self.space
    }
    fn domain(&self) -> &MatrixAlgebra {
        &self.domain
    }
    fn codomain(&self) -> &MatrixAlgebra {
        &self.codomain
    }
    fn evaluate(&self, a: &AlgebraElement) -> Result<PovMeasure> {
        PovMeasure::from_matrices(self.space, self.codomain.clone(), (self.f)(a))
    }
}

/// Family given by a closure returning the atom values of `F_P`.
pub struct FnProjectionFamily<F> {
    space: FiniteMeasurableSpace,
    domain: MatrixAlgebra,
    codomain: MatrixAlgebra,
    f: F,
}

impl<F> FnProjectionFamily<F>
where
    F: Fn(&AlgebraElement) -> Vec<ComplexMatrix>,
{
    pub fn new(space: FiniteMeasurableSpace, domain: MatrixAlgebra, codomain: MatrixAlgebra, f: F) -> Self {
        Self { space, domain, codomain, f }
    }
}

impl<F> ProjectionFamily for FnProjectionFamily<F>
where
    F: Fn(&AlgebraElement) -> Vec<ComplexMatrix>,
{
    fn space(&self) -> FiniteMeasurableSpace {
        self.space
    }
    fn domain(&self) -> &MatrixAlgebra {
        &self.domain
    }
    fn codomain(&self) -> &MatrixAlgebra {
        &self.codomain
    }
    fn evaluate(&self, p: &AlgebraElement) -> Result<SpectralMeasure> {
        Ok(SpectralMeasure::new(PovMeasure::from_matrices(self.space, self.codomain.clone(), (self.f)(p))?))
    }
}

/// Positive family known only on a finite list of operators, as read from a
/// probe-set file. Evaluating anywhere else is an error.
#[derive(Clone, Debug, PartialEq)]
pub struct TabulatedFamily {
    space: FiniteMeasurableSpace,
    domain: MatrixAlgebra,
    codomain: MatrixAlgebra,
    entries: Vec<(AlgebraElement, PovMeasure)>,
}

const LOOKUP_TOLERANCE: f64 = 1e-9;

impl TabulatedFamily {
    pub fn new(
        space: FiniteMeasurableSpace,
        domain: MatrixAlgebra,
        codomain: MatrixAlgebra,
        entries: Vec<(AlgebraElement, PovMeasure)>,
    ) -> Result<Self> {
        for (a, e) in &entries {
            if a.algebra() != &domain || e.codomain() != &codomain || e.space() != space {
                return Err(Error::DomainMismatch("tabulated entry does not match the family's algebras".into()));
            }
        }
        Ok(Self { space, domain, codomain, entries })
    }

    /// Tabulates `fam` at `probes`.
    pub fn from_family(fam: &dyn PositiveFamily, probes: &[AlgebraElement]) -> Result<Self> {
        let entries = probes.iter().map(|a| Ok((a.clone(), fam.evaluate(a)?))).collect::<Result<_>>()?;
        Self::new(fam.space(), fam.domain().clone(), fam.codomain().clone(), entries)
    }

    pub fn entries(&self) -> &[(AlgebraElement, PovMeasure)] {
        &self.entries
    }

    fn lookup(&self, a: &AlgebraElement) -> Option<usize> {
        self.entries.iter().position(|(b, _)| (b - a).matrix().max_abs() <= LOOKUP_TOLERANCE)
    }
}

impl PositiveFamily for TabulatedFamily {
    fn space(&self) -> FiniteMeasurableSpace {
        self.space
    }
    fn domain(&self) -> &MatrixAlgebra {
        &self.domain
    }
    fn codomain(&self) -> &MatrixAlgebra {
        &self.codomain
    }
    fn evaluate(&self, a: &AlgebraElement) -> Result<PovMeasure> {
        if a.matrix().max_abs() <= LOOKUP_TOLERANCE {
            let zeros = vec![self.codomain.zero(); self.space.atom_count()];
            return PovMeasure::new(self.space, self.codomain.clone(), zeros);
        }
        self.lookup(a)
            .map(|k| self.entries[k].1.clone())
            .ok_or_else(|| Error::DomainMismatch("operator is not in the tabulated probe set".into()))
    }
}

/// Probe operators a [`TabulatedFamily`] must contain for
/// [`build_from_positive_family`] to succeed: the positive parts of every
/// matrix unit.
pub fn basis_probes(domain: &MatrixAlgebra) -> Result<Vec<AlgebraElement>> {
    let mut out: Vec<AlgebraElement> = Vec::new();
    for k in 0..domain.dim() {
        for part in domain.unit(k).four_positive_parts()? {
            let known = out.iter().any(|b| (b - &part).matrix().max_abs() <= LOOKUP_TOLERANCE);
            if part.matrix().max_abs() > LOOKUP_TOLERANCE && !known {
                out.push(part);
            }
        }
    }
    Ok(out)
}

/// Worst-case compatibility defects of a family over its probe set.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CompatibilityReport {
    pub probes: usize,
    /// `||E_{A+B}({x}) - E_A({x}) - E_B({x})||`, relative to `max(1, scale)`.
    pub additivity: Defect,
    /// `||E_{λA}({x}) - λ E_A({x})||`, relative to `max(1, scale)`.
    pub homogeneity: Defect,
    /// Estimated `k_Δ` for each singleton `Δ = {x}`.
    pub bound_constants: Vec<f64>,
    /// Estimated `k_X`.
    pub total_bound: f64,
    /// `||Σ λ_i F_{P_i}({x}) - Σ μ_j F_{Q_j}({x})||` for generated relations.
    pub linear_relation: Defect,
    /// `||F_P({x}) F_Q({y}) - δ_xy F_{PQ}({x})||` over commuting probe pairs.
    pub product_law: Defect,
    /// Worst positivity (POVM) or projection (spectral) failure of a returned
    /// measure.
    pub validity: Defect,
    /// Whether the family was probed as a projection family.
    pub spectral: bool,
    pub passed: bool,
}

impl CompatibilityReport {
    pub fn checks(&self, tol: Tolerance) -> Vec<Check> {
        let mut out = vec![Check::defect("family.validity", &self.validity, tol.absolute)];
        if self.spectral {
            out.push(Check::defect("family.linear_relation", &self.linear_relation, tol.absolute));
            out.push(Check::defect("family.product_law", &self.product_law, tol.absolute));
            let k = self.bound_constants.iter().copied().fold(0.0, f64::max);
            out.push(Check::at_most("family.projection_bound", k, 1.0 + tol.absolute));
        } else {
            out.push(Check::defect("family.additivity", &self.additivity, tol.absolute));
            out.push(Check::defect("family.homogeneity", &self.homogeneity, tol.absolute));
            out.push(Check::at_most("family.bound_constant", self.total_bound, f64::MAX));
        }
        out
    }

    fn finish(mut self, tol: Tolerance) -> Self {
        self.passed = self.checks(tol).iter().all(|c| c.passed);
        self
    }
}

/// Probe settings shared by the compatibility checks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub samples: usize,
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self { samples: 16, seed: 0 }
    }
}

fn atom_defect(
    defect: &mut Defect,
    lhs: &PovMeasure,
    rhs: &[AlgebraElement],
    describe: &str,
    operators: &[&AlgebraElement],
) {
    for (x, r) in rhs.iter().enumerate() {
        let l = lhs.atom(x);
        let scale = l.norm().max(r.norm()).max(1.0);
        let d = (l - r).norm() / scale;
        defect.offer(d, || {
            let mut w = Witness::new(describe).atoms([x]);
            w.operators = operators.iter().map(|a| a.matrix().clone()).collect();
            w
        });
    }
}

fn pov_validity(defect: &mut Defect, e: &PovMeasure, a: &AlgebraElement, tol: Tolerance) {
    let r = validate_pov(e, tol);
    if let Some(x) = r.worst_atom {
        defect.offer((-r.margins[x]).max(0.0), || {
            Witness::new("E_A({x}) is not positive").atoms([x]).operator(a.matrix().clone())
        });
    }
}

/// Canonical positive probes: diagonal units, the identity and the rank-one
/// projections onto `(e_i ± e_j)/√2`, `(e_i ± i e_j)/√2` in each block.
fn positive_probes(alg: &MatrixAlgebra) -> Vec<AlgebraElement> {
    let mut out = measure::canonical_projections(alg);
    let offsets = alg.offsets();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for (&n, &off) in alg.blocks().iter().zip(&offsets) {
        for i in 0..n {
            for j in i + 1..n {
                for phase in [crate::kernel::ONE, -crate::kernel::ONE, I, -I] {
                    let mut v = vec![crate::kernel::ZERO; alg.ambient_dim()];
                    v[off + i] = crate::kernel::ONE * s;
                    v[off + j] = phase * s;
                    out.push(alg.element(ComplexMatrix::outer(&v)).expect("rank-one block element"));
                }
            }
        }
    }
    out
}

/// Samples positive pairs and nonnegative scalars and measures how far `fam`
/// is from additive, homogeneous and bounded, and whether its values are
/// POVMs.
pub fn check_positive_family(fam: &dyn PositiveFamily, cfg: ProbeConfig, tol: Tolerance) -> Result<CompatibilityReport> {
    let alg = fam.domain().clone();
    let space = fam.space();
    let mut rng = random::rng(cfg.seed);

    let mut probes = positive_probes(&alg);
    for _ in 0..cfg.samples {
        probes.push(alg.sample_positive_with(&mut rng));
    }

    let mut report = CompatibilityReport { probes: probes.len(), ..Default::default() };
    report.bound_constants = vec![0.0; space.atom_count()];
    let mut values = Vec::with_capacity(probes.len());
    for a in &probes {
        let e = fam.evaluate(a)?;
        pov_validity(&mut report.validity, &e, a, tol);
        let norm = a.norm();
        for x in space.atoms() {
            report.bound_constants[x] = report.bound_constants[x].max(e.atom(x).norm() / norm);
        }
        report.total_bound = report.total_bound.max(e.total().norm() / norm);
        values.push(e);
    }

    // Pairs: consecutive probes plus independent random pairs.
    let mut pairs: Vec<(usize, AlgebraElement, AlgebraElement)> = Vec::new();
    for k in 0..probes.len() {
        let next = (k + 1) % probes.len();
        pairs.push((k, probes[k].clone(), probes[next].clone()));
    }
    for _ in 0..cfg.samples {
        pairs.push((usize::MAX, alg.sample_positive_with(&mut rng), alg.sample_positive_with(&mut rng)));
    }
    for (_, a, b) in &pairs {
        let sum = fam.evaluate(&(a + b))?;
        let ea = fam.evaluate(a)?;
        let eb = fam.evaluate(b)?;
        let rhs: Vec<AlgebraElement> = space.atoms().map(|x| ea.atom(x) + eb.atom(x)).collect();
        atom_defect(&mut report.additivity, &sum, &rhs, "E_{A+B} differs from E_A + E_B", &[a, b]);
    }

    use rand::Rng;
    let mut lambdas = vec![0.0, 0.5, 2.5];
    for _ in 0..cfg.samples {
        lambdas.push(rng.random_range(0.0..4.0));
    }
    for (k, &lambda) in lambdas.iter().enumerate() {
        let a = &probes[k % probes.len()];
        let ea = &values[k % probes.len()];
        let scaled = fam.evaluate(&a.scale_real(lambda))?;
        let rhs: Vec<AlgebraElement> = space.atoms().map(|x| ea.atom(x).scale_real(lambda)).collect();
        let scalar = AlgebraElement::new(MatrixAlgebra::scalars(), ComplexMatrix::from_real_diagonal(&[lambda]))?;
        atom_defect(&mut report.homogeneity, &scaled, &rhs, "E_{λA} differs from λ E_A", &[a, &scalar]);
    }

    Ok(report.finish(tol))
}

/// Compatibility checks restricted to the operators a tabulated family
/// knows: additivity on every triple `(A, B, A + B)` and homogeneity on every
/// pair `(A, λA)` present in the table.
pub fn check_tabulated_family(fam: &TabulatedFamily, tol: Tolerance) -> Result<CompatibilityReport> {
    let space = fam.space;
    let entries = &fam.entries;
    let mut report = CompatibilityReport { probes: entries.len(), ..Default::default() };
    report.bound_constants = vec![0.0; space.atom_count()];

    for (a, e) in entries {
        pov_validity(&mut report.validity, e, a, tol);
        let norm = a.norm();
        if norm > 0.0 {
            for x in space.atoms() {
                report.bound_constants[x] = report.bound_constants[x].max(e.atom(x).norm() / norm);
            }
            report.total_bound = report.total_bound.max(e.total().norm() / norm);
        }
    }

    for (i, (a, ea)) in entries.iter().enumerate() {
        for (b, eb) in &entries[i..] {
            if let Some(k) = fam.lookup(&(a + b)) {
                let rhs: Vec<AlgebraElement> = space.atoms().map(|x| ea.atom(x) + eb.atom(x)).collect();
                atom_defect(&mut report.additivity, &entries[k].1, &rhs, "E_{A+B} differs from E_A + E_B", &[a, b]);
            }
        }
        for (b, eb) in entries {
            // b = λa with λ read off the largest entry of a.
            let (idx, _) = a
                .matrix()
                .row_major()
                .iter()
                .enumerate()
                .fold((0, 0.0), |acc, (k, z)| if z.norm() > acc.1 { (k, z.norm()) } else { acc });
            let n = a.algebra().ambient_dim();
            let (r, c) = (idx / n, idx % n);
            let ratio = b.matrix()[(r, c)] / a.matrix()[(r, c)];
            if ratio.im.abs() > 1e-12 || ratio.re <= 0.0 || (ratio.re - 1.0).abs() < 1e-12 {
                continue;
            }
            let lambda = ratio.re;
            if (b - &a.scale_real(lambda)).matrix().max_abs() > LOOKUP_TOLERANCE {
                continue;
            }
            let rhs: Vec<AlgebraElement> = space.atoms().map(|x| ea.atom(x).scale_real(lambda)).collect();
            atom_defect(&mut report.homogeneity, eb, &rhs, "E_{λA} differs from λ E_A", &[a, b]);
        }
    }
    Ok(report.finish(tol))
}

/// Builds `m` with `m(Δ)(A) = (E_{re(A)₊} - E_{re(A)₋})(Δ) + i(E_{im(A)₊} - E_{im(A)₋})(Δ)`
/// on every matrix unit, after checking compatibility on the probe set.
pub fn build_from_positive_family(
    fam: &dyn PositiveFamily,
    cfg: ProbeConfig,
    tol: Tolerance,
) -> Result<NonNegativeMeasure> {
    let report = check_positive_family(fam, cfg, tol)?;
    if !report.passed {
        return Err(Error::IncompatibleFamily(Box::new(report)));
    }
    assemble_from_positive_family(fam)
}

/// The construction of [`build_from_positive_family`] without the
/// compatibility check.
pub fn assemble_from_positive_family(fam: &dyn PositiveFamily) -> Result<NonNegativeMeasure> {
    let alg = fam.domain().clone();
    let space = fam.space();
    let codomain = fam.codomain().clone();
    let n = codomain.ambient_dim();
    let mut images = vec![Vec::with_capacity(alg.dim()); space.atom_count()];
    for k in 0..alg.dim() {
        let parts = alg.unit(k).four_positive_parts()?;
        let signs = [crate::kernel::ONE, -crate::kernel::ONE, I, -I];
        let mut atoms = vec![ComplexMatrix::zeros(n, n); space.atom_count()];
        for (part, sign) in parts.iter().zip(signs) {
            if part.matrix().max_abs() == 0.0 {
                continue;
            }
            let e = fam.evaluate(part)?;
            for (x, acc) in atoms.iter_mut().enumerate() {
                *acc += &e.atom(x).matrix().scale(sign);
            }
        }
        for (x, m) in atoms.into_iter().enumerate() {
            images[x].push(m);
        }
    }
    let maps = images
        .into_iter()
        .map(|imgs| LinearMap::from_images(alg.clone(), codomain.clone(), imgs))
        .collect::<Result<Vec<_>>>()?;
    NonNegativeMeasure::new(space, alg, codomain, maps)
}

/// `M_A({x}) = Σ λ_k F_{P_k}({x})` for Hermitian `A = Σ λ_k P_k`.
pub fn spectral_integral(fam: &dyn ProjectionFamily, a: &AlgebraElement) -> Result<Vec<AlgebraElement>> {
    let decomposition = a.spectral_decomposition()?;
    let space = fam.space();
    let mut out = vec![fam.codomain().zero(); space.atom_count()];
    for term in &decomposition.terms {
        if term.value == 0.0 {
            continue;
        }
        let f = fam.evaluate(&term.projection)?;
        for (x, acc) in out.iter_mut().enumerate() {
            *acc = &*acc + &f.as_pov().atom(x).scale_real(term.value);
        }
    }
    Ok(out)
}

/// Generated linear relations `Σ λ_i P_i = Σ μ_j Q_j` among commuting
/// projections, each side as `(coefficient, projection)` pairs.
type Relation = (Vec<(f64, AlgebraElement)>, Vec<(f64, AlgebraElement)>);

fn generated_relations(alg: &MatrixAlgebra, cfg: ProbeConfig) -> Vec<Relation> {
    let mut rng = random::rng(cfg.seed ^ 0x5eed);
    let id = alg.identity();
    let mut out: Vec<Relation> = Vec::new();
    for p in measure::canonical_projections(alg) {
        out.push((vec![(1.0, p.clone()), (1.0, &id - &p)], vec![(1.0, id.clone())]));
    }
    for _ in 0..cfg.samples {
        let q = alg.sample_orthogonal_projections(&mut rng, 3);
        let a = &q[0] + &q[1];
        let b = &q[1] + &q[2];
        out.push((vec![(1.0, q[0].clone()), (1.0, q[1].clone())], vec![(1.0, a.clone())]));
        out.push((vec![(0.5, a.clone()), (0.5, b.clone())], vec![(0.5, id.clone()), (0.5, q[1].clone())]));
        out.push((vec![(2.0, a), (3.0, q[2].clone())], vec![(2.0, id.clone()), (1.0, q[2].clone())]));
        let p = alg.sample_projection_with(&mut rng);
        let r = alg.sample_projection_with(&mut rng);
        out.push((vec![(1.0, p.clone()), (1.0, &id - &p)], vec![(1.0, r.clone()), (1.0, &id - &r)]));
    }
    out
}

/// Probes a projection family: spectrality of each `F_P`, generated linear
/// relations, the bound `k_Δ`, and the product law on commuting pairs.
pub fn check_projection_family(
    fam: &dyn ProjectionFamily,
    cfg: ProbeConfig,
    tol: Tolerance,
) -> Result<CompatibilityReport> {
    let alg = fam.domain().clone();
    let space = fam.space();
    let mut rng = random::rng(cfg.seed);
    let mut probes = measure::canonical_projections(&alg);
    for _ in 0..cfg.samples {
        probes.push(alg.sample_projection_with(&mut rng));
    }

    let mut report = CompatibilityReport { probes: probes.len(), spectral: true, ..Default::default() };
    report.bound_constants = vec![0.0; space.atom_count()];
    for p in &probes {
        let f = fam.evaluate(p)?;
        let r = validate_spectral(&f, tol, false);
        let mut worst = r.worst_projection();
        worst.merge(&r.orthogonality);
        if let Some(w) = worst.witness {
            report.validity.offer(worst.value, || w.operator(p.matrix().clone()));
        }
        for x in space.atoms() {
            report.bound_constants[x] = report.bound_constants[x].max(f.as_pov().atom(x).norm());
        }
        report.total_bound = report.total_bound.max(f.as_pov().total().norm());
    }

    for (lhs, rhs) in generated_relations(&alg, cfg) {
        let side = |terms: &[(f64, AlgebraElement)]| -> Result<Vec<AlgebraElement>> {
            let mut acc = vec![fam.codomain().zero(); space.atom_count()];
            for (c, p) in terms {
                let f = fam.evaluate(p)?;
                for (x, a) in acc.iter_mut().enumerate() {
                    *a = &*a + &f.as_pov().atom(x).scale_real(*c);
                }
            }
            Ok(acc)
        };
        let (l, r) = (side(&lhs)?, side(&rhs)?);
        for x in space.atoms() {
            report.linear_relation.offer((&l[x] - &r[x]).norm(), || {
                let mut w = Witness::new("Σ λ_i F_{P_i}({x}) differs from Σ μ_j F_{Q_j}({x}) for Σ λ_i P_i = Σ μ_j Q_j")
                    .atoms([x]);
                for (c, p) in lhs.iter().chain(&rhs) {
                    w = w.operator(p.matrix().clone()).scalar(*c);
                }
                w.scalars.push(lhs.len() as f64);
                w
            });
        }
    }

    let canonical = measure::canonical_projections(&alg);
    let mut pairs: Vec<(AlgebraElement, AlgebraElement)> = Vec::new();
    for p in &canonical {
        for q in &canonical {
            pairs.push((p.clone(), q.clone()));
        }
    }
    for _ in 0..cfg.samples {
        let pq = alg.sample_commuting_projections(&mut rng, 2);
        pairs.push((pq[0].clone(), pq[1].clone()));
    }
    for (p, q) in &pairs {
        let (fp, fq, fpq) = (fam.evaluate(p)?, fam.evaluate(q)?, fam.evaluate(&(p * q))?);
        for x in space.atoms() {
            for y in space.atoms() {
                let lhs = fp.as_pov().atom(x) * fq.as_pov().atom(y);
                let d = if x == y { (&lhs - fpq.as_pov().atom(x)).norm() } else { lhs.norm() };
                report.product_law.offer(d, || {
                    Witness::new("F_P({x}) F_Q({y}) differs from F_PQ({x} ∩ {y})")
                        .atoms([x, y])
                        .operator(p.matrix().clone())
                        .operator(q.matrix().clone())
                });
            }
        }
    }
    Ok(report.finish(tol))
}

/// Builds `M` from the case of finite spectral decompositions, after checking
/// compatibility on the probe set.
pub fn build_from_projection_family(
    fam: &dyn ProjectionFamily,
    cfg: ProbeConfig,
    tol: Tolerance,
) -> Result<NonNegativeSpectralMeasure> {
    let report = check_projection_family(fam, cfg, tol)?;
    if !report.passed {
        return Err(Error::IncompatibleFamily(Box::new(report)));
    }
    assemble_from_projection_family(fam)
}

/// The construction of [`build_from_projection_family`] without the
/// compatibility check: `E_ii` is evaluated directly, and
/// `E_ij = (H₁ + iH₂)/2` with `H₁ = E_ij + E_ji`, `H₂ = -i(E_ij - E_ji)` goes
/// through the spectral decompositions of `H₁` and `H₂`.
pub fn assemble_from_projection_family(fam: &dyn ProjectionFamily) -> Result<NonNegativeSpectralMeasure> {
    let alg = fam.domain().clone();
    let space = fam.space();
    let codomain = fam.codomain().clone();
    let mut images: Vec<Vec<ComplexMatrix>> = vec![Vec::with_capacity(alg.dim()); space.atom_count()];
    for u in alg.basis() {
        let atoms: Vec<ComplexMatrix> = if u.i == u.j {
            let f = fam.evaluate(&alg.unit(alg.basis_index(u.block, u.i, u.j)))?;
            f.as_pov().atom_values().iter().map(|a| a.matrix().clone()).collect()
        } else {
            let eij = alg.unit(alg.basis_index(u.block, u.i, u.j));
            let eji = alg.unit(alg.basis_index(u.block, u.j, u.i));
            let h1 = &eij + &eji;
            let h2 = (&eij - &eji).scale(-I);
            let m1 = spectral_integral(fam, &h1)?;
            let m2 = spectral_integral(fam, &h2)?;
            m1.iter().zip(&m2).map(|(a, b)| (a + &b.scale(I)).scale_real(0.5).into_matrix()).collect()
        };
        for (x, m) in atoms.into_iter().enumerate() {
            images[x].push(m);
        }
    }
    let maps = images
        .into_iter()
        .map(|imgs| LinearMap::from_images(alg.clone(), codomain.clone(), imgs))
        .collect::<Result<Vec<_>>>()?;
    Ok(NonNegativeSpectralMeasure::new(NonNegativeMeasure::new(space, alg, codomain, maps)?))
}

/// One point of the Riemann defect curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiemannLevel {
    pub level: u32,
    /// `max_Δ ||M_{S_ℓ(A)}(Δ) - M_A(Δ)|| / k_Δ` over singletons and `X`.
    pub defect: f64,
    /// `2/ℓ`: the Cauchy estimate in units of `k_Δ`.
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiemannPathReport {
    pub levels: Vec<RiemannLevel>,
    /// `k_Δ` for each singleton, then for `X`.
    pub bound_constants: Vec<f64>,
    pub passed: bool,
}

/// Compares `M_{S_ℓ(A)}`, computed from the Riemann sums of a positive `A`,
/// with `M_A` at each level.
pub fn riemann_path_check(
    fam: &dyn ProjectionFamily,
    a: &AlgebraElement,
    levels: &[u32],
    tol: Tolerance,
) -> Result<RiemannPathReport> {
    if a.psd_margin(tol)? < -tol.absolute {
        return Err(Error::BadConfig("the Riemann path is defined for positive operators".into()));
    }
    let space = fam.space();
    let sets: Vec<MeasurableSet> = space.atoms().map(|x| space.singleton(x)).chain([space.full()]).collect();

    // k_Δ = sup_P ||F_P(Δ)||, attained at P = id for a compatible family.
    let identity = fam.evaluate(&fam.domain().identity())?;
    let mut k: Vec<f64> = sets.iter().map(|s| identity.as_pov().value(s).map(|v| v.norm())).collect::<Result<_>>()?;
    for p in measure::canonical_projections(fam.domain()) {
        let f = fam.evaluate(&p)?;
        for (kd, s) in k.iter_mut().zip(&sets) {
            *kd = kd.max(f.as_pov().value(s)?.norm());
        }
    }

    let target = spectral_integral(fam, a)?;
    let mut out = Vec::with_capacity(levels.len());
    for &level in levels {
        let sum = a.riemann_sum(level)?;
        let approx = spectral_integral(fam, &sum.operator())?;
        let mut defect = 0.0f64;
        for (s, &kd) in sets.iter().zip(&k) {
            let d = s.atoms().fold(fam.codomain().zero(), |acc, x| acc + (&approx[x] - &target[x])).norm();
            let ratio = if kd > 0.0 { d / kd } else if d > tol.absolute { f64::INFINITY } else { 0.0 };
            defect = defect.max(ratio);
        }
        out.push(RiemannLevel { level, defect, bound: 2.0 / f64::from(level) });
    }
    let passed = out.iter().all(|l| l.defect <= l.bound + tol.absolute);
    Ok(RiemannPathReport { levels: out, bound_constants: k, passed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::ONE;
    use crate::measure::{validate_nonneg_spectral, SpectralProbeConfig};

    fn space(k: usize) -> FiniteMeasurableSpace {
        FiniteMeasurableSpace::new(k).unwrap()
    }

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    /// `M^x(A) = V_x A V_x*` with `V_x` the `x`-th isometric block column of a
    /// unitary, i.e. a representation compressed to atoms.
    fn diagonal_spectral(k: usize, alg: MatrixAlgebra, seed: u64) -> NonNegativeSpectralMeasure {
        let n = alg.ambient_dim();
        let u = random::unitary(&mut random::rng(seed), n * k);
        NonNegativeSpectralMeasure::new(
            NonNegativeMeasure::from_fn(space(k), alg, MatrixAlgebra::full(n * k), |x, a| {
                let mut e = ComplexMatrix::zeros(k, k);
                e[(x, x)] = ONE;
                &u * e.kron(a.matrix()) * u.adjoint()
            })
            .unwrap(),
        )
    }

    #[test]
    fn conjugation_family_is_compatible_and_rebuilds_exactly() {
        let alg = MatrixAlgebra::new(vec![2, 1]).unwrap();
        let v: Vec<ComplexMatrix> = (0..2).map(|x| random::gaussian_matrix(&mut random::rng(x), 2, 3)).collect();
        let fam = FnPositiveFamily::new(space(2), alg.clone(), MatrixAlgebra::full(2), |a: &AlgebraElement| {
            v.iter().map(|vx| vx * a.matrix() * vx.adjoint()).collect()
        });
        let r = check_positive_family(&fam, ProbeConfig::default(), tol()).unwrap();
        assert!(r.passed);
        assert!(r.additivity.value <= 1e-12 && r.homogeneity.value <= 1e-12);
        let m = build_from_positive_family(&fam, ProbeConfig::default(), tol()).unwrap();
        for x in 0..2 {
            let expect = LinearMap::conjugation(alg.clone(), &v[x]).unwrap();
            assert!(m.atom_map(x).distance(&expect).unwrap() < 1e-12);
        }
    }

    #[test]
    fn quadratic_family_fails_additivity() {
        let alg = MatrixAlgebra::full(2);
        let fam = FnPositiveFamily::new(space(1), alg.clone(), alg.clone(), |a: &AlgebraElement| {
            vec![(a.matrix() + a.matrix() * a.matrix()).scale_real(0.5)]
        });
        let r = check_positive_family(&fam, ProbeConfig::default(), tol()).unwrap();
        assert!(!r.passed);
        assert!(r.additivity.value > 1e-3);
        assert_eq!(r.additivity.witness.as_ref().unwrap().operators.len(), 2);
        assert!(matches!(
            build_from_positive_family(&fam, ProbeConfig::default(), tol()),
            Err(Error::IncompatibleFamily(_))
        ));
    }

    #[test]
    fn norm_family_is_homogeneous_but_not_additive() {
        let alg = MatrixAlgebra::full(2);
        let fam = FnPositiveFamily::new(space(1), alg.clone(), alg.clone(), |a: &AlgebraElement| {
            vec![ComplexMatrix::identity(2).scale_real(a.norm())]
        });
        let r = check_positive_family(&fam, ProbeConfig::default(), tol()).unwrap();
        assert!(r.homogeneity.value <= 1e-12);
        assert!(r.additivity.value > 1e-3);
    }

    #[test]
    fn positive_family_round_trip() {
        for seed in 0..5 {
            let alg = MatrixAlgebra::new(vec![2, 1]).unwrap();
            let m = NonNegativeMeasure::sample_transpose_composed(space(3), alg, 3, 2, seed);
            let rebuilt = build_from_positive_family(&m, ProbeConfig::default(), tol()).unwrap();
            assert!(rebuilt.distance(&m).unwrap() <= 1e-10);
            // Hermitian A evaluates as E_{A₊} - E_{A₋}.
            let h = m.domain().sample_hermitian(&mut random::rng(seed));
            let (p, n) = h.jordan_parts().unwrap();
            let full = m.space().full();
            let lhs = rebuilt.evaluate(&full, &h).unwrap();
            let rhs = m.evaluate(&full, &p).unwrap() - m.evaluate(&full, &n).unwrap();
            assert!((lhs - rhs).norm() <= 1e-8);
        }
    }

    #[test]
    fn tabulated_family_round_trip_and_rejection() {
        let alg = MatrixAlgebra::full(2);
        let m = NonNegativeMeasure::sample_completely_positive(space(2), alg.clone(), 2, 2, 3);
        let mut probes = basis_probes(&alg).unwrap();
        let mut rng = random::rng(1);
        for _ in 0..3 {
            let a = alg.sample_positive_with(&mut rng);
            let b = alg.sample_positive_with(&mut rng);
            probes.extend([&a + &b, a.scale_real(2.0), a, b]);
        }
        let tab = TabulatedFamily::from_family(&m, &probes).unwrap();
        let r = check_tabulated_family(&tab, tol()).unwrap();
        assert!(r.passed);
        assert!(r.additivity.witness.is_some() || r.additivity.value == 0.0);
        let rebuilt = assemble_from_positive_family(&tab).unwrap();
        assert!(rebuilt.distance(&m).unwrap() <= 1e-10);

        let quad = FnPositiveFamily::new(space(1), alg.clone(), alg.clone(), |a: &AlgebraElement| {
            vec![(a.matrix() + a.matrix() * a.matrix()).scale_real(0.5)]
        });
        let tab = TabulatedFamily::from_family(&quad, &probes).unwrap();
        let r = check_tabulated_family(&tab, tol()).unwrap();
        assert!(!r.passed);
        assert!(r.additivity.witness.is_some());
        assert!(tab.evaluate(&alg.sample_positive(99)).is_err());
    }

    #[test]
    fn projection_family_round_trip() {
        let alg = MatrixAlgebra::new(vec![2, 1]).unwrap();
        let m = diagonal_spectral(2, alg.clone(), 4);
        let r = check_projection_family(&m, ProbeConfig::default(), tol()).unwrap();
        assert!(r.passed, "{r:?}");
        assert!(r.bound_constants.iter().all(|&k| k <= 1.0 + 1e-9));
        let rebuilt = build_from_projection_family(&m, ProbeConfig::default(), tol()).unwrap();
        assert!(rebuilt.as_measure().distance(m.as_measure()).unwrap() <= 1e-9);
        let v = validate_nonneg_spectral(&rebuilt, &SpectralProbeConfig::default(), tol());
        assert!(v.passed);
    }

    #[test]
    fn constant_projection_family_fails_relations() {
        let alg = MatrixAlgebra::full(2);
        let p0 = ComplexMatrix::from_real_diagonal(&[1.0, 0.0]);
        let p1 = ComplexMatrix::from_real_diagonal(&[0.0, 1.0]);
        let fam = FnProjectionFamily::new(space(2), alg.clone(), alg.clone(), |_: &AlgebraElement| vec![p0.clone(), p1.clone()]);
        let r = check_projection_family(&fam, ProbeConfig::default(), tol()).unwrap();
        assert!(!r.passed);
        // F_P + F_{I-P} = 2F against F_I = F.
        assert!(r.linear_relation.value >= 1.0 - 1e-12);
        assert!(r.linear_relation.witness.is_some());
    }

    #[test]
    fn case_one_formula_cases() {
        let alg = MatrixAlgebra::full(3);
        let m = diagonal_spectral(2, alg.clone(), 5);
        let p = alg.sample_projection(6);
        let f = m.projection_measure(&p).unwrap();
        let scaled = spectral_integral(&m, &p.scale_real(2.5)).unwrap();
        for x in 0..2 {
            assert!((&scaled[x] - &f.as_pov().atom(x).scale_real(2.5)).norm() < 1e-12);
        }
        let zero = spectral_integral(&m, &alg.zero()).unwrap();
        assert!(zero.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn built_measures_are_bounded_and_additive() {
        let alg = MatrixAlgebra::new(vec![2, 1]).unwrap();
        let m = diagonal_spectral(3, alg.clone(), 7);
        let built = assemble_from_projection_family(&m).unwrap();
        let built = built.as_measure();
        let r = check_projection_family(&m, ProbeConfig::default(), tol()).unwrap();
        let mut rng = random::rng(8);
        for _ in 0..10 {
            let a = alg.sample_positive_with(&mut rng);
            let b = alg.sample_positive_with(&mut rng);
            for x in 0..3 {
                let s = built.space().singleton(x);
                let ma = built.evaluate(&s, &a).unwrap();
                assert!(ma.norm() <= a.norm() * (r.bound_constants[x] + 1e-6));
                let sum = built.evaluate(&s, &(&a + &b)).unwrap();
                assert!((sum - ma - built.evaluate(&s, &b).unwrap()).norm() <= 1e-9);
            }
        }
    }

    #[test]
    fn riemann_path_cases() {
        let alg = MatrixAlgebra::full(3);
        let m = diagonal_spectral(2, alg.clone(), 9);
        let levels = [1, 10, 100, 1000];
        let a = alg.sample_positive(10);
        let r = riemann_path_check(&m, &a, &levels, tol()).unwrap();
        assert!(r.passed, "{r:?}");

        let p = alg.sample_projection(11);
        let r = riemann_path_check(&m, &p, &[2, 3, 10, 100], tol()).unwrap();
        assert!(r.levels.iter().all(|l| l.defect < 1e-9));

        let d = alg.element(ComplexMatrix::from_real_diagonal(&[0.25, 0.5, 0.5])).unwrap();
        let r = riemann_path_check(&m, &d, &[4, 8, 1000], tol()).unwrap();
        assert!(r.levels.iter().all(|l| l.defect < 1e-12));

        let neg = alg.identity().scale_real(-1.0);
        assert!(riemann_path_check(&m, &neg, &levels, tol()).is_err());
    }
}
