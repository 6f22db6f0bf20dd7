//! Measures on a finite measurable space `(X, 2^X)`.
//!
//! Four classes live here:
//!
//! * [`PovMeasure`]: positive operator-valued measures `E: 2^X → W₂`;
//! * [`SpectralMeasure`]: POVMs whose values are mutually orthogonal Hermitian
//!   projections;
//! * [`NonNegativeMeasure`]: set functions `m: 2^X → B(W₁, W₂)` such that
//!   `Δ ↦ m(Δ)(A)` is a POVM for every `A ⪰ 0`;
//! * [`NonNegativeSpectralMeasure`]: non-negative measures whose restrictions
//!   to projections are spectral and satisfy `M_P(Δ₁) M_Q(Δ₂) = M_{PQ}(Δ₁ ∩ Δ₂)`.
//!
//! On a finite space every set is a finite union of atoms, so each measure is
//! stored by its value on the atoms and countable additivity is finite
//! additivity. Regularity is automatic and is not checked.

use nalgebra::SVD;
use serde::{Deserialize, Serialize};

use crate::algebra::{AlgebraElement, MatrixAlgebra};
use crate::error::{Error, Result};
use crate::kernel::{self, ComplexMatrix, Scalar, Tolerance, ONE, ZERO};
use crate::map::LinearMap;
use crate::random::{self, SeededRng};
use crate::report::{Check, Defect, Witness};

/// `X = {0, ..., atom_count - 1}` with the power-set σ-algebra.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FiniteMeasurableSpace {
    atom_count: usize,
}

impl FiniteMeasurableSpace {
    pub fn new(atom_count: usize) -> Result<Self> {
        if atom_count == 0 {
            return Err(Error::BadConfig("a measurable space needs at least one atom".into()));
        }
        Ok(Self { atom_count })
    }

    pub fn atom_count(&self) -> usize {
        self.atom_count
    }

    pub fn atoms(&self) -> std::ops::Range<usize> {
        0..self.atom_count
    }

    pub fn full(&self) -> MeasurableSet {
        MeasurableSet { members: vec![true; self.atom_count] }
    }

    pub fn empty(&self) -> MeasurableSet {
        MeasurableSet { members: vec![false; self.atom_count] }
    }

    pub fn singleton(&self, x: usize) -> MeasurableSet {
        let mut s = self.empty();
        s.members[x] = true;
        s
    }

    pub fn set(&self, atoms: impl IntoIterator<Item = usize>) -> Result<MeasurableSet> {
        let mut s = self.empty();
        for x in atoms {
            if x >= self.atom_count {
                return Err(Error::BadConfig(format!("atom {x} outside a space of {} atoms", self.atom_count)));
            }
            s.members[x] = true;
        }
        Ok(s)
    }

    /// All set partitions of `X`, as lists of blocks of atoms.
    pub fn partitions(&self) -> Vec<Vec<Vec<usize>>> {
        let n = self.atom_count;
        let mut out = Vec::new();
        // Restricted growth strings: label[0] = 0, label[i] <= 1 + max(label[..i]).
        let mut labels = vec![0usize; n];
        loop {
            let parts = 1 + labels.iter().copied().max().unwrap_or(0);
            let mut blocks = vec![Vec::new(); parts];
            for (x, &l) in labels.iter().enumerate() {
                blocks[l].push(x);
            }
            out.push(blocks);

            let mut i = n;
            loop {
                if i <= 1 {
                    return out;
                }
                i -= 1;
                let prefix_max = labels[..i].iter().copied().max().unwrap_or(0);
                if labels[i] <= prefix_max {
                    labels[i] += 1;
                    for l in &mut labels[i + 1..] {
                        *l = 0;
                    }
                    break;
                }
            }
        }
    }
}

/// Subset of a finite space, as membership bits over the atoms.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MeasurableSet {
    members: Vec<bool>,
}

impl MeasurableSet {
    pub fn contains(&self, x: usize) -> bool {
        self.members.get(x).copied().unwrap_or(false)
    }

    pub fn len(&self) -> usize {
        self.members.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn atoms(&self) -> impl Iterator<Item = usize> + '_ {
        self.members.iter().enumerate().filter(|(_, &b)| b).map(|(x, _)| x)
    }

    pub fn union(&self, rhs: &Self) -> Self {
        Self { members: self.members.iter().zip(&rhs.members).map(|(a, b)| *a || *b).collect() }
    }

    pub fn intersection(&self, rhs: &Self) -> Self {
        Self { members: self.members.iter().zip(&rhs.members).map(|(a, b)| *a && *b).collect() }
    }

    pub fn is_disjoint(&self, rhs: &Self) -> bool {
        self.intersection(rhs).is_empty()
    }

    fn check_space(&self, space: &FiniteMeasurableSpace) -> Result<()> {
        if self.members.len() != space.atom_count {
            return Err(Error::DomainMismatch(format!(
                "set over {} atoms used on a space of {} atoms",
                self.members.len(),
                space.atom_count
            )));
        }
        Ok(())
    }
}

/// Operator-valued measure stored by its atom values. Positivity is checked
/// by [`validate_pov`], not at construction.
#[derive(Clone, Debug, PartialEq)]
pub struct PovMeasure {
    space: FiniteMeasurableSpace,
    codomain: MatrixAlgebra,
    atoms: Vec<AlgebraElement>,
}

impl PovMeasure {
    pub fn new(space: FiniteMeasurableSpace, codomain: MatrixAlgebra, atoms: Vec<AlgebraElement>) -> Result<Self> {
        if atoms.len() != space.atom_count {
            return Err(Error::ShapeMismatch(format!(
                "{} atom values for {} atoms",
                atoms.len(),
                space.atom_count
            )));
        }
        if let Some(a) = atoms.iter().find(|a| a.algebra() != &codomain) {
            return Err(Error::DomainMismatch(format!("atom value in {:?}, expected {codomain:?}", a.algebra())));
        }
        Ok(Self { space, codomain, atoms })
    }

    /// Builds the measure from raw matrices, checking membership in `codomain`.
    pub fn from_matrices(
        space: FiniteMeasurableSpace,
        codomain: MatrixAlgebra,
        atoms: Vec<ComplexMatrix>,
    ) -> Result<Self> {
        let atoms = atoms.into_iter().map(|m| codomain.element(m)).collect::<Result<_>>()?;
        Self::new(space, codomain, atoms)
    }

    pub fn space(&self) -> FiniteMeasurableSpace {
        self.space
    }

    pub fn codomain(&self) -> &MatrixAlgebra {
        &self.codomain
    }

    pub fn atom(&self, x: usize) -> &AlgebraElement {
        &self.atoms[x]
    }

    pub fn atom_values(&self) -> &[AlgebraElement] {
        &self.atoms
    }

    /// `E(Δ) = Σ_{x ∈ Δ} E({x})`.
    pub fn value(&self, set: &MeasurableSet) -> Result<AlgebraElement> {
        set.check_space(&self.space)?;
        Ok(set.atoms().fold(self.codomain.zero(), |acc, x| acc + &self.atoms[x]))
    }

    pub fn total(&self) -> AlgebraElement {
        self.atoms.iter().fold(self.codomain.zero(), |acc, a| acc + a)
    }
}

/// POVM whose atom values are meant to be mutually orthogonal projections.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralMeasure(PovMeasure);

impl SpectralMeasure {
    pub fn new(measure: PovMeasure) -> Self {
        Self(measure)
    }

    pub fn as_pov(&self) -> &PovMeasure {
        &self.0
    }

    pub fn into_pov(self) -> PovMeasure {
        self.0
    }
}

/// `m: 2^X → B(W₁, W₂)`, one basis-stored linear map `m^x` per atom, with
/// `m(Δ) = Σ_{x ∈ Δ} m^x`.
#[derive(Clone, Debug, PartialEq)]
pub struct NonNegativeMeasure {
    space: FiniteMeasurableSpace,
    domain: MatrixAlgebra,
    codomain: MatrixAlgebra,
    maps: Vec<LinearMap>,
}

impl NonNegativeMeasure {
    pub fn new(
        space: FiniteMeasurableSpace,
        domain: MatrixAlgebra,
        codomain: MatrixAlgebra,
        maps: Vec<LinearMap>,
    ) -> Result<Self> {
        if maps.len() != space.atom_count {
            return Err(Error::ShapeMismatch(format!("{} atom maps for {} atoms", maps.len(), space.atom_count)));
        }
        for m in &maps {
            if m.domain() != &domain || m.codomain() != &codomain {
                return Err(Error::DomainMismatch(format!(
                    "atom map {:?} → {:?}, expected {domain:?} → {codomain:?}",
                    m.domain(),
                    m.codomain()
                )));
            }
        }
        Ok(Self { space, domain, codomain, maps })
    }

    /// Tabulates `f(x, E_ij)` for every atom and matrix unit.
    pub fn from_fn(
        space: FiniteMeasurableSpace,
        domain: MatrixAlgebra,
        codomain: MatrixAlgebra,
        mut f: impl FnMut(usize, &AlgebraElement) -> ComplexMatrix,
    ) -> Result<Self> {
        let maps = space
            .atoms()
            .map(|x| LinearMap::from_fn(domain.clone(), codomain.clone(), |a| f(x, a)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(space, domain, codomain, maps)
    }

    /// `m^x(A) = A` on every atom.
    pub fn identity(space: FiniteMeasurableSpace, algebra: MatrixAlgebra) -> Self {
        let maps = vec![LinearMap::identity(algebra.clone()); space.atom_count];
        Self { space, domain: algebra.clone(), codomain: algebra, maps }
    }

    pub fn zero(space: FiniteMeasurableSpace, domain: MatrixAlgebra, codomain: MatrixAlgebra) -> Self {
        let maps = vec![LinearMap::zero(domain.clone(), codomain.clone()); space.atom_count];
        Self { space, domain, codomain, maps }
    }

    /// Completely positive atoms `m^x(A) = Σ_k V_k A V_k*` with `kraus`
    /// Gaussian `V_k` per atom, rescaled so `||m_id(X)|| = 1`.
    pub fn sample_completely_positive(
        space: FiniteMeasurableSpace,
        domain: MatrixAlgebra,
        codomain_dim: usize,
        kraus: usize,
        seed: u64,
    ) -> Self {
        Self::sample_kraus(space, domain, codomain_dim, kraus, seed, false)
    }

    /// Positive but generally not completely positive atoms
    /// `m^x(A) = Σ_k V_k Aᵀ V_k*`, rescaled so `||m_id(X)|| = 1`.
    pub fn sample_transpose_composed(
        space: FiniteMeasurableSpace,
        domain: MatrixAlgebra,
        codomain_dim: usize,
        kraus: usize,
        seed: u64,
    ) -> Self {
        Self::sample_kraus(space, domain, codomain_dim, kraus, seed, true)
    }

    fn sample_kraus(
        space: FiniteMeasurableSpace,
        domain: MatrixAlgebra,
        codomain_dim: usize,
        kraus: usize,
        seed: u64,
        transpose: bool,
    ) -> Self {
        let mut rng = random::rng(seed);
        let n = domain.ambient_dim();
        let codomain = MatrixAlgebra::full(codomain_dim);
        let maps: Vec<LinearMap> = space
            .atoms()
            .map(|_| {
                let mut acc = LinearMap::zero(domain.clone(), codomain.clone());
                for _ in 0..kraus.max(1) {
                    let v = random::gaussian_matrix(&mut rng, codomain_dim, n);
                    let term = if transpose {
                        LinearMap::transpose_conjugation(domain.clone(), &v)
                    } else {
                        LinearMap::conjugation(domain.clone(), &v)
                    }
                    .expect("shapes agree");
                    acc = acc.add(&term).expect("same algebras");
                }
                acc
            })
            .collect();
        let m = Self { space, domain, codomain, maps };
        let scale = m.identity_mass().norm();
        if scale > 0.0 {
            m.scale(1.0 / scale)
        } else {
            m
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

    pub fn atom_map(&self, x: usize) -> &LinearMap {
        &self.maps[x]
    }

    pub fn atom_maps(&self) -> &[LinearMap] {
        &self.maps
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            space: self.space,
            domain: self.domain.clone(),
            codomain: self.codomain.clone(),
            maps: self.maps.iter().map(|m| m.scale(ONE * s)).collect(),
        }
    }

    /// `m_A(Δ) = m(Δ)(A) = Σ_{x ∈ Δ} m^x(A)`.
    pub fn evaluate(&self, set: &MeasurableSet, a: &AlgebraElement) -> Result<AlgebraElement> {
        set.check_space(&self.space)?;
        self.check_domain(a)?;
        Ok(set.atoms().fold(self.codomain.zero(), |acc, x| acc + self.maps[x].apply_unchecked(a)))
    }

    /// `m^x(A)`.
    pub fn evaluate_atom(&self, x: usize, a: &AlgebraElement) -> Result<AlgebraElement> {
        self.check_domain(a)?;
        Ok(self.maps[x].apply_unchecked(a))
    }

    /// The operator-valued measure `m_A: Δ ↦ m(Δ)(A)`.
    pub fn restrict(&self, a: &AlgebraElement) -> Result<PovMeasure> {
        self.check_domain(a)?;
        let atoms = self.maps.iter().map(|m| m.apply_unchecked(a)).collect();
        PovMeasure::new(self.space, self.codomain.clone(), atoms)
    }

    /// `m_id(X)`.
    pub fn identity_mass(&self) -> AlgebraElement {
        self.evaluate(&self.space.full(), &self.domain.identity()).expect("identity lies in the domain")
    }

    /// Largest Frobenius distance between corresponding basis images.
    pub fn distance(&self, rhs: &Self) -> Result<f64> {
        if self.space != rhs.space || self.domain != rhs.domain || self.codomain != rhs.codomain {
            return Err(Error::DomainMismatch("measures live on different spaces or algebras".into()));
        }
        self.maps
            .iter()
            .zip(&rhs.maps)
            .map(|(a, b)| a.distance(b))
            .try_fold(0.0, |acc, d| d.map(|d| f64::max(acc, d)))
    }

    pub(crate) fn check_domain(&self, a: &AlgebraElement) -> Result<()> {
        if a.algebra() != &self.domain {
            return Err(Error::DomainMismatch(format!(
                "operator in {:?}, measure defined on {:?}",
                a.algebra(),
                self.domain
            )));
        }
        Ok(())
    }
}

/// Non-negative measure meant to satisfy the spectral and product-law
/// conditions; [`validate_nonneg_spectral`] checks them.
#[derive(Clone, Debug, PartialEq)]
pub struct NonNegativeSpectralMeasure(NonNegativeMeasure);

impl NonNegativeSpectralMeasure {
    pub fn new(measure: NonNegativeMeasure) -> Self {
        Self(measure)
    }

    pub fn as_measure(&self) -> &NonNegativeMeasure {
        &self.0
    }

    pub fn into_measure(self) -> NonNegativeMeasure {
        self.0
    }

    /// `M_P: Δ ↦ M(Δ)(P)`.
    pub fn projection_measure(&self, p: &AlgebraElement) -> Result<SpectralMeasure> {
        Ok(SpectralMeasure(self.0.restrict(p)?))
    }
}

/// `⟨T, ·⟩ = tr(weight · ·)`, the finite-dimensional stand-in for a normal
/// functional on `W₂`.
#[derive(Clone, Debug, PartialEq)]
pub struct TracePairing {
    pub weight: AlgebraElement,
}

/// Complex measure on a finite space, stored by atom values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarMeasure {
    pub atom_values: Vec<Scalar>,
}

impl ScalarMeasure {
    pub fn value(&self, set: &MeasurableSet) -> Scalar {
        set.atoms().map(|x| self.atom_values[x]).sum()
    }

    /// `Σ_x |μ({x})|`.
    pub fn total_variation(&self) -> f64 {
        self.atom_values.iter().map(|z| z.norm()).sum()
    }
}

/// `Δ ↦ ⟨T, m_A(Δ)⟩`.
pub fn pair(t: &TracePairing, m: &NonNegativeMeasure, a: &AlgebraElement) -> Result<ScalarMeasure> {
    if t.weight.algebra() != m.codomain() {
        return Err(Error::DomainMismatch("pairing weight is not in the codomain".into()));
    }
    m.check_domain(a)?;
    let atom_values = m
        .atom_maps()
        .iter()
        .map(|map| t.weight.matrix().trace_product(map.apply_unchecked(a).matrix()))
        .collect();
    Ok(ScalarMeasure { atom_values })
}

// ---------------------------------------------------------------------------
// POVM and spectral validation

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PovReport {
    /// Smallest eigenvalue of each atom value.
    pub margins: Vec<f64>,
    pub worst_atom: Option<usize>,
    pub passed: bool,
}

impl PovReport {
    pub fn checks(&self, tol: Tolerance) -> Vec<Check> {
        let worst = self.worst_atom.map_or(0.0, |x| self.margins[x]);
        let witness = self.worst_atom.map(|x| Witness::new("atom value with the smallest eigenvalue").atoms([x]));
        vec![Check::at_least("pov.min_eigenvalue", worst, -tol.absolute).with_witness(witness)]
    }
}

/// Per-atom PSD margins; passes iff every margin is at least `-tol.absolute`.
pub fn validate_pov(e: &PovMeasure, tol: Tolerance) -> PovReport {
    let margins: Vec<f64> = e
        .atoms
        .iter()
        .map(|a| a.psd_margin(tol).unwrap_or(f64::NEG_INFINITY))
        .collect();
    let worst_atom = margins
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(x, _)| x);
    let passed = margins.iter().all(|&m| m >= -tol.absolute);
    PovReport { margins, worst_atom, passed }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    /// `max(||P² - P||, ||P - P*||)` per atom.
    pub projection_defects: Vec<f64>,
    /// Worst `||F(x) F(y)||` over `x ≠ y`.
    pub orthogonality: Defect,
    /// `||F(X) - I||` when normalization was requested.
    pub normalization_defect: Option<f64>,
    pub passed: bool,
}

impl SpectralReport {
    pub fn worst_projection(&self) -> Defect {
        let mut d = Defect::default();
        for (x, &v) in self.projection_defects.iter().enumerate() {
            d.offer(v, || Witness::new("atom value is not a Hermitian projection").atoms([x]));
        }
        d
    }

    pub fn checks(&self, tol: Tolerance) -> Vec<Check> {
        let mut out = vec![
            Check::defect("spectral.projection", &self.worst_projection(), tol.absolute),
            Check::defect("spectral.orthogonality", &self.orthogonality, tol.absolute),
        ];
        if let Some(n) = self.normalization_defect {
            out.push(Check::at_most("spectral.normalization", n, tol.absolute));
        }
        out
    }
}

/// Projection, pairwise-orthogonality and (optionally) normalization defects.
pub fn validate_spectral(f: &SpectralMeasure, tol: Tolerance, normalized: bool) -> SpectralReport {
    let atoms = &f.0.atoms;
    let projection_defects: Vec<f64> = atoms.iter().map(AlgebraElement::projection_defect).collect();
    let mut orthogonality = Defect::default();
    for x in 0..atoms.len() {
        for y in x + 1..atoms.len() {
            let d = (&atoms[x] * &atoms[y]).norm();
            orthogonality.offer(d, || Witness::new("atom values are not orthogonal").atoms([x, y]));
        }
    }
    let normalization_defect =
        normalized.then(|| (f.0.total() - f.0.codomain.identity()).norm());
    let passed = projection_defects.iter().all(|&d| d <= tol.absolute)
        && orthogonality.within(tol.absolute)
        && normalization_defect.is_none_or(|d| d <= tol.absolute);
    SpectralReport { projection_defects, orthogonality, normalization_defect, passed }
}

// ---------------------------------------------------------------------------
// Positivity of the atom maps

/// Settings for the rank-one positivity search.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankOneConfig {
    pub starts: usize,
    pub steps: usize,
    pub step_size: f64,
    pub seed: u64,
}

impl Default for RankOneConfig {
    fn default() -> Self {
        Self { starts: 64, steps: 200, step_size: 0.1, seed: 0 }
    }
}

/// How positivity of each `m^x` is decided.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum PositivityPolicy {
    /// PSD Choi blocks prove complete positivity; anything else is inconclusive.
    ChoiCertificate,
    /// Minimize `λ_min(m^x(vv*))` over unit vectors.
    RankOneSearch(RankOneConfig),
    /// Run both on every atom.
    Both(RankOneConfig),
    /// Choi certificate, falling back to the rank-one search when it fails.
    Auto(RankOneConfig),
}

impl Default for PositivityPolicy {
    fn default() -> Self {
        Self::Auto(RankOneConfig::default())
    }
}

/// Soundness-labelled outcome for one atom map.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    /// Choi matrix PSD: completely positive, hence positive. Sound.
    Certified,
    /// Rank-one search found no violation. Tolerance-qualified.
    Passed,
    /// Explicit witness `v` with `m^x(vv*)` not PSD. Sound.
    Failed,
    /// Choi test failed and no search was run.
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankOneOutcome {
    /// Smallest `λ_min(m^x(vv*))` found (minus the Hermitian defect, if any).
    pub worst_margin: f64,
    pub block: usize,
    pub witness: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomPositivity {
    pub atom: usize,
    /// Smallest eigenvalue over the Choi blocks.
    pub choi_margin: Option<f64>,
    pub rank_one: Option<RankOneOutcome>,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NonNegativeReport {
    pub atoms: Vec<AtomPositivity>,
    pub passed: bool,
}

impl NonNegativeReport {
    /// Worst failing atom with its witness, if any.
    pub fn failure(&self) -> Option<Witness> {
        self.atoms.iter().find(|a| a.verdict == Verdict::Failed).map(|a| {
            let r = a.rank_one.as_ref().expect("failures carry a search outcome");
            let mut w = Witness::new("rank-one input with a non-positive image").atoms([a.atom]);
            w.vector = r.witness.clone();
            w.scalars = vec![r.worst_margin, r.block as f64];
            w
        })
    }

    pub fn checks(&self, tol: Tolerance) -> Vec<Check> {
        let worst = self
            .atoms
            .iter()
            .map(|a| match a.verdict {
                Verdict::Certified => a.choi_margin.unwrap_or(0.0).max(0.0),
                _ => a.rank_one.as_ref().map_or(f64::NEG_INFINITY, |r| r.worst_margin),
            })
            .fold(f64::INFINITY, f64::min);
        let worst = if self.atoms.is_empty() { 0.0 } else { worst };
        let mut c = Check::at_least("nonneg.positivity_margin", worst, -tol.absolute);
        c.passed = self.passed;
        vec![c.with_witness(self.failure())]
    }
}

/// Decides positivity of every atom map `m^x` according to `policy`.
pub fn validate_nonneg(m: &NonNegativeMeasure, policy: PositivityPolicy, tol: Tolerance) -> NonNegativeReport {
    let atoms: Vec<AtomPositivity> = m
        .maps
        .iter()
        .enumerate()
        .map(|(x, map)| atom_positivity(x, map, policy, tol))
        .collect();
    let passed = atoms.iter().all(|a| matches!(a.verdict, Verdict::Certified | Verdict::Passed));
    NonNegativeReport { atoms, passed }
}

fn choi_margin(map: &LinearMap, tol: Tolerance) -> f64 {
    map.choi_blocks()
        .iter()
        .map(|c| kernel::is_psd(c, tol).map_or(f64::NEG_INFINITY, |p| p.margin))
        .fold(f64::INFINITY, f64::min)
}

fn atom_positivity(atom: usize, map: &LinearMap, policy: PositivityPolicy, tol: Tolerance) -> AtomPositivity {
    let (run_choi, search) = match policy {
        PositivityPolicy::ChoiCertificate => (true, None),
        PositivityPolicy::RankOneSearch(c) => (false, Some(c)),
        PositivityPolicy::Both(c) | PositivityPolicy::Auto(c) => (true, Some(c)),
    };
    let choi = run_choi.then(|| choi_margin(map, tol));
    let certified = choi.is_some_and(|c| c >= -tol.absolute);
    let skip_search = matches!(policy, PositivityPolicy::Auto(_)) && certified;
    let rank_one = search
        .filter(|_| !skip_search)
        .map(|cfg| rank_one_search(map, cfg, &mut random::substream(cfg.seed, atom as u64)));

    let verdict = match (&rank_one, certified) {
        (Some(r), _) if r.worst_margin < -tol.absolute => Verdict::Failed,
        (_, true) => Verdict::Certified,
        (Some(_), false) => Verdict::Passed,
        (None, false) => Verdict::Inconclusive,
    };
    AtomPositivity { atom, choi_margin: choi, rank_one, verdict }
}

/// `λ_min` of the Hermitian part of `T(vv*)`, minus the Hermitian defect of
/// `T(vv*)`, together with the minimizing eigenvector.
fn rank_one_objective(map: &LinearMap, embed: &dyn Fn(&[Scalar]) -> AlgebraElement, v: &[Scalar]) -> (f64, Vec<Scalar>) {
    let image = map.apply_unchecked(&embed(v));
    let skew = image.matrix().hermitian_defect();
    let eig = kernel::hermitian_eig_with(&image.matrix().hermitian_part(), Tolerance::absolute(f64::INFINITY))
        .expect("eigendecomposition of a small Hermitian matrix");
    (eig.min() - skew, eig.eigenvector(0))
}

fn normalize(v: &mut [Scalar]) {
    let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    for z in v {
        *z /= n;
    }
}

/// Structured starting vectors: basis vectors and their real/imaginary
/// pairwise superpositions.
fn structured_starts(n: usize) -> Vec<Vec<Scalar>> {
    let mut out = Vec::new();
    for i in 0..n {
        let mut e = vec![ZERO; n];
        e[i] = ONE;
        out.push(e);
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..n {
        for j in i + 1..n {
            for phase in [ONE, -ONE, kernel::I, -kernel::I] {
                let mut v = vec![ZERO; n];
                v[i] = ONE * s;
                v[j] = phase * s;
                out.push(v);
            }
        }
    }
    out
}

/// Multi-start projected gradient descent of `v ↦ λ_min(T(vv*))` on the unit
/// sphere of each domain block, with backtracking.
fn rank_one_search(map: &LinearMap, cfg: RankOneConfig, rng: &mut SeededRng) -> RankOneOutcome {
    let domain = map.domain().clone();
    let mut best = RankOneOutcome { worst_margin: f64::INFINITY, block: 0, witness: Vec::new() };

    for (b, (&n, off)) in domain.blocks().iter().zip(domain.offsets()).enumerate() {
        let dom = domain.clone();
        let embed = move |v: &[Scalar]| {
            let big = dom.ambient_dim();
            let mut m = ComplexMatrix::zeros(big, big);
            for i in 0..n {
                for j in 0..n {
                    m[(off + i, off + j)] = v[i] * v[j].conj();
                }
            }
            dom.element(m).expect("rank-one block element")
        };

        let mut starts = structured_starts(n);
        while starts.len() < cfg.starts.max(n) {
            starts.push(random::unit_vector(rng, n));
        }
        starts.truncate(cfg.starts.max(n));

        for mut v in starts {
            let (mut f, mut w) = rank_one_objective(map, &embed, &v);
            let mut eta = cfg.step_size;
            for _ in 0..cfg.steps {
                // Euclidean gradient of v*Hv with H = Herm(T*(ww*)).
                let h = map.adjoint_apply(&ComplexMatrix::outer(&w)).real_part().block(b);
                let hv = h.apply(&v);
                let vhv: Scalar = v.iter().zip(&hv).map(|(a, b)| a.conj() * b).sum();
                let grad: Vec<Scalar> = hv.iter().zip(&v).map(|(g, x)| (g - x * vhv) * 2.0).collect();
                let gnorm2: f64 = grad.iter().map(|z| z.norm_sqr()).sum();
                if gnorm2 < 1e-24 {
                    break;
                }
                let mut accepted = false;
                while eta > 1e-12 {
                    let mut trial: Vec<Scalar> = v.iter().zip(&grad).map(|(x, g)| x - g * eta).collect();
                    normalize(&mut trial);
                    let (ft, wt) = rank_one_objective(map, &embed, &trial);
                    if ft < f - 1e-4 * eta * gnorm2 {
                        v = trial;
                        f = ft;
                        w = wt;
                        accepted = true;
                        eta *= 1.5;
                        break;
                    }
                    eta *= 0.5;
                }
                if !accepted {
                    break;
                }
            }
            if f < best.worst_margin {
                let mut full = vec![ZERO; domain.ambient_dim()];
                full[off..off + n].copy_from_slice(&v);
                best = RankOneOutcome { worst_margin: f, block: b, witness: full.iter().map(|z| [z.re, z.im]).collect() };
            }
        }
    }
    best
}

// ---------------------------------------------------------------------------
// Non-negative spectral measures

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralProbeConfig {
    /// Random projections (and random commuting pairs) probed in addition to
    /// the canonical diagonal projections.
    pub samples: usize,
    pub seed: u64,
    /// Also check the product law on independent, generally non-commuting
    /// random pairs, with `M_{PQ}` taken by linear extension.
    pub include_noncommuting: bool,
    pub positivity: PositivityPolicy,
}

impl Default for SpectralProbeConfig {
    fn default() -> Self {
        Self { samples: 8, seed: 0, include_noncommuting: false, positivity: PositivityPolicy::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NonNegativeSpectralReport {
    pub probes: usize,
    /// Worst projection defect of any `M_P({x})`.
    pub projection: Defect,
    /// Worst `||M_P({x}) M_P({y})||`, `x ≠ y`.
    pub orthogonality: Defect,
    /// Worst `||M_P({x}) M_Q({y}) - M_{PQ}({x} ∩ {y})||`.
    pub product_law: Defect,
    /// `||M(X)(id) - id||`.
    pub normalization_defect: f64,
    pub nonneg: NonNegativeReport,
    /// Spectral and product-law checks passing must imply non-negativity.
    pub consistent: bool,
    pub passed: bool,
}

impl NonNegativeSpectralReport {
    pub fn spectral_passed(&self, tol: Tolerance) -> bool {
        self.projection.within(tol.absolute) && self.orthogonality.within(tol.absolute)
    }

    pub fn normalized(&self, tol: Tolerance) -> bool {
        self.normalization_defect <= tol.absolute
    }

    pub fn checks(&self, tol: Tolerance) -> Vec<Check> {
        let mut out = vec![
            Check::defect("spectral.projection", &self.projection, tol.absolute),
            Check::defect("spectral.orthogonality", &self.orthogonality, tol.absolute),
            Check::defect("spectral.product_law", &self.product_law, tol.absolute),
        ];
        out.extend(self.nonneg.checks(tol));
        let mut c = Check::at_least("spectral.cross_check", f64::from(u8::from(self.consistent)), 1.0);
        c.passed = self.consistent;
        out.push(c);
        out
    }
}

/// Canonical probe projections: each diagonal matrix unit plus the identity.
pub(crate) fn canonical_projections(alg: &MatrixAlgebra) -> Vec<AlgebraElement> {
    let mut out: Vec<AlgebraElement> = alg
        .basis()
        .iter()
        .enumerate()
        .filter(|(_, u)| u.i == u.j)
        .map(|(k, _)| alg.unit(k))
        .collect();
    out.push(alg.identity());
    out
}

/// Validates `M_P` as spectral for canonical and random projections, the
/// product law on probe pairs and atom pairs, and non-negativity of `M`.
pub fn validate_nonneg_spectral(
    m: &NonNegativeSpectralMeasure,
    cfg: &SpectralProbeConfig,
    tol: Tolerance,
) -> NonNegativeSpectralReport {
    let measure = &m.0;
    let alg = measure.domain.clone();
    let mut rng = random::rng(cfg.seed);

    let mut projections = canonical_projections(&alg);
    let canonical = projections.len();
    for _ in 0..cfg.samples {
        projections.push(alg.sample_projection_with(&mut rng));
    }

    let mut pairs: Vec<(AlgebraElement, AlgebraElement)> = Vec::new();
    for a in 0..canonical {
        for b in 0..canonical {
            pairs.push((projections[a].clone(), projections[b].clone()));
        }
    }
    for _ in 0..cfg.samples {
        let pq = alg.sample_commuting_projections(&mut rng, 2);
        pairs.push((pq[0].clone(), pq[1].clone()));
    }
    if cfg.include_noncommuting {
        for _ in 0..cfg.samples {
            let p = alg.sample_projection_with(&mut rng);
            let q = alg.sample_projection_with(&mut rng);
            pairs.push((p, q));
        }
    }

    let mut projection = Defect::default();
    let mut orthogonality = Defect::default();
    for p in &projections {
        let fp = measure.restrict(p).expect("probe lies in the domain");
        let report = validate_spectral(&SpectralMeasure(fp), tol, false);
        for (x, &d) in report.projection_defects.iter().enumerate() {
            projection.offer(d, || {
                Witness::new("M_P({x}) is not a Hermitian projection").atoms([x]).operator(p.matrix().clone())
            });
        }
        if let Some(w) = report.orthogonality.witness.clone() {
            orthogonality.offer(report.orthogonality.value, || w.operator(p.matrix().clone()));
        }
    }

    let mut product_law = Defect::default();
    let n_atoms = measure.space.atom_count;
    for (p, q) in &pairs {
        let mp = measure.restrict(p).expect("probe");
        let mq = measure.restrict(q).expect("probe");
        let pq = p * q;
        for x in 0..n_atoms {
            let mpq_x = measure.maps[x].apply_unchecked(&pq);
            for y in 0..n_atoms {
                let lhs = mp.atom(x) * mq.atom(y);
                let d = if x == y { (&lhs - &mpq_x).norm() } else { lhs.norm() };
                product_law.offer(d, || {
                    Witness::new("M_P({x}) M_Q({y}) differs from M_PQ({x} ∩ {y})")
                        .atoms([x, y])
                        .operator(p.matrix().clone())
                        .operator(q.matrix().clone())
                });
            }
        }
    }

    let normalization_defect = (measure.identity_mass() - measure.codomain.identity()).norm();
    let nonneg = validate_nonneg(measure, cfg.positivity, tol);

    let spectral_ok = projection.within(tol.absolute) && orthogonality.within(tol.absolute);
    let product_ok = product_law.within(tol.absolute);
    let consistent = !(spectral_ok && product_ok) || nonneg.passed;
    let passed = spectral_ok && product_ok && nonneg.passed;
    NonNegativeSpectralReport {
        probes: projections.len(),
        projection,
        orthogonality,
        product_law,
        normalization_defect,
        nonneg,
        consistent,
        passed,
    }
}

// ---------------------------------------------------------------------------
// Semivariation

/// How the supremum defining the semivariation is approached from below.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum SemivariationStrategy {
    /// Every set partition of `X` (at most [`MAX_EXHAUSTIVE_ATOMS`] atoms),
    /// each with sampled contractions refined by alternating ascent.
    Exhaustive { samples_per_partition: usize, seed: u64 },
    /// The finest partition only, from structured candidates (`±id`, signed
    /// projections) and random unitaries, refined by alternating ascent.
    Structured { random_starts: usize, ascent_steps: usize, seed: u64 },
}

pub const MAX_EXHAUSTIVE_ATOMS: usize = 12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Semivariation {
    /// Best `||Σ_j m_{A_j}(Δ_j)||` found.
    pub lower: f64,
    /// `4 ||m_id(X)||`.
    pub upper: f64,
    pub witness: Witness,
}

/// Lower and upper bounds on `sup ||Σ_j m_{A_j}(Δ_j)||` over partitions
/// `{Δ_j}` of `X` and contractions `A_j`.
pub fn semivariation(m: &NonNegativeMeasure, strategy: SemivariationStrategy) -> Result<Semivariation> {
    let upper = 4.0 * m.identity_mass().norm();
    let space = m.space;
    let alg = m.domain.clone();

    let mut best = (f64::NEG_INFINITY, Vec::new(), Vec::new());
    let mut consider = |parts: &[Vec<usize>], ops: Vec<AlgebraElement>| {
        let (value, ops) = ascend(m, parts, ops, 25);
        if value > best.0 {
            best = (value, parts.to_vec(), ops);
        }
    };

    match strategy {
        SemivariationStrategy::Exhaustive { samples_per_partition, seed } => {
            if space.atom_count > MAX_EXHAUSTIVE_ATOMS {
                return Err(Error::IntractablePartitionCount { atoms: space.atom_count, limit: MAX_EXHAUSTIVE_ATOMS });
            }
            let mut rng = random::rng(seed);
            for parts in space.partitions() {
                consider(&parts, vec![alg.identity(); parts.len()]);
                for _ in 0..samples_per_partition {
                    let ops = (0..parts.len()).map(|_| random_contraction(&alg, &mut rng)).collect();
                    consider(&parts, ops);
                }
            }
        }
        SemivariationStrategy::Structured { random_starts, ascent_steps, seed } => {
            let parts: Vec<Vec<usize>> = space.atoms().map(|x| vec![x]).collect();
            let k = parts.len();
            let mut starts: Vec<Vec<AlgebraElement>> = vec![vec![alg.identity(); k]];
            for p in canonical_projections(&alg) {
                let signed = p.scale_real(2.0) - alg.identity();
                starts.push(vec![signed.clone(); k]);
                starts.push((0..k).map(|x| if x % 2 == 0 { signed.clone() } else { alg.identity() }).collect());
            }
            let mut rng = random::rng(seed);
            for _ in 0..random_starts {
                starts.push((0..k).map(|_| alg.sample_unitary(&mut rng)).collect());
            }
            for ops in starts {
                let (value, ops) = ascend(m, &parts, ops, ascent_steps);
                if value > best.0 {
                    best = (value, parts.clone(), ops);
                }
            }
        }
    }

    let (lower, parts, ops) = best;
    let mut witness = Witness::new("partition blocks (flattened, separated by scalars) and contractions");
    for part in &parts {
        witness.atoms.extend(part.iter().copied());
        witness.scalars.push(part.len() as f64);
    }
    witness.operators = ops.into_iter().map(AlgebraElement::into_matrix).collect();
    Ok(Semivariation { lower: lower.max(0.0), upper, witness })
}

fn random_contraction(alg: &MatrixAlgebra, rng: &mut SeededRng) -> AlgebraElement {
    use rand::Rng;
    match rng.random_range(0..3) {
        0 => alg.sample_unitary(rng),
        1 => alg.sample_projection_with(rng).scale_real(2.0) - alg.identity(),
        _ => alg.sample_positive_with(rng),
    }
}

fn partition_sum(m: &NonNegativeMeasure, parts: &[Vec<usize>], ops: &[AlgebraElement]) -> AlgebraElement {
    let mut acc = m.codomain.zero();
    for (part, a) in parts.iter().zip(ops) {
        for &x in part {
            acc = acc + m.maps[x].apply_unchecked(a);
        }
    }
    acc
}

/// Alternating ascent on `Re w* (Σ_j m_{A_j}(Δ_j)) u`: the top singular pair
/// `(u, w)` of the sum, then each `A_j` set to the polar part of the
/// corresponding dual element. Monotone in the objective.
fn ascend(
    m: &NonNegativeMeasure,
    parts: &[Vec<usize>],
    mut ops: Vec<AlgebraElement>,
    steps: usize,
) -> (f64, Vec<AlgebraElement>) {
    let alg = &m.domain;
    let mut value = partition_sum(m, parts, &ops).norm();
    for _ in 0..steps {
        let s = partition_sum(m, parts, &ops);
        let svd = SVD::new(s.matrix().inner().clone(), true, true);
        let (Some(uw), Some(vt)) = (svd.u.as_ref(), svd.v_t.as_ref()) else { break };
        let top = (0..svd.singular_values.len())
            .max_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]))
            .unwrap_or(0);
        let d = s.matrix().nrows();
        let w: Vec<Scalar> = (0..d).map(|i| uw[(i, top)]).collect();
        let u: Vec<Scalar> = (0..d).map(|i| vt[(top, i)].conj()).collect();

        let new_ops: Vec<AlgebraElement> = parts
            .iter()
            .zip(&ops)
            .map(|(part, old)| {
                // c_k = w* m^x(e_k) u; the maximizer of Re Σ a_k c_k over the
                // unit ball is the polar part of Y with Y_k = conj(c_k).
                let mut coeffs = vec![ZERO; alg.dim()];
                for &x in part {
                    for (k, img) in m.maps[x].images().iter().enumerate() {
                        let iu = img.apply(&u);
                        let c: Scalar = w.iter().zip(&iu).map(|(a, b)| a.conj() * b).sum();
                        coeffs[k] += c.conj();
                    }
                }
                let y = alg.from_coefficients(&coeffs);
                polar_part(&y).unwrap_or_else(|| old.clone())
            })
            .collect();
        let new_value = partition_sum(m, parts, &new_ops).norm();
        if new_value <= value + 1e-14 {
            if new_value > value {
                value = new_value;
                ops = new_ops;
            }
            break;
        }
        value = new_value;
        ops = new_ops;
    }
    (value, ops)
}

/// `U V*` for `Y = U Σ V*`, block by block; `None` if `Y = 0`.
fn polar_part(y: &AlgebraElement) -> Option<AlgebraElement> {
    if y.matrix().max_abs() < 1e-300 {
        return None;
    }
    let alg = y.algebra();
    let blocks: Vec<ComplexMatrix> = (0..alg.blocks().len())
        .map(|b| {
            let blk = y.block(b);
            let svd = SVD::new(blk.inner().clone(), true, true);
            match (svd.u, svd.v_t) {
                (Some(u), Some(vt)) => ComplexMatrix::from_inner(u * vt),
                _ => ComplexMatrix::identity(blk.nrows()),
            }
        })
        .collect();
    Some(alg.from_blocks(&blocks))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space(k: usize) -> FiniteMeasurableSpace {
        FiniteMeasurableSpace::new(k).unwrap()
    }

    #[test]
    fn sets_and_partitions() {
        let s = space(4);
        let a = s.set([0, 2]).unwrap();
        let b = s.set([1]).unwrap();
        assert!(a.is_disjoint(&b));
        assert_eq!(a.union(&b).len(), 3);
        assert!(s.set([4]).is_err());
        assert!(FiniteMeasurableSpace::new(0).is_err());
        // Bell numbers.
        assert_eq!(space(1).partitions().len(), 1);
        assert_eq!(space(3).partitions().len(), 5);
        assert_eq!(space(4).partitions().len(), 15);
        assert_eq!(space(5).partitions().len(), 52);
    }

    #[test]
    fn evaluate_cases() {
        let alg = MatrixAlgebra::full(2);
        let m = NonNegativeMeasure::identity(space(2), alg.clone());
        let a = alg.sample_positive(1);
        assert_eq!(m.evaluate(&m.space().empty(), &a).unwrap().matrix().max_abs(), 0.0);
        let full = m.evaluate(&m.space().full(), &a).unwrap();
        assert!(full.matrix().distance(&a.scale_real(2.0).into_matrix()) < 1e-15);

        let v = random::gaussian_matrix(&mut random::rng(2), 3, 2);
        let cp = NonNegativeMeasure::from_fn(space(2), alg.clone(), MatrixAlgebra::full(3), |x, e| {
            (&v * e.matrix() * v.adjoint()).scale_real(1.0 + x as f64)
        })
        .unwrap();
        let e11 = alg.unit(0);
        let single = cp.evaluate(&cp.space().singleton(1), &e11).unwrap();
        assert_eq!(single.matrix(), &cp.atom_map(1).images()[0]);
    }

    #[test]
    fn evaluate_rejects_foreign_operator() {
        let m = NonNegativeMeasure::identity(space(2), MatrixAlgebra::full(2));
        let other = MatrixAlgebra::full(3).identity();
        assert!(matches!(m.evaluate(&m.space().full(), &other), Err(Error::DomainMismatch(_))));
    }

    #[test]
    fn pov_validation() {
        let alg = MatrixAlgebra::full(2);
        let tol = Tolerance::default();
        let good = PovMeasure::new(space(2), alg.clone(), vec![alg.sample_positive(1), alg.sample_positive(2)]).unwrap();
        assert!(validate_pov(&good, tol).passed);

        let bad_atom = alg.element(ComplexMatrix::from_real_diagonal(&[1.0, -0.1])).unwrap();
        let bad = PovMeasure::new(space(3), alg.clone(), vec![alg.identity(), bad_atom, alg.zero()]).unwrap();
        let report = validate_pov(&bad, tol);
        assert!(!report.passed);
        assert_eq!(report.worst_atom, Some(1));
        assert!((report.margins[1] + 0.1).abs() < 1e-14);

        let zero = PovMeasure::new(space(2), alg.clone(), vec![alg.zero(), alg.zero()]).unwrap();
        assert!(validate_pov(&zero, tol).passed);
    }

    #[test]
    fn spectral_validation() {
        let alg = MatrixAlgebra::full(2);
        let tol = Tolerance::default();
        let p0 = alg.element(ComplexMatrix::from_real_diagonal(&[1.0, 0.0])).unwrap();
        let p1 = alg.element(ComplexMatrix::from_real_diagonal(&[0.0, 1.0])).unwrap();
        let f = SpectralMeasure::new(PovMeasure::new(space(2), alg.clone(), vec![p0, p1]).unwrap());
        let r = validate_spectral(&f, tol, true);
        assert!(r.passed);
        assert!(r.normalization_defect.unwrap() < 1e-15);

        let f = SpectralMeasure::new(PovMeasure::new(space(2), alg.clone(), vec![alg.identity(), alg.identity()]).unwrap());
        let r = validate_spectral(&f, tol, false);
        assert!(!r.passed);
        assert!((r.orthogonality.value - 1.0).abs() < 1e-14);
        assert_eq!(r.orthogonality.witness.unwrap().atoms, vec![0, 1]);

        let big = MatrixAlgebra::full(4);
        let p = big.sample_projection(5);
        let q = big.identity() - &p;
        let f = SpectralMeasure::new(PovMeasure::new(space(2), big, vec![p, q]).unwrap());
        assert!(validate_spectral(&f, tol, true).passed);
    }

    #[test]
    fn conjugation_is_choi_certified() {
        let alg = MatrixAlgebra::new(vec![2, 1]).unwrap();
        let m = NonNegativeMeasure::sample_completely_positive(space(2), alg, 3, 2, 4);
        let r = validate_nonneg(&m, PositivityPolicy::ChoiCertificate, Tolerance::default());
        assert!(r.passed);
        assert!(r.atoms.iter().all(|a| a.verdict == Verdict::Certified));
    }

    #[test]
    fn transpose_is_positive_but_not_choi_certified() {
        let alg = MatrixAlgebra::full(2);
        let v = random::unitary(&mut random::rng(3), 2);
        let map = LinearMap::transpose_conjugation(alg.clone(), &v).unwrap();
        let m = NonNegativeMeasure::new(space(1), alg.clone(), MatrixAlgebra::full(2), vec![map]).unwrap();
        let tol = Tolerance::default();
        let choi = validate_nonneg(&m, PositivityPolicy::ChoiCertificate, tol);
        assert_eq!(choi.atoms[0].verdict, Verdict::Inconclusive);
        assert!(!choi.passed);
        let cfg = RankOneConfig { starts: 16, steps: 50, ..Default::default() };
        let search = validate_nonneg(&m, PositivityPolicy::RankOneSearch(cfg), tol);
        assert_eq!(search.atoms[0].verdict, Verdict::Passed);
        assert!(search.passed);
        let both = validate_nonneg(&m, PositivityPolicy::Both(cfg), tol);
        assert!(both.passed);
        assert!(both.atoms[0].choi_margin.unwrap() < -0.5);
    }

    /// `A ↦ c·tr(A)·I - A`: positive iff `c ≥ 1`, completely positive iff `c ≥ n`.
    fn reduction_map(n: usize, c: f64) -> NonNegativeMeasure {
        let alg = MatrixAlgebra::full(n);
        NonNegativeMeasure::from_fn(space(1), alg.clone(), alg, |_, a| {
            ComplexMatrix::identity(n).scale(a.matrix().trace() * c) - a.matrix()
        })
        .unwrap()
    }

    #[test]
    fn reduction_map_failure_has_a_sound_witness() {
        let tol = Tolerance::default();
        let cfg = RankOneConfig { starts: 8, steps: 50, ..Default::default() };
        let n = 3;
        let c = 0.5 / (n as f64 - 1.0);
        let m = reduction_map(n, c);
        let r = validate_nonneg(&m, PositivityPolicy::Auto(cfg), tol);
        assert!(!r.passed);
        assert_eq!(r.atoms[0].verdict, Verdict::Failed);
        let outcome = r.atoms[0].rank_one.as_ref().unwrap();
        // Every unit vector gives eigenvalue c - 1.
        assert!((outcome.worst_margin - (c - 1.0)).abs() < 1e-12);
        // Re-check the witness independently.
        let v: Vec<Scalar> = outcome.witness.iter().map(|p| Scalar::new(p[0], p[1])).collect();
        let image = m.evaluate_atom(0, &m.domain().element(ComplexMatrix::outer(&v)).unwrap()).unwrap();
        assert!(kernel::is_psd(image.matrix(), tol).unwrap().margin < -0.5);
        assert!(r.failure().is_some());

        // c = 1: positive (reduction map), Choi fails since 1 < n.
        let r = validate_nonneg(&reduction_map(n, 1.0), PositivityPolicy::Auto(cfg), tol);
        assert!(r.passed);
        assert_eq!(r.atoms[0].verdict, Verdict::Passed);
        assert!((r.atoms[0].choi_margin.unwrap() - (1.0 - n as f64)).abs() < 1e-12);
    }

    #[test]
    fn non_hermitian_preserving_map_fails() {
        let alg = MatrixAlgebra::full(2);
        let m = NonNegativeMeasure::from_fn(space(1), alg.clone(), alg, |_, a| a.matrix().scale(kernel::I)).unwrap();
        let r = validate_nonneg(&m, PositivityPolicy::RankOneSearch(RankOneConfig { starts: 4, steps: 10, ..Default::default() }), Tolerance::default());
        assert!(!r.passed);
    }

    #[test]
    fn semivariation_of_identity_measure() {
        for k in 1..=3 {
            let alg = MatrixAlgebra::full(2);
            let m = NonNegativeMeasure::identity(space(k), alg);
            let s = semivariation(&m, SemivariationStrategy::Structured { random_starts: 4, ascent_steps: 10, seed: 1 }).unwrap();
            assert!(s.lower >= k as f64 - 1e-9);
            assert_eq!(s.upper, 4.0 * k as f64);
            let e = semivariation(&m, SemivariationStrategy::Exhaustive { samples_per_partition: 2, seed: 1 }).unwrap();
            assert!(e.lower >= k as f64 - 1e-9);
            assert!(e.lower <= e.upper + 1e-9);
        }
    }

    #[test]
    fn semivariation_of_zero_measure() {
        let m = NonNegativeMeasure::zero(space(3), MatrixAlgebra::full(2), MatrixAlgebra::full(2));
        let s = semivariation(&m, SemivariationStrategy::Exhaustive { samples_per_partition: 3, seed: 0 }).unwrap();
        assert_eq!((s.lower, s.upper), (0.0, 0.0));
    }

    #[test]
    fn semivariation_exhaustive_is_bounded_in_atoms() {
        let m = NonNegativeMeasure::identity(space(13), MatrixAlgebra::scalars());
        let r = semivariation(&m, SemivariationStrategy::Exhaustive { samples_per_partition: 1, seed: 0 });
        assert!(matches!(r, Err(Error::IntractablePartitionCount { atoms: 13, .. })));
    }

    #[test]
    fn pairing_cases() {
        let alg = MatrixAlgebra::full(2);
        let m = NonNegativeMeasure::identity(space(2), alg.clone());
        let a = alg.sample_element(&mut random::rng(1));
        let zero = pair(&TracePairing { weight: alg.zero() }, &m, &a).unwrap();
        assert!(zero.atom_values.iter().all(|z| z.norm() == 0.0));
        let tr = pair(&TracePairing { weight: alg.identity() }, &m, &a).unwrap();
        for z in &tr.atom_values {
            assert!((z - a.matrix().trace()).norm() < 1e-14);
        }
        assert!((tr.value(&m.space().full()) - a.matrix().trace() * 2.0).norm() < 1e-14);

        let cp = NonNegativeMeasure::sample_completely_positive(space(3), alg.clone(), 3, 2, 9);
        let t = TracePairing { weight: MatrixAlgebra::full(3).sample_positive(4) };
        let mu = pair(&t, &cp, &alg.sample_positive(5)).unwrap();
        for z in &mu.atom_values {
            assert!(z.re >= -1e-12 && z.im.abs() < 1e-12);
        }
        assert!(mu.total_variation() >= mu.value(&cp.space().full()).norm() - 1e-12);
    }
}
