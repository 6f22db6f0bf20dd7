//! Instance files: one JSON document per measure, representation or probed
//! family, with complex scalars as `[re, im]` pairs and algebras as block
//! size lists.
//!
//! `payload` is always a two-level array of matrices:
//!
//! * `measure`, `spectral-measure`: `payload[x][k]` is the image of the
//!   `k`-th matrix unit under the atom map `m^x`;
//! * `representation`: `payload[x][k]` is `ρ(χ_{x} ⊗ e_k)`;
//! * `family-probe-set`: `payload[i][0]` is a positive probe `A_i` and
//!   `payload[i][1 + x]` is `E_{A_i}({x})`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::algebra::MatrixAlgebra;
use crate::correspondence::{generate_representation, perturb_measure, rep_to_measure, Representation, RepresentationBlueprint};
use crate::error::{Error, Result};
use crate::family::{basis_probes, FnPositiveFamily, ProbeConfig, TabulatedFamily};
use crate::kernel::{ComplexMatrix, Tolerance, ONE};
use crate::map::LinearMap;
use crate::measure::{FiniteMeasurableSpace, NonNegativeMeasure, NonNegativeSpectralMeasure, PovMeasure};
use crate::random;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InstanceKind {
    Measure,
    SpectralMeasure,
    Representation,
    FamilyProbeSet,
}

impl std::str::FromStr for InstanceKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_owned()))
            .map_err(|_| Error::BadConfig(format!("unknown instance kind `{s}`")))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Metadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub kind: InstanceKind,
    pub atom_count: usize,
    pub domain: Vec<usize>,
    pub codomain: Vec<usize>,
    pub payload: Vec<Vec<ComplexMatrix>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<Metadata>,
}

fn bad(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::BadInstance { path: path.into(), message: message.into() }
}

impl InstanceFile {
    /// Parses and checks an instance document; errors name the offending field.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let file: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            bad(path, e.into_inner().to_string())
        })?;
        file.check()?;
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::BadInstance { path: field, message } => {
                bad(field, format!("{message} (in {})", path.display()))
            }
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("instance serializes");
        s.push('\n');
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn domain_algebra(&self) -> Result<MatrixAlgebra> {
        MatrixAlgebra::new(self.domain.clone()).map_err(|e| bad("domain", e.to_string()))
    }

    pub fn codomain_algebra(&self) -> Result<MatrixAlgebra> {
        MatrixAlgebra::new(self.codomain.clone()).map_err(|e| bad("codomain", e.to_string()))
    }

    pub fn space(&self) -> Result<FiniteMeasurableSpace> {
        FiniteMeasurableSpace::new(self.atom_count).map_err(|e| bad("atom_count", e.to_string()))
    }

    fn check(&self) -> Result<()> {
        let space = self.space()?;
        let domain = self.domain_algebra()?;
        let codomain = self.codomain_algebra()?;
        let (rows, inner) = match self.kind {
            InstanceKind::FamilyProbeSet => (None, 1 + space.atom_count()),
            _ => (Some(space.atom_count()), domain.dim()),
        };
        if let Some(rows) = rows {
            if self.payload.len() != rows {
                return Err(bad("payload", format!("expected {rows} atoms, found {}", self.payload.len())));
            }
        }
        let tol = Tolerance::default();
        for (i, row) in self.payload.iter().enumerate() {
            if row.len() != inner {
                return Err(bad(format!("payload[{i}]"), format!("expected {inner} matrices, found {}", row.len())));
            }
            for (k, m) in row.iter().enumerate() {
                let is_probe = self.kind == InstanceKind::FamilyProbeSet && k == 0;
                let alg = if is_probe { &domain } else { &codomain };
                let n = alg.ambient_dim();
                if m.shape() != (n, n) {
                    return Err(bad(format!("payload[{i}][{k}]"), format!("expected a {n}x{n} matrix, found {:?}", m.shape())));
                }
                if !alg.contains(m, tol) {
                    return Err(bad(format!("payload[{i}][{k}]"), format!("matrix is not in {alg:?}")));
                }
            }
        }
        Ok(())
    }

    fn maps(&self) -> Result<Vec<LinearMap>> {
        let (domain, codomain) = (self.domain_algebra()?, self.codomain_algebra()?);
        self.payload
            .iter()
            .enumerate()
            .map(|(x, row)| {
                LinearMap::from_images(domain.clone(), codomain.clone(), row.clone())
                    .map_err(|e| bad(format!("payload[{x}]"), e.to_string()))
            })
            .collect()
    }

    fn expect_kind(&self, kinds: &[InstanceKind]) -> Result<()> {
        if kinds.contains(&self.kind) {
            Ok(())
        } else {
            Err(bad("kind", format!("expected one of {kinds:?}, found {:?}", self.kind)))
        }
    }

    pub fn to_measure(&self) -> Result<NonNegativeMeasure> {
        self.expect_kind(&[InstanceKind::Measure, InstanceKind::SpectralMeasure])?;
        NonNegativeMeasure::new(self.space()?, self.domain_algebra()?, self.codomain_algebra()?, self.maps()?)
    }

    pub fn to_spectral_measure(&self) -> Result<NonNegativeSpectralMeasure> {
        self.expect_kind(&[InstanceKind::SpectralMeasure])?;
        Ok(NonNegativeSpectralMeasure::new(self.to_measure()?))
    }

    /// Uncertified; run [`crate::correspondence::certify_representation`].
    pub fn to_representation(&self) -> Result<Representation> {
        self.expect_kind(&[InstanceKind::Representation])?;
        Representation::new(self.space()?, self.domain_algebra()?, self.codomain_algebra()?, self.maps()?)
    }

    pub fn to_family(&self) -> Result<TabulatedFamily> {
        self.expect_kind(&[InstanceKind::FamilyProbeSet])?;
        let (space, domain, codomain) = (self.space()?, self.domain_algebra()?, self.codomain_algebra()?);
        let entries = self
            .payload
            .iter()
            .map(|row| {
                let a = domain.element(row[0].clone())?;
                let e = PovMeasure::from_matrices(space, codomain.clone(), row[1..].to_vec())?;
                Ok((a, e))
            })
            .collect::<Result<_>>()?;
        TabulatedFamily::new(space, domain, codomain, entries)
    }

    fn from_maps(kind: InstanceKind, m: &NonNegativeMeasure, metadata: Option<Metadata>) -> Self {
        Self {
            kind,
            atom_count: m.space().atom_count(),
            domain: m.domain().blocks().to_vec(),
            codomain: m.codomain().blocks().to_vec(),
            payload: m.atom_maps().iter().map(|map| map.images().to_vec()).collect(),
            metadata,
        }
    }

    pub fn from_measure(m: &NonNegativeMeasure, metadata: Option<Metadata>) -> Self {
        Self::from_maps(InstanceKind::Measure, m, metadata)
    }

    pub fn from_spectral_measure(m: &NonNegativeSpectralMeasure, metadata: Option<Metadata>) -> Self {
        Self::from_maps(InstanceKind::SpectralMeasure, m.as_measure(), metadata)
    }

    pub fn from_representation(rho: &Representation, metadata: Option<Metadata>) -> Self {
        Self::from_maps(InstanceKind::Representation, &NonNegativeMeasure::from(rho), metadata)
    }

    pub fn from_family(fam: &TabulatedFamily, metadata: Option<Metadata>) -> Self {
        let (first, entries) = (fam.entries().first(), fam.entries());
        let space = first.map_or(0, |(_, e)| e.space().atom_count());
        Self {
            kind: InstanceKind::FamilyProbeSet,
            atom_count: space,
            domain: first.map_or_else(Vec::new, |(a, _)| a.algebra().blocks().to_vec()),
            codomain: first.map_or_else(Vec::new, |(_, e)| e.codomain().blocks().to_vec()),
            payload: entries
                .iter()
                .map(|(a, e)| {
                    std::iter::once(a.matrix().clone())
                        .chain(e.atom_values().iter().map(|v| v.matrix().clone()))
                        .collect()
                })
                .collect(),
            metadata,
        }
    }
}

/// Settings for [`generate`].
#[derive(Clone, Debug, PartialEq)]
pub struct GenerateConfig {
    pub kind: InstanceKind,
    pub atoms: usize,
    pub domain: Vec<usize>,
    /// Codomain dimension of generated measures and probe sets.
    pub codomain_dim: usize,
    /// Per-atom multiplicities of generated representations and spectral
    /// measures; defaults to one per atom.
    pub multiplicities: Option<Vec<usize>>,
    /// Kraus operators per atom of generated measures.
    pub kraus: usize,
    /// `measure`: cp | transpose | identity.
    /// `spectral-measure`: generated | perturbed | non-projection.
    /// `representation`: generated | scaled | transposed.
    /// `family-probe-set`: linear | non-additive.
    pub variant: Option<String>,
    pub seed: u64,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        Self {
            kind: InstanceKind::Measure,
            atoms: 2,
            domain: vec![2],
            codomain_dim: 3,
            multiplicities: None,
            kraus: 2,
            variant: None,
            seed: 0,
        }
    }
}

/// Deterministic instance for `cfg`.
pub fn generate(cfg: &GenerateConfig) -> Result<InstanceFile> {
    let space = FiniteMeasurableSpace::new(cfg.atoms)?;
    let domain = MatrixAlgebra::new(cfg.domain.clone())?;
    let variant = cfg.variant.clone().unwrap_or_else(|| default_variant(cfg.kind).to_owned());
    let metadata = |what: &str| Some(Metadata { seed: Some(cfg.seed), description: Some(what.to_owned()) });
    let multiplicities = cfg.multiplicities.clone().unwrap_or_else(|| vec![1; cfg.atoms]);
    if multiplicities.len() != cfg.atoms {
        return Err(Error::BadConfig(format!("{} multiplicities for {} atoms", multiplicities.len(), cfg.atoms)));
    }
    let representation = || {
        let bp = RepresentationBlueprint::random(domain.clone(), multiplicities.clone(), &mut random::rng(cfg.seed));
        generate_representation(&bp)
    };
    let unknown = || Error::BadConfig(format!("unknown variant `{variant}` for {:?}", cfg.kind));

    match cfg.kind {
        InstanceKind::Measure => {
            let m = match variant.as_str() {
                "cp" => NonNegativeMeasure::sample_completely_positive(space, domain, cfg.codomain_dim, cfg.kraus, cfg.seed),
                "transpose" => NonNegativeMeasure::sample_transpose_composed(space, domain, cfg.codomain_dim, cfg.kraus, cfg.seed),
                "identity" => NonNegativeMeasure::identity(space, domain),
                _ => return Err(unknown()),
            };
            Ok(InstanceFile::from_measure(&m, metadata(&format!("{variant} measure"))))
        }
        InstanceKind::SpectralMeasure => {
            let m = rep_to_measure(&representation()?, ProbeConfig::default(), Tolerance::default())?;
            let m = match variant.as_str() {
                "generated" => m,
                "perturbed" => perturb_measure(&m, 1e-3, cfg.seed),
                "non-projection" => {
                    let mut maps = m.as_measure().atom_maps().to_vec();
                    maps[0] = maps[0].scale(ONE * 0.5);
                    let inner = m.as_measure();
                    NonNegativeSpectralMeasure::new(NonNegativeMeasure::new(
                        inner.space(),
                        inner.domain().clone(),
                        inner.codomain().clone(),
                        maps,
                    )?)
                }
                _ => return Err(unknown()),
            };
            Ok(InstanceFile::from_spectral_measure(&m, metadata(&format!("{variant} spectral measure"))))
        }
        InstanceKind::Representation => {
            let rho = representation()?;
            let rho = match variant.as_str() {
                "generated" => rho,
                "scaled" => rho.scale(2.0),
                "transposed" => rho.precompose_transpose(),
                _ => return Err(unknown()),
            };
            Ok(InstanceFile::from_representation(&rho, metadata(&format!("{variant} representation"))))
        }
        InstanceKind::FamilyProbeSet => {
            let m = NonNegativeMeasure::sample_completely_positive(space, domain.clone(), cfg.codomain_dim, cfg.kraus, cfg.seed);
            let mut probes = basis_probes(&domain)?;
            let mut rng = random::substream(cfg.seed, 1);
            for _ in 0..4 {
                let a = domain.sample_positive_with(&mut rng);
                let b = domain.sample_positive_with(&mut rng);
                probes.extend([&a + &b, a.scale_real(2.0), a, b]);
            }
            let fam = match variant.as_str() {
                "linear" => TabulatedFamily::from_family(&m, &probes)?,
                "non-additive" => {
                    let quadratic = FnPositiveFamily::new(space, domain.clone(), m.codomain().clone(), |a| {
                        let half = (a.matrix() + a.matrix() * a.matrix()).scale_real(0.5);
                        let half = domain.element(half).expect("same pattern");
                        space.atoms().map(|x| m.atom_map(x).apply(&half).expect("domain").into_matrix()).collect()
                    });
                    TabulatedFamily::from_family(&quadratic, &probes)?
                }
                _ => return Err(unknown()),
            };
            Ok(InstanceFile::from_family(&fam, metadata(&format!("{variant} family probe set"))))
        }
    }
}

fn default_variant(kind: InstanceKind) -> &'static str {
    match kind {
        InstanceKind::Measure => "cp",
        InstanceKind::SpectralMeasure | InstanceKind::Representation => "generated",
        InstanceKind::FamilyProbeSet => "linear",
    }
}
