//! Named scenarios that run validators, builders and round trips on a file
//! instance or on seeded generated instances, producing [`Report`]s.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::algebra::MatrixAlgebra;
use crate::correspondence::{
    certify_representation, generate_representation, measure_to_rep, rep_to_measure, roundtrip_defect,
    sample_blueprint, Representation,
};
use crate::error::{Error, Result};
use crate::family::{
    assemble_from_positive_family, build_from_positive_family, build_from_projection_family, check_tabulated_family,
    riemann_path_check, ProbeConfig,
};
use crate::instance::{InstanceFile, InstanceKind};
use crate::integration::{
    integrate, integrate_limit, monotone_convergence_check, multiplicativity_check, star_defect, CauchyWindow,
    OperatorFunction, ScalarFunction,
};
use crate::kernel::{Tolerance, ONE};
use crate::measure::{
    semivariation, validate_nonneg, validate_nonneg_spectral, FiniteMeasurableSpace, NonNegativeMeasure,
    NonNegativeSpectralMeasure, PositivityPolicy, RankOneConfig, SemivariationStrategy, SpectralProbeConfig, Verdict,
};
use crate::random::{self, SeededRng};
use crate::report::{Check, Witness};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Validate,
    BuildFromFamily,
    Roundtrip,
    Semivariation,
    Convergence,
    Multiplicativity,
    FullSuite,
}

impl Scenario {
    pub const ALL: [Scenario; 7] = [
        Scenario::Validate,
        Scenario::BuildFromFamily,
        Scenario::Roundtrip,
        Scenario::Semivariation,
        Scenario::Convergence,
        Scenario::Multiplicativity,
        Scenario::FullSuite,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Validate => "validate",
            Scenario::BuildFromFamily => "build-from-family",
            Scenario::Roundtrip => "roundtrip",
            Scenario::Semivariation => "semivariation",
            Scenario::Convergence => "convergence",
            Scenario::Multiplicativity => "multiplicativity",
            Scenario::FullSuite => "full-suite",
        }
    }
}

impl std::str::FromStr for Scenario {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| Error::BadConfig(format!("unknown scenario `{s}`")))
    }
}

/// Absolute tolerances: one for single validators, one for composed
/// pipelines such as round trips.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub validator: f64,
    pub roundtrip: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { validator: 1e-9, roundtrip: 1e-8 }
    }
}

impl Tolerances {
    /// Both tiers set to `x`.
    pub fn uniform(x: f64) -> Self {
        Self { validator: x, roundtrip: x }
    }

    fn validator(&self) -> Tolerance {
        Tolerance::absolute(self.validator)
    }
}

/// One JSON-lines record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub scenario: String,
    pub trial: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance: Option<String>,
    pub passed: bool,
    pub checks: Vec<Check>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metrics: BTreeMap<String, f64>,
    pub tolerances: Tolerances,
    pub seed: u64,
    pub wall_time_ms: f64,
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub input: Option<InstanceFile>,
    /// Shown in reports; usually the input path.
    pub input_name: Option<String>,
    pub seed: u64,
    pub trials: usize,
    pub tolerances: Tolerances,
}

impl RunConfig {
    pub fn new(scenario: Scenario, seed: u64, trials: usize) -> Self {
        Self { scenario, input: None, input_name: None, seed, trials, tolerances: Tolerances::default() }
    }

    /// A file input is run once; generated inputs once per trial.
    pub fn trial_count(&self) -> usize {
        if self.input.is_some() {
            1
        } else {
            self.trials
        }
    }
}

/// Seed of trial `trial` in a run seeded with `seed`.
pub fn trial_seed(seed: u64, trial: usize) -> u64 {
    random::substream(seed, trial as u64).next_u64()
}

#[derive(Default)]
struct Outcome {
    checks: Vec<Check>,
    metrics: BTreeMap<String, f64>,
}

impl Outcome {
    fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    fn extend(&mut self, cs: impl IntoIterator<Item = Check>) {
        self.checks.extend(cs);
    }

    fn metric(&mut self, name: &str, v: f64) {
        self.metrics.insert(name.to_owned(), v);
    }
}

/// Runs one trial. A full-suite trial runs every other scenario on
/// generated instances and merges their checks into one report.
pub fn run_trial(cfg: &RunConfig, trial: usize) -> Result<Report> {
    let seed = trial_seed(cfg.seed, trial);
    let start = Instant::now();
    let outcome = if cfg.scenario == Scenario::FullSuite {
        if cfg.input.is_some() {
            return Err(Error::BadConfig("full-suite runs on generated instances only".into()));
        }
        let mut all = Outcome::default();
        for sc in SUITE {
            let o = outcome_of(sc, cfg, seed)?;
            all.checks.extend(o.checks);
            all.metrics.extend(o.metrics.into_iter().map(|(k, v)| (format!("{}.{k}", sc.name()), v)));
        }
        all
    } else {
        outcome_of(cfg.scenario, cfg, seed)?
    };
    Ok(finish(cfg.scenario, cfg, trial, seed, outcome, start))
}

const SUITE: [Scenario; 6] = [
    Scenario::Roundtrip,
    Scenario::Multiplicativity,
    Scenario::BuildFromFamily,
    Scenario::Convergence,
    Scenario::Semivariation,
    Scenario::Validate,
];

fn outcome_of(sc: Scenario, cfg: &RunConfig, seed: u64) -> Result<Outcome> {
    match run_scenario(sc, cfg, seed) {
        Ok(o) => Ok(o),
        Err(e) => rejection(e),
    }
}

fn finish(sc: Scenario, cfg: &RunConfig, trial: usize, seed: u64, mut o: Outcome, start: Instant) -> Report {
    for c in &mut o.checks {
        if !c.passed && c.witness.is_none() {
            let what = cfg.input_name.clone().unwrap_or_else(|| "generated instance".into());
            c.witness = Some(Witness::new(format!("rerun `{}` on {what} with this trial seed", sc.name())).scalar(seed as f64));
        }
    }
    Report {
        scenario: sc.name().to_owned(),
        trial,
        instance: cfg.input_name.clone(),
        passed: o.checks.iter().all(|c| c.passed),
        checks: o.checks,
        metrics: o.metrics,
        tolerances: cfg.tolerances,
        seed,
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
    }
}

/// Turns a rejection by a builder or converter into failing checks carrying
/// the rejecting report's witnesses; other errors propagate.
fn rejection(e: Error) -> Result<Outcome> {
    let tol = Tolerance::default();
    let checks = match e {
        Error::IncompatibleFamily(r) => r.checks(tol),
        Error::NotARepresentation(r) => r.checks(tol),
        Error::InvalidMeasure(r) => {
            let mut cs = r.checks(tol);
            cs.push(Check::at_most("spectral.normalization", r.normalization_defect, tol.absolute));
            cs
        }
        Error::NotCauchy { gap, allowed } => vec![Check::at_most("integration.cauchy_tail", gap, allowed)],
        Error::NotMonotone { index, atom } => vec![Check::at_most("integration.monotone", 1.0, 0.0)
            .with_witness(Some(Witness::new("sequence decreases here").atoms([atom]).scalar(index as f64)))],
        Error::BoundViolated { index, margin } => vec![Check::at_least("integration.bound", margin, 0.0)
            .with_witness(Some(Witness::new("integral exceeds the bound at this index").scalar(index as f64)))],
        other => return Err(other),
    };
    let mut o = Outcome::default();
    // Keep only the failing lines so the report names what was rejected.
    let failing: Vec<Check> = checks.iter().filter(|c| !c.passed).cloned().collect();
    o.extend(if failing.is_empty() { checks } else { failing });
    if o.checks.iter().all(|c| c.passed) {
        o.check(Check::at_most("rejected", 1.0, 0.0));
    }
    Ok(o)
}

fn probe(seed: u64) -> ProbeConfig {
    ProbeConfig { samples: 8, seed }
}

fn positivity(seed: u64) -> PositivityPolicy {
    PositivityPolicy::Auto(RankOneConfig { starts: 16, steps: 60, seed, ..Default::default() })
}

const SMALL_DOMAINS: [&[usize]; 5] = [&[1], &[2], &[3], &[1, 1], &[2, 1]];

/// Random CP or transpose-composed measure with small dimensions.
fn sample_measure(rng: &mut SeededRng) -> NonNegativeMeasure {
    let space = FiniteMeasurableSpace::new(rng.random_range(1..=4)).expect("nonzero");
    let domain = MatrixAlgebra::new(SMALL_DOMAINS[rng.random_range(0..SMALL_DOMAINS.len())].to_vec()).expect("blocks");
    let codomain_dim = rng.random_range(1..=4);
    let kraus = rng.random_range(1..=3);
    let seed = rng.next_u64();
    if rng.random::<bool>() {
        NonNegativeMeasure::sample_completely_positive(space, domain, codomain_dim, kraus, seed)
    } else {
        NonNegativeMeasure::sample_transpose_composed(space, domain, codomain_dim, kraus, seed)
    }
}

fn sample_spectral(rng: &mut SeededRng, tol: Tolerance) -> Result<(Representation, NonNegativeSpectralMeasure)> {
    let rho = generate_representation(&sample_blueprint(rng))?;
    let m = rep_to_measure(&rho, probe(rng.next_u64()), tol)?;
    Ok((rho, m))
}

fn run_scenario(sc: Scenario, cfg: &RunConfig, seed: u64) -> Result<Outcome> {
    let input = cfg.input.as_ref();
    let tols = cfg.tolerances;
    match sc {
        Scenario::Validate => validate(input, seed, tols),
        Scenario::BuildFromFamily => build(input, seed, tols),
        Scenario::Roundtrip => roundtrip(input, seed, tols),
        Scenario::Semivariation => semivariation_scenario(input, seed),
        Scenario::Convergence => convergence(input, seed, tols),
        Scenario::Multiplicativity => multiplicativity(input, seed, tols),
        Scenario::FullSuite => unreachable!("merged by run_trial"),
    }
}

fn validate_measure(m: &NonNegativeMeasure, seed: u64, tols: Tolerances, o: &mut Outcome) {
    let r = validate_nonneg(m, positivity(seed), tols.validator());
    o.extend(r.checks(tols.validator()));
    let certified = r.atoms.iter().filter(|a| a.verdict == Verdict::Certified).count();
    o.metric("nonneg.choi_certified_atoms", certified as f64);
}

fn validate_spectral_measure(m: &NonNegativeSpectralMeasure, seed: u64, tols: Tolerances, o: &mut Outcome) {
    let tol = tols.validator();
    let cfg = SpectralProbeConfig { samples: 8, seed, include_noncommuting: false, positivity: positivity(seed) };
    let r = validate_nonneg_spectral(m, &cfg, tol);
    o.extend(r.checks(tol));
    o.check(Check::at_most("spectral.normalization", r.normalization_defect, tol.absolute));
}

fn validate(input: Option<&InstanceFile>, seed: u64, tols: Tolerances) -> Result<Outcome> {
    let mut o = Outcome::default();
    let tol = tols.validator();
    match input {
        Some(file) => match file.kind {
            InstanceKind::Measure => validate_measure(&file.to_measure()?, seed, tols, &mut o),
            InstanceKind::SpectralMeasure => validate_spectral_measure(&file.to_spectral_measure()?, seed, tols, &mut o),
            InstanceKind::Representation => {
                o.extend(certify_representation(&file.to_representation()?, probe(seed), tol).checks(tol))
            }
            InstanceKind::FamilyProbeSet => o.extend(check_tabulated_family(&file.to_family()?, tol)?.checks(tol)),
        },
        None => {
            let mut rng = random::rng(seed);
            validate_measure(&sample_measure(&mut rng), seed, tols, &mut o);
            let (_, m) = sample_spectral(&mut rng, tol)?;
            validate_spectral_measure(&m, seed, tols, &mut o);
        }
    }
    Ok(o)
}

fn build_positive(m: &NonNegativeMeasure, seed: u64, tols: Tolerances, o: &mut Outcome) -> Result<()> {
    let rebuilt = build_from_positive_family(m, probe(seed), tols.validator())?;
    o.check(Check::at_most("family.positive_rebuild", rebuilt.distance(m)?, tols.roundtrip));
    Ok(())
}

fn build_projection(m: &NonNegativeSpectralMeasure, seed: u64, tols: Tolerances, o: &mut Outcome) -> Result<()> {
    let tol = tols.validator();
    let rebuilt = build_from_projection_family(m, probe(seed), tol)?;
    o.check(Check::at_most("family.projection_rebuild", rebuilt.as_measure().distance(m.as_measure())?, tols.roundtrip));
    let a = m.as_measure().domain().sample_positive(seed);
    let path = riemann_path_check(m, &a, &[1, 10, 100, 1000], tol)?;
    let worst = path.levels.iter().map(|l| l.defect - l.bound).fold(f64::NEG_INFINITY, f64::max);
    o.check(Check::at_most("family.riemann_path", worst, tol.absolute).with_witness(
        (!path.passed).then(|| Witness::new("Riemann defect above 2k/ℓ for this positive operator").operator(a.matrix().clone())),
    ));
    Ok(())
}

fn build(input: Option<&InstanceFile>, seed: u64, tols: Tolerances) -> Result<Outcome> {
    let mut o = Outcome::default();
    let tol = tols.validator();
    match input {
        Some(file) => match file.kind {
            InstanceKind::FamilyProbeSet => {
                let fam = file.to_family()?;
                let report = check_tabulated_family(&fam, tol)?;
                o.extend(report.checks(tol));
                if report.passed {
                    let built = assemble_from_positive_family(&fam)?;
                    let mut worst = 0.0f64;
                    for (a, e) in fam.entries() {
                        let r = built.restrict(a)?;
                        for (x, v) in e.atom_values().iter().enumerate() {
                            worst = worst.max((r.atom(x) - v).norm());
                        }
                    }
                    o.check(Check::at_most("family.probe_agreement", worst, tols.roundtrip));
                }
            }
            InstanceKind::Measure => build_positive(&file.to_measure()?, seed, tols, &mut o)?,
            InstanceKind::SpectralMeasure => build_projection(&file.to_spectral_measure()?, seed, tols, &mut o)?,
            InstanceKind::Representation => {
                let m = rep_to_measure(&file.to_representation()?, probe(seed), tol)?;
                build_projection(&m, seed, tols, &mut o)?;
            }
        },
        None => {
            let mut rng = random::rng(seed);
            build_positive(&sample_measure(&mut rng), seed, tols, &mut o)?;
            let (_, m) = sample_spectral(&mut rng, tol)?;
            build_projection(&m, seed, tols, &mut o)?;
        }
    }
    Ok(o)
}

fn roundtrip(input: Option<&InstanceFile>, seed: u64, tols: Tolerances) -> Result<Outcome> {
    let mut o = Outcome::default();
    let tol = tols.validator();
    let (rep_side, measure_side) = match input {
        Some(file) => match file.kind {
            InstanceKind::Representation => {
                let rho = file.to_representation()?;
                let m = rep_to_measure(&rho, probe(seed), tol)?;
                let back = measure_to_rep(&m, probe(seed), tol)?;
                let again = rep_to_measure(&back, probe(seed), tol)?;
                (back.distance(&rho)?, again.as_measure().distance(m.as_measure())?)
            }
            InstanceKind::SpectralMeasure => {
                let m = file.to_spectral_measure()?;
                let rho = measure_to_rep(&m, probe(seed), tol)?;
                let again = rep_to_measure(&rho, probe(seed), tol)?;
                let back = measure_to_rep(&again, probe(seed), tol)?;
                (back.distance(&rho)?, again.as_measure().distance(m.as_measure())?)
            }
            other => return Err(Error::BadConfig(format!("roundtrip needs a representation or spectral measure, not {other:?}"))),
        },
        None => {
            let r = roundtrip_defect(seed, probe(seed), tol)?;
            o.metric("atoms", r.atoms as f64);
            o.metric("codomain_dim", r.codomain_dim as f64);
            (r.rep_side, r.measure_side)
        }
    };
    o.check(Check::at_most("roundtrip.rep_side", rep_side, tols.roundtrip));
    o.check(Check::at_most("roundtrip.measure_side", measure_side, tols.roundtrip));
    Ok(o)
}

fn semivariation_scenario(input: Option<&InstanceFile>, seed: u64) -> Result<Outcome> {
    let m = match input {
        Some(file) => file.to_measure()?,
        None => sample_measure(&mut random::rng(seed)),
    };
    let strategy = if m.space().atom_count() <= 6 {
        SemivariationStrategy::Exhaustive { samples_per_partition: 4, seed }
    } else {
        SemivariationStrategy::Structured { random_starts: 16, ascent_steps: 25, seed }
    };
    let s = semivariation(&m, strategy)?;
    let mut o = Outcome::default();
    o.metric("lower", s.lower);
    o.metric("upper", s.upper);
    o.check(Check::at_most("semivariation.lower_below_upper", s.lower - s.upper, 1e-6).with_witness(Some(s.witness)));
    Ok(o)
}

fn convergence(input: Option<&InstanceFile>, seed: u64, tols: Tolerances) -> Result<Outcome> {
    let mut rng = random::rng(seed);
    let m = match input {
        Some(file) => file.to_measure()?,
        None => sample_measure(&mut rng),
    };
    let tol = tols.validator();
    let space = m.space();
    let mut o = Outcome::default();

    // Monotone convergence for (1 - 1/n) f against the POVM m_A.
    let a = m.domain().sample_positive_with(&mut rng);
    let e = m.restrict(&a)?;
    let f = ScalarFunction::from_real(&space.atoms().map(|_| rng.random_range(0.0..2.0)).collect::<Vec<_>>())?;
    let steps = 50;
    let seq: Vec<ScalarFunction> = (1..=steps).map(|n| f.scale(ONE * (1.0 - 1.0 / n as f64))).collect();
    let target = (0..space.atom_count()).fold(e.codomain().zero(), |acc, x| acc + e.atom(x).scale(f.values[x]));
    let r = monotone_convergence_check(&seq, &f, &e, &target, tol)?;
    let predicted = target.norm() / steps as f64;
    o.metric("monotone.final_deviation", r.final_deviation);
    o.check(Check::at_most("integration.monotone_prediction", (r.final_deviation - predicted).abs(), tol.absolute));

    // Cauchy limit of F + 10^-i G.
    let big_f = OperatorFunction::sample(space, m.domain(), &mut rng);
    let g = OperatorFunction::sample(space, m.domain(), &mut rng);
    let seq: Vec<OperatorFunction> = (1..=12).map(|i| big_f.add(&g.scale(ONE * 10f64.powi(-i))).expect("same shape")).collect();
    let limit = integrate_limit(&seq, &m, CauchyWindow::default())?;
    let exact = integrate(&big_f, &m)?;
    let gap = (&limit.value - &exact).norm();
    o.check(Check::at_most("integration.limit_stability", gap - limit.stability_bound, tol.absolute));
    Ok(o)
}

fn multiplicativity(input: Option<&InstanceFile>, seed: u64, tols: Tolerances) -> Result<Outcome> {
    let mut rng = random::rng(seed);
    let tol = tols.validator();
    let m = match input {
        Some(file) if file.kind == InstanceKind::Representation => rep_to_measure(&file.to_representation()?, probe(seed), tol)?,
        Some(file) => {
            let m = file.to_spectral_measure()?;
            let cfg = SpectralProbeConfig { samples: 8, seed, ..Default::default() };
            let r = validate_nonneg_spectral(&m, &cfg, tol);
            if !r.passed {
                return Err(Error::InvalidMeasure(Box::new(r)));
            }
            m
        }
        None => sample_spectral(&mut rng, tol)?.1,
    };
    let space = m.as_measure().space();
    let alg = m.as_measure().domain().clone();
    let (mut worst, mut worst_star) = (0.0f64, 0.0f64);
    let mut witness = None;
    for _ in 0..10 {
        let f = OperatorFunction::sample(space, &alg, &mut rng);
        let g = OperatorFunction::sample(space, &alg, &mut rng);
        let d = multiplicativity_check(&f, &g, &m)?;
        if d > worst {
            worst = d;
            let mut w = Witness::new("F then G, atom by atom");
            w.operators = f.values().iter().chain(g.values()).map(|v| v.matrix().clone()).collect();
            witness = Some(w);
        }
        worst_star = worst_star.max(star_defect(&f, m.as_measure())?);
    }
    let mut o = Outcome::default();
    o.check(Check::at_most("integration.multiplicativity", worst, tols.roundtrip).with_witness(witness));
    o.check(Check::at_most("integration.star", worst_star, tols.roundtrip));
    Ok(o)
}

/// Exit status for a finished report stream: 0 iff every report passed.
pub fn exit_code(reports: &[Report]) -> i32 {
    if reports.iter().all(|r| r.passed) {
        0
    } else {
        1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{generate, GenerateConfig};

    #[test]
    fn scenario_names_parse() {
        for sc in Scenario::ALL {
            assert_eq!(sc.name().parse::<Scenario>().unwrap(), sc);
        }
        assert!("nope".parse::<Scenario>().is_err());
    }

    #[test]
    fn generated_trials_pass() {
        for sc in Scenario::ALL {
            let cfg = RunConfig::new(sc, 3, 2);
            for t in 0..cfg.trial_count() {
                let r = run_trial(&cfg, t).unwrap();
                assert!(r.passed, "{}", serde_json::to_string(&r).unwrap());
            }
        }
    }

    #[test]
    fn reports_are_deterministic_up_to_wall_time() {
        let cfg = RunConfig::new(Scenario::Roundtrip, 5, 1);
        let mut a = run_trial(&cfg, 0).unwrap();
        let mut b = run_trial(&cfg, 0).unwrap();
        a.wall_time_ms = 0.0;
        b.wall_time_ms = 0.0;
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    fn run_file(sc: Scenario, gen: GenerateConfig) -> Report {
        let mut cfg = RunConfig::new(sc, 1, 1);
        cfg.input = Some(generate(&gen).unwrap());
        run_trial(&cfg, 0).unwrap()
    }

    #[test]
    fn invalid_instances_fail_with_witnesses() {
        let cases = [
            (Scenario::Validate, InstanceKind::SpectralMeasure, "non-projection"),
            (Scenario::Validate, InstanceKind::SpectralMeasure, "perturbed"),
            (Scenario::Validate, InstanceKind::Representation, "scaled"),
            (Scenario::Validate, InstanceKind::Representation, "transposed"),
            (Scenario::Validate, InstanceKind::FamilyProbeSet, "non-additive"),
            (Scenario::BuildFromFamily, InstanceKind::FamilyProbeSet, "non-additive"),
            (Scenario::Roundtrip, InstanceKind::Representation, "scaled"),
        ];
        for (sc, kind, variant) in cases {
            let r = run_file(sc, GenerateConfig { kind, variant: Some(variant.into()), ..Default::default() });
            assert!(!r.passed, "{variant}");
            for c in r.checks.iter().filter(|c| !c.passed) {
                assert!(c.witness.is_some(), "{variant}: {}", c.name);
            }
        }
    }

    #[test]
    fn valid_instances_pass() {
        let cases = [
            (Scenario::Validate, InstanceKind::Measure, "cp"),
            (Scenario::Validate, InstanceKind::Measure, "transpose"),
            (Scenario::Validate, InstanceKind::SpectralMeasure, "generated"),
            (Scenario::Validate, InstanceKind::Representation, "generated"),
            (Scenario::Validate, InstanceKind::FamilyProbeSet, "linear"),
            (Scenario::BuildFromFamily, InstanceKind::FamilyProbeSet, "linear"),
            (Scenario::Roundtrip, InstanceKind::Representation, "generated"),
            (Scenario::Multiplicativity, InstanceKind::SpectralMeasure, "generated"),
        ];
        for (sc, kind, variant) in cases {
            let r = run_file(sc, GenerateConfig { kind, variant: Some(variant.into()), ..Default::default() });
            assert!(r.passed, "{variant}: {}", serde_json::to_string(&r).unwrap());
        }
    }

    #[test]
    fn identity_semivariation() {
        let gen = GenerateConfig { kind: InstanceKind::Measure, atoms: 3, variant: Some("identity".into()), ..Default::default() };
        let r = run_file(Scenario::Semivariation, gen);
        assert!(r.passed);
        assert!(r.metrics["lower"] >= 3.0 - 1e-6);
        assert_eq!(r.metrics["upper"], 12.0);
    }
}
