//! Integration of scalar and operator-valued functions against non-negative
//! measures on a finite space.
//!
//! The scalar integral `∫ f dm_A` is computed through the four positive parts
//! of `A`; the operator integral `∫ F dm` is the linear extension
//! `Σ_x m^x(F(x))`. Both routes are exposed so they can be compared.

use serde::{Deserialize, Serialize};

use crate::algebra::{AlgebraElement, MatrixAlgebra};
use crate::error::{Error, Result};
use crate::kernel::{Scalar, Tolerance, I, ONE, ZERO};
use crate::measure::{FiniteMeasurableSpace, MeasurableSet, NonNegativeMeasure, NonNegativeSpectralMeasure, PovMeasure};
use crate::random::SeededRng;

/// `f: X → ℂ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarFunction {
    pub values: Vec<Scalar>,
}

impl ScalarFunction {
    pub fn new(values: Vec<Scalar>) -> Result<Self> {
        if values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::BadConfig("function values must be finite".into()));
        }
        Ok(Self { values })
    }

    pub fn from_real(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&v| ONE * v).collect())
    }

    pub fn constant(space: FiniteMeasurableSpace, c: Scalar) -> Self {
        Self { values: vec![c; space.atom_count()] }
    }

    /// `χ_Δ`.
    pub fn indicator(space: FiniteMeasurableSpace, set: &MeasurableSet) -> Self {
        Self { values: space.atoms().map(|x| if set.contains(x) { ONE } else { ZERO }).collect() }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn scale(&self, s: Scalar) -> Self {
        Self { values: self.values.iter().map(|z| z * s).collect() }
    }

    /// `f ⊗ A`.
    pub fn tensor(&self, a: &AlgebraElement) -> OperatorFunction {
        OperatorFunction {
            algebra: a.algebra().clone(),
            values: self.values.iter().map(|&z| a.scale(z)).collect(),
        }
    }
}

/// `F: X → W₁`.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorFunction {
    algebra: MatrixAlgebra,
    values: Vec<AlgebraElement>,
}

impl OperatorFunction {
    pub fn new(algebra: MatrixAlgebra, values: Vec<AlgebraElement>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| v.algebra() != &algebra) {
            return Err(Error::DomainMismatch(format!("value in {:?}, expected {algebra:?}", v.algebra())));
        }
        Ok(Self { algebra, values })
    }

    /// `1 ⊗ A`.
    pub fn constant(space: FiniteMeasurableSpace, a: &AlgebraElement) -> Self {
        Self { algebra: a.algebra().clone(), values: vec![a.clone(); space.atom_count()] }
    }

    /// `χ_Δ ⊗ A`.
    pub fn indicator(space: FiniteMeasurableSpace, set: &MeasurableSet, a: &AlgebraElement) -> Self {
        ScalarFunction::indicator(space, set).tensor(a)
    }

    /// Independent Gaussian values, normalized to unit operator norm per atom.
    pub fn sample(space: FiniteMeasurableSpace, algebra: &MatrixAlgebra, rng: &mut SeededRng) -> Self {
        let values = space
            .atoms()
            .map(|_| {
                let a = algebra.sample_element(rng);
                let n = a.norm();
                if n > 0.0 { a.scale_real(1.0 / n) } else { a }
            })
            .collect();
        Self { algebra: algebra.clone(), values }
    }

    /// Pointwise positive semidefinite values of unit norm.
    pub fn sample_positive(space: FiniteMeasurableSpace, algebra: &MatrixAlgebra, rng: &mut SeededRng) -> Self {
        let values = space.atoms().map(|_| algebra.sample_positive_with(rng)).collect();
        Self { algebra: algebra.clone(), values }
    }

    pub fn algebra(&self) -> &MatrixAlgebra {
        &self.algebra
    }

    pub fn values(&self) -> &[AlgebraElement] {
        &self.values
    }

    pub fn value(&self, x: usize) -> &AlgebraElement {
        &self.values[x]
    }

    pub fn atom_count(&self) -> usize {
        self.values.len()
    }

    /// Pointwise product `(FG)(x) = F(x) G(x)`.
    pub fn mul(&self, rhs: &Self) -> Result<Self> {
        self.check_compatible(rhs)?;
        Ok(Self { algebra: self.algebra.clone(), values: self.values.iter().zip(&rhs.values).map(|(a, b)| a * b).collect() })
    }

    pub fn add(&self, rhs: &Self) -> Result<Self> {
        self.check_compatible(rhs)?;
        Ok(Self { algebra: self.algebra.clone(), values: self.values.iter().zip(&rhs.values).map(|(a, b)| a + b).collect() })
    }

    pub fn scale(&self, s: Scalar) -> Self {
        Self { algebra: self.algebra.clone(), values: self.values.iter().map(|a| a.scale(s)).collect() }
    }

    /// `F*(x) = F(x)*`.
    pub fn adjoint(&self) -> Self {
        Self { algebra: self.algebra.clone(), values: self.values.iter().map(AlgebraElement::adjoint).collect() }
    }

    /// `max_x ||F(x)||`.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(AlgebraElement::norm).fold(0.0, f64::max)
    }

    /// `||F - G||_∞`.
    pub fn distance(&self, rhs: &Self) -> Result<f64> {
        self.check_compatible(rhs)?;
        Ok(self.values.iter().zip(&rhs.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max))
    }

    fn check_compatible(&self, rhs: &Self) -> Result<()> {
        if self.algebra != rhs.algebra || self.values.len() != rhs.values.len() {
            return Err(Error::DomainMismatch("functions have different domains or value algebras".into()));
        }
        Ok(())
    }

    fn check_measure(&self, m: &NonNegativeMeasure) -> Result<()> {
        if &self.algebra != m.domain() || self.values.len() != m.space().atom_count() {
            return Err(Error::DomainMismatch(format!(
                "function over {} atoms in {:?}, measure over {} atoms on {:?}",
                self.values.len(),
                self.algebra,
                m.space().atom_count(),
                m.domain()
            )));
        }
        Ok(())
    }
}

fn check_scalar(f: &ScalarFunction, space: FiniteMeasurableSpace) -> Result<()> {
    if f.values.len() != space.atom_count() {
        return Err(Error::DomainMismatch(format!(
            "function over {} atoms, measure over {}",
            f.values.len(),
            space.atom_count()
        )));
    }
    Ok(())
}

/// `Σ_x f(x) m^x(A)` for `A` in the domain.
fn weighted_sum(f: &ScalarFunction, a: &AlgebraElement, m: &NonNegativeMeasure) -> AlgebraElement {
    let mut acc = m.codomain().zero();
    for (x, &fx) in f.values.iter().enumerate() {
        if fx != ZERO {
            acc = acc + m.atom_map(x).apply(a).expect("checked domain").scale(fx);
        }
    }
    acc
}

/// Unclamped positive and negative parts, so that `A = A₊ - A₋` holds to
/// rounding.
fn exact_jordan(h: &AlgebraElement) -> Result<(AlgebraElement, AlgebraElement)> {
    Ok((h.functional_calculus(|x| x.max(0.0))?, h.functional_calculus(|x| (-x).max(0.0))?))
}

/// `∫ f dm_A` through the four positive parts of `A`:
/// `∫f dm_{re(A)₊} - ∫f dm_{re(A)₋} + i∫f dm_{im(A)₊} - i∫f dm_{im(A)₋}`.
///
/// Fails with [`Error::NumericalFailure`] if the result disagrees with the
/// direct linear extension by more than `1e-10` relative to its scale.
pub fn integrate_scalar(f: &ScalarFunction, a: &AlgebraElement, m: &NonNegativeMeasure) -> Result<AlgebraElement> {
    check_scalar(f, m.space())?;
    m.check_domain(a)?;
    let (re, im) = a.cartesian_parts();
    let (re_plus, re_minus) = exact_jordan(&re)?;
    let (im_plus, im_minus) = exact_jordan(&im)?;
    let four = weighted_sum(f, &re_plus, m) - weighted_sum(f, &re_minus, m)
        + (weighted_sum(f, &im_plus, m) - weighted_sum(f, &im_minus, m)).scale(I);

    let direct = weighted_sum(f, a, m);
    let gap = (&four - &direct).norm();
    let scale = four.norm().max(direct.norm()).max(1.0);
    if gap > 1e-10 * scale {
        return Err(Error::NumericalFailure(format!(
            "four-part integral differs from the linear extension by {gap:e}"
        )));
    }
    Ok(four)
}

/// `Σ_x f(x) m^x(A)`.
pub fn integrate_scalar_direct(f: &ScalarFunction, a: &AlgebraElement, m: &NonNegativeMeasure) -> Result<AlgebraElement> {
    check_scalar(f, m.space())?;
    m.check_domain(a)?;
    Ok(weighted_sum(f, a, m))
}

/// `∫ F dm = Σ_x m^x(F(x))`.
pub fn integrate(f: &OperatorFunction, m: &NonNegativeMeasure) -> Result<AlgebraElement> {
    f.check_measure(m)?;
    Ok(f
        .values
        .iter()
        .enumerate()
        .fold(m.codomain().zero(), |acc, (x, v)| acc + m.atom_map(x).apply(v).expect("checked domain")))
}

/// `∫ F dm` assembled as `Σ_x ∫ χ_{x} dm_{F(x)}`, each term through
/// [`integrate_scalar`].
pub fn integrate_four_part(f: &OperatorFunction, m: &NonNegativeMeasure) -> Result<AlgebraElement> {
    f.check_measure(m)?;
    let space = m.space();
    let mut acc = m.codomain().zero();
    for (x, v) in f.values.iter().enumerate() {
        acc = acc + integrate_scalar(&ScalarFunction::indicator(space, &space.singleton(x)), v, m)?;
    }
    Ok(acc)
}

/// Tail criterion used to accept a sequence as sup-norm Cauchy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CauchyWindow {
    /// Number of trailing terms compared pairwise.
    pub len: usize,
    /// Largest allowed `||F_i - F_j||_∞` inside the window.
    pub gap: f64,
}

impl Default for CauchyWindow {
    fn default() -> Self {
        Self { len: 5, gap: 1e-7 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LimitIntegral {
    /// `∫ F_n dm` for the last term.
    pub value: AlgebraElement,
    /// Largest `||F_i - F_j||_∞` over the tail window.
    pub tail_gap: f64,
    /// `||m_id(X)|| · tail_gap`, bounding the distance to the limit integral.
    pub stability_bound: f64,
}

/// Integral of the sup-norm limit of `seq`, read off at the tail once the
/// last `window.len` terms are within `window.gap` of each other.
pub fn integrate_limit(seq: &[OperatorFunction], m: &NonNegativeMeasure, window: CauchyWindow) -> Result<LimitIntegral> {
    let last = seq.last().ok_or_else(|| Error::BadConfig("empty sequence".into()))?;
    let start = seq.len().saturating_sub(window.len.max(1));
    let tail = &seq[start..];
    let mut tail_gap = 0.0f64;
    for (i, a) in tail.iter().enumerate() {
        for b in &tail[i + 1..] {
            tail_gap = tail_gap.max(a.distance(b)?);
        }
    }
    if tail_gap > window.gap {
        return Err(Error::NotCauchy { gap: tail_gap, allowed: window.gap });
    }
    let value = integrate(last, m)?;
    let stability_bound = m.identity_mass().norm() * tail_gap;
    Ok(LimitIntegral { value, tail_gap, stability_bound })
}

/// `||∫FG dM - (∫F dM)(∫G dM)||`.
pub fn multiplicativity_check(f: &OperatorFunction, g: &OperatorFunction, m: &NonNegativeSpectralMeasure) -> Result<f64> {
    let m = m.as_measure();
    let fg = integrate(&f.mul(g)?, m)?;
    let prod = integrate(f, m)? * integrate(g, m)?;
    Ok((fg - prod).norm())
}

/// `||∫F* dM - (∫F dM)*||`.
pub fn star_defect(f: &OperatorFunction, m: &NonNegativeMeasure) -> Result<f64> {
    Ok((integrate(&f.adjoint(), m)? - integrate(f, m)?.adjoint()).norm())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonotoneReport {
    /// `||∫f dE - ∫f_n dE||` for each index `n`.
    pub deviations: Vec<f64>,
    /// Smallest eigenvalue of `bound - ∫f_n dE` over all `n`.
    pub bound_margin: f64,
    pub final_deviation: f64,
}

/// Checks that `seq` is nonnegative, nondecreasing and dominated by `limit`,
/// that every `∫f_n dE ⪯ bound`, and reports how far each `∫f_n dE` is from
/// `∫ limit dE`.
pub fn monotone_convergence_check(
    seq: &[ScalarFunction],
    limit: &ScalarFunction,
    e: &PovMeasure,
    bound: &AlgebraElement,
    tol: Tolerance,
) -> Result<MonotoneReport> {
    let space = e.space();
    check_scalar(limit, space)?;
    if bound.algebra() != e.codomain() {
        return Err(Error::DomainMismatch("bound is not in the codomain".into()));
    }
    let integral = |f: &ScalarFunction| {
        f.values
            .iter()
            .enumerate()
            .fold(e.codomain().zero(), |acc, (x, &fx)| acc + e.atom(x).scale(fx))
    };

    let slack = tol.absolute;
    let mut previous: Option<&ScalarFunction> = None;
    let mut deviations = Vec::with_capacity(seq.len());
    let mut bound_margin = f64::INFINITY;
    let target = integral(limit);
    for (n, f) in seq.iter().enumerate() {
        check_scalar(f, space)?;
        for (x, z) in f.values.iter().enumerate() {
            let below_prev = previous.is_some_and(|p| z.re < p.values[x].re - slack);
            let above_limit = z.re > limit.values[x].re + slack;
            if z.im.abs() > slack || z.re < -slack || below_prev || above_limit {
                return Err(Error::NotMonotone { index: n, atom: x });
            }
        }
        let value = integral(f);
        let margin = (bound - &value).psd_margin(tol)?;
        if margin < -tol.absolute {
            return Err(Error::BoundViolated { index: n, margin });
        }
        bound_margin = bound_margin.min(margin);
        deviations.push((&target - &value).norm());
        previous = Some(f);
    }
    let final_deviation = deviations.last().copied().unwrap_or(0.0);
    Ok(MonotoneReport { deviations, bound_margin, final_deviation })
}
