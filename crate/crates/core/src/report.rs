//! Building blocks shared by validator and certifier reports.

use serde::{Deserialize, Serialize};

use crate::kernel::{ComplexMatrix, Scalar};

/// Input that reproduces a defect.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub description: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub atoms: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub operators: Vec<ComplexMatrix>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub vector: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub scalars: Vec<f64>,
}

impl Witness {
    pub fn new(description: impl Into<String>) -> Self {
        Self { description: description.into(), ..Self::default() }
    }

    pub fn atoms(mut self, atoms: impl IntoIterator<Item = usize>) -> Self {
        self.atoms = atoms.into_iter().collect();
        self
    }

    pub fn operator(mut self, m: ComplexMatrix) -> Self {
        self.operators.push(m);
        self
    }

    pub fn vector(mut self, v: &[Scalar]) -> Self {
        self.vector = v.iter().map(|z| [z.re, z.im]).collect();
        self
    }

    pub fn scalar(mut self, s: f64) -> Self {
        self.scalars.push(s);
        self
    }
}

/// Worst value seen so far of a nonnegative defect, with the input that
/// produced it.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Defect {
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
}

impl Defect {
    /// Records `value` if it is the worst so far; `witness` is only built then.
    pub fn offer(&mut self, value: f64, witness: impl FnOnce() -> Witness) {
        let worse = value > self.value || (value.is_nan() && !self.value.is_nan());
        if worse {
            self.value = value;
            self.witness = Some(witness());
        }
    }

    pub fn merge(&mut self, other: &Defect) {
        if other.value > self.value {
            *self = other.clone();
        }
    }

    pub fn within(&self, bound: f64) -> bool {
        self.value <= bound
    }
}

/// One named pass/fail line of a report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
}

impl Check {
    /// Passes iff `value <= threshold`.
    pub fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), value, threshold, passed: value <= threshold, witness: None }
    }

    /// Passes iff `value >= threshold`.
    pub fn at_least(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), value, threshold, passed: value >= threshold, witness: None }
    }

    pub fn defect(name: impl Into<String>, defect: &Defect, threshold: f64) -> Self {
        let mut c = Self::at_most(name, defect.value, threshold);
        c.witness = defect.witness.clone();
        c
    }

    pub fn with_witness(mut self, witness: Option<Witness>) -> Self {
        self.witness = witness;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defect_keeps_the_worst_witness() {
        let mut d = Defect::default();
        d.offer(0.0, || Witness::new("zero"));
        assert!(d.witness.is_none());
        d.offer(0.5, || Witness::new("half"));
        d.offer(0.2, || Witness::new("fifth"));
        assert_eq!(d.value, 0.5);
        assert_eq!(d.witness.unwrap().description, "half");
    }

    #[test]
    fn nan_defects_are_recorded() {
        let mut d = Defect::default();
        d.offer(f64::NAN, || Witness::new("nan"));
        assert!(!d.within(1.0));
        assert!(d.witness.is_some());
    }
}
