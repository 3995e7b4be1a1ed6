//! Treatment-effect contrasts `E[u | A] - E[u | B]` over design events.

use std::fmt;
use std::sync::Arc;

use crate::design::{Assignment, RandomisationDesign};
use crate::{Error, Result};

/// Largest `n` accepted by exact functional evaluation.
pub const EXACT_CAP: usize = 12;

/// A measurable set of assignments.
#[derive(Clone)]
pub enum Event {
    /// `z_unit = value`.
    UnitIs { unit: usize, value: u8 },
    /// Every unit equals `value` (the all-treated or all-control schedule).
    AllEqual(u8),
    Custom {
        label: String,
        predicate: Arc<dyn Fn(&Assignment) -> bool + Send + Sync>,
    },
}

impl Event {
    pub fn contains(&self, a: &Assignment) -> bool {
        match self {
            Event::UnitIs { unit, value } => a.get(*unit) == *value,
            Event::AllEqual(v) => a.as_slice().iter().all(|x| x == v),
            Event::Custom { predicate, .. } => predicate(a),
        }
    }

    fn max_unit(&self) -> Option<usize> {
        match self {
            Event::UnitIs { unit, .. } => Some(*unit),
            _ => None,
        }
    }
}

impl fmt::Debug for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Event::UnitIs { unit, value } => write!(f, "z_{unit} = {value}"),
            Event::AllEqual(v) => write!(f, "z = {v}..{v}"),
            Event::Custom { label, .. } => f.write_str(label),
        }
    }
}

/// Contrast functional `theta_i(u) = E[u | A] - E[u | B]` attached to one unit.
#[derive(Debug, Clone)]
pub struct ContrastFunctional {
    pub unit_index: usize,
    pub set_a: Event,
    pub set_b: Event,
}

impl ContrastFunctional {
    pub fn new(unit_index: usize, set_a: Event, set_b: Event) -> Self {
        Self {
            unit_index,
            set_a,
            set_b,
        }
    }

    /// Own-treatment contrast `A = {z_i = 1}`, `B = {z_i = 0}`; the family used
    /// by the simulation study.
    pub fn unit_effect(unit: usize) -> Self {
        Self::new(
            unit,
            Event::UnitIs { unit, value: 1 },
            Event::UnitIs { unit, value: 0 },
        )
    }

    /// All-treated versus all-control schedule.
    pub fn global_effect(unit: usize) -> Self {
        Self::new(unit, Event::AllEqual(1), Event::AllEqual(0))
    }

    /// Evaluates the contrast exactly by enumerating the design on `n` units.
    pub fn apply_exact<F>(&self, outcome: F, design: &RandomisationDesign, n: usize) -> Result<f64>
    where
        F: Fn(&Assignment) -> f64,
    {
        let atoms = self.checked_atoms(design, n)?;
        let (mut pa, mut pb, mut ea, mut eb) = (0.0, 0.0, 0.0, 0.0);
        for atom in &atoms {
            let in_a = self.set_a.contains(&atom.assignment);
            let in_b = self.set_b.contains(&atom.assignment);
            if in_a && in_b {
                return Err(Error::Domain(format!(
                    "events `{}` and `{}` overlap at {}",
                    self.set_a, self.set_b, atom.assignment
                )));
            }
            if in_a || in_b {
                let u = outcome(&atom.assignment);
                if in_a {
                    pa += atom.probability;
                    ea += atom.probability * u;
                } else {
                    pb += atom.probability;
                    eb += atom.probability * u;
                }
            }
        }
        if pa <= 0.0 {
            return Err(Error::PositivityViolation(self.set_a.to_string()));
        }
        if pb <= 0.0 {
            return Err(Error::PositivityViolation(self.set_b.to_string()));
        }
        Ok(ea / pa - eb / pb)
    }

    fn checked_atoms(
        &self,
        design: &RandomisationDesign,
        n: usize,
    ) -> Result<Vec<crate::design::DesignAtom>> {
        if n > EXACT_CAP {
            return Err(Error::EnumerationTooLarge { n, cap: EXACT_CAP });
        }
        for unit in [
            self.set_a.max_unit(),
            self.set_b.max_unit(),
            Some(self.unit_index),
        ]
        .into_iter()
        .flatten()
        {
            if unit >= n {
                return Err(Error::InvalidDimension(format!(
                    "unit {unit} out of range for n = {n}"
                )));
            }
        }
        design.enumerate(n)
    }
}
