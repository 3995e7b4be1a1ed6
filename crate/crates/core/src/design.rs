//! Randomisation designs and exact enumeration of their law.

use rand::Rng;

use crate::{Error, Result};

/// Largest `n` for which [`RandomisationDesign::enumerate`] will materialise `2^n` atoms.
pub const ENUMERATION_CAP: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DesignKind {
    /// Independent Bernoulli(p) assignment per unit.
    Bernoulli,
}

/// A known randomisation law for the assignment vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomisationDesign {
    kind: DesignKind,
    p_treat: f64,
}

/// Binary treatment vector.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Assignment(Vec<u8>);

/// One point of the design's support together with its probability.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignAtom {
    pub assignment: Assignment,
    pub probability: f64,
}

impl Assignment {
    pub fn new(z: Vec<u8>) -> Result<Self> {
        if z.is_empty() {
            return Err(Error::InvalidDimension(
                "assignment must have at least one unit".into(),
            ));
        }
        if let Some(pos) = z.iter().position(|&v| v > 1) {
            return Err(Error::Domain(format!(
                "assignment entry {pos} is {}, expected 0 or 1",
                z[pos]
            )));
        }
        Ok(Self(z))
    }

    /// Assignment whose unit `i` is bit `i` of `bits`.
    pub fn from_bits(bits: u64, n: usize) -> Self {
        debug_assert!((1..=64).contains(&n));
        Self((0..n).map(|i| ((bits >> i) & 1) as u8).collect())
    }

    pub fn all(n: usize, value: u8) -> Self {
        Self(vec![value.min(1); n])
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize) -> u8 {
        self.0[i]
    }

    #[inline]
    pub fn is_treated(&self, i: usize) -> bool {
        self.0[i] == 1
    }

    pub fn treated_count(&self) -> usize {
        self.0.iter().map(|&v| v as usize).sum()
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.0
    }
}

impl std::fmt::Display for Assignment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for v in &self.0 {
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

impl RandomisationDesign {
    pub fn bernoulli(p_treat: f64) -> Result<Self> {
        if !(p_treat > 0.0 && p_treat < 1.0) {
            return Err(Error::InvalidProbability(p_treat));
        }
        Ok(Self {
            kind: DesignKind::Bernoulli,
            p_treat,
        })
    }

    pub fn kind(&self) -> DesignKind {
        self.kind
    }

    pub fn p_treat(&self) -> f64 {
        self.p_treat
    }

    /// Marginal probability that unit `i` receives `value`.
    pub fn marginal(&self, value: u8) -> f64 {
        match (self.kind, value) {
            (DesignKind::Bernoulli, 1) => self.p_treat,
            (DesignKind::Bernoulli, _) => 1.0 - self.p_treat,
        }
    }

    /// Draws one assignment of length `n`.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Assignment> {
        if n == 0 {
            return Err(Error::InvalidDimension("n must be at least 1".into()));
        }
        let z = match self.kind {
            DesignKind::Bernoulli => (0..n)
                .map(|_| rng.random_bool(self.p_treat) as u8)
                .collect(),
        };
        Ok(Assignment(z))
    }

    /// Every assignment in `{0,1}^n` with its design probability, in bit order.
    pub fn enumerate(&self, n: usize) -> Result<Vec<DesignAtom>> {
        if n == 0 {
            return Err(Error::InvalidDimension("n must be at least 1".into()));
        }
        if n > ENUMERATION_CAP {
            return Err(Error::EnumerationTooLarge {
                n,
                cap: ENUMERATION_CAP,
            });
        }
        Ok((0..1u64 << n)
            .map(|bits| {
                let assignment = Assignment::from_bits(bits, n);
                let probability = self.probability(&assignment);
                DesignAtom {
                    assignment,
                    probability,
                }
            })
            .collect())
    }

    pub fn probability(&self, a: &Assignment) -> f64 {
        match self.kind {
            DesignKind::Bernoulli => {
                let treated = a.treated_count() as i32;
                let control = a.len() as i32 - treated;
                self.p_treat.powi(treated) * (1.0 - self.p_treat).powi(control)
            }
        }
    }

    /// Exact design expectation of `f` by enumeration.
    pub fn expectation<F>(&self, n: usize, mut f: F) -> Result<f64>
    where
        F: FnMut(&Assignment) -> f64,
    {
        Ok(self
            .enumerate(n)?
            .iter()
            .map(|atom| atom.probability * f(&atom.assignment))
            .sum())
    }
}
