//! Latent worlds, potential outcomes and estimands for the two simulation DGPs.
//!
//! Baseline: `y_i = alpha_i + beta_i z_i + delta_i x_i + eps_i`.
//! Network:  `y_i = alpha_i + beta_i z_i + gamma e_i(z) + eps_i`, with exposure
//! `e_i` the treated fraction of the realised neighbourhood.
//!
//! In both, `eps_i = s_i eta_{b(i)} + nu_i` where `eta_b` is a block shock and
//! `s_i` a Rademacher sign. The sign (`gamma_sign`) and the spillover strength
//! (`gamma_spill`) are distinct parameters.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::depgraph::{
    expected_inverse_neighbourhood, sample_blockwise_er, BlockPartition, Convention,
    InterferenceGraph,
};
use crate::design::Assignment;
use crate::{Error, Result};

/// Realised outcomes `Y_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeVector(pub Vec<f64>);

impl OutcomeVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Latent quantities shared by both DGPs.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentEffects {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    /// Block shocks, one per block.
    pub eta: Vec<f64>,
    /// Rademacher signs in `{-1, +1}`.
    pub gamma_sign: Vec<f64>,
    pub nu: Vec<f64>,
    pub partition: BlockPartition,
}

impl LatentEffects {
    fn draw<R: Rng + ?Sized>(partition: BlockPartition, rng: &mut R) -> Self {
        let n = partition.n();
        let alpha = normals(n, 0.0, rng);
        let beta = normals(n, 1.0, rng);
        let eta = normals(partition.num_blocks(), 0.0, rng);
        let gamma_sign = (0..n)
            .map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 })
            .collect();
        let nu = normals(n, 0.0, rng);
        Self {
            alpha,
            beta,
            eta,
            gamma_sign,
            nu,
            partition,
        }
    }

    pub fn n(&self) -> usize {
        self.alpha.len()
    }

    /// `eps_i = s_i eta_{b(i)} + nu_i`.
    #[inline]
    pub fn error(&self, i: usize) -> f64 {
        self.gamma_sign[i] * self.eta[self.partition.block_of(i)] + self.nu[i]
    }

    pub fn mean_beta(&self) -> f64 {
        self.beta.iter().sum::<f64>() / self.n() as f64
    }
}

fn normals<R: Rng + ?Sized>(len: usize, mean: f64, rng: &mut R) -> Vec<f64> {
    (0..len)
        .map(|_| mean + rng.sample::<f64, _>(StandardNormal))
        .collect()
}

fn check_len(expected: usize, a: &Assignment) -> Result<()> {
    if a.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            got: a.len(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineWorld {
    pub effects: LatentEffects,
    pub delta: Vec<f64>,
    pub x: Vec<f64>,
}

impl BaselineWorld {
    /// Draws `alpha ~ N(0,1)`, `beta ~ N(1,1)`, block shocks, signs, `nu`, then
    /// `delta ~ N(0,1)` and `x ~ N(0,1)`, on the partition for `(n, d)`.
    pub fn generate<R: Rng + ?Sized>(n: usize, d: f64, rng: &mut R) -> Result<Self> {
        let partition = BlockPartition::from_rate(n, d)?;
        let effects = LatentEffects::draw(partition, rng);
        let delta = normals(n, 0.0, rng);
        let x = normals(n, 0.0, rng);
        Ok(Self { effects, delta, x })
    }

    pub fn n(&self) -> usize {
        self.effects.n()
    }

    pub fn partition(&self) -> &BlockPartition {
        &self.effects.partition
    }

    #[inline]
    pub fn unit_outcome(&self, i: usize, z_i: u8) -> f64 {
        let e = &self.effects;
        e.alpha[i] + e.beta[i] * z_i as f64 + self.delta[i] * self.x[i] + e.error(i)
    }

    pub fn outcome(&self, a: &Assignment) -> Result<OutcomeVector> {
        check_len(self.n(), a)?;
        Ok(OutcomeVector(
            (0..self.n())
                .map(|i| self.unit_outcome(i, a.get(i)))
                .collect(),
        ))
    }

    /// Unit contrasts `theta_i = beta_i`.
    pub fn unit_contrasts(&self) -> Vec<f64> {
        self.effects.beta.clone()
    }

    /// `(1/n) sum beta_i`; the FPO and RPO targets coincide here.
    pub fn estimand(&self) -> f64 {
        self.effects.mean_beta()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkWorld {
    pub effects: LatentEffects,
    pub gamma_spill: f64,
    pub p_edge: f64,
    pub graph: InterferenceGraph,
}

impl NetworkWorld {
    /// Draws the shared latent effects and then a blockwise Erdős–Rényi graph.
    pub fn generate<R: Rng + ?Sized>(
        n: usize,
        d: f64,
        p_edge: f64,
        gamma_spill: f64,
        convention: Convention,
        rng: &mut R,
    ) -> Result<Self> {
        if !gamma_spill.is_finite() {
            return Err(Error::Domain("spillover strength must be finite".into()));
        }
        let partition = BlockPartition::from_rate(n, d)?;
        let effects = LatentEffects::draw(partition, rng);
        let graph = sample_blockwise_er(&effects.partition, p_edge, convention, rng)?;
        Ok(Self {
            effects,
            gamma_spill,
            p_edge,
            graph,
        })
    }

    pub fn n(&self) -> usize {
        self.effects.n()
    }

    pub fn partition(&self) -> &BlockPartition {
        &self.effects.partition
    }

    /// Treated fraction of `N_i`; zero when `N_i` is empty (open convention).
    pub fn exposure(&self, i: usize, a: &Assignment) -> f64 {
        let adj = self.graph.adjacent(i);
        let mut treated: usize = adj.iter().map(|&j| a.get(j) as usize).sum();
        let size = self.graph.neighbourhood_size(i);
        if self.graph.convention() == Convention::Closed {
            treated += a.get(i) as usize;
        }
        if size == 0 {
            0.0
        } else {
            treated as f64 / size as f64
        }
    }

    pub fn outcome(&self, a: &Assignment) -> Result<OutcomeVector> {
        check_len(self.n(), a)?;
        let e = &self.effects;
        Ok(OutcomeVector(
            (0..self.n())
                .map(|i| {
                    e.alpha[i]
                        + e.beta[i] * a.get(i) as f64
                        + self.gamma_spill * self.exposure(i, a)
                        + e.error(i)
                })
                .collect(),
        ))
    }

    /// Realised-graph unit contrasts `beta_i + gamma / |N_i|` (closed convention).
    pub fn unit_contrasts_fpo(&self) -> Result<Vec<f64>> {
        if self.graph.convention() != Convention::Closed {
            return Err(Error::UnsupportedConvention);
        }
        Ok((0..self.n())
            .map(|i| {
                self.effects.beta[i] + self.gamma_spill / self.graph.neighbourhood_size(i) as f64
            })
            .collect())
    }

    /// Mechanism-level unit contrasts `beta_i + gamma E[1 / |N_i|]`. Under the
    /// open convention a unit's own assignment never enters its exposure, so
    /// the contrast is `beta_i` for every graph.
    pub fn unit_contrasts_rpo(&self) -> Result<Vec<f64>> {
        if self.graph.convention() == Convention::Open {
            return Ok(self.effects.beta.clone());
        }
        rpo_unit_contrasts(
            &self.effects.partition,
            &self.effects.beta,
            self.gamma_spill,
            self.p_edge,
        )
    }

    pub fn estimand_fpo(&self) -> Result<f64> {
        Ok(mean(&self.unit_contrasts_fpo()?))
    }

    pub fn estimand_rpo(&self) -> Result<f64> {
        Ok(mean(&self.unit_contrasts_rpo()?))
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn rpo_unit_contrasts(
    partition: &BlockPartition,
    beta: &[f64],
    gamma_spill: f64,
    p_edge: f64,
) -> Result<Vec<f64>> {
    if beta.len() != partition.n() {
        return Err(Error::DimensionMismatch {
            expected: partition.n(),
            got: beta.len(),
        });
    }
    // One closed-form evaluation per distinct block size.
    let mut cache: Vec<Option<f64>> = Vec::new();
    let mut inv = |m: usize| -> Result<f64> {
        if cache.len() <= m {
            cache.resize(m + 1, None);
        }
        if let Some(v) = cache[m] {
            return Ok(v);
        }
        let v = expected_inverse_neighbourhood(m, p_edge)?;
        cache[m] = Some(v);
        Ok(v)
    };
    (0..partition.n())
        .map(|i| Ok(beta[i] + gamma_spill * inv(partition.size_of_unit(i))?))
        .collect()
}

/// `(1/n) sum [beta_i + gamma (1 - (1 - p)^{m_i}) / (m_i p)]`.
pub fn estimand_rpo_network(
    partition: &BlockPartition,
    beta: &[f64],
    gamma_spill: f64,
    p_edge: f64,
) -> Result<f64> {
    Ok(mean(&rpo_unit_contrasts(
        partition,
        beta,
        gamma_spill,
        p_edge,
    )?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DgpKind {
    Baseline,
    Network,
}

impl std::str::FromStr for DgpKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "baseline" => Ok(DgpKind::Baseline),
            "network" => Ok(DgpKind::Network),
            other => Err(Error::Domain(format!("unknown dgp `{other}`"))),
        }
    }
}

impl std::fmt::Display for DgpKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DgpKind::Baseline => "baseline",
            DgpKind::Network => "network",
        })
    }
}

/// Either DGP behind one interface.
#[derive(Debug, Clone, PartialEq)]
pub enum World {
    Baseline(BaselineWorld),
    Network(NetworkWorld),
}

impl World {
    pub fn n(&self) -> usize {
        match self {
            World::Baseline(w) => w.n(),
            World::Network(w) => w.n(),
        }
    }

    pub fn partition(&self) -> &BlockPartition {
        match self {
            World::Baseline(w) => w.partition(),
            World::Network(w) => w.partition(),
        }
    }

    pub fn outcome(&self, a: &Assignment) -> Result<OutcomeVector> {
        match self {
            World::Baseline(w) => w.outcome(a),
            World::Network(w) => w.outcome(a),
        }
    }

    pub fn effects(&self) -> &LatentEffects {
        match self {
            World::Baseline(w) => &w.effects,
            World::Network(w) => &w.effects,
        }
    }
}
