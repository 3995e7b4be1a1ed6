//! Replication harness for the size/power/coverage experiments and the
//! brute-force oracle suite.
//!
//! Replication `r` draws everything (world, graph, assignment) from
//! `substream(master_seed, r)`, so records do not depend on scheduling.
//! Records are collected in index order and reduced sequentially, which makes
//! reports bit-identical for any worker count.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::depgraph::{
    expected_inverse_neighbourhood, sample_blockwise_er, BlockPartition, Convention,
    DependencyGraph, PairSet,
};
use crate::design::{Assignment, RandomisationDesign};
use crate::dgp::{BaselineWorld, DgpKind, NetworkWorld, World};
use crate::estimator::{
    aggregate_estimate, make_inference, residuals, variance_local, WeightScheme,
};
use crate::functionals::ContrastFunctional;
use crate::normal::two_sided_critical;
use crate::representer::{BasisSet, FittedRepresenter, GramMethod, HtRepresenter};
use crate::rng::{substream, SimRng};
use crate::{Error, Result};

pub const DEFAULT_REPS: usize = 2000;
pub const DEFAULT_LEVELS: [f64; 3] = [0.01, 0.05, 0.10];
pub const COVERAGE_LEVEL: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Residuals centred at the true unit contrasts.
    Size,
    /// Residuals centred at zero (null of no effect).
    Power,
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "size" => Ok(Mode::Size),
            "power" => Ok(Mode::Power),
            other => Err(Error::Domain(format!("unknown mode `{other}`"))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Size => "size",
            Mode::Power => "power",
        })
    }
}

/// Which unit contrasts centre the network residuals and define the coverage target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Centring {
    /// `beta_i + gamma E[1/|N_i|]`, averaged over graphs.
    #[default]
    Rpo,
    /// `beta_i + gamma / |N_i|` on the drawn graph.
    Realised,
}

impl FromStr for Centring {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "rpo" => Ok(Centring::Rpo),
            "realised" | "realized" => Ok(Centring::Realised),
            other => Err(Error::Domain(format!("unknown centring `{other}`"))),
        }
    }
}

impl fmt::Display for Centring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Centring::Rpo => "rpo",
            Centring::Realised => "realised",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub dgp: DgpKind,
    pub n: usize,
    pub d: f64,
    pub reps: usize,
    pub levels: Vec<f64>,
    pub mode: Mode,
    pub p_edge: f64,
    pub gamma_spill: f64,
    pub p_treat: f64,
    pub convention: Convention,
    pub centring: Centring,
    pub master_seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dgp: DgpKind::Baseline,
            n: 100,
            d: 0.0,
            reps: DEFAULT_REPS,
            levels: DEFAULT_LEVELS.to_vec(),
            mode: Mode::Size,
            p_edge: 0.1,
            gamma_spill: 0.5,
            p_treat: 0.5,
            convention: Convention::Closed,
            centring: Centring::Rpo,
            master_seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidDimension("n must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.d) {
            return Err(Error::InvalidRate(self.d));
        }
        if self.reps == 0 {
            return Err(Error::InvalidSampleSize("reps must be >= 1".into()));
        }
        if self.levels.is_empty() {
            return Err(Error::Domain("at least one level is required".into()));
        }
        if let Some(&l) = self.levels.iter().find(|&&l| !(l > 0.0 && l < 1.0)) {
            return Err(Error::InvalidProbability(l));
        }
        if !(self.p_treat > 0.0 && self.p_treat < 1.0) {
            return Err(Error::InvalidProbability(self.p_treat));
        }
        if self.dgp == DgpKind::Network {
            if !(self.p_edge > 0.0 && self.p_edge < 1.0) {
                return Err(Error::InvalidProbability(self.p_edge));
            }
            if !self.gamma_spill.is_finite() {
                return Err(Error::Domain("gamma_spill must be finite".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepRecord {
    pub tau_hat: f64,
    /// Variance estimate behind the test in this mode.
    pub sigma2_hat: f64,
    /// Estimand the interval is scored against.
    pub tau_target: f64,
    pub covered: bool,
    pub reject: Vec<(f64, bool)>,
    /// The test's variance estimate was nonpositive.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub config: SimConfig,
    pub coverage: f64,
    pub rejection: Vec<(f64, f64)>,
    pub mean_tau_hat: f64,
    pub var_tau_hat: f64,
    pub mean_sigma2_hat: f64,
    pub degenerate_count: usize,
    pub mean_tau_target: f64,
    /// Sample variance of `tau_hat - tau_target`.
    pub var_tau_error: f64,
}

impl SimReport {
    pub fn rejection_at(&self, level: f64) -> Option<f64> {
        self.rejection
            .iter()
            .find(|(l, _)| *l == level)
            .map(|(_, r)| *r)
    }
}

/// Per-configuration quantities shared by every replication.
struct Prepared {
    design: RandomisationDesign,
    ht: HtRepresenter,
    weights: WeightScheme,
    pairs: PairSet,
    coverage_critical: f64,
}

impl Prepared {
    fn new(cfg: &SimConfig) -> Result<Self> {
        cfg.validate()?;
        let design = RandomisationDesign::bernoulli(cfg.p_treat)?;
        let partition = BlockPartition::from_rate(cfg.n, cfg.d)?;
        Ok(Self {
            ht: HtRepresenter::for_design(&design),
            design,
            weights: WeightScheme::uniform(cfg.n)?,
            pairs: DependencyGraph::from_blocks(&partition).pair_set().clone(),
            coverage_critical: two_sided_critical(COVERAGE_LEVEL),
        })
    }
}

fn draw_world(cfg: &SimConfig, rng: &mut SimRng) -> Result<World> {
    Ok(match cfg.dgp {
        DgpKind::Baseline => World::Baseline(BaselineWorld::generate(cfg.n, cfg.d, rng)?),
        DgpKind::Network => World::Network(NetworkWorld::generate(
            cfg.n,
            cfg.d,
            cfg.p_edge,
            cfg.gamma_spill,
            cfg.convention,
            rng,
        )?),
    })
}

/// True unit contrasts for the configured centring.
fn true_contrasts(world: &World, centring: Centring) -> Result<Vec<f64>> {
    match world {
        World::Baseline(w) => Ok(w.unit_contrasts()),
        World::Network(w) => match (centring, w.graph.convention()) {
            (Centring::Realised, Convention::Closed) => w.unit_contrasts_fpo(),
            // Open neighbourhoods: own assignment never enters own exposure,
            // so the realised and mechanism contrasts coincide at beta_i.
            _ => w.unit_contrasts_rpo(),
        },
    }
}

fn replicate(cfg: &SimConfig, prep: &Prepared, rep_index: usize) -> Result<RepRecord> {
    let mut rng = substream(cfg.master_seed, rep_index as u64);
    let world = draw_world(cfg, &mut rng)?;
    let z = prep.design.sample(cfg.n, &mut rng)?;
    let y = world.outcome(&z)?;
    let psi = prep.ht.values(&z);
    let nu = &prep.weights;
    let tau_hat = aggregate_estimate(&y.0, &psi, nu)?;

    let theta = true_contrasts(&world, cfg.centring)?;
    let tau_target = aggregate_estimate(&theta, &vec![1.0; cfg.n], nu)?;
    let sigma2_true = variance_local(&residuals(&y.0, &psi, &theta)?, nu, &prep.pairs)?;
    let covered = sigma2_true > 0.0
        && (tau_hat - tau_target).abs() <= prep.coverage_critical * sigma2_true.sqrt();

    let (sigma2_hat, tau_null) = match cfg.mode {
        Mode::Size => (sigma2_true, tau_target),
        Mode::Power => {
            let zeros = vec![0.0; cfg.n];
            (
                variance_local(&residuals(&y.0, &psi, &zeros)?, nu, &prep.pairs)?,
                0.0,
            )
        }
    };
    let inf = make_inference(tau_hat, sigma2_hat, tau_null, &cfg.levels)?;
    Ok(RepRecord {
        tau_hat,
        sigma2_hat,
        tau_target,
        covered,
        reject: inf.reject_flags(),
        degenerate: inf.degenerate,
    })
}

/// One replication, seeded from `(master_seed, rep_index)`.
pub fn run_replication(cfg: &SimConfig, rep_index: usize) -> Result<RepRecord> {
    let prep = Prepared::new(cfg)?;
    replicate(cfg, &prep, rep_index)
}

/// All replications `0..reps`, in index order, on the current rayon pool.
pub fn run_records(cfg: &SimConfig) -> Result<Vec<RepRecord>> {
    let prep = Prepared::new(cfg)?;
    (0..cfg.reps)
        .into_par_iter()
        .map(|r| replicate(cfg, &prep, r))
        .collect()
}

/// Index-ordered reduction of replication records.
pub fn summarise(cfg: &SimConfig, records: &[RepRecord]) -> SimReport {
    let reps = records.len() as f64;
    let mean = |f: &dyn Fn(&RepRecord) -> f64| records.iter().map(f).sum::<f64>() / reps;
    let var = |f: &dyn Fn(&RepRecord) -> f64| {
        if records.len() < 2 {
            return 0.0;
        }
        let m = mean(f);
        records.iter().map(|r| (f(r) - m).powi(2)).sum::<f64>() / (reps - 1.0)
    };
    let rejection = cfg
        .levels
        .iter()
        .enumerate()
        .map(|(k, &l)| {
            let hits = records.iter().filter(|r| r.reject[k].1).count();
            (l, hits as f64 / reps)
        })
        .collect();
    SimReport {
        config: cfg.clone(),
        coverage: records.iter().filter(|r| r.covered).count() as f64 / reps,
        rejection,
        mean_tau_hat: mean(&|r| r.tau_hat),
        var_tau_hat: var(&|r| r.tau_hat),
        mean_sigma2_hat: mean(&|r| r.sigma2_hat),
        degenerate_count: records.iter().filter(|r| r.degenerate).count(),
        mean_tau_target: mean(&|r| r.tau_target),
        var_tau_error: var(&|r| r.tau_hat - r.tau_target),
    }
}

pub fn run_simulation(cfg: &SimConfig) -> Result<SimReport> {
    Ok(summarise(cfg, &run_records(cfg)?))
}

/// Runs on a dedicated pool of `threads` workers (0 = rayon default).
pub fn run_simulation_with_threads(cfg: &SimConfig, threads: usize) -> Result<SimReport> {
    with_pool(threads, || run_simulation(cfg))
}

/// Evaluates `f` inside a rayon pool of the given size (0 = rayon default).
pub fn with_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleConfig {
    pub max_n: usize,
    /// Worlds per enumeration check.
    pub worlds: usize,
    pub seed: u64,
    /// Graphs per inverse-degree grid point.
    pub degree_graphs: usize,
    /// Worlds for the FPO-versus-RPO averaging check.
    pub rpo_worlds: usize,
}

impl OracleConfig {
    pub fn new(max_n: usize, worlds: usize, seed: u64) -> Self {
        Self {
            max_n,
            worlds,
            seed,
            degree_graphs: 1_000_000,
            rpo_worlds: 10_000,
        }
    }
}

/// Largest `n` the oracle suite enumerates.
pub const ORACLE_MAX_N: usize = 10;
pub const INVERSE_DEGREE_SIZES: [usize; 4] = [1, 2, 5, 10];
pub const INVERSE_DEGREE_PROBS: [f64; 3] = [0.1, 0.5, 0.9];

#[derive(Debug, Clone, PartialEq)]
pub struct OracleCheck {
    pub name: String,
    pub discrepancy: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl OracleCheck {
    fn new(name: impl Into<String>, discrepancy: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            discrepancy,
            tolerance,
            passed: discrepancy.is_finite() && discrepancy <= tolerance,
        }
    }
}

impl fmt::Display for OracleCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: discrepancy {:.3e} (tolerance {:.3e})",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.discrepancy,
            self.tolerance
        )
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OracleReport {
    pub checks: Vec<OracleCheck>,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&OracleCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

const ENUMERATION_TOL: f64 = 1e-10;

fn validate_oracle(cfg: &OracleConfig) -> Result<()> {
    if cfg.max_n == 0 {
        return Err(Error::InvalidDimension("max_n must be >= 1".into()));
    }
    if cfg.max_n > ORACLE_MAX_N {
        return Err(Error::EnumerationTooLarge {
            n: cfg.max_n,
            cap: ORACLE_MAX_N,
        });
    }
    if cfg.worlds == 0 || cfg.degree_graphs < 2 || cfg.rpo_worlds < 2 {
        return Err(Error::InvalidSampleSize(
            "oracle sample sizes must be positive".into(),
        ));
    }
    Ok(())
}

/// Runs the enumeration, inverse-degree, FPO/RPO and representer checks.
pub fn run_oracle_suite(cfg: &OracleConfig) -> Result<OracleReport> {
    validate_oracle(cfg)?;
    let mut report = OracleReport::default();
    report.checks.extend(enumeration_checks(cfg)?);
    report
        .checks
        .extend(inverse_degree_checks(cfg.degree_graphs, cfg.seed ^ 0x1d)?);
    report.checks.push(fpo_rpo_check(cfg)?);
    report.checks.extend(representer_checks(cfg.max_n)?);
    Ok(report)
}

/// Exact design expectation of the aggregate estimator for one world.
fn enumerated_estimate(world: &World, design: &RandomisationDesign, n: usize) -> Result<f64> {
    let ht = HtRepresenter::for_design(design);
    let nu = WeightScheme::uniform(n)?;
    let mut err = None;
    let e = design.expectation(n, |z| {
        match world
            .outcome(z)
            .and_then(|y| aggregate_estimate(&y.0, &ht.values(z), &nu))
        {
            Ok(v) => v,
            Err(e) => {
                err = Some(e);
                f64::NAN
            }
        }
    })?;
    match err {
        Some(e) => Err(e),
        None => Ok(e),
    }
}

/// Settings of the network worlds used by the enumeration checks: a dense
/// graph on two blocks so that spillovers are frequent.
const ORACLE_D: f64 = 0.5;
const ORACLE_P_EDGE: f64 = 0.5;
const ORACLE_GAMMA: f64 = 0.5;

/// Exact-enumeration unbiasedness checks at `n = max_n` for the baseline and
/// both network conventions, plus unit exposure contrasts.
pub fn enumeration_checks(cfg: &OracleConfig) -> Result<Vec<OracleCheck>> {
    let n = cfg.max_n;
    let design = RandomisationDesign::bernoulli(0.5)?;
    let worst = |stream: u64, f: &(dyn Fn(&mut SimRng) -> Result<(World, f64)> + Sync)| {
        (0..cfg.worlds)
            .into_par_iter()
            .map(|k| {
                let mut rng = substream(cfg.seed ^ stream, k as u64);
                let (world, target) = f(&mut rng)?;
                Ok((enumerated_estimate(&world, &design, n)? - target).abs())
            })
            .collect::<Result<Vec<f64>>>()
            .map(|v| v.into_iter().fold(0.0, f64::max))
    };

    let baseline = worst(0xba5e, &|rng| {
        let w = BaselineWorld::generate(n, ORACLE_D, rng)?;
        let t = w.estimand();
        Ok((World::Baseline(w), t))
    })?;
    let closed = worst(0xc105, &|rng| {
        let w = NetworkWorld::generate(
            n,
            ORACLE_D,
            ORACLE_P_EDGE,
            ORACLE_GAMMA,
            Convention::Closed,
            rng,
        )?;
        let t = w.estimand_fpo()?;
        Ok((World::Network(w), t))
    })?;
    let open = worst(0x0be7, &|rng| {
        let w = NetworkWorld::generate(
            n,
            ORACLE_D,
            ORACLE_P_EDGE,
            ORACLE_GAMMA,
            Convention::Open,
            rng,
        )?;
        let t = w.estimand_rpo()?;
        Ok((World::Network(w), t))
    })?;

    // Unit-level exposure contrasts by direct enumeration of the functional.
    let unit_contrast = (0..cfg.worlds.min(20))
        .map(|k| {
            let mut rng = substream(cfg.seed ^ 0x0c0e, k as u64);
            let w = NetworkWorld::generate(
                n,
                ORACLE_D,
                ORACLE_P_EDGE,
                ORACLE_GAMMA,
                Convention::Closed,
                &mut rng,
            )?;
            let fpo = w.unit_contrasts_fpo()?;
            let mut worst = 0.0f64;
            for (i, &t) in fpo.iter().enumerate() {
                let v = ContrastFunctional::unit_effect(i).apply_exact(
                    |z: &Assignment| w.outcome(z).map(|y| y.0[i]).unwrap_or(f64::NAN),
                    &design,
                    n,
                )?;
                worst = worst.max((v - t).abs());
            }
            Ok(worst)
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);

    Ok(vec![
        OracleCheck::new("unbiased_baseline", baseline, ENUMERATION_TOL),
        OracleCheck::new("unbiased_network_closed", closed, ENUMERATION_TOL),
        OracleCheck::new("unbiased_network_open", open, ENUMERATION_TOL),
        OracleCheck::new("unit_exposure_contrast", unit_contrast, ENUMERATION_TOL),
    ])
}

/// Monte Carlo mean and standard error of the per-graph average of `1/|N_i|`
/// over single-block closed graphs of size `m`.
pub fn simulate_inverse_degree(m: usize, p: f64, graphs: usize, seed: u64) -> Result<(f64, f64)> {
    const CHUNKS: usize = 64;
    let partition = BlockPartition::from_sizes(vec![m])?;
    let per_chunk = graphs.div_ceil(CHUNKS);
    let sums = (0..CHUNKS)
        .into_par_iter()
        .map(|c| {
            let count = per_chunk.min(graphs.saturating_sub(c * per_chunk));
            let mut rng = substream(seed, c as u64);
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..count {
                let g = sample_blockwise_er(&partition, p, Convention::Closed, &mut rng)?;
                let v = (0..m)
                    .map(|i| 1.0 / g.neighbourhood_size(i) as f64)
                    .sum::<f64>()
                    / m as f64;
                s += v;
                s2 += v * v;
            }
            Ok((s, s2))
        })
        .collect::<Result<Vec<(f64, f64)>>>()?;
    let (s, s2) = sums.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let g = graphs as f64;
    let mean = s / g;
    let var = ((s2 - g * mean * mean) / (g - 1.0)).max(0.0);
    Ok((mean, (var / g).sqrt()))
}

/// Closed-form inverse degree against simulation on the standard grid.
pub fn inverse_degree_checks(graphs: usize, seed: u64) -> Result<Vec<OracleCheck>> {
    let mut checks = vec![
        OracleCheck::new(
            "inverse_degree_exact_m1",
            (expected_inverse_neighbourhood(1, 0.3)? - 1.0).abs(),
            1e-12,
        ),
        OracleCheck::new(
            "inverse_degree_exact_m2_p0.5",
            (expected_inverse_neighbourhood(2, 0.5)? - 0.75).abs(),
            1e-12,
        ),
    ];
    for (a, &m) in INVERSE_DEGREE_SIZES.iter().enumerate() {
        for (b, &p) in INVERSE_DEGREE_PROBS.iter().enumerate() {
            let (mean, se) =
                simulate_inverse_degree(m, p, graphs, seed ^ ((a * 16 + b) as u64) << 32)?;
            let exact = expected_inverse_neighbourhood(m, p)?;
            // m = 1 has zero sampling variance: the check is then exact.
            let tol = (3.0 * se).max(1e-12);
            checks.push(OracleCheck::new(
                format!("inverse_degree_m{m}_p{p}"),
                (mean - exact).abs(),
                tol,
            ));
        }
    }
    Ok(checks)
}

/// Averages `tau_FPO(omega) - tau_RPO(omega)` over worlds drawn at the
/// simulation settings; it must vanish in expectation.
pub fn fpo_rpo_check(cfg: &OracleConfig) -> Result<OracleCheck> {
    let sim = SimConfig::default();
    let n = cfg.max_n;
    let diffs = (0..cfg.rpo_worlds)
        .into_par_iter()
        .map(|k| {
            let mut rng = substream(cfg.seed ^ 0xf90, k as u64);
            let w = NetworkWorld::generate(
                n,
                ORACLE_D,
                sim.p_edge,
                sim.gamma_spill,
                Convention::Closed,
                &mut rng,
            )?;
            Ok(w.estimand_fpo()? - w.estimand_rpo()?)
        })
        .collect::<Result<Vec<f64>>>()?;
    let k = diffs.len() as f64;
    let mean = diffs.iter().sum::<f64>() / k;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (k - 1.0);
    Ok(OracleCheck::new(
        "rpo_equals_mean_fpo",
        mean.abs(),
        (3.0 * (var / k).sqrt()).max(1e-12),
    ))
}

/// Fits the own-treatment contrast on a degree-2 monomial basis and checks the
/// moment identity `E[psi g_k] = theta(g_k)` and recovery of the closed form.
pub fn representer_checks(max_n: usize) -> Result<Vec<OracleCheck>> {
    let n = max_n.clamp(2, 6);
    let design = RandomisationDesign::bernoulli(0.5)?;
    let ht = HtRepresenter::for_design(&design);
    let basis = BasisSet::monomials(n, 2)?;
    let (mut identity, mut recovery) = (0.0f64, 0.0f64);
    for unit in 0..n {
        let f = ContrastFunctional::unit_effect(unit);
        let fit = FittedRepresenter::fit(basis.clone(), &f, &design, n, GramMethod::Exact, 0.0)?;
        for k in 0..basis.len() {
            let lhs = design.expectation(n, |z| fit.evaluate(z) * basis.evaluate(k, z))?;
            identity = identity.max((lhs - fit.target[k]).abs());
        }
        for atom in design.enumerate(n)? {
            let a = &atom.assignment;
            recovery = recovery.max((fit.evaluate(a) - ht.value(a.get(unit))).abs());
        }
    }
    Ok(vec![
        OracleCheck::new("representer_identity", identity, 1e-8),
        OracleCheck::new("representer_recovers_ht", recovery, 1e-6),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::estimand_rpo_network;

    fn cfg(dgp: DgpKind, n: usize, d: f64, mode: Mode, reps: usize) -> SimConfig {
        SimConfig {
            dgp,
            n,
            d,
            mode,
            reps,
            master_seed: 2024,
            ..SimConfig::default()
        }
    }

    #[test]
    fn config_validation() {
        assert!(SimConfig::default().validate().is_ok());
        let bad = |f: &dyn Fn(&mut SimConfig)| {
            let mut c = SimConfig::default();
            f(&mut c);
            c.validate().is_err()
        };
        assert!(bad(&|c| c.n = 0));
        assert!(bad(&|c| c.reps = 0));
        assert!(bad(&|c| c.levels = vec![]));
        assert!(bad(&|c| c.levels = vec![0.0]));
        assert!(bad(&|c| c.d = 1.0));
        assert!(bad(&|c| {
            c.dgp = DgpKind::Network;
            c.p_edge = 0.0
        }));
    }

    #[test]
    fn replication_is_reproducible() {
        let c = cfg(DgpKind::Baseline, 4, 0.0, Mode::Size, 10);
        let a = run_replication(&c, 3).unwrap();
        let b = run_replication(&c, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.tau_hat.to_bits(), b.tau_hat.to_bits());
        assert_ne!(run_replication(&c, 4).unwrap().tau_hat, a.tau_hat);
    }

    #[test]
    fn reject_matches_definition() {
        let c = cfg(DgpKind::Baseline, 50, 0.1, Mode::Size, 50);
        let q = two_sided_critical(0.05);
        for r in 0..50 {
            let rec = run_replication(&c, r).unwrap();
            if rec.sigma2_hat > 0.0 {
                let z = (rec.tau_hat - rec.tau_target) / rec.sigma2_hat.sqrt();
                let rej = rec.reject.iter().find(|(l, _)| *l == 0.05).unwrap().1;
                assert_eq!(rej, z.abs() > q);
                assert_eq!(rec.covered, z.abs() <= q);
            }
        }
    }

    #[test]
    fn network_target_is_rpo_closed_form() {
        let c = cfg(DgpKind::Network, 100, 0.2, Mode::Size, 5);
        for r in 0..5 {
            let rec = run_replication(&c, r).unwrap();
            let mut rng = substream(c.master_seed, r as u64);
            let w =
                NetworkWorld::generate(100, 0.2, 0.1, 0.5, Convention::Closed, &mut rng).unwrap();
            let t = estimand_rpo_network(w.partition(), &w.effects.beta, 0.5, 0.1).unwrap();
            assert!((rec.tau_target - t).abs() < 1e-12);
        }
    }

    #[test]
    fn report_independent_of_threads() {
        let c = cfg(DgpKind::Network, 60, 0.25, Mode::Power, 40);
        let one = run_simulation_with_threads(&c, 1).unwrap();
        let four = run_simulation_with_threads(&c, 4).unwrap();
        assert_eq!(one, four);
        assert_eq!(one.var_tau_hat.to_bits(), four.var_tau_hat.to_bits());
    }

    #[test]
    fn report_rates_are_fractions() {
        let c = cfg(DgpKind::Baseline, 30, 0.2, Mode::Size, 37);
        let recs = run_records(&c).unwrap();
        let rep = summarise(&c, &recs);
        for (_, r) in &rep.rejection {
            assert!((0.0..=1.0).contains(r));
            assert_eq!((r * 37.0).round() / 37.0, *r);
        }
        assert!((0.0..=1.0).contains(&rep.coverage));
        let m = recs.iter().map(|r| r.tau_hat).sum::<f64>() / 37.0;
        assert_eq!(rep.mean_tau_hat, m);
    }

    #[test]
    fn degenerate_records_never_reject_or_cover() {
        // n = 1 with singleton pairs: sigma2 = zeta^2 > 0 almost surely, so
        // build a degenerate record directly through the inference layer.
        let inf = make_inference(1.0, 0.0, 0.0, &DEFAULT_LEVELS).unwrap();
        assert!(inf.degenerate);
        assert!(inf.levels.iter().all(|l| !l.reject));
    }

    #[test]
    fn open_convention_runs() {
        let mut c = cfg(DgpKind::Network, 40, 0.2, Mode::Size, 20);
        c.convention = Convention::Open;
        c.centring = Centring::Realised;
        let rep = run_simulation(&c).unwrap();
        assert_eq!(rep.config.convention, Convention::Open);
    }

    #[test]
    fn small_oracle_suite_passes() {
        let mut o = OracleConfig::new(6, 20, 7);
        o.degree_graphs = 20_000;
        o.rpo_worlds = 2_000;
        let rep = run_oracle_suite(&o).unwrap();
        for c in &rep.checks {
            assert!(c.passed, "{c}");
        }
        assert!(run_oracle_suite(&OracleConfig::new(11, 10, 1)).is_err());
        assert!(run_oracle_suite(&OracleConfig::new(6, 0, 1)).is_err());
    }
}
