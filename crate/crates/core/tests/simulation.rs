//! Finite-sample behaviour of the replication harness.

use rayon::prelude::*;

use riesz_rpo::depgraph::{BlockPartition, Convention};
use riesz_rpo::design::RandomisationDesign;
use riesz_rpo::dgp::{BaselineWorld, DgpKind, NetworkWorld};
use riesz_rpo::estimator::{aggregate_estimate, variance_upper_bound, WeightScheme};
use riesz_rpo::montecarlo::{
    fpo_rpo_check, run_simulation, simulate_inverse_degree, Centring, Mode, OracleConfig,
    SimConfig, SimReport,
};
use riesz_rpo::representer::HtRepresenter;
use riesz_rpo::rng::substream;

const SEED: u64 = 314_159;

fn sim(dgp: DgpKind, n: usize, d: f64, mode: Mode) -> SimReport {
    run_simulation(&SimConfig {
        dgp,
        n,
        d,
        mode,
        master_seed: SEED,
        ..SimConfig::default()
    })
    .unwrap()
}

#[test]
fn baseline_size_is_controlled_at_n_1000() {
    for d in [0.0, 0.1, 0.2, 0.25] {
        let r = sim(DgpKind::Baseline, 1000, d, Mode::Size);
        let rate = r.rejection_at(0.05).unwrap();
        assert!((0.035..=0.065).contains(&rate), "d={d}: {rate}");
    }
}

#[test]
fn baseline_coverage_band() {
    for n in [500, 1000] {
        for d in [0.0, 0.1, 0.2, 0.25] {
            let c = sim(DgpKind::Baseline, n, d, Mode::Size).coverage;
            assert!((0.935..=0.985).contains(&c), "n={n} d={d}: {c}");
        }
    }
}

#[test]
fn power_is_monotone_in_n() {
    for dgp in [DgpKind::Baseline, DgpKind::Network] {
        for d in [0.0, 0.1, 0.2, 0.25, 0.3] {
            let rates: Vec<f64> = [100, 200, 500, 1000]
                .iter()
                .map(|&n| sim(dgp, n, d, Mode::Power).rejection_at(0.05).unwrap())
                .collect();
            assert!(
                rates.windows(2).all(|w| w[0] <= w[1]),
                "{dgp} d={d}: {rates:?}"
            );
        }
    }
}

#[test]
fn variance_bound_dominates_empirical_variance() {
    for d in [0.0, 0.2] {
        let n = 1000;
        let r = sim(DgpKind::Baseline, n, d, Mode::Size);
        // Plug-in second moment of Y from independent worlds; |psi| = 2 at p = 1/2.
        let design = RandomisationDesign::bernoulli(0.5).unwrap();
        let worlds = 200;
        let y2 = (0..worlds)
            .into_par_iter()
            .map(|k| {
                let mut rng = substream(SEED ^ 0xb0, k);
                let w = BaselineWorld::generate(n, d, &mut rng).unwrap();
                let z = design.sample(n, &mut rng).unwrap();
                w.outcome(&z).unwrap().0.iter().map(|v| v * v).sum::<f64>() / n as f64
            })
            .collect::<Vec<f64>>()
            .iter()
            .sum::<f64>()
            / worlds as f64;
        let part = BlockPartition::from_rate(n, d).unwrap();
        let sizes: Vec<usize> = (0..n).map(|i| part.size_of_unit(i)).collect();
        let bound = variance_upper_bound(&sizes, y2.sqrt(), 2.0, 1.0, n).unwrap();
        assert!(
            bound >= r.var_tau_hat,
            "d={d}: bound {bound} < {}",
            r.var_tau_hat
        );
    }
}

#[test]
fn world_average_of_exact_expectation_matches_rpo() {
    let n = 6;
    let design = RandomisationDesign::bernoulli(0.5).unwrap();
    let ht = HtRepresenter::for_design(&design);
    let nu = WeightScheme::uniform(n).unwrap();
    let worlds = 10_000;
    let diffs: Vec<f64> = (0..worlds)
        .into_par_iter()
        .map(|k| {
            let mut rng = substream(SEED, k);
            let w = NetworkWorld::generate(n, 0.5, 0.5, 0.5, Convention::Closed, &mut rng).unwrap();
            let e = design
                .expectation(n, |z| {
                    aggregate_estimate(&w.outcome(z).unwrap().0, &ht.values(z), &nu).unwrap()
                })
                .unwrap();
            e - w.estimand_rpo().unwrap()
        })
        .collect();
    let k = worlds as f64;
    let mean = diffs.iter().sum::<f64>() / k;
    let sd = (diffs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt();
    assert!(
        mean.abs() <= 3.0 * sd / k.sqrt(),
        "mean {mean}, se {}",
        sd / k.sqrt()
    );

    let check = fpo_rpo_check(&OracleConfig::new(8, 10, SEED)).unwrap();
    assert!(check.passed, "{check}");
}

#[test]
fn inverse_degree_simulation_matches_half_block() {
    let (mean, se) = simulate_inverse_degree(2, 0.5, 1_000_000, SEED).unwrap();
    assert!((mean - 0.75).abs() <= 3.0 * se, "{mean} +- {se}");
    let (mean, se) = simulate_inverse_degree(1, 0.5, 1000, SEED).unwrap();
    assert_eq!((mean, se), (1.0, 0.0));
}

#[test]
fn realised_centring_targets_fpo() {
    let cfg = SimConfig {
        dgp: DgpKind::Network,
        n: 500,
        d: 0.2,
        centring: Centring::Realised,
        master_seed: SEED,
        ..SimConfig::default()
    };
    let r = run_simulation(&cfg).unwrap();
    assert!((0.93..=0.985).contains(&r.coverage), "{}", r.coverage);
    let rate = r.rejection_at(0.05).unwrap();
    assert!((0.02..=0.07).contains(&rate), "{rate}");
}

#[test]
fn open_convention_size_is_controlled() {
    let cfg = SimConfig {
        dgp: DgpKind::Network,
        n: 1000,
        d: 0.1,
        convention: Convention::Open,
        master_seed: SEED,
        ..SimConfig::default()
    };
    let r = run_simulation(&cfg).unwrap();
    let rate = r.rejection_at(0.05).unwrap();
    assert!((0.025..=0.065).contains(&rate), "{rate}");
}

#[test]
fn degenerate_variances_are_counted_not_rejected() {
    // A single unit with d = 0: the residual product is a square, so no
    // replication is degenerate; the count must then be zero.
    let r = run_simulation(&SimConfig {
        n: 1,
        reps: 200,
        master_seed: SEED,
        ..SimConfig::default()
    })
    .unwrap();
    assert_eq!(r.degenerate_count, 0);
    assert!(r
        .rejection
        .iter()
        .all(|(_, rate)| (0.0..=1.0).contains(rate)));
}
