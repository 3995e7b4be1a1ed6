use std::path::Path;
use std::process::{Command, Output};

use riesz_rpo::cli::results::{parse_csv, summary, HEADER};

const BASELINE_GRID: &str = "\
# size and power grid for the baseline design
seed = 5
reps = 20
levels = 0.05

[baseline]
dgp = baseline
n = 100, 200, 500, 1000
d = 0, 0.1, 0.2, 0.25, 0.3
mode = size, power
";

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_riesz-rpo"));
    c.env_remove("RIESZ_RPO_SEED");
    c
}

fn simulate(config: &Path, out: &Path, extra: &[&str]) -> Output {
    bin()
        .args(["simulate", "--quiet", "--config"])
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn simulate_writes_one_row_per_grid_point() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "grid.cfg", BASELINE_GRID);
    let out = dir.path().join("out");
    let o = simulate(&cfg, &out, &[]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let text = std::fs::read_to_string(out.join("results.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(HEADER));
    assert_eq!(lines.count(), 4 * 5 * 2);
    assert!(!text.contains('\r'));
    let rows = parse_csv(&text).unwrap();
    assert!(rows
        .iter()
        .all(|r| r.seed == 5 && r.reps == 20 && r.level == 0.05));
    assert_eq!((rows[0].n, rows[0].mode.as_str()), (100, "size"));
    assert_eq!((rows[1].n, rows[1].mode.as_str()), (100, "power"));

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["master_seed"], 5);
    assert_eq!(manifest["seed_source"], "config");
    assert_eq!(manifest["grid"].as_array().unwrap().len(), 40);
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
    assert!(manifest["started_at"].is_string() && manifest["finished_at"].is_string());
}

#[test]
fn printed_summary_round_trips_through_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "g.cfg",
        "reps = 30\n[a]\ndgp = network\nn = 60, 90\nd = 0.1\nmode = size, power\n",
    );
    let out = dir.path().join("out");
    let o = simulate(&cfg, &out, &[]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(out.join("results.csv")).unwrap();
    let rows = parse_csv(&text).unwrap();
    assert_eq!(rows.len(), 2 * 2 * 3);
    assert_eq!(String::from_utf8(o.stdout).unwrap(), summary(&rows));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "g.cfg",
        "reps = 40\n[a]\ndgp = baseline, network\nn = 50\nd = 0, 0.3\nmode = size\n",
    );
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(simulate(&cfg, &a, &["--seed", "3", "--threads", "2"])
        .status
        .success());
    assert!(simulate(&cfg, &b, &["--seed", "3", "--threads", "3"])
        .status
        .success());
    assert_eq!(
        std::fs::read(a.join("results.csv")).unwrap(),
        std::fs::read(b.join("results.csv")).unwrap()
    );
    let c = dir.path().join("c");
    assert!(simulate(&cfg, &c, &["--seed", "4"]).status.success());
    assert_ne!(
        std::fs::read(a.join("results.csv")).unwrap(),
        std::fs::read(c.join("results.csv")).unwrap()
    );
}

#[test]
fn seed_precedence_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "g.cfg", "[a]\nn = 20\nreps = 5\n");
    let read_seed = |out: &Path| -> serde_json::Value {
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap()
    };

    let out = dir.path().join("env");
    let o = bin()
        .env("RIESZ_RPO_SEED", "77")
        .args(["simulate", "--quiet", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(o.status.success());
    let m = read_seed(&out);
    assert_eq!(
        (m["master_seed"].as_u64(), m["seed_source"].as_str()),
        (Some(77), Some("env"))
    );

    let out = dir.path().join("flag");
    let o = bin()
        .env("RIESZ_RPO_SEED", "77")
        .args([
            "simulate", "--quiet", "--seed", "8", "--set", "seed=9", "--set", "a.reps=7",
            "--config",
        ])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(o.status.success());
    let m = read_seed(&out);
    assert_eq!(m["master_seed"].as_u64(), Some(8));
    let rows = parse_csv(&std::fs::read_to_string(out.join("results.csv")).unwrap()).unwrap();
    assert!(rows.iter().all(|r| r.reps == 7 && r.seed == 8));

    let out = dir.path().join("bad_env");
    let o = bin()
        .env("RIESZ_RPO_SEED", "not-a-number")
        .args(["simulate", "--quiet", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_hash_is_stable_under_reordering() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(
        dir.path(),
        "a.cfg",
        "[g]\nn = 10\nd = 0.1\nreps = 4\nmode = size\n",
    );
    let b = write(
        dir.path(),
        "b.cfg",
        "[g]\nmode = size\nreps = 4\nd = 0.1\nn = 10\n",
    );
    let hash = |cfg: &Path, out: &str| {
        let out = dir.path().join(out);
        assert!(simulate(cfg, &out, &[]).status.success());
        let m: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap())
                .unwrap();
        m["config_hash"].as_str().unwrap().to_owned()
    };
    assert_eq!(hash(&a, "oa"), hash(&b, "ob"));
}

#[test]
fn records_file_is_optional() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "g.cfg",
        "[a]\nn = 20\nreps = 6\nmode = size, power\n",
    );
    let out = dir.path().join("out");
    assert!(simulate(&cfg, &out, &[]).status.success());
    assert!(!out.join("records.csv").exists());
    assert!(simulate(&cfg, &out, &["--records"]).status.success());
    let rec = std::fs::read_to_string(out.join("records.csv")).unwrap();
    assert_eq!(rec.lines().count(), 1 + 2 * 6);
}

#[test]
fn config_errors_exit_2_with_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    for (text, needle) in [
        ("", "empty grid"),
        ("[a]\nn =\n", "line 2"),
        ("[a]\nn = 10\nwidth = 3\n", "line 3"),
        ("[a]\nn = 10\nd = 2\n", "grid `a`"),
        ("[a]\nn = 10\nmode = sideways\n", "mode"),
    ] {
        let cfg = write(dir.path(), "bad.cfg", text);
        let o = simulate(&cfg, &out, &[]);
        assert_eq!(o.status.code(), Some(2), "config {text:?}");
        let err = String::from_utf8_lossy(&o.stderr);
        assert!(err.contains(needle), "{err}");
    }
    let cfg = write(dir.path(), "ok.cfg", "[a]\nn = 10\nreps = 2\n");
    assert_eq!(
        simulate(&cfg, &out, &["--set", "b.n=3"]).status.code(),
        Some(2)
    );
    assert_eq!(simulate(&cfg, &out, &["--bogus"]).status.code(), Some(2));
}

#[test]
fn io_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.cfg");
    assert_eq!(
        simulate(&missing, &dir.path().join("o"), &[]).status.code(),
        Some(3)
    );
    let cfg = write(dir.path(), "ok.cfg", "[a]\nn = 10\nreps = 2\n");
    let blocker = write(dir.path(), "file", "x");
    assert_eq!(simulate(&cfg, &blocker, &[]).status.code(), Some(3));
}

#[test]
fn oracle_exit_codes() {
    let o = bin()
        .args(["oracle", "--max-n", "6", "--worlds", "100", "--seed", "1"])
        .output()
        .unwrap();
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(o.status.code(), Some(0), "{stdout}");
    assert!(stdout.contains("PASS unbiased_baseline"));
    assert!(!stdout.contains("FAIL"));
    assert!(stdout.contains("worst enumeration discrepancy"));

    let o = bin().args(["oracle", "--max-n", "15"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = bin().args(["oracle", "--worlds", "0"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

fn beta_line(text: &str) -> Vec<f64> {
    let mut lines = text.lines();
    lines.find(|l| l.starts_with("# beta")).unwrap();
    lines
        .next()
        .unwrap()
        .split(' ')
        .map(|v| v.parse().unwrap())
        .collect()
}

#[test]
fn representer_indicator_recovers_ht_weights() {
    let o = bin()
        .args(["representer", "--n", "1", "--basis", "indicator:0"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(beta_line(&text), vec![2.0, -2.0]);
    assert!(text.contains("# psi assignment probability value\n0 0.5 -2\n1 0.5 2\n"));
}

#[test]
fn representer_constant_basis_warns() {
    let o = bin()
        .args(["representer", "--n", "2", "--basis", "constant"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(beta_line(&String::from_utf8(o.stdout).unwrap()), vec![0.0]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning: target vector is zero"));
}

#[test]
fn representer_monte_carlo_gram() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("rep.txt");
    let o = bin()
        .args([
            "representer",
            "--n",
            "1",
            "--method",
            "mc:100000",
            "--seed",
            "17",
            "--out",
        ])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let beta = beta_line(&std::fs::read_to_string(&out).unwrap());
    assert!(
        (beta[0] - 2.0).abs() <= 0.05 && (beta[1] + 2.0).abs() <= 0.05,
        "{beta:?}"
    );
}

#[test]
fn representer_errors() {
    let o = bin()
        .args(["representer", "--n", "1", "--basis", "z0*!z0"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("condition number"));
    let o = bin()
        .args(["representer", "--n", "13", "--basis", "poly:1"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = bin()
        .args(["representer", "--n", "2", "--contrast", "unit:5"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = bin()
        .args(["representer", "--n", "2", "--design", "bernoulli:1"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn representer_global_contrast_and_truncation() {
    let o = bin()
        .args([
            "representer",
            "--n",
            "2",
            "--basis",
            "poly:2",
            "--contrast",
            "global:0",
            "--truncate",
            "2",
        ])
        .output()
        .unwrap();
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert_eq!(beta_line(&String::from_utf8(o.stdout).unwrap()).len(), 2);
}
