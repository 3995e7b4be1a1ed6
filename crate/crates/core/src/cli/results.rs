//! Results CSV: writer, parser and the printed summary.

use std::fmt::Write as _;

use crate::montecarlo::SimReport;

pub const HEADER: &str = "dgp,n,d,mode,level,reps,rejection_rate,coverage,mean_tau_hat,var_tau_hat,mean_sigma2_hat,degenerate_count,seed";

/// `%g`-style formatting with 6 significant digits.
pub fn fmt_g6(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return if v.is_nan() {
            "nan".into()
        } else if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{v:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        trim_zeros(format!("{v:.decimals$}"))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa.to_owned()), exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_owned()
    } else {
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub dgp: String,
    pub n: usize,
    pub d: f64,
    pub mode: String,
    pub level: f64,
    pub reps: usize,
    pub rejection_rate: f64,
    pub coverage: f64,
    pub mean_tau_hat: f64,
    pub var_tau_hat: f64,
    pub mean_sigma2_hat: f64,
    pub degenerate_count: usize,
    pub seed: u64,
}

impl ResultRow {
    fn to_line(&self) -> String {
        [
            self.dgp.clone(),
            self.n.to_string(),
            fmt_g6(self.d),
            self.mode.clone(),
            fmt_g6(self.level),
            self.reps.to_string(),
            fmt_g6(self.rejection_rate),
            fmt_g6(self.coverage),
            fmt_g6(self.mean_tau_hat),
            fmt_g6(self.var_tau_hat),
            fmt_g6(self.mean_sigma2_hat),
            self.degenerate_count.to_string(),
            self.seed.to_string(),
        ]
        .join(",")
    }
}

/// One row per level of every report.
pub fn rows_from_reports(reports: &[SimReport]) -> Vec<ResultRow> {
    reports
        .iter()
        .flat_map(|r| {
            r.rejection.iter().map(move |&(level, rate)| ResultRow {
                dgp: r.config.dgp.to_string(),
                n: r.config.n,
                d: r.config.d,
                mode: r.config.mode.to_string(),
                level,
                reps: r.config.reps,
                rejection_rate: rate,
                coverage: r.coverage,
                mean_tau_hat: r.mean_tau_hat,
                var_tau_hat: r.var_tau_hat,
                mean_sigma2_hat: r.mean_sigma2_hat,
                degenerate_count: r.degenerate_count,
                seed: r.config.master_seed,
            })
        })
        .collect()
}

pub fn write_csv(rows: &[ResultRow]) -> String {
    let mut s = String::with_capacity(64 * (rows.len() + 1));
    s.push_str(HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&r.to_line());
        s.push('\n');
    }
    s
}

pub fn parse_csv(text: &str) -> Result<Vec<ResultRow>, String> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == HEADER => {}
        Some(h) => return Err(format!("unexpected header `{h}`")),
        None => return Err("empty results file".into()),
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| {
            let line_no = i + 2;
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 13 {
                return Err(format!(
                    "line {line_no}: expected 13 fields, found {}",
                    f.len()
                ));
            }
            let num = |k: usize| {
                f[k].parse::<f64>()
                    .map_err(|_| format!("line {line_no}: bad number `{}`", f[k]))
            };
            let int = |k: usize| {
                f[k].parse::<u64>()
                    .map_err(|_| format!("line {line_no}: bad integer `{}`", f[k]))
            };
            Ok(ResultRow {
                dgp: f[0].to_owned(),
                n: int(1)? as usize,
                d: num(2)?,
                mode: f[3].to_owned(),
                level: num(4)?,
                reps: int(5)? as usize,
                rejection_rate: num(6)?,
                coverage: num(7)?,
                mean_tau_hat: num(8)?,
                var_tau_hat: num(9)?,
                mean_sigma2_hat: num(10)?,
                degenerate_count: int(11)? as usize,
                seed: int(12)?,
            })
        })
        .collect()
}

type GroupKey = (String, String, u64);

/// Human-readable table grouped by `(dgp, mode, level)`, with the group mean
/// rejection rate and coverage.
pub fn summary(rows: &[ResultRow]) -> String {
    let mut groups: Vec<(GroupKey, Vec<&ResultRow>)> = Vec::new();
    for r in rows {
        let key = (r.dgp.clone(), r.mode.clone(), r.level.to_bits());
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(r),
            None => groups.push((key, vec![r])),
        }
    }
    let mut s = String::new();
    for ((dgp, mode, _), rs) in &groups {
        let level = rs[0].level;
        let _ = writeln!(s, "{dgp} {mode} level={}", fmt_g6(level));
        let _ = writeln!(
            s,
            "  {:>6} {:>6} {:>10} {:>10} {:>6}",
            "n", "d", "rejection", "coverage", "degen"
        );
        for r in rs {
            let _ = writeln!(
                s,
                "  {:>6} {:>6} {:>10} {:>10} {:>6}",
                r.n,
                fmt_g6(r.d),
                fmt_g6(r.rejection_rate),
                fmt_g6(r.coverage),
                r.degenerate_count
            );
        }
        let k = rs.len() as f64;
        let mean_rej = rs.iter().map(|r| r.rejection_rate).sum::<f64>() / k;
        let mean_cov = rs.iter().map(|r| r.coverage).sum::<f64>() / k;
        let _ = writeln!(
            s,
            "  mean rejection {} mean coverage {}",
            fmt_g6(mean_rej),
            fmt_g6(mean_cov)
        );
    }
    s
}
