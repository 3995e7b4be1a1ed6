//! Riesz representers.
//!
//! Two routes are provided. [`HtRepresenter`] is the closed form for the
//! Bernoulli design and the own-treatment contrast. The general route projects
//! the representer onto a finite basis of functions of `z` (evaluated at a
//! fixed latent world) by moment matching: build the Gram matrix
//! `G[l][k] = E_z[g_l g_k]`, the target `T[l] = theta(g_l)`, and solve
//! `G beta = T`. Truncating an ordered basis to its first `m` elements gives the
//! sieve approximation.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::design::{Assignment, RandomisationDesign};
use crate::functionals::{ContrastFunctional, EXACT_CAP};
use crate::rng::substream;
use crate::{Error, Result};

/// Ridge values tried, in order, when the Cholesky factorisation fails.
pub const RIDGE_LADDER: [f64; 3] = [1e-10, 1e-8, 1e-6];

/// A pivot `L_kk^2` below this fraction of the largest diagonal entry counts
/// as a failed factorisation.
const PIVOT_TOLERANCE: f64 = 1e-12;

/// Horvitz-Thompson representer `z / p - (1 - z) / (1 - p)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HtRepresenter {
    p_treat: f64,
}

impl HtRepresenter {
    pub fn new(p_treat: f64) -> Result<Self> {
        if !(p_treat > 0.0 && p_treat < 1.0) {
            return Err(Error::InvalidProbability(p_treat));
        }
        Ok(Self { p_treat })
    }

    pub fn for_design(design: &RandomisationDesign) -> Self {
        Self {
            p_treat: design.p_treat(),
        }
    }

    #[inline]
    pub fn value(&self, z_i: u8) -> f64 {
        if z_i == 1 {
            1.0 / self.p_treat
        } else {
            -1.0 / (1.0 - self.p_treat)
        }
    }

    pub fn values(&self, z: &Assignment) -> Vec<f64> {
        z.as_slice().iter().map(|&v| self.value(v)).collect()
    }
}

pub type BasisFn = Arc<dyn Fn(&Assignment) -> f64 + Send + Sync>;

/// Ordered finite basis of functions of the assignment.
#[derive(Clone)]
pub struct BasisSet {
    labels: Vec<String>,
    fns: Vec<BasisFn>,
}

impl fmt::Debug for BasisSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BasisSet")
            .field("labels", &self.labels)
            .finish()
    }
}

/// One factor of a monomial term: `z_k` or `1 - z_k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Factor {
    unit: usize,
    negated: bool,
}

fn monomial(factors: Vec<Factor>) -> BasisFn {
    Arc::new(move |a: &Assignment| {
        factors
            .iter()
            .map(|f| {
                let z = a.get(f.unit) as f64;
                if f.negated {
                    1.0 - z
                } else {
                    z
                }
            })
            .product()
    })
}

fn factor_label(factors: &[Factor]) -> String {
    if factors.is_empty() {
        return "1".into();
    }
    factors
        .iter()
        .map(|f| format!("{}z{}", if f.negated { "!" } else { "" }, f.unit))
        .collect::<Vec<_>>()
        .join("*")
}

impl BasisSet {
    pub fn new(terms: Vec<(String, BasisFn)>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::InvalidDimension(
                "basis must contain at least one function".into(),
            ));
        }
        let (labels, fns) = terms.into_iter().unzip();
        Ok(Self { labels, fns })
    }

    pub fn constant() -> Self {
        Self {
            labels: vec!["1".into()],
            fns: vec![Arc::new(|_| 1.0)],
        }
    }

    /// `{1{z_unit = 1}, 1{z_unit = 0}}`, the saturated basis for a binary own treatment.
    pub fn indicator(unit: usize) -> Self {
        let treated = vec![Factor {
            unit,
            negated: false,
        }];
        let control = vec![Factor {
            unit,
            negated: true,
        }];
        Self {
            labels: vec![factor_label(&treated), factor_label(&control)],
            fns: vec![monomial(treated), monomial(control)],
        }
    }

    /// All square-free monomials in `z_0..z_{n-1}` of degree at most
    /// `max_degree`, ordered by degree and then lexicographically. With
    /// `max_degree = n` this spans every function on `{0,1}^n`.
    pub fn monomials(n: usize, max_degree: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidDimension(
                "monomial basis needs n >= 1".into(),
            ));
        }
        let mut terms: Vec<Vec<usize>> = vec![vec![]];
        let mut layer: Vec<Vec<usize>> = vec![vec![]];
        for _ in 0..max_degree.min(n) {
            let mut next = Vec::new();
            for subset in &layer {
                let start = subset.last().map_or(0, |&u| u + 1);
                for u in start..n {
                    let mut s = subset.clone();
                    s.push(u);
                    next.push(s);
                }
            }
            terms.extend(next.iter().cloned());
            layer = next;
        }
        let terms = terms
            .into_iter()
            .map(|units| {
                let factors: Vec<Factor> = units
                    .into_iter()
                    .map(|unit| Factor {
                        unit,
                        negated: false,
                    })
                    .collect();
                (factor_label(&factors), monomial(factors))
            })
            .collect();
        Self::new(terms)
    }

    /// Parses a basis specification for `n` units.
    ///
    /// Accepted forms: `constant`, `indicator:K`, `poly:D`, or a comma-separated
    /// list of terms where each term is `1` or a `*`-product of factors `zK`
    /// and `!zK` (meaning `1 - z_K`).
    pub fn parse(spec: &str, n: usize) -> Result<Self> {
        let spec = spec.trim();
        let bad = |msg: String| Error::Domain(format!("basis spec `{spec}`: {msg}"));
        let check_unit = |unit: usize| {
            if unit >= n {
                Err(bad(format!("unit {unit} out of range for n = {n}")))
            } else {
                Ok(unit)
            }
        };
        if spec == "constant" {
            return Ok(Self::constant());
        }
        if let Some(rest) = spec.strip_prefix("indicator:") {
            let unit = rest
                .trim()
                .parse()
                .map_err(|_| bad("bad unit index".into()))?;
            return Ok(Self::indicator(check_unit(unit)?));
        }
        if let Some(rest) = spec.strip_prefix("poly:") {
            let degree = rest.trim().parse().map_err(|_| bad("bad degree".into()))?;
            return Self::monomials(n, degree);
        }
        let mut terms = Vec::new();
        for raw in spec.split(',') {
            let raw = raw.trim();
            if raw.is_empty() {
                return Err(bad("empty term".into()));
            }
            let mut factors = Vec::new();
            if raw != "1" {
                for tok in raw.split('*') {
                    let tok = tok.trim();
                    let (negated, body) = match tok.strip_prefix('!') {
                        Some(b) => (true, b),
                        None => (false, tok),
                    };
                    let unit = body
                        .strip_prefix('z')
                        .and_then(|u| u.parse::<usize>().ok())
                        .ok_or_else(|| bad(format!("bad factor `{tok}`")))?;
                    factors.push(Factor {
                        unit: check_unit(unit)?,
                        negated,
                    });
                }
            }
            terms.push((factor_label(&factors), monomial(factors)));
        }
        Self::new(terms)
    }

    /// First `m` functions (sieve truncation).
    pub fn truncate(&self, m: usize) -> Result<Self> {
        if m == 0 || m > self.len() {
            return Err(Error::InvalidDimension(format!(
                "truncation level {m} outside 1..={}",
                self.len()
            )));
        }
        Ok(Self {
            labels: self.labels[..m].to_vec(),
            fns: self.fns[..m].to_vec(),
        })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.fns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fns.is_empty()
    }

    #[inline]
    pub fn evaluate(&self, k: usize, a: &Assignment) -> f64 {
        (self.fns[k])(a)
    }

    pub fn evaluate_all(&self, a: &Assignment) -> Vec<f64> {
        self.fns.iter().map(|g| g(a)).collect()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }
}

/// Symmetric positive semidefinite Gram matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    entries: DMatrix<f64>,
}

impl GramMatrix {
    /// Symmetrises `(G + G^T) / 2` and validates positive semidefiniteness.
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if !entries.is_square() || entries.nrows() == 0 {
            return Err(Error::InvalidDimension(format!(
                "Gram matrix must be square and non-empty, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("Gram matrix has non-finite entries".into()));
        }
        let sym = (&entries + entries.transpose()) * 0.5;
        let min_eig = sym.clone().symmetric_eigen().eigenvalues.min();
        if min_eig < -1e-10 {
            return Err(Error::Domain(format!(
                "Gram matrix is not positive semidefinite (min eigenvalue {min_eig:e})"
            )));
        }
        Ok(Self { entries: sym })
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, l: usize, k: usize) -> f64 {
        self.entries[(l, k)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// (min, max) eigenvalue.
    pub fn eigen_range(&self) -> (f64, f64) {
        let eig = self.entries.clone().symmetric_eigen().eigenvalues;
        (eig.min(), eig.max())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GramMethod {
    /// Exact enumeration of the design (`n <= 12`).
    Exact,
    /// Average of `draws` design samples split over `partitions` independent
    /// substreams of `seed`. The result depends on `partitions` but not on the
    /// number of worker threads.
    MonteCarlo {
        draws: usize,
        seed: u64,
        partitions: usize,
    },
}

impl GramMethod {
    pub fn monte_carlo(draws: usize, seed: u64) -> Self {
        GramMethod::MonteCarlo {
            draws,
            seed,
            partitions: 8,
        }
    }
}

fn accumulate_outer(acc: &mut DMatrix<f64>, g: &[f64], weight: f64) {
    let m = g.len();
    for l in 0..m {
        let wl = weight * g[l];
        if wl == 0.0 {
            continue;
        }
        for k in l..m {
            acc[(l, k)] += wl * g[k];
        }
    }
}

fn mirror_upper(acc: &mut DMatrix<f64>) {
    let m = acc.nrows();
    for l in 0..m {
        for k in 0..l {
            acc[(l, k)] = acc[(k, l)];
        }
    }
}

pub fn gram_matrix(
    basis: &BasisSet,
    design: &RandomisationDesign,
    n: usize,
    method: GramMethod,
) -> Result<GramMatrix> {
    let m = basis.len();
    let mut acc = DMatrix::zeros(m, m);
    match method {
        GramMethod::Exact => {
            if n > EXACT_CAP {
                return Err(Error::EnumerationTooLarge { n, cap: EXACT_CAP });
            }
            for atom in design.enumerate(n)? {
                let g = basis.evaluate_all(&atom.assignment);
                accumulate_outer(&mut acc, &g, atom.probability);
            }
        }
        GramMethod::MonteCarlo {
            draws,
            seed,
            partitions,
        } => {
            if draws == 0 {
                return Err(Error::InvalidSampleSize(
                    "Monte Carlo Gram needs S >= 1 draws".into(),
                ));
            }
            if partitions == 0 {
                return Err(Error::InvalidSampleSize(
                    "partition count must be >= 1".into(),
                ));
            }
            if n == 0 {
                return Err(Error::InvalidDimension("n must be at least 1".into()));
            }
            let partitions = partitions.min(draws);
            let partials: Vec<Result<DMatrix<f64>>> = (0..partitions)
                .into_par_iter()
                .map(|part| {
                    let share = draws / partitions + usize::from(part < draws % partitions);
                    let mut rng = substream(seed, part as u64);
                    let mut local = DMatrix::zeros(m, m);
                    for _ in 0..share {
                        let z = design.sample(n, &mut rng)?;
                        accumulate_outer(&mut local, &basis.evaluate_all(&z), 1.0);
                    }
                    Ok(local)
                })
                .collect();
            for part in partials {
                acc += part?;
            }
            acc /= draws as f64;
        }
    }
    mirror_upper(&mut acc);
    GramMatrix::new(acc)
}

/// `T[l] = theta(g_l)`, evaluated exactly.
pub fn target_vector(
    basis: &BasisSet,
    functional: &ContrastFunctional,
    design: &RandomisationDesign,
    n: usize,
) -> Result<Vec<f64>> {
    (0..basis.len())
        .map(|k| functional.apply_exact(|a| basis.evaluate(k, a), design, n))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepresenterCoefficients {
    pub beta: Vec<f64>,
    pub ridge_used: f64,
}

fn try_cholesky_solve(g: &DMatrix<f64>, t: &DVector<f64>, ridge: f64) -> Option<DVector<f64>> {
    let m = g.nrows();
    // Pivots are judged against the unshifted scale so a ridge cannot mask a zero matrix.
    let max_diag = g.diagonal().max();
    if max_diag.is_nan() || max_diag <= 0.0 {
        return None;
    }
    let shifted = g + DMatrix::identity(m, m) * ridge;
    let chol = shifted.clone().cholesky()?;
    let min_pivot = chol.l_dirty().diagonal().map(|v| v * v).min();
    if min_pivot <= PIVOT_TOLERANCE * max_diag {
        return None;
    }
    let mut beta = chol.solve(t);
    // One step of iterative refinement against the shifted system.
    let residual = t - &shifted * &beta;
    beta += chol.solve(&residual);
    beta.iter().all(|v| v.is_finite()).then_some(beta)
}

/// Solves `(G + ridge I) beta = T` by Cholesky, escalating the ridge through
/// [`RIDGE_LADDER`] when the factorisation fails.
pub fn solve_representer(
    gram: &GramMatrix,
    target: &[f64],
    ridge: f64,
) -> Result<RepresenterCoefficients> {
    if target.len() != gram.dim() {
        return Err(Error::DimensionMismatch {
            expected: gram.dim(),
            got: target.len(),
        });
    }
    if !ridge.is_finite() || ridge < 0.0 {
        return Err(Error::NegativeInput(format!("ridge {ridge}")));
    }
    let t = DVector::from_column_slice(target);
    let ladder = std::iter::once(ridge).chain(RIDGE_LADDER.into_iter().filter(|&r| r > ridge));
    let mut last = ridge;
    for r in ladder {
        last = r;
        if let Some(beta) = try_cholesky_solve(gram.matrix(), &t, r) {
            return Ok(RepresenterCoefficients {
                beta: beta.iter().copied().collect(),
                ridge_used: r,
            });
        }
    }
    let (min_eigenvalue, max_eigenvalue) = gram.eigen_range();
    Err(Error::SingularGram {
        ridge: last,
        min_eigenvalue,
        max_eigenvalue,
    })
}

/// `sum_k beta_k g_k(a)`.
pub fn evaluate_representer(
    coeffs: &RepresenterCoefficients,
    basis: &BasisSet,
    a: &Assignment,
) -> Result<f64> {
    if coeffs.beta.len() != basis.len() {
        return Err(Error::DimensionMismatch {
            expected: basis.len(),
            got: coeffs.beta.len(),
        });
    }
    Ok(coeffs
        .beta
        .iter()
        .enumerate()
        .map(|(k, b)| b * basis.evaluate(k, a))
        .sum())
}

/// Output of the moment-matching pipeline.
#[derive(Debug, Clone)]
pub struct FittedRepresenter {
    pub basis: BasisSet,
    pub gram: GramMatrix,
    pub target: Vec<f64>,
    pub coefficients: RepresenterCoefficients,
}

impl FittedRepresenter {
    /// Gram matrix, target vector and solve in one pass.
    pub fn fit(
        basis: BasisSet,
        functional: &ContrastFunctional,
        design: &RandomisationDesign,
        n: usize,
        method: GramMethod,
        ridge: f64,
    ) -> Result<Self> {
        let gram = gram_matrix(&basis, design, n, method)?;
        let target = target_vector(&basis, functional, design, n)?;
        let coefficients = solve_representer(&gram, &target, ridge)?;
        Ok(Self {
            basis,
            gram,
            target,
            coefficients,
        })
    }

    /// Sieve approximation on the first `m` functions of an ordered basis.
    pub fn fit_truncated(
        basis: &BasisSet,
        m: usize,
        functional: &ContrastFunctional,
        design: &RandomisationDesign,
        n: usize,
        method: GramMethod,
        ridge: f64,
    ) -> Result<Self> {
        Self::fit(basis.truncate(m)?, functional, design, n, method, ridge)
    }

    pub fn evaluate(&self, a: &Assignment) -> f64 {
        self.coefficients
            .beta
            .iter()
            .enumerate()
            .map(|(k, b)| b * self.basis.evaluate(k, a))
            .sum()
    }

    /// True when every target entry is zero, i.e. the functional annihilates the span.
    pub fn target_is_zero(&self) -> bool {
        self.target.iter().all(|&t| t == 0.0)
    }

    /// Writes `G`, `T`, `beta` and (when `psi_table` is given) the values of the
    /// fitted representer over the enumerated design, as space-separated rows.
    pub fn write_text<W: Write>(
        &self,
        out: &mut W,
        psi_table: Option<(&RandomisationDesign, usize)>,
    ) -> std::io::Result<()> {
        let m = self.gram.dim();
        writeln!(out, "# basis {}", self.basis.labels().join(" "))?;
        writeln!(out, "# gram {m} {m}")?;
        for l in 0..m {
            let row: Vec<String> = (0..m).map(|k| fmt_num(self.gram.get(l, k))).collect();
            writeln!(out, "{}", row.join(" "))?;
        }
        writeln!(out, "# target {m}")?;
        writeln!(out, "{}", join_nums(&self.target))?;
        writeln!(out, "# beta {m}")?;
        writeln!(out, "{}", join_nums(&self.coefficients.beta))?;
        writeln!(
            out,
            "# ridge_used {}",
            fmt_num(self.coefficients.ridge_used)
        )?;
        if let Some((design, n)) = psi_table {
            if let Ok(atoms) = design.enumerate(n) {
                writeln!(out, "# psi assignment probability value")?;
                for atom in atoms {
                    writeln!(
                        out,
                        "{} {} {}",
                        atom.assignment,
                        fmt_num(atom.probability),
                        fmt_num(self.evaluate(&atom.assignment))
                    )?;
                }
            }
        }
        Ok(())
    }

    pub fn write_text_file(
        &self,
        path: &Path,
        psi_table: Option<(&RandomisationDesign, usize)>,
    ) -> std::io::Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_text(&mut f, psi_table)?;
        f.flush()
    }
}

fn fmt_num(v: f64) -> String {
    // Shortest representation that round-trips.
    if v == 0.0 {
        "0".into()
    } else {
        format!("{v}")
    }
}

fn join_nums(v: &[f64]) -> String {
    v.iter().map(|&x| fmt_num(x)).collect::<Vec<_>>().join(" ")
}
