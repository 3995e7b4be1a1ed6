//! Block partitions, dependency graphs and blockwise Erdős–Rényi interference graphs.

use std::io::Write;

use rand::Rng;

use crate::{Error, Result};

/// Contiguous partition of `0..n` into blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPartition {
    block_of: Vec<usize>,
    block_sizes: Vec<usize>,
    block_starts: Vec<usize>,
}

impl BlockPartition {
    /// Blocks of the given sizes laid out contiguously.
    pub fn from_sizes(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() || sizes.contains(&0) {
            return Err(Error::InvalidDimension(
                "block sizes must be positive and non-empty".into(),
            ));
        }
        let mut block_of = Vec::with_capacity(sizes.iter().sum());
        let mut block_starts = Vec::with_capacity(sizes.len());
        for (b, &m) in sizes.iter().enumerate() {
            block_starts.push(block_of.len());
            block_of.extend(std::iter::repeat_n(b, m));
        }
        Ok(Self {
            block_of,
            block_sizes: sizes,
            block_starts,
        })
    }

    /// `floor(n^(1-d))` balanced contiguous blocks; the first `n mod B` blocks
    /// take one extra unit.
    pub fn from_rate(n: usize, d: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidDimension("n must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&d) {
            return Err(Error::InvalidRate(d));
        }
        let blocks = block_count(n, d);
        let (base, extra) = (n / blocks, n % blocks);
        Self::from_sizes((0..blocks).map(|b| base + usize::from(b < extra)).collect())
    }

    pub fn singletons(n: usize) -> Result<Self> {
        Self::from_sizes(vec![1; n])
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.block_of.len()
    }

    #[inline]
    pub fn num_blocks(&self) -> usize {
        self.block_sizes.len()
    }

    #[inline]
    pub fn block_of(&self, i: usize) -> usize {
        self.block_of[i]
    }

    pub fn block_sizes(&self) -> &[usize] {
        &self.block_sizes
    }

    /// Size of the block containing unit `i`.
    #[inline]
    pub fn size_of_unit(&self, i: usize) -> usize {
        self.block_sizes[self.block_of[i]]
    }

    pub fn units(&self, block: usize) -> std::ops::Range<usize> {
        let start = self.block_starts[block];
        start..start + self.block_sizes[block]
    }

    pub fn blocks(&self) -> impl Iterator<Item = std::ops::Range<usize>> + '_ {
        (0..self.num_blocks()).map(|b| self.units(b))
    }
}

/// `floor(n^(1-d))`, clamped to `[1, n]`.
pub fn block_count(n: usize, d: f64) -> usize {
    let exact = (n as f64).powf(1.0 - d);
    // Absorb rounding when n^(1-d) is an integer, e.g. 100^0.5.
    let b = (exact + 1e-9).floor() as usize;
    b.clamp(1, n)
}

/// Ordered set of unit pairs `(i, j)`, sorted and deduplicated.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PairSet {
    pairs: Vec<(usize, usize)>,
}

impl PairSet {
    pub fn new(mut pairs: Vec<(usize, usize)>) -> Self {
        pairs.sort_unstable();
        pairs.dedup();
        Self { pairs }
    }

    pub fn diagonal(n: usize) -> Self {
        Self {
            pairs: (0..n).map(|i| (i, i)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn contains(&self, pair: (usize, usize)) -> bool {
        self.pairs.binary_search(&pair).is_ok()
    }

    pub fn is_subset_of(&self, other: &PairSet) -> bool {
        // Both sorted: linear merge.
        let mut it = other.pairs.iter();
        'outer: for p in &self.pairs {
            for q in it.by_ref() {
                if q == p {
                    continue 'outer;
                }
                if q > p {
                    return false;
                }
            }
            return false;
        }
        true
    }

    pub fn is_symmetric(&self) -> bool {
        self.pairs.iter().all(|&(i, j)| self.contains((j, i)))
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.pairs.iter().copied()
    }

    pub fn max_unit(&self) -> Option<usize> {
        self.pairs.iter().map(|&(i, j)| i.max(j)).max()
    }
}

/// Dependency neighbourhoods `N_i` (reflexive, symmetric) and the induced pair set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DependencyGraph {
    neighbourhoods: Vec<Vec<usize>>,
    pairs: PairSet,
}

impl DependencyGraph {
    /// Validates reflexivity and symmetry of the supplied neighbourhoods.
    pub fn from_neighbourhoods(mut neighbourhoods: Vec<Vec<usize>>) -> Result<Self> {
        let n = neighbourhoods.len();
        if n == 0 {
            return Err(Error::InvalidDimension(
                "dependency graph needs n >= 1".into(),
            ));
        }
        for (i, nb) in neighbourhoods.iter_mut().enumerate() {
            nb.sort_unstable();
            nb.dedup();
            if nb.last().is_some_and(|&j| j >= n) {
                return Err(Error::InvalidDimension(format!(
                    "neighbour of {i} out of range"
                )));
            }
            if nb.binary_search(&i).is_err() {
                return Err(Error::Domain(format!(
                    "unit {i} is not in its own neighbourhood"
                )));
            }
        }
        for i in 0..n {
            for &j in &neighbourhoods[i] {
                if neighbourhoods[j].binary_search(&i).is_err() {
                    return Err(Error::Domain(format!(
                        "neighbourhoods not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let pairs = neighbourhoods
            .iter()
            .enumerate()
            .flat_map(|(i, nb)| nb.iter().map(move |&j| (i, j)))
            .collect();
        Ok(Self {
            neighbourhoods,
            pairs: PairSet::new(pairs),
        })
    }

    /// Every unit depends on every other unit of its block.
    pub fn from_blocks(partition: &BlockPartition) -> Self {
        let neighbourhoods: Vec<Vec<usize>> = (0..partition.n())
            .map(|i| partition.units(partition.block_of(i)).collect())
            .collect();
        let pairs = partition
            .blocks()
            .flat_map(|r| {
                let r2 = r.clone();
                r.flat_map(move |i| r2.clone().map(move |j| (i, j)))
            })
            .collect();
        Self {
            neighbourhoods,
            pairs: PairSet { pairs },
        }
    }

    pub fn n(&self) -> usize {
        self.neighbourhoods.len()
    }

    pub fn neighbourhood(&self, i: usize) -> &[usize] {
        &self.neighbourhoods[i]
    }

    pub fn pair_set(&self) -> &PairSet {
        &self.pairs
    }

    /// `(D_n, d_n)`: maximum and mean neighbourhood size.
    pub fn stats(&self) -> (usize, f64) {
        let max = self.neighbourhoods.iter().map(Vec::len).max().unwrap_or(0);
        let total: usize = self.neighbourhoods.iter().map(Vec::len).sum();
        (max, total as f64 / self.n() as f64)
    }

    pub fn neighbourhood_sizes(&self) -> Vec<usize> {
        self.neighbourhoods.iter().map(Vec::len).collect()
    }

    /// One `i j` line per ordered pair, 0-based.
    pub fn write_edge_list<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        for (i, j) in self.pairs.iter() {
            writeln!(out, "{i} {j}")?;
        }
        Ok(())
    }
}

/// Whether a unit belongs to its own realised neighbourhood.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Convention {
    /// `A_ii = 1`: `N_i` always contains `i`.
    #[default]
    Closed,
    /// `A_ii = 0`: exposure of a unit without neighbours is zero.
    Open,
}

impl std::str::FromStr for Convention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "closed" => Ok(Convention::Closed),
            "open" => Ok(Convention::Open),
            other => Err(Error::Domain(format!("unknown convention `{other}`"))),
        }
    }
}

impl std::fmt::Display for Convention {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Convention::Closed => "closed",
            Convention::Open => "open",
        })
    }
}

/// Realised undirected interference graph. Adjacency lists never include the
/// unit itself; the convention decides whether `i` counts in `N_i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InterferenceGraph {
    adjacency: Vec<Vec<usize>>,
    convention: Convention,
}

impl InterferenceGraph {
    pub fn empty(n: usize, convention: Convention) -> Self {
        Self {
            adjacency: vec![Vec::new(); n],
            convention,
        }
    }

    pub fn n(&self) -> usize {
        self.adjacency.len()
    }

    pub fn convention(&self) -> Convention {
        self.convention
    }

    /// Neighbours of `i` excluding `i`.
    pub fn adjacent(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    /// `|N_i|` under the graph's convention.
    #[inline]
    pub fn neighbourhood_size(&self, i: usize) -> usize {
        self.adjacency[i].len() + usize::from(self.convention == Convention::Closed)
    }

    /// Realised neighbourhood `N_i`, sorted.
    pub fn neighbourhood(&self, i: usize) -> Vec<usize> {
        let mut nb = self.adjacency[i].clone();
        if self.convention == Convention::Closed {
            nb.push(i);
            nb.sort_unstable();
        }
        nb
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[i].binary_search(&j).is_ok()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Undirected edges `(i, j)` with `i < j`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(i, nb)| nb.iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
    }

    /// No edge joins units of different blocks.
    pub fn respects(&self, partition: &BlockPartition) -> bool {
        self.n() == partition.n()
            && self
                .edges()
                .all(|(i, j)| partition.block_of(i) == partition.block_of(j))
    }

    /// One `i j` line per undirected edge (`i < j`), 0-based.
    pub fn write_edge_list<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        for (i, j) in self.edges() {
            writeln!(out, "{i} {j}")?;
        }
        Ok(())
    }
}

/// Independent within-block edges with probability `p_edge`; no cross-block edges.
pub fn sample_blockwise_er<R: Rng + ?Sized>(
    partition: &BlockPartition,
    p_edge: f64,
    convention: Convention,
    rng: &mut R,
) -> Result<InterferenceGraph> {
    if !(0.0..=1.0).contains(&p_edge) {
        return Err(Error::Domain(format!(
            "edge probability {p_edge} outside [0, 1]"
        )));
    }
    let mut graph = InterferenceGraph::empty(partition.n(), convention);
    for block in partition.blocks() {
        for i in block.clone() {
            for j in (i + 1)..block.end {
                if rng.random_bool(p_edge) {
                    graph.adjacency[i].push(j);
                    graph.adjacency[j].push(i);
                }
            }
        }
    }
    // Lower partners arrive first, in order, then higher ones: lists are sorted.
    debug_assert!(graph.adjacency.iter().all(|nb| nb.is_sorted()));
    Ok(graph)
}

/// `E[1 / |N_i|]` for a closed neighbourhood in an Erdős–Rényi block of size
/// `m` with edge probability `p`: `(1 - (1 - p)^m) / (m p)`.
pub fn expected_inverse_neighbourhood(m: usize, p: f64) -> Result<f64> {
    if m == 0 {
        return Err(Error::InvalidDimension(
            "block size must be at least 1".into(),
        ));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!(
            "edge probability {p} outside (0, 1)"
        )));
    }
    let m_f = m as f64;
    // 1 - (1-p)^m without cancellation for small p.
    let numerator = -(m_f * (-p).ln_1p()).exp_m1();
    Ok(numerator / (m_f * p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    /// Direct binomial sum `sum_k P(X = k) / (1 + k)`, X ~ Bin(m - 1, p).
    fn inverse_degree_by_summation(m: usize, p: f64) -> f64 {
        let trials = m - 1;
        let mut coef = 1.0f64;
        let mut total = 0.0;
        for k in 0..=trials {
            if k > 0 {
                coef *= (trials - k + 1) as f64 / k as f64;
            }
            total += coef * p.powi(k as i32) * (1.0 - p).powi((trials - k) as i32) / (k + 1) as f64;
        }
        total
    }

    #[test]
    fn blocks_from_rate_examples() {
        let p = BlockPartition::from_rate(100, 0.0).unwrap();
        assert_eq!(p.num_blocks(), 100);
        assert!(p.block_sizes().iter().all(|&m| m == 1));

        let p = BlockPartition::from_rate(100, 0.1).unwrap();
        assert_eq!(p.num_blocks(), 63);
        assert_eq!(p.block_sizes().iter().filter(|&&m| m == 2).count(), 37);
        assert_eq!(p.block_sizes().iter().filter(|&&m| m == 1).count(), 26);
        assert_eq!(&p.block_sizes()[..37], &[2; 37]);

        let p = BlockPartition::from_rate(8, 0.5).unwrap();
        assert_eq!(p.block_sizes(), &[4, 4]);
        assert_eq!(p.block_of(3), 0);
        assert_eq!(p.block_of(4), 1);

        assert!(matches!(
            BlockPartition::from_rate(10, 1.0),
            Err(Error::InvalidRate(_))
        ));
        assert!(matches!(
            BlockPartition::from_rate(10, -0.1),
            Err(Error::InvalidRate(_))
        ));
        assert!(BlockPartition::from_rate(0, 0.1).is_err());
    }

    #[test]
    fn block_count_integer_powers() {
        assert_eq!(block_count(100, 0.5), 10);
        assert_eq!(block_count(1000, 0.0), 1000);
        assert_eq!(block_count(1000, 0.2), 251);
        assert_eq!(block_count(1, 0.3), 1);
    }

    #[test]
    fn depgraph_from_blocks_examples() {
        let g = DependencyGraph::from_blocks(&BlockPartition::singletons(100).unwrap());
        assert_eq!(g.pair_set(), &PairSet::diagonal(100));
        assert_eq!(g.neighbourhood(7), &[7]);

        let g = DependencyGraph::from_blocks(&BlockPartition::from_sizes(vec![3]).unwrap());
        assert_eq!(g.pair_set().len(), 9);

        let g = DependencyGraph::from_blocks(&BlockPartition::from_rate(100, 0.1).unwrap());
        let (max, mean) = g.stats();
        assert_eq!(max, 2);
        assert!((mean - 1.74).abs() < 1e-12);
    }

    #[test]
    fn graph_stats_examples() {
        let g = DependencyGraph::from_blocks(&BlockPartition::singletons(50).unwrap());
        assert_eq!(g.stats(), (1, 1.0));
        let g = DependencyGraph::from_blocks(&BlockPartition::from_sizes(vec![12]).unwrap());
        assert_eq!(g.stats(), (12, 12.0));
    }

    #[test]
    fn from_blocks_matches_validated_constructor() {
        let part = BlockPartition::from_sizes(vec![3, 1, 2]).unwrap();
        let direct = DependencyGraph::from_blocks(&part);
        let rebuilt = DependencyGraph::from_neighbourhoods(
            (0..6).map(|i| direct.neighbourhood(i).to_vec()).collect(),
        )
        .unwrap();
        assert_eq!(direct, rebuilt);
    }

    #[test]
    fn neighbourhood_validation() {
        assert!(DependencyGraph::from_neighbourhoods(vec![vec![1], vec![0, 1]]).is_err());
        assert!(DependencyGraph::from_neighbourhoods(vec![vec![0, 1], vec![1]]).is_err());
        assert!(DependencyGraph::from_neighbourhoods(vec![vec![0, 1], vec![0, 1]]).is_ok());
    }

    #[test]
    fn pair_set_subset() {
        let full = PairSet::new(vec![(0, 0), (0, 1), (1, 0), (1, 1)]);
        let diag = PairSet::diagonal(2);
        assert!(diag.is_subset_of(&full));
        assert!(!full.is_subset_of(&diag));
        assert!(PairSet::default().is_subset_of(&diag));
        assert!(!PairSet::new(vec![(2, 2)]).is_subset_of(&full));
        assert!(full.is_symmetric());
        assert!(!PairSet::new(vec![(0, 1)]).is_symmetric());
    }

    #[test]
    fn er_extremes() {
        let part = BlockPartition::from_sizes(vec![3, 2, 1]).unwrap();
        let mut rng = seeded(3);
        let g = sample_blockwise_er(&part, 0.0, Convention::Closed, &mut rng).unwrap();
        for i in 0..6 {
            assert_eq!(g.neighbourhood(i), vec![i]);
        }
        let g = sample_blockwise_er(&part, 1.0, Convention::Closed, &mut rng).unwrap();
        for i in 0..6 {
            let block: Vec<usize> = part.units(part.block_of(i)).collect();
            assert_eq!(g.neighbourhood(i), block);
        }
        assert!(g.respects(&part));
        let open = sample_blockwise_er(&part, 1.0, Convention::Open, &mut rng).unwrap();
        assert_eq!(open.neighbourhood(5), Vec::<usize>::new());
        assert_eq!(open.neighbourhood_size(0), 2);
        assert!(sample_blockwise_er(&part, 1.5, Convention::Closed, &mut rng).is_err());
    }

    #[test]
    fn er_edge_frequency() {
        let part = BlockPartition::from_sizes(vec![2; 10]).unwrap();
        let mut rng = seeded(17);
        let draws = 100_000;
        let mut edges = 0usize;
        for _ in 0..draws / 10 {
            edges += sample_blockwise_er(&part, 0.1, Convention::Closed, &mut rng)
                .unwrap()
                .edge_count();
        }
        let trials = (draws / 10 * 10) as f64;
        let freq = edges as f64 / trials;
        let se = (0.1f64 * 0.9 / trials).sqrt();
        assert!((freq - 0.1).abs() < 3.0 * se, "freq {freq}");
    }

    #[test]
    fn er_graph_is_symmetric_and_block_respecting() {
        let part = BlockPartition::from_rate(200, 0.3).unwrap();
        let mut rng = seeded(8);
        let g = sample_blockwise_er(&part, 0.4, Convention::Closed, &mut rng).unwrap();
        assert!(g.respects(&part));
        for i in 0..g.n() {
            for &j in g.adjacent(i) {
                assert!(g.has_edge(j, i));
                assert_ne!(i, j);
            }
        }
    }

    #[test]
    fn inverse_degree_closed_form() {
        assert_eq!(expected_inverse_neighbourhood(1, 0.3).unwrap(), 1.0);
        assert!((expected_inverse_neighbourhood(2, 0.5).unwrap() - 0.75).abs() < 1e-15);
        for m in [1, 2, 3, 5, 10, 25] {
            for p in [1e-6, 0.1, 0.5, 0.9] {
                let closed = expected_inverse_neighbourhood(m, p).unwrap();
                let summed = inverse_degree_by_summation(m, p);
                assert!((closed - summed).abs() < 1e-12, "m={m} p={p}");
            }
        }
        assert!(expected_inverse_neighbourhood(3, 0.0).is_err());
        assert!(expected_inverse_neighbourhood(3, 1.0).is_err());
        assert!(expected_inverse_neighbourhood(0, 0.5).is_err());
    }

    #[test]
    fn edge_list_export() {
        let part = BlockPartition::from_sizes(vec![3]).unwrap();
        let mut rng = seeded(1);
        let g = sample_blockwise_er(&part, 1.0, Convention::Closed, &mut rng).unwrap();
        let mut buf = Vec::new();
        g.write_edge_list(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "0 1\n0 2\n1 2\n");

        let dep = DependencyGraph::from_blocks(&BlockPartition::from_sizes(vec![1, 2]).unwrap());
        let mut buf = Vec::new();
        dep.write_edge_list(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "0 0\n1 1\n1 2\n2 1\n2 2\n");
    }
}
