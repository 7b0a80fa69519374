//! Spatial adjacency and row-normalized weight matrices.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::numeric;

/// Undirected binary adjacency between `n_sites` sites.
///
/// Edges are stored once as `(a, b)` with `a < b`, sorted and deduplicated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdjacencyList {
    n_sites: usize,
    edges: Vec<(usize, usize)>,
}

impl AdjacencyList {
    /// Builds an adjacency list from index pairs in either orientation.
    /// Repeated pairs collapse to a single edge.
    pub fn new<I>(n_sites: usize, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut edges = Vec::new();
        for (a, b) in pairs {
            for index in [a, b] {
                if index >= n_sites {
                    return Err(Error::SiteOutOfRange { index, n_sites });
                }
            }
            if a == b {
                return Err(Error::SelfLoop(a.to_string()));
            }
            edges.push((a.min(b), a.max(b)));
        }
        edges.sort_unstable();
        edges.dedup();
        Ok(Self { n_sites, edges })
    }

    /// Builds an adjacency list from edges between string identifiers.
    ///
    /// Identifiers are indexed in sorted order so that the mapping does not
    /// depend on record order.
    pub fn from_labeled_edges<I, S>(pairs: I) -> Result<LabeledAdjacency>
    where
        I: IntoIterator<Item = (S, S)>,
        S: AsRef<str>,
    {
        let mut raw = Vec::new();
        let mut ids: BTreeMap<String, usize> = BTreeMap::new();
        for (a, b) in pairs {
            let (a, b) = (a.as_ref(), b.as_ref());
            if a == b {
                return Err(Error::SelfLoop(a.to_string()));
            }
            ids.entry(a.to_string()).or_insert(0);
            ids.entry(b.to_string()).or_insert(0);
            raw.push((a.to_string(), b.to_string()));
        }
        if raw.is_empty() {
            return Err(Error::EmptyAdjacency);
        }
        for (index, slot) in ids.values_mut().enumerate() {
            *slot = index;
        }
        let adjacency = AdjacencyList::new(ids.len(), raw.iter().map(|(a, b)| (ids[a], ids[b])))?;
        Ok(LabeledAdjacency {
            adjacency,
            labels: ids.into_keys().collect(),
        })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    /// Unordered edges, each as `(a, b)` with `a < b`.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn contains(&self, a: usize, b: usize) -> bool {
        self.edges.binary_search(&(a.min(b), a.max(b))).is_ok()
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n_sites];
        for &(a, b) in &self.edges {
            deg[a] += 1;
            deg[b] += 1;
        }
        deg
    }

    /// Sorted neighbor lists.
    pub fn neighbor_lists(&self) -> Vec<Vec<usize>> {
        let mut lists = vec![Vec::new(); self.n_sites];
        for &(a, b) in &self.edges {
            lists[a].push(b);
            lists[b].push(a);
        }
        for l in &mut lists {
            l.sort_unstable();
        }
        lists
    }

    /// Relabels sites through `map[old] = new`; `map` must be a permutation.
    pub fn relabel(&self, map: &[usize]) -> Result<Self> {
        if map.len() != self.n_sites {
            return Err(Error::LengthMismatch {
                expected: self.n_sites,
                actual: map.len(),
            });
        }
        Self::new(self.n_sites, self.edges.iter().map(|&(a, b)| (map[a], map[b])))
    }
}

/// Adjacency plus the sorted identifier table: `labels[i]` names site `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledAdjacency {
    pub adjacency: AdjacencyList,
    pub labels: Vec<String>,
}

/// Queen contiguity on a `rows x cols` grid with row-major site indices.
pub fn build_grid_queen(rows: usize, cols: usize) -> Result<AdjacencyList> {
    if rows == 0 || cols == 0 || rows * cols < 2 {
        return Err(Error::DegenerateGrid { rows, cols });
    }
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let here = r * cols + c;
            // Forward half-neighbourhood: E, SW, S, SE.
            if c + 1 < cols {
                edges.push((here, here + 1));
            }
            if r + 1 < rows {
                let below = here + cols;
                edges.push((here, below));
                if c > 0 {
                    edges.push((here, below - 1));
                }
                if c + 1 < cols {
                    edges.push((here, below + 1));
                }
            }
        }
    }
    AdjacencyList::new(rows * cols, edges)
}

/// What to do with sites that have no neighbours.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IsolatedSites {
    #[default]
    Reject,
    /// Keep an all-zero row; the site then drops out of Moran's numerator.
    Allow,
}

/// Sparse row-normalized weights `w_ij = a_ij / sum_j a_ij`.
///
/// Out-edges (rows) and in-edges (columns) are both indexed because the
/// normalized matrix is not symmetric and left and right lags need each.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialWeights {
    n_sites: usize,
    row_offsets: Vec<usize>,
    row_targets: Vec<usize>,
    row_weights: Vec<f64>,
    col_offsets: Vec<usize>,
    col_sources: Vec<usize>,
    col_weights: Vec<f64>,
    row_sums: Vec<f64>,
    col_sums: Vec<f64>,
    total_weight: f64,
    isolated: usize,
    adjacency: AdjacencyList,
}

/// Row-normalizes `adj`, rejecting isolated sites.
pub fn row_normalize(adj: &AdjacencyList) -> Result<SpatialWeights> {
    row_normalize_with(adj, IsolatedSites::Reject)
}

pub fn row_normalize_with(adj: &AdjacencyList, isolated: IsolatedSites) -> Result<SpatialWeights> {
    if adj.edges.is_empty() {
        return Err(Error::EmptyAdjacency);
    }
    let n = adj.n_sites;
    let lists = adj.neighbor_lists();
    if isolated == IsolatedSites::Reject {
        if let Some(site) = lists.iter().position(Vec::is_empty) {
            return Err(Error::IsolatedSite(site));
        }
    }

    let mut row_offsets = Vec::with_capacity(n + 1);
    let mut row_targets = Vec::with_capacity(2 * adj.edges.len());
    let mut row_weights = Vec::with_capacity(2 * adj.edges.len());
    let mut row_sums = vec![0.0; n];
    let mut col_sums = vec![0.0; n];
    row_offsets.push(0);
    for (i, list) in lists.iter().enumerate() {
        if !list.is_empty() {
            let w = 1.0 / list.len() as f64;
            for &j in list {
                row_targets.push(j);
                row_weights.push(w);
                col_sums[j] += w;
            }
            row_sums[i] = numeric::sum(core::iter::repeat_n(w, list.len()));
        }
        row_offsets.push(row_targets.len());
    }

    // Transpose into column-major in-edge lists; sources come out sorted.
    let mut col_counts = vec![0usize; n];
    for &j in &row_targets {
        col_counts[j] += 1;
    }
    let mut col_offsets = Vec::with_capacity(n + 1);
    col_offsets.push(0);
    for c in &col_counts {
        col_offsets.push(col_offsets.last().unwrap() + c);
    }
    let mut fill = col_offsets[..n].to_vec();
    let mut col_sources = vec![0; row_targets.len()];
    let mut col_weights = vec![0.0; row_targets.len()];
    for i in 0..n {
        for k in row_offsets[i]..row_offsets[i + 1] {
            let j = row_targets[k];
            col_sources[fill[j]] = i;
            col_weights[fill[j]] = row_weights[k];
            fill[j] += 1;
        }
    }

    let total_weight = numeric::sum(row_sums.iter().copied());
    Ok(SpatialWeights {
        n_sites: n,
        row_offsets,
        row_targets,
        row_weights,
        col_offsets,
        col_sources,
        col_weights,
        row_sums,
        col_sums,
        total_weight,
        isolated: lists.iter().filter(|l| l.is_empty()).count(),
        adjacency: adj.clone(),
    })
}

impl SpatialWeights {
    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    /// `|W| = sum_ij w_ij`.
    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }

    pub fn isolated_sites(&self) -> usize {
        self.isolated
    }

    pub fn adjacency(&self) -> &AdjacencyList {
        &self.adjacency
    }

    /// Out-neighbours `j` of `i` with weights `w_ij`, sorted by `j`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_offsets[i]..self.row_offsets[i + 1];
        (&self.row_targets[r.clone()], &self.row_weights[r])
    }

    /// In-neighbours `i` of `j` with weights `w_ij`, sorted by `i`.
    pub fn column(&self, j: usize) -> (&[usize], &[f64]) {
        let r = self.col_offsets[j]..self.col_offsets[j + 1];
        (&self.col_sources[r.clone()], &self.col_weights[r])
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let (targets, weights) = self.row(i);
        match targets.binary_search(&j) {
            Ok(k) => weights[k],
            Err(_) => 0.0,
        }
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.row_sums[i]
    }

    pub fn col_sum(&self, j: usize) -> f64 {
        self.col_sums[j]
    }

    pub fn row_sums(&self) -> &[f64] {
        &self.row_sums
    }

    pub fn col_sums(&self) -> &[f64] {
        &self.col_sums
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.edges.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force_queen_edges(rows: usize, cols: usize) -> usize {
        let n = rows * cols;
        let mut count = 0;
        for a in 0..n {
            for b in (a + 1)..n {
                let (ra, ca) = (a / cols, a % cols);
                let (rb, cb) = (b / cols, b % cols);
                if ra.abs_diff(rb) <= 1 && ca.abs_diff(cb) <= 1 {
                    count += 1;
                }
            }
        }
        count
    }

    #[test]
    fn queen_edge_count_matches_brute_force_and_formula() {
        for rows in 1..=10 {
            for cols in 1..=10 {
                if rows * cols < 2 {
                    continue;
                }
                let adj = build_grid_queen(rows, cols).unwrap();
                let brute = brute_force_queen_edges(rows, cols);
                assert_eq!(adj.edges().len(), brute, "{rows}x{cols}");
                if rows >= 2 && cols >= 2 {
                    assert_eq!(brute, 4 * rows * cols - 3 * rows - 3 * cols + 2);
                }
                for &(a, b) in adj.edges() {
                    assert!(adj.contains(b, a));
                }
            }
        }
    }

    #[test]
    fn small_grid_degrees() {
        assert_eq!(build_grid_queen(2, 2).unwrap().degrees(), vec![3; 4]);
        assert_eq!(build_grid_queen(3, 3).unwrap().degrees()[4], 8);
        assert_eq!(build_grid_queen(1, 5).unwrap().degrees(), vec![1, 2, 2, 2, 1]);
        assert_eq!(
            build_grid_queen(1, 1),
            Err(Error::DegenerateGrid { rows: 1, cols: 1 })
        );
        assert!(build_grid_queen(0, 4).is_err());
    }

    #[test]
    fn labeled_edges_dedup_and_sort() {
        let l = AdjacencyList::from_labeled_edges([("B", "A"), ("A", "B"), ("B", "C")]).unwrap();
        assert_eq!(l.labels, ["A", "B", "C"]);
        assert_eq!(l.adjacency.n_sites(), 3);
        assert_eq!(l.adjacency.edges(), &[(0, 1), (1, 2)]);

        let none: [(&str, &str); 0] = [];
        assert_eq!(AdjacencyList::from_labeled_edges(none), Err(Error::EmptyAdjacency));
        assert!(matches!(
            AdjacencyList::from_labeled_edges([("A", "A")]),
            Err(Error::SelfLoop(_))
        ));
    }

    #[test]
    fn index_edges_validated() {
        assert!(matches!(AdjacencyList::new(3, [(0, 3)]), Err(Error::SiteOutOfRange { .. })));
        assert!(matches!(AdjacencyList::new(3, [(1, 1)]), Err(Error::SelfLoop(_))));
    }

    #[test]
    fn normalization_examples() {
        let w = row_normalize(&build_grid_queen(3, 3).unwrap()).unwrap();
        let (targets, weights) = w.row(0);
        assert_eq!(targets, &[1, 3, 4]);
        assert!(weights.iter().all(|&x| x == 1.0 / 3.0));

        let w = row_normalize(&build_grid_queen(2, 2).unwrap()).unwrap();
        assert!((w.total_weight() - 4.0).abs() < 1e-12);

        let path = AdjacencyList::new(3, [(0, 1), (1, 2)]).unwrap();
        let w = row_normalize(&path).unwrap();
        assert_eq!(w.weight(1, 0), 0.5);
        assert_eq!(w.weight(1, 2), 0.5);
        assert_eq!(w.weight(0, 1), 1.0);
        assert_eq!(w.weight(0, 2), 0.0);
        assert_eq!(w.col_sum(1), 2.0);
        let (sources, weights) = w.column(1);
        assert_eq!(sources, &[0, 2]);
        assert_eq!(weights, &[1.0, 1.0]);
    }

    #[test]
    fn isolated_sites_rejected_unless_allowed() {
        let adj = AdjacencyList::new(4, [(0, 1), (1, 2)]).unwrap();
        assert_eq!(row_normalize(&adj), Err(Error::IsolatedSite(3)));
        let w = row_normalize_with(&adj, IsolatedSites::Allow).unwrap();
        assert_eq!(w.row(3).0.len(), 0);
        assert_eq!(w.isolated_sites(), 1);
        assert!((w.total_weight() - 3.0).abs() < 1e-12);
        let empty = AdjacencyList::new(2, []).unwrap();
        assert_eq!(row_normalize(&empty), Err(Error::EmptyAdjacency));
    }
}
