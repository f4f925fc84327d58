//! Undirected graphs, GCN normalization, and the exact-distance order
//! matrices that separate a node's neighbors into disjoint shells.
//!
//! `OrderMatrix(k)` marks pairs whose shortest-path distance is exactly `k`,
//! so different orders never share an entry. `PowerSupport(k)` marks pairs
//! joined by *some* walk of length `k`; those supports overlap whenever the
//! graph has cycles, which is what the distance construction avoids.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Symmetric, loop-free, duplicate-free adjacency in CSR form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseGraph {
    n: usize,
    edge_count: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
}

/// What `build_graph` discarded on the way in.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BuildReport {
    pub input_pairs: usize,
    pub duplicates: usize,
    pub self_loops: usize,
}

impl SparseGraph {
    /// Symmetrizes, drops self-loops and duplicates.
    pub fn build(n: usize, edges: &[(usize, usize)]) -> Result<(Self, BuildReport)> {
        if n == 0 {
            return Err(Error::EmptyGraph);
        }
        let mut report = BuildReport {
            input_pairs: edges.len(),
            ..BuildReport::default()
        };
        let mut pairs = Vec::with_capacity(edges.len());
        for &(u, v) in edges {
            for index in [u, v] {
                if index >= n {
                    return Err(Error::NodeOutOfRange { index, n });
                }
            }
            if u == v {
                report.self_loops += 1;
            } else {
                pairs.push((u.min(v), u.max(v)));
            }
        }
        pairs.sort_unstable();
        let before = pairs.len();
        pairs.dedup();
        report.duplicates = before - pairs.len();

        let mut deg = vec![0usize; n];
        for &(u, v) in &pairs {
            deg[u] += 1;
            deg[v] += 1;
        }
        let mut indptr = vec![0usize; n + 1];
        for i in 0..n {
            indptr[i + 1] = indptr[i] + deg[i];
        }
        let mut fill = indptr.clone();
        let mut indices = vec![0usize; indptr[n]];
        for &(u, v) in &pairs {
            indices[fill[u]] = v;
            fill[u] += 1;
            indices[fill[v]] = u;
            fill[v] += 1;
        }
        for i in 0..n {
            indices[indptr[i]..indptr[i + 1]].sort_unstable();
        }
        let graph = SparseGraph {
            n,
            edge_count: pairs.len(),
            indptr,
            indices,
        };
        Ok((graph, report))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Undirected edge count.
    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn degree(&self, i: usize) -> usize {
        self.indptr[i + 1] - self.indptr[i]
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.n).map(|i| self.degree(i)).collect()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.indices[self.indptr[i]..self.indptr[i + 1]]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.neighbors(u).binary_search(&v).is_ok()
    }

    /// Edges as `(u, v)` with `u < v`, in sorted order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .filter(move |&&v| u < v)
                .map(move |&v| (u, v))
        })
    }

    /// The adjacency as an entry set (both directions).
    pub fn adjacency_entries(&self) -> EntrySet {
        EntrySet::from_rows(
            self.n,
            (0..self.n)
                .map(|i| self.neighbors(i).iter().map(|&j| j as u32).collect())
                .collect(),
        )
    }

    /// Adjacency with unit weights.
    pub fn adjacency_matrix(&self) -> CsrMatrix {
        CsrMatrix::new(
            self.n,
            self.n,
            self.indptr.clone(),
            self.indices.clone(),
            vec![1.0; self.indices.len()],
        )
        .expect("graph CSR is well formed")
    }
}

/// Convenience wrapper matching the pipeline's naming.
pub fn build_graph(edges: &[(usize, usize)], n: usize) -> Result<SparseGraph> {
    SparseGraph::build(n, edges).map(|(g, _)| g)
}

/// Sorted sparse 0/1 pattern over an `n × n` matrix, one sorted row per node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntrySet {
    n: usize,
    indptr: Vec<usize>,
    indices: Vec<u32>,
}

impl EntrySet {
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            indptr: vec![0; n + 1],
            indices: Vec::new(),
        }
    }

    /// Rows must already be sorted and deduplicated.
    pub fn from_rows(n: usize, rows: Vec<Vec<u32>>) -> Self {
        debug_assert_eq!(rows.len(), n);
        let mut indptr = Vec::with_capacity(n + 1);
        indptr.push(0);
        let total = rows.iter().map(Vec::len).sum();
        let mut indices = Vec::with_capacity(total);
        for row in rows {
            debug_assert!(row.windows(2).all(|w| w[0] < w[1]));
            indices.extend_from_slice(&row);
            indptr.push(indices.len());
        }
        Self { n, indptr, indices }
    }

    /// Builds from arbitrary pairs; duplicates collapse.
    pub fn from_pairs(n: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut rows: Vec<Vec<u32>> = vec![Vec::new(); n];
        for (i, j) in pairs {
            if i >= n || j >= n {
                return Err(Error::NodeOutOfRange { index: i.max(j), n });
            }
            rows[i].push(j as u32);
        }
        for row in &mut rows {
            row.sort_unstable();
            row.dedup();
        }
        Ok(Self::from_rows(n, rows))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn row(&self, i: usize) -> &[u32] {
        &self.indices[self.indptr[i]..self.indptr[i + 1]]
    }

    pub fn row_len(&self, i: usize) -> usize {
        self.indptr[i + 1] - self.indptr[i]
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        i < self.n && self.row(i).binary_search(&(j as u32)).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |i| self.row(i).iter().map(move |&j| (i, j as usize)))
    }

    pub fn is_symmetric(&self) -> bool {
        self.iter().all(|(i, j)| self.contains(j, i))
    }

    /// `true` when every entry of `self` is also in `other`.
    pub fn is_subset_of(&self, other: &EntrySet) -> bool {
        self.n == other.n && self.iter().all(|(i, j)| other.contains(i, j))
    }
}

/// Pairs at shortest-path distance exactly `k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrderMatrix {
    pub k: usize,
    pub entries: EntrySet,
}

/// Off-diagonal support of the matrix power `A^k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PowerSupport {
    pub k: usize,
    pub entries: EntrySet,
}

/// Normalized propagation matrix `D^(-1/2) (M + I) D^(-1/2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityMatrix(CsrMatrix);

impl AffinityMatrix {
    /// Normalizes a nonnegative square matrix after adding the identity. The
    /// degree of row `i` is the row sum of `M + I`.
    pub fn from_weights(weights: &CsrMatrix) -> Result<Self> {
        let n = weights.nrows();
        if weights.ncols() != n {
            return Err(Error::Dimension("filter must be square".into()));
        }
        let mut triplets = Vec::with_capacity(weights.nnz() + n);
        for (i, j, w) in weights.triplets() {
            if w < 0.0 || !w.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "filter entry ({i}, {j}) = {w} is not a nonnegative number"
                )));
            }
            if i != j && w != 0.0 {
                triplets.push((i, j, w));
            }
        }
        // diagonal: existing diagonal weight plus the self-loop
        for i in 0..n {
            triplets.push((i, i, 1.0 + weights.get(i, i)));
        }
        let with_loops = CsrMatrix::from_triplets(n, n, triplets)?;
        let degree = with_loops.row_sums();
        let mut indptr = Vec::with_capacity(n + 1);
        indptr.push(0);
        let mut indices = Vec::with_capacity(with_loops.nnz());
        let mut values = Vec::with_capacity(with_loops.nnz());
        for i in 0..n {
            let (cols, vals) = with_loops.row(i);
            for (&j, &w) in cols.iter().zip(vals) {
                indices.push(j);
                values.push(w / (degree[i] * degree[j]).sqrt());
            }
            indptr.push(indices.len());
        }
        Ok(Self(CsrMatrix::new(n, n, indptr, indices, values)?))
    }

    pub fn as_csr(&self) -> &CsrMatrix {
        &self.0
    }

    pub fn into_csr(self) -> CsrMatrix {
        self.0
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0.get(i, j)
    }
}

/// Plain GCN propagation matrix `D̃^(-1/2)(A + I)D̃^(-1/2)`.
pub fn affinity(g: &SparseGraph) -> AffinityMatrix {
    AffinityMatrix::from_weights(&g.adjacency_matrix()).expect("adjacency is a valid filter")
}

/// Order matrices `k = 1..=max_order` by depth-truncated BFS from every node.
pub fn order_matrices(g: &SparseGraph, max_order: usize) -> Result<Vec<OrderMatrix>> {
    if max_order == 0 {
        return Err(Error::InvalidArgument("max order must be at least 1".into()));
    }
    let n = g.n();
    let shells: Vec<Vec<Vec<u32>>> = (0..n)
        .into_par_iter()
        .map_init(
            || vec![usize::MAX; n],
            |seen, source| bfs_shells(g, source, max_order, seen),
        )
        .collect();
    let mut per_order: Vec<Vec<Vec<u32>>> = (0..max_order).map(|_| Vec::with_capacity(n)).collect();
    for node_shells in shells {
        for (k, shell) in node_shells.into_iter().enumerate() {
            per_order[k].push(shell);
        }
    }
    Ok(per_order
        .into_iter()
        .enumerate()
        .map(|(k, rows)| OrderMatrix {
            k: k + 1,
            entries: EntrySet::from_rows(n, rows),
        })
        .collect())
}

/// Sorted distance shells `1..=depth` around `source`. `seen` is scratch space
/// that must hold `usize::MAX` everywhere on entry and is restored on exit.
fn bfs_shells(g: &SparseGraph, source: usize, depth: usize, seen: &mut [usize]) -> Vec<Vec<u32>> {
    let mut shells: Vec<Vec<u32>> = Vec::with_capacity(depth);
    let mut touched = vec![source];
    seen[source] = 0;
    let mut frontier = vec![source];
    for k in 1..=depth {
        let mut next = Vec::new();
        for &u in &frontier {
            for &v in g.neighbors(u) {
                if seen[v] == usize::MAX {
                    seen[v] = k;
                    next.push(v);
                    touched.push(v);
                }
            }
        }
        let mut shell: Vec<u32> = next.iter().map(|&v| v as u32).collect();
        shell.sort_unstable();
        shells.push(shell);
        frontier = next;
    }
    for v in touched {
        seen[v] = usize::MAX;
    }
    shells
}

/// Support of `A^k` without the diagonal, via repeated boolean products.
pub fn power_support(g: &SparseGraph, k: usize) -> Result<PowerSupport> {
    Ok(power_supports(g, k)?.pop().expect("k >= 1"))
}

/// Supports of `A^1 ..= A^max_power`, sharing the intermediate products.
pub fn power_supports(g: &SparseGraph, max_power: usize) -> Result<Vec<PowerSupport>> {
    if max_power == 0 {
        return Err(Error::InvalidArgument("power must be at least 1".into()));
    }
    let n = g.n();
    // walk-reachability including the diagonal; the diagonal is only dropped
    // from what is returned
    let mut reach: Vec<Vec<u32>> = (0..n)
        .map(|i| g.neighbors(i).iter().map(|&j| j as u32).collect())
        .collect();
    let mut out = Vec::with_capacity(max_power);
    for k in 1..=max_power {
        if k > 1 {
            reach = reach
                .par_iter()
                .map_init(
                    || vec![false; n],
                    |mark, row| {
                        let mut next = Vec::new();
                        for &m in row {
                            for &j in g.neighbors(m as usize) {
                                if !mark[j] {
                                    mark[j] = true;
                                    next.push(j as u32);
                                }
                            }
                        }
                        for &j in &next {
                            mark[j as usize] = false;
                        }
                        next.sort_unstable();
                        next
                    },
                )
                .collect();
        }
        let rows = reach
            .iter()
            .enumerate()
            .map(|(i, row)| row.iter().copied().filter(|&j| j as usize != i).collect())
            .collect();
        out.push(PowerSupport {
            k,
            entries: EntrySet::from_rows(n, rows),
        });
    }
    Ok(out)
}

/// `true` iff the two patterns share no entry (their Hadamard product is 0).
pub fn hadamard_disjoint(a: &EntrySet, b: &EntrySet) -> Result<bool> {
    if a.n() != b.n() {
        return Err(Error::Dimension(format!(
            "entry sets of dimension {} and {}",
            a.n(),
            b.n()
        )));
    }
    Ok((0..a.n()).all(|i| sorted_disjoint(a.row(i), b.row(i))))
}

fn sorted_disjoint(a: &[u32], b: &[u32]) -> bool {
    let (mut p, mut q) = (0, 0);
    while p < a.len() && q < b.len() {
        match a[p].cmp(&b[q]) {
            std::cmp::Ordering::Less => p += 1,
            std::cmp::Ordering::Greater => q += 1,
            std::cmp::Ordering::Equal => return false,
        }
    }
    true
}
