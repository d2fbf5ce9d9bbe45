//! Undirected weighted graphs and the matrices derived from them.

use std::collections::VecDeque;

use log::warn;

use crate::dense::{dot, DenseMatrix};
use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Undirected graph with non-negative edge weights and no self-loops.
///
/// The adjacency is stored in both directions with sorted neighbor lists.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    adj: CsrMatrix,
    degrees: Vec<f64>,
}

/// What happened while symmetrizing an edge list.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EdgeListStats {
    /// Edges as listed in the input.
    pub listed: usize,
    /// Listed edges whose unordered pair had already been seen.
    pub duplicates: usize,
    /// Listed self-loops, which are dropped.
    pub self_loops: usize,
}

impl Graph {
    /// Graph from an undirected edge list; each pair may be listed in either
    /// orientation. Repeated pairs have their weights summed.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        Self::from_edges_with_stats(n, edges).map(|(g, _)| g)
    }

    pub fn from_edges_with_stats(
        n: usize,
        edges: &[(usize, usize, f64)],
    ) -> Result<(Self, EdgeListStats)> {
        let mut stats = EdgeListStats {
            listed: edges.len(),
            ..Default::default()
        };
        let mut pairs = Vec::with_capacity(edges.len());
        for &(u, v, w) in edges {
            if u >= n || v >= n {
                return Err(Error::Data(format!(
                    "edge ({u}, {v}) references a node outside 0..{n}"
                )));
            }
            if !w.is_finite() || w < 0.0 {
                return Err(Error::Data(format!(
                    "edge ({u}, {v}) has invalid weight {w}"
                )));
            }
            if u == v {
                stats.self_loops += 1;
                continue;
            }
            pairs.push((u.min(v), u.max(v), w));
        }
        pairs.sort_unstable_by_key(|a| (a.0, a.1));
        stats.duplicates = pairs
            .windows(2)
            .filter(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1))
            .count();
        if stats.duplicates > 0 {
            warn!(
                "collapsed {} duplicate edges (weights summed)",
                stats.duplicates
            );
        }
        if stats.self_loops > 0 {
            warn!("dropped {} self-loops", stats.self_loops);
        }
        let trip = pairs.iter().flat_map(|&(u, v, w)| [(u, v, w), (v, u, w)]);
        let adj = CsrMatrix::from_triplets(n, n, trip)?;
        Ok((Self::from_symmetric_unchecked(adj), stats))
    }

    /// Graph from a symmetric non-negative adjacency matrix. Diagonal entries
    /// (self-loop weight, e.g. on coarse graphs) are discarded.
    pub fn from_adjacency(adj: &CsrMatrix) -> Result<Self> {
        if adj.rows() != adj.cols() {
            return Err(Error::Shape(format!(
                "adjacency must be square, got {}x{}",
                adj.rows(),
                adj.cols()
            )));
        }
        if !adj.is_symmetric(0.0) {
            return Err(Error::Data("adjacency is not symmetric".into()));
        }
        if adj.values().iter().any(|&v| v < 0.0) {
            return Err(Error::Data("adjacency has negative weights".into()));
        }
        let n = adj.rows();
        let off =
            CsrMatrix::from_triplets(n, n, adj.triplets().filter(|&(i, j, v)| i != j && v != 0.0))?;
        Ok(Self::from_symmetric_unchecked(off))
    }

    fn from_symmetric_unchecked(adj: CsrMatrix) -> Self {
        let degrees = adj.row_sums();
        Self { adj, degrees }
    }

    pub fn n(&self) -> usize {
        self.adj.rows()
    }

    /// Number of undirected edges.
    pub fn num_edges(&self) -> usize {
        self.adj.nnz() / 2
    }

    pub fn adjacency(&self) -> &CsrMatrix {
        &self.adj
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    pub fn degree(&self, v: usize) -> f64 {
        self.degrees[v]
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        self.adj.row(v).0
    }

    pub fn neighbor_weights(&self, v: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.adj.row_iter(v)
    }

    pub fn weight(&self, u: usize, v: usize) -> f64 {
        self.adj.get(u, v)
    }

    /// Each undirected edge once, as `(u, v, w)` with `u < v`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.adj.triplets().filter(|&(u, v, _)| u < v)
    }

    /// Subgraph induced by `nodes`; node `nodes[i]` becomes node `i`.
    pub fn induced_subgraph(&self, nodes: &[usize]) -> Graph {
        let mut local = vec![usize::MAX; self.n()];
        for (i, &v) in nodes.iter().enumerate() {
            local[v] = i;
        }
        let mut trip = Vec::new();
        for (i, &v) in nodes.iter().enumerate() {
            for (u, w) in self.adj.row_iter(v) {
                if local[u] != usize::MAX {
                    trip.push((i, local[u], w));
                }
            }
        }
        let adj = CsrMatrix::from_triplets(nodes.len(), nodes.len(), trip).expect("valid subgraph");
        Self::from_symmetric_unchecked(adj)
    }
}

/// Combinatorial Laplacian `L = D − A`.
pub fn laplacian(g: &Graph) -> CsrMatrix {
    let n = g.n();
    let trip = (0..n).flat_map(|i| {
        std::iter::once((i, i, g.degree(i)))
            .chain(g.neighbor_weights(i).map(move |(j, w)| (i, j, -w)))
    });
    CsrMatrix::from_triplets(n, n, trip).expect("valid laplacian")
}

/// Symmetric normalized Laplacian `I − D^{-1/2} A D^{-1/2}`; isolated nodes
/// get a diagonal entry of 1.
pub fn normalized_laplacian(g: &Graph) -> CsrMatrix {
    let n = g.n();
    let s: Vec<f64> = g
        .degrees()
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 })
        .collect();
    let trip = (0..n).flat_map(|i| {
        let s = &s;
        std::iter::once((i, i, 1.0)).chain(
            g.neighbor_weights(i)
                .map(move |(j, w)| (i, j, -s[i] * w * s[j])),
        )
    });
    CsrMatrix::from_triplets(n, n, trip).expect("valid normalized laplacian")
}

/// `(B + diag(loops))` symmetrically normalized by `base_degree + loops`.
///
/// This is the common kernel of the standard propagation matrix (loops = 1)
/// and the coarse one (loops = cluster sizes). `adj` may carry its own
/// diagonal; it is kept and the loop weight is added on top.
pub(crate) fn normalize_with_loops(
    adj: &CsrMatrix,
    base_degree: &[f64],
    loops: &[f64],
) -> CsrMatrix {
    let n = adj.rows();
    let scale: Vec<f64> = base_degree
        .iter()
        .zip(loops)
        .map(|(&d, &c)| 1.0 / (d + c).sqrt())
        .collect();
    let trip = adj
        .triplets()
        .chain((0..n).map(|i| (i, i, loops[i])))
        .collect::<Vec<_>>();
    let with_loops = CsrMatrix::from_triplets(n, n, trip).expect("valid matrix");
    with_loops.map_entries(|i, j, v| scale[i] * v * scale[j])
}

/// `D̃^{-1/2} (A + I) D̃^{-1/2}` with `D̃ = D + I`.
pub fn normalized_adjacency_selfloops(g: &Graph) -> CsrMatrix {
    normalize_with_loops(g.adjacency(), g.degrees(), &vec![1.0; g.n()])
}

/// `Tr(Xᵀ L X)`, the total squared feature variation across edges.
pub fn laplacian_quadratic(l: &CsrMatrix, x: &DenseMatrix) -> Result<f64> {
    if l.rows() != l.cols() || l.cols() != x.rows() {
        return Err(Error::Shape(format!(
            "laplacian {}x{} with features {}x{}",
            l.rows(),
            l.cols(),
            x.rows(),
            x.cols()
        )));
    }
    let lx = l.spmm(x);
    Ok(dot(x.as_slice(), lx.as_slice()))
}

/// Component label per node; labels are numbered in order of each
/// component's lowest node.
pub fn connected_components(g: &Graph) -> Vec<usize> {
    let n = g.n();
    let mut label = vec![usize::MAX; n];
    let mut next = 0;
    let mut queue = VecDeque::new();
    for s in 0..n {
        if label[s] != usize::MAX {
            continue;
        }
        label[s] = next;
        queue.push_back(s);
        while let Some(v) = queue.pop_front() {
            for &u in g.neighbors(v) {
                if label[u] == usize::MAX {
                    label[u] = next;
                    queue.push_back(u);
                }
            }
        }
        next += 1;
    }
    label
}

/// Members of each connected component, in ascending node order.
pub fn component_members(g: &Graph) -> Vec<Vec<usize>> {
    group_by_label(&connected_components(g))
}

pub(crate) fn group_by_label(labels: &[usize]) -> Vec<Vec<usize>> {
    let k = labels.iter().map(|&l| l + 1).max().unwrap_or(0);
    let mut out = vec![Vec::new(); k];
    for (v, &l) in labels.iter().enumerate() {
        out[l].push(v);
    }
    out
}

/// True when the nodes in `set` induce a connected subgraph.
pub fn induces_connected(g: &Graph, set: &[usize]) -> bool {
    if set.len() <= 1 {
        return true;
    }
    let mut inside = std::collections::HashMap::with_capacity(set.len());
    for &v in set {
        inside.insert(v, false);
    }
    let mut stack = vec![set[0]];
    inside.insert(set[0], true);
    let mut seen = 1;
    while let Some(v) = stack.pop() {
        for &u in g.neighbors(v) {
            if let Some(flag) = inside.get_mut(&u) {
                if !*flag {
                    *flag = true;
                    seen += 1;
                    stack.push(u);
                }
            }
        }
    }
    seen == set.len()
}
