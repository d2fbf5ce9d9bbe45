//! Coarse graphs induced by a partition, with aggregated features and labels.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::LabelledSplit;
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::graph::{normalize_with_loops, Graph};
use crate::partition::Partition;
use crate::sparse::CsrMatrix;

/// The weighted graph of super-nodes.
///
/// `adjacency` is `W = P̂ᵀ A P̂`: `W_ij` sums `A_uv` over all ordered pairs
/// `u ∈ C_i, v ∈ C_j`, so intra-cluster edges land on the diagonal (twice).
#[derive(Debug, Clone)]
pub struct CoarseGraph {
    pub adjacency: CsrMatrix,
    /// Cluster sizes, the diagonal of `C`.
    pub sizes: Vec<f64>,
    /// `D_P̂ = P̂ᵀ D P̂`: summed member degrees.
    pub degrees: Vec<f64>,
    /// `(D_P̂ + C)^{-1/2} (W + C) (D_P̂ + C)^{-1/2}`.
    pub propagation: CsrMatrix,
}

impl CoarseGraph {
    pub fn k(&self) -> usize {
        self.sizes.len()
    }

    /// Number of super-edges, counting each unordered pair of distinct
    /// super-nodes once.
    pub fn num_edges(&self) -> usize {
        self.adjacency
            .triplets()
            .filter(|&(i, j, v)| i < j && v != 0.0)
            .count()
    }

    /// The coarse graph as a plain [`Graph`], dropping self-loop weight.
    pub fn to_graph(&self) -> Graph {
        Graph::from_adjacency(&self.adjacency)
            .expect("coarse adjacency is symmetric and non-negative")
    }

    /// Coarsen again with `outer` acting on the super-nodes.
    pub fn refine(&self, outer: &Partition) -> Result<CoarseGraph> {
        if outer.n() != self.k() {
            return Err(Error::Shape(format!(
                "outer partition covers {} nodes, coarse graph has {}",
                outer.n(),
                self.k()
            )));
        }
        let adjacency = aggregate_adjacency(&self.adjacency, outer);
        let mut sizes = vec![0.0; outer.k()];
        let mut degrees = vec![0.0; outer.k()];
        for v in 0..outer.n() {
            sizes[outer.cluster_of(v)] += self.sizes[v];
            degrees[outer.cluster_of(v)] += self.degrees[v];
        }
        Ok(Self::assemble(adjacency, sizes, degrees))
    }

    fn assemble(adjacency: CsrMatrix, sizes: Vec<f64>, degrees: Vec<f64>) -> Self {
        let propagation = normalize_with_loops(&adjacency, &degrees, &sizes);
        Self {
            adjacency,
            sizes,
            degrees,
            propagation,
        }
    }
}

fn aggregate_adjacency(adj: &CsrMatrix, p: &Partition) -> CsrMatrix {
    let trip = adj
        .triplets()
        .map(|(u, v, w)| (p.cluster_of(u), p.cluster_of(v), w));
    CsrMatrix::from_triplets(p.k(), p.k(), trip).expect("valid coarse adjacency")
}

pub fn coarse_graph(g: &Graph, p: &Partition) -> Result<CoarseGraph> {
    if p.n() != g.n() {
        return Err(Error::Shape(format!(
            "partition covers {} nodes, graph has {}",
            p.n(),
            g.n()
        )));
    }
    let adjacency = aggregate_adjacency(g.adjacency(), p);
    let sizes: Vec<f64> = p.sizes().iter().map(|&c| c as f64).collect();
    let mut degrees = vec![0.0; p.k()];
    for v in 0..g.n() {
        degrees[p.cluster_of(v)] += g.degree(v);
    }
    Ok(CoarseGraph::assemble(adjacency, sizes, degrees))
}

/// The coarse graph convolution operator. With the identity partition it is
/// exactly the self-loop normalized adjacency of the original graph.
pub fn coarse_propagation_matrix(cg: &CoarseGraph) -> CsrMatrix {
    normalize_with_loops(&cg.adjacency, &cg.degrees, &cg.sizes)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMode {
    /// `X' = Pᵀ X`: cluster sums divided by `√c_j`.
    #[default]
    Normalized,
    /// Cluster means.
    Mean,
}

impl FromStr for FeatureMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normalized" => Ok(Self::Normalized),
            "mean" => Ok(Self::Mean),
            _ => Err(Error::Config(format!(
                "unknown feature mode {s:?} (normalized|mean)"
            ))),
        }
    }
}

impl fmt::Display for FeatureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            Self::Normalized => "normalized",
            Self::Mean => "mean",
        })
    }
}

pub fn coarse_features(x: &DenseMatrix, p: &Partition, mode: FeatureMode) -> Result<DenseMatrix> {
    match mode {
        FeatureMode::Normalized => p.restrict_rows(x),
        FeatureMode::Mean => {
            if x.rows() != p.n() {
                return Err(Error::Shape(format!(
                    "features have {} rows, partition covers {}",
                    x.rows(),
                    p.n()
                )));
            }
            let mut sums = p.cluster_sums(x);
            for (j, &c) in p.sizes().iter().enumerate() {
                sums.row_mut(j).iter_mut().for_each(|v| *v /= c as f64);
            }
            Ok(sums)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelPolicy {
    /// Keep a super-node only if all its labeled members agree.
    #[default]
    DiscardMixed,
    /// Majority label; ties go to the lowest class index.
    Argmax,
}

impl FromStr for LabelPolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "discard_mixed" => Ok(Self::DiscardMixed),
            "argmax" => Ok(Self::Argmax),
            _ => Err(Error::Config(format!(
                "unknown label policy {s:?} (discard_mixed|argmax)"
            ))),
        }
    }
}

impl fmt::Display for LabelPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            Self::DiscardMixed => "discard_mixed",
            Self::Argmax => "argmax",
        })
    }
}

/// Train and validation labels on super-nodes, aggregated independently.
#[derive(Debug, Clone, PartialEq)]
pub struct CoarseLabels {
    pub train_labels: Vec<Option<usize>>,
    pub val_labels: Vec<Option<usize>>,
    pub train_mask: Vec<usize>,
    pub val_mask: Vec<usize>,
    /// Super-nodes dropped for conflicting labels within one role.
    pub discarded_mixed: usize,
    /// Super-nodes dropped for holding both train and validation members.
    pub discarded_overlap: usize,
}

fn vote(counts: &[usize], policy: LabelPolicy) -> Option<usize> {
    let nonzero = counts.iter().filter(|&&c| c > 0).count();
    match (nonzero, policy) {
        (0, _) => None,
        (1, _) => counts.iter().position(|&c| c > 0),
        (_, LabelPolicy::DiscardMixed) => None,
        (_, LabelPolicy::Argmax) => {
            let mut best = 0;
            for (c, &n) in counts.iter().enumerate() {
                if n > counts[best] {
                    best = c;
                }
            }
            Some(best)
        }
    }
}

pub fn coarse_labels(
    split: &LabelledSplit,
    p: &Partition,
    policy: LabelPolicy,
) -> Result<CoarseLabels> {
    if split.n() != p.n() {
        return Err(Error::Shape(format!(
            "split covers {} nodes, partition covers {}",
            split.n(),
            p.n()
        )));
    }
    let k = p.k();
    let l = split.classes;
    let mut train_counts = vec![vec![0usize; l]; k];
    let mut val_counts = vec![vec![0usize; l]; k];
    for (set, counts) in [
        (&split.train, &mut train_counts),
        (&split.val, &mut val_counts),
    ] {
        for &v in set {
            let c = split.labels[v].expect("split members are labeled");
            counts[p.cluster_of(v)][c] += 1;
        }
    }

    let mut out = CoarseLabels {
        train_labels: vec![None; k],
        val_labels: vec![None; k],
        train_mask: Vec::new(),
        val_mask: Vec::new(),
        discarded_mixed: 0,
        discarded_overlap: 0,
    };
    for j in 0..k {
        let has_train = train_counts[j].iter().any(|&c| c > 0);
        let has_val = val_counts[j].iter().any(|&c| c > 0);
        if has_train && has_val {
            out.discarded_overlap += 1;
            continue;
        }
        if has_train {
            match vote(&train_counts[j], policy) {
                Some(c) => {
                    out.train_labels[j] = Some(c);
                    out.train_mask.push(j);
                }
                None => out.discarded_mixed += 1,
            }
        }
        if has_val {
            match vote(&val_counts[j], policy) {
                Some(c) => {
                    out.val_labels[j] = Some(c);
                    out.val_mask.push(j);
                }
                None => out.discarded_mixed += 1,
            }
        }
    }
    Ok(out)
}
