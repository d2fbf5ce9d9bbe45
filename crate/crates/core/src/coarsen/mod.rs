//! Partitioning algorithms that shrink a graph to a target fraction of its
//! nodes.
//!
//! [`coarsen`] runs the chosen method separately on every connected
//! component. Components of at most [`SMALL_COMPONENT`] nodes are left
//! uncoarsened. Every cluster produced here induces a connected subgraph.

mod heavy_edge;
mod spectral;
mod variation;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{component_members, connected_components, Graph};
use crate::partition::Partition;

pub use heavy_edge::heavy_edge_coarsen;
pub use spectral::{spectral_clustering_partition, spectral_kmeans_raw};
pub use variation::{variation_coarsen, Candidates};

/// Components with at most this many nodes are never coarsened.
pub const SMALL_COMPONENT: usize = 10;

/// Largest share of a level's nodes that one contraction level may remove.
pub(crate) const LEVEL_SHRINK_CAP: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Spectral,
    VariationNeighborhoods,
    VariationEdges,
    HeavyEdge,
    Identity,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Spectral,
        Method::VariationNeighborhoods,
        Method::VariationEdges,
        Method::HeavyEdge,
        Method::Identity,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Spectral => "spectral",
            Method::VariationNeighborhoods => "variation_neighborhoods",
            Method::VariationEdges => "variation_edges",
            Method::HeavyEdge => "heavy_edge",
            Method::Identity => "identity",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Method::ALL.iter().map(|m| m.as_str()).collect();
                Error::Config(format!(
                    "unknown coarsening method `{s}` (expected one of {})",
                    names.join(", ")
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoarsenConfig {
    pub method: Method,
    /// Target fraction of nodes kept, in (0, 1].
    pub ratio: f64,
    /// Eigenvectors used by the spectral-aware methods.
    pub k_eig: usize,
    pub seed: u64,
    /// Cap on contraction levels for the multilevel methods.
    pub max_levels: usize,
}

impl Default for CoarsenConfig {
    fn default() -> Self {
        Self {
            method: Method::VariationNeighborhoods,
            ratio: 0.5,
            k_eig: 10,
            seed: 0,
            max_levels: 30,
        }
    }
}

impl CoarsenConfig {
    pub fn new(method: Method, ratio: f64) -> Self {
        Self {
            method,
            ratio,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ratio > 0.0 && self.ratio <= 1.0) {
            return Err(Error::Config(format!(
                "ratio {} outside (0, 1]",
                self.ratio
            )));
        }
        if self.k_eig == 0 {
            return Err(Error::Config("k_eig must be at least 1".into()));
        }
        if self.max_levels == 0 {
            return Err(Error::Config("max_levels must be at least 1".into()));
        }
        Ok(())
    }
}

/// Number of clusters allowed for `n` nodes at `ratio`.
pub fn target_size(n: usize, ratio: f64) -> usize {
    // The small epsilon keeps e.g. 0.7 * 10 from rounding up to 8.
    (((ratio * n as f64) - 1e-9).ceil() as usize).clamp(1, n.max(1))
}

/// Coarsen `g` component by component.
pub fn coarsen(g: &Graph, cfg: &CoarsenConfig) -> Result<Partition> {
    cfg.validate()?;
    if cfg.method == Method::Identity || cfg.ratio >= 1.0 {
        return Ok(Partition::identity(g.n()));
    }
    let comps = component_members(g);
    let local: Vec<Result<Partition>> = comps
        .par_iter()
        .enumerate()
        .map(|(ci, members)| {
            if members.len() <= SMALL_COMPONENT {
                return Ok(Partition::identity(members.len()));
            }
            let sub = g.induced_subgraph(members);
            let seed = cfg
                .seed
                .wrapping_add((ci as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
            let target = target_size(members.len(), cfg.ratio);
            match cfg.method {
                Method::Spectral => spectral_clustering_partition(&sub, target, seed),
                Method::VariationNeighborhoods => variation_coarsen(
                    &sub,
                    Candidates::Neighborhoods,
                    cfg.ratio,
                    cfg.k_eig,
                    cfg.max_levels,
                ),
                Method::VariationEdges => variation_coarsen(
                    &sub,
                    Candidates::Edges,
                    cfg.ratio,
                    cfg.k_eig,
                    cfg.max_levels,
                ),
                Method::HeavyEdge => heavy_edge_coarsen(&sub, cfg.ratio, seed, cfg.max_levels),
                Method::Identity => unreachable!("handled above"),
            }
        })
        .collect();

    let mut assignment = vec![0; g.n()];
    let mut offset = 0;
    for (members, part) in comps.iter().zip(local) {
        let part = part?;
        for (i, &v) in members.iter().enumerate() {
            assignment[v] = offset + part.cluster_of(i);
        }
        offset += part.k();
    }
    Ok(Partition::from_assignment(&assignment))
}

/// Make every cluster of `assignment` induce a connected subgraph of the
/// connected graph `g`, then merge clusters until at most `target` remain.
///
/// Disconnected clusters are split into their connected pieces. Merging takes
/// the smallest cluster (lowest id on ties) into the adjacent cluster it
/// shares the most edge weight with, which keeps every cluster connected.
pub(crate) fn repair_connectivity(g: &Graph, assignment: &[usize], target: usize) -> Partition {
    let n = g.n();
    // Split: label nodes by (cluster, piece) using a BFS restricted to
    // same-cluster edges.
    let mut label = vec![usize::MAX; n];
    let mut next = 0;
    let mut stack = Vec::new();
    for s in 0..n {
        if label[s] != usize::MAX {
            continue;
        }
        label[s] = next;
        stack.push(s);
        while let Some(v) = stack.pop() {
            for &u in g.neighbors(v) {
                if label[u] == usize::MAX && assignment[u] == assignment[s] {
                    label[u] = next;
                    stack.push(u);
                }
            }
        }
        next += 1;
    }

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); next];
    for (v, &l) in label.iter().enumerate() {
        members[l].push(v);
    }
    let mut alive: BTreeSet<(usize, usize)> = members
        .iter()
        .enumerate()
        .map(|(c, m)| (m.len(), c))
        .collect();
    let mut weight_to = vec![0.0; next];
    let mut touched = Vec::new();
    while alive.len() > target.max(1) {
        let (size, c) = *alive.iter().next().expect("nonempty");
        for &v in &members[c] {
            for (u, w) in g.neighbor_weights(v) {
                let d = label[u];
                if d != c {
                    if weight_to[d] == 0.0 {
                        touched.push(d);
                    }
                    weight_to[d] += w;
                }
            }
        }
        let mut best: Option<(f64, usize)> = None;
        for &d in &touched {
            let better = match best {
                None => true,
                Some((bw, bd)) => weight_to[d] > bw || (weight_to[d] == bw && d < bd),
            };
            if better {
                best = Some((weight_to[d], d));
            }
        }
        for &d in &touched {
            weight_to[d] = 0.0;
        }
        touched.clear();
        let Some((_, d)) = best else {
            // Isolated cluster in a disconnected input: nothing to merge with.
            log::warn!("cluster of {size} nodes has no neighbouring cluster; stopping merge");
            break;
        };
        alive.remove(&(size, c));
        alive.remove(&(members[d].len(), d));
        let moved = std::mem::take(&mut members[c]);
        for &v in &moved {
            label[v] = d;
        }
        members[d].extend(moved);
        alive.insert((members[d].len(), d));
    }
    Partition::from_assignment(&label)
}

/// Cluster count per component, the reference for the ratio contract.
pub fn component_targets(g: &Graph, ratio: f64) -> usize {
    let labels = connected_components(g);
    let comps = crate::graph::group_by_label(&labels);
    comps
        .iter()
        .map(|m| {
            if m.len() <= SMALL_COMPONENT || ratio >= 1.0 {
                m.len()
            } else {
                target_size(m.len(), ratio)
            }
        })
        .sum()
}
