use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coarse::coarse_graph;
use crate::coarsen::{target_size, LEVEL_SHRINK_CAP};
use crate::dense::DenseMatrix;
use crate::eigen::eigen_smallest_k;
use crate::error::{Error, Result};
use crate::graph::{laplacian, Graph};
use crate::partition::Partition;

/// Candidate sets considered for contraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Candidates {
    /// Closed neighbourhoods `{v} ∪ N(v)`.
    Neighborhoods,
    /// Single edges.
    Edges,
}

impl fmt::Display for Candidates {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            Candidates::Neighborhoods => "neighborhoods",
            Candidates::Edges => "edges",
        })
    }
}

impl FromStr for Candidates {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "neighborhoods" => Ok(Candidates::Neighborhoods),
            "edges" => Ok(Candidates::Edges),
            _ => Err(Error::Config(format!("unknown candidate family `{s}`"))),
        }
    }
}

/// `U Λ^{-1/2}` for the `k` smallest nonzero Laplacian eigenpairs. Scaling by
/// `Λ^{-1/2}` makes `BᵀLB = I`, so the local cost below measures the loss
/// in the Laplacian semi-norm relative to the preserved subspace.
pub(crate) fn whitened_basis(g: &Graph, k: usize) -> Result<DenseMatrix> {
    let n = g.n();
    let l = laplacian(g);
    let want = (k + 1).min(n);
    let eig = eigen_smallest_k(&l, want)?;
    let floor = 1e-10 * l.inf_norm().max(1.0);
    let keep: Vec<usize> = (0..eig.values.len())
        .filter(|&i| eig.values[i] > floor)
        .take(k)
        .collect();
    let mut b = eig.vectors.select_columns(&keep);
    for (c, &i) in keep.iter().enumerate() {
        let s = 1.0 / eig.values[i].sqrt();
        for r in 0..n {
            b.set(r, c, b.get(r, c) * s);
        }
    }
    Ok(b)
}

/// Local variation cost of contracting `set`:
/// `Tr(Mᵀ L_S M) / (|S| − 1)` with `M` the rows of `b` on `set` minus their
/// mean, and `L_S` the induced Laplacian plus half of every boundary edge
/// weight on the diagonal.
pub(crate) fn local_variation_cost(g: &Graph, b: &DenseMatrix, set: &[usize]) -> f64 {
    let s = set.len();
    debug_assert!(s >= 2);
    let k = b.cols();
    let mut mean = vec![0.0; k];
    for &v in set {
        mean.iter_mut().zip(b.row(v)).for_each(|(m, &x)| *m += x);
    }
    mean.iter_mut().for_each(|m| *m /= s as f64);
    let pos: HashMap<usize, usize> = set.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let rows: Vec<Vec<f64>> = set
        .iter()
        .map(|&v| b.row(v).iter().zip(&mean).map(|(x, m)| x - m).collect())
        .collect();

    let mut total = 0.0;
    for (i, &v) in set.iter().enumerate() {
        for (u, w) in g.neighbor_weights(v) {
            match pos.get(&u) {
                Some(&j) if j > i => {
                    total += w * rows[i]
                        .iter()
                        .zip(&rows[j])
                        .map(|(a, c)| (a - c) * (a - c))
                        .sum::<f64>();
                }
                Some(_) => {}
                None => total += 0.5 * w * rows[i].iter().map(|a| a * a).sum::<f64>(),
            }
        }
    }
    total / (s - 1) as f64
}

/// Round the mantissa to 32 bits so costs equal up to rounding noise compare
/// equal and fall through to the node-index tie break. Costs are never
/// negative, so rounding the bit pattern rounds the value.
fn quantize(c: f64) -> f64 {
    const LOW: u64 = (1 << 20) - 1;
    f64::from_bits((c.to_bits() + LOW.div_ceil(2)) & !LOW)
}

struct Entry {
    cost: f64,
    key: (usize, usize),
    idx: usize,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    // Reversed so the max-heap pops the cheapest candidate, lowest key first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.key.cmp(&self.key))
            .then_with(|| other.idx.cmp(&self.idx))
    }
}

fn candidate_sets(g: &Graph, family: Candidates) -> Vec<Vec<usize>> {
    match family {
        Candidates::Neighborhoods => (0..g.n())
            .filter(|&v| !g.neighbors(v).is_empty())
            .map(|v| {
                let mut set = vec![v];
                set.extend(g.neighbors(v).iter().copied().filter(|&u| u != v));
                set
            })
            .collect(),
        Candidates::Edges => g.edges().map(|(u, v, _)| vec![u, v]).collect(),
    }
}

/// One contraction level: the groups to merge, removing at most `needed`
/// nodes.
fn select_level(g: &Graph, b: &DenseMatrix, family: Candidates, needed: usize) -> Vec<Vec<usize>> {
    let mut sets = candidate_sets(g, family);
    let costs: Vec<f64> = sets
        .par_iter()
        .map(|s| local_variation_cost(g, b, s))
        .collect();
    let key = |s: &[usize]| (s[0], s.get(1).copied().unwrap_or(0));
    let mut heap: BinaryHeap<Entry> = costs
        .iter()
        .enumerate()
        .map(|(idx, &c)| Entry {
            cost: quantize(c),
            key: key(&sets[idx]),
            idx,
        })
        .collect();

    let mut marked = vec![false; g.n()];
    let mut groups = Vec::new();
    let mut reduced = 0;
    while reduced < needed {
        let Some(Entry { idx, .. }) = heap.pop() else {
            break;
        };
        let set = &sets[idx];
        // The first element is the centre for neighbourhoods and an endpoint
        // for edges; either way the set is useless once it is taken.
        if marked[set[0]] {
            continue;
        }
        let free: Vec<usize> = set.iter().copied().filter(|&v| !marked[v]).collect();
        if free.len() < 2 {
            continue;
        }
        if free.len() < set.len() {
            if family == Candidates::Edges {
                continue;
            }
            // Re-score what is left of the neighbourhood and queue it again.
            let cost = quantize(local_variation_cost(g, b, &free));
            sets[idx] = free;
            heap.push(Entry {
                cost,
                key: key(&sets[idx]),
                idx,
            });
            continue;
        }
        let mut group = free;
        group.truncate(needed - reduced + 1);
        for &v in &group {
            marked[v] = true;
        }
        reduced += group.len() - 1;
        groups.push(group);
    }
    groups
}

/// Multilevel greedy contraction of low-variation candidate sets.
///
/// Each level recomputes the whitened Laplacian basis of the current graph,
/// scores every candidate, accepts disjoint candidates cheapest first and
/// contracts them. A level removes at most half of its nodes.
pub fn variation_coarsen(
    g: &Graph,
    family: Candidates,
    ratio: f64,
    k_eig: usize,
    max_levels: usize,
) -> Result<Partition> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::Config(format!("ratio {ratio} outside (0, 1]")));
    }
    if k_eig == 0 {
        return Err(Error::Config("k_eig must be at least 1".into()));
    }
    let n = g.n();
    let target = target_size(n, ratio);
    let mut total = Partition::identity(n);
    let mut level_graph = g.clone();

    for _ in 0..max_levels {
        let m = level_graph.n();
        if m <= target {
            break;
        }
        let cap = ((m as f64) * LEVEL_SHRINK_CAP).floor() as usize;
        let needed = (m - target).min(cap.max(1));
        let b = whitened_basis(&level_graph, k_eig.min(m - 1))?;
        let groups = select_level(&level_graph, &b, family, needed);
        if groups.is_empty() {
            break;
        }
        let mut assignment: Vec<usize> = (0..m).collect();
        for group in &groups {
            for &v in &group[1..] {
                assignment[v] = group[0];
            }
        }
        let level = Partition::from_assignment(&assignment);
        level_graph = coarse_graph(&level_graph, &level)?.to_graph();
        total = total.compose(&level)?;
    }
    if total.k() > target {
        log::warn!(
            "variation coarsening ({family}) stopped at {} clusters, above the target {target}",
            total.k()
        );
    }
    Ok(total)
}
