//! Seeded random instances for property checks.

use std::collections::BTreeSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dense::{dot, DenseMatrix};
use crate::graph::Graph;
use crate::partition::Partition;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Erdős–Rényi graph with unit weights.
pub fn random_graph(n: usize, p: f64, rng: &mut ChaCha8Rng) -> Graph {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            if rng.random::<f64>() < p {
                edges.push((u, v, 1.0));
            }
        }
    }
    Graph::from_edges(n, &edges).expect("valid random graph")
}

/// Random graph made connected by a random spanning path.
pub fn random_connected_graph(n: usize, p: f64, rng: &mut ChaCha8Rng) -> Graph {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let on_path: BTreeSet<(usize, usize)> = order
        .windows(2)
        .map(|w| (w[0].min(w[1]), w[0].max(w[1])))
        .collect();
    let mut edges: Vec<(usize, usize, f64)> = on_path.iter().map(|&(u, v)| (u, v, 1.0)).collect();
    for u in 0..n {
        for v in (u + 1)..n {
            if rng.random::<f64>() < p && !on_path.contains(&(u, v)) {
                edges.push((u, v, 1.0));
            }
        }
    }
    Graph::from_edges(n, &edges).expect("valid random graph")
}

pub fn gaussian_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// n×k matrix with orthonormal columns (modified Gram–Schmidt, twice).
pub fn random_orthonormal(n: usize, k: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
    assert!(
        k <= n,
        "cannot fit {k} orthonormal columns in dimension {n}"
    );
    let g = gaussian_matrix(n, k, rng);
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(k);
    for j in 0..k {
        let mut c = g.column(j);
        for _ in 0..2 {
            for q in &cols {
                let d = dot(&c, q);
                c.iter_mut().zip(q).for_each(|(x, y)| *x -= d * y);
            }
        }
        let norm = dot(&c, &c).sqrt();
        c.iter_mut().for_each(|x| *x /= norm);
        cols.push(c);
    }
    DenseMatrix::from_fn(n, k, |i, j| cols[j][i])
}

/// Uniformly random surjective assignment of `n` nodes onto `k` clusters.
pub fn random_partition(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Partition {
    assert!(k >= 1 && k <= n);
    let mut a: Vec<usize> = (0..n)
        .map(|i| if i < k { i } else { rng.random_range(0..k) })
        .collect();
    a.shuffle(rng);
    Partition::from_assignment(&a)
}

/// Random partition whose clusters are connected: grow `k` clusters from
/// random seeds by repeatedly attaching a random unassigned neighbour.
pub fn random_connected_partition(g: &Graph, k: usize, rng: &mut ChaCha8Rng) -> Partition {
    let n = g.n();
    assert!(k >= 1 && k <= n);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut assign = vec![usize::MAX; n];
    for (c, &v) in order.iter().take(k).enumerate() {
        assign[v] = c;
    }
    loop {
        let frontier: Vec<(usize, usize)> = (0..n)
            .filter(|&v| assign[v] == usize::MAX)
            .filter_map(|v| {
                g.neighbors(v)
                    .iter()
                    .find(|&&u| assign[u] != usize::MAX)
                    .map(|&u| (v, assign[u]))
            })
            .collect();
        if frontier.is_empty() {
            break;
        }
        let &(v, c) = frontier.choose(rng).expect("nonempty");
        assign[v] = c;
    }
    // Nodes unreachable from any seed become their own clusters.
    let mut next = k;
    for a in &mut assign {
        if *a == usize::MAX {
            *a = next;
            next += 1;
        }
    }
    Partition::from_assignment(&assign)
}
