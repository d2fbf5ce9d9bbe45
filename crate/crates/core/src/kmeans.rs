//! Lloyd's k-means with k-means++ seeding.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct KMeansResult {
    pub assignment: Vec<usize>,
    pub centroids: DenseMatrix,
    /// Partition cost of the seeding assignment.
    pub initial_cost: f64,
    /// Partition cost after every iteration, starting with `initial_cost`.
    pub cost_trace: Vec<f64>,
    pub iterations: usize,
}

impl KMeansResult {
    pub fn cost(&self) -> f64 {
        *self
            .cost_trace
            .last()
            .expect("trace starts with the initial cost")
    }
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Sum of squared distances to cluster means.
pub fn partition_cost(points: &DenseMatrix, assignment: &[usize], k: usize) -> f64 {
    let means = cluster_means(points, assignment, k).0;
    (0..points.rows())
        .map(|i| sq_dist(points.row(i), means.row(assignment[i])))
        .sum()
}

fn cluster_means(
    points: &DenseMatrix,
    assignment: &[usize],
    k: usize,
) -> (DenseMatrix, Vec<usize>) {
    let mut sums = DenseMatrix::zeros(k, points.cols());
    let mut counts = vec![0usize; k];
    for (i, &c) in assignment.iter().enumerate() {
        counts[c] += 1;
        for (s, &x) in sums.row_mut(c).iter_mut().zip(points.row(i)) {
            *s += x;
        }
    }
    for (c, &cnt) in counts.iter().enumerate() {
        if cnt > 0 {
            sums.row_mut(c).iter_mut().for_each(|v| *v /= cnt as f64);
        }
    }
    (sums, counts)
}

/// k-means++ seeding: first center uniform, then D²-weighted.
fn seed_centers(points: &DenseMatrix, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = points.rows();
    let mut centers = Vec::with_capacity(k);
    let first = rng.random_range(0..n);
    centers.push(first);
    let mut d2: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| sq_dist(points.row(i), points.row(first)))
        .collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if acc > target && w > 0.0 {
                    pick = Some(i);
                    break;
                }
            }
            // Rounding can leave `acc` just short of `target`.
            pick.unwrap_or_else(|| d2.iter().rposition(|&w| w > 0.0).expect("positive total"))
        } else {
            // All remaining points coincide with a center: take the lowest
            // index not yet chosen.
            (0..n).find(|i| !centers.contains(i)).expect("k <= n")
        };
        centers.push(next);
        let c = points.row(next);
        d2.par_iter_mut().enumerate().for_each(|(i, d)| {
            let nd = sq_dist(points.row(i), c);
            if nd < *d {
                *d = nd;
            }
        });
    }
    centers
}

fn assign(points: &DenseMatrix, centroids: &DenseMatrix, current: Option<&[usize]>) -> Vec<usize> {
    let k = centroids.rows();
    (0..points.rows())
        .into_par_iter()
        .map(|i| {
            let x = points.row(i);
            let mut best = current.map_or(0, |a| a[i]);
            let mut best_d = sq_dist(x, centroids.row(best));
            for c in 0..k {
                let d = sq_dist(x, centroids.row(c));
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            best
        })
        .collect()
}

/// Give every empty cluster the point farthest from its own centroid, taken
/// from a cluster that keeps at least one member.
fn repair_empty(
    points: &DenseMatrix,
    assignment: &mut [usize],
    centroids: &mut DenseMatrix,
    counts: &mut [usize],
) {
    for empty in 0..counts.len() {
        if counts[empty] > 0 {
            continue;
        }
        let mut far = None;
        let mut far_d = -1.0;
        for i in 0..points.rows() {
            let c = assignment[i];
            if counts[c] < 2 {
                continue;
            }
            let d = sq_dist(points.row(i), centroids.row(c));
            if d > far_d {
                far_d = d;
                far = Some(i);
            }
        }
        let i = far.expect("k <= n guarantees a cluster with two members");
        counts[assignment[i]] -= 1;
        assignment[i] = empty;
        counts[empty] = 1;
        centroids.row_mut(empty).copy_from_slice(points.row(i));
    }
}

pub fn lloyd_kmeans(
    points: &DenseMatrix,
    k: usize,
    seed: u64,
    max_iters: usize,
    tol: f64,
) -> Result<KMeansResult> {
    let n = points.rows();
    if k == 0 || k > n {
        return Err(Error::Precondition(format!("k = {k} must be in 1..={n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers = seed_centers(points, k, &mut rng);
    let mut centroids = points.select_rows(&centers);
    let mut assignment = assign(points, &centroids, None);
    // Seeds own themselves so no cluster starts empty when points repeat.
    for (c, &i) in centers.iter().enumerate() {
        assignment[i] = c;
    }
    let initial_cost = partition_cost(points, &assignment, k);
    let mut trace = vec![initial_cost];
    let mut iterations = 0;

    while iterations < max_iters {
        iterations += 1;
        let (means, mut counts) = cluster_means(points, &assignment, k);
        centroids = means;
        repair_empty(points, &mut assignment, &mut centroids, &mut counts);
        let next = assign(points, &centroids, Some(&assignment));
        let changed = next != assignment;
        assignment = next;
        let (_, counts) = cluster_means(points, &assignment, k);
        if counts.contains(&0) {
            let (mut means, mut counts) = cluster_means(points, &assignment, k);
            repair_empty(points, &mut assignment, &mut means, &mut counts);
        }
        let cost = partition_cost(points, &assignment, k);
        let prev = *trace.last().expect("nonempty");
        trace.push(cost);
        if !changed || prev - cost <= tol * prev.max(f64::MIN_POSITIVE) {
            break;
        }
    }
    let (centroids, _) = cluster_means(points, &assignment, k);
    Ok(KMeansResult {
        assignment,
        centroids,
        initial_cost,
        cost_trace: trace,
        iterations,
    })
}
