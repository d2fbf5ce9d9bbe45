use std::time::Instant;

use crate::coarsen::repair_connectivity;
use crate::eigen::eigen_smallest_k;
use crate::error::{Error, Result};
use crate::graph::{normalized_laplacian, Graph};
use crate::kmeans::lloyd_kmeans;
use crate::partition::Partition;

const KMEANS_MAX_ITERS: usize = 100;
const KMEANS_TOL: f64 = 1e-8;

/// Cluster the rows of the `k` smallest eigenvectors of the normalized
/// Laplacian with Lloyd's k-means.
pub fn spectral_clustering_partition(g: &Graph, k: usize, seed: u64) -> Result<Partition> {
    let n = g.n();
    if k == 0 || k > n {
        return Err(Error::Precondition(format!(
            "spectral clustering of {n} nodes into {k} clusters"
        )));
    }
    if k == n {
        return Ok(Partition::identity(n));
    }
    let start = Instant::now();
    let eig = eigen_smallest_k(&normalized_laplacian(g), k)?;
    log::debug!(
        "spectral: {k} eigenpairs of {n} nodes in {:.2}s",
        start.elapsed().as_secs_f64()
    );
    let start = Instant::now();
    let km = lloyd_kmeans(&eig.vectors, k, seed, KMEANS_MAX_ITERS, KMEANS_TOL)?;
    log::debug!(
        "spectral: k-means ran {} iterations in {:.2}s",
        km.iterations,
        start.elapsed().as_secs_f64()
    );
    Ok(repair_connectivity(g, &km.assignment, k))
}

/// Spectral clustering without the connectivity repair: exactly the k-means
/// clusters of the eigenvector rows.
pub fn spectral_kmeans_raw(g: &Graph, k: usize, seed: u64) -> Result<Partition> {
    let eig = eigen_smallest_k(&normalized_laplacian(g), k)?;
    let km = lloyd_kmeans(&eig.vectors, k, seed, KMEANS_MAX_ITERS, KMEANS_TOL)?;
    Ok(Partition::from_assignment(&km.assignment))
}
