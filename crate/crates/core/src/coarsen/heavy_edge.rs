use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::coarse::coarse_graph;
use crate::coarsen::{target_size, LEVEL_SHRINK_CAP};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::partition::Partition;

/// Repeated greedy matching on `w(u,v) / min(deg u, deg v)`, heaviest first.
/// Equal scores are ordered by a seeded random permutation of the edges.
pub fn heavy_edge_coarsen(
    g: &Graph,
    ratio: f64,
    seed: u64,
    max_levels: usize,
) -> Result<Partition> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::Config(format!("ratio {ratio} outside (0, 1]")));
    }
    let n = g.n();
    let target = target_size(n, ratio);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = Partition::identity(n);
    let mut level_graph = g.clone();

    for _ in 0..max_levels {
        let m = level_graph.n();
        if m <= target {
            break;
        }
        let cap = ((m as f64) * LEVEL_SHRINK_CAP).floor() as usize;
        let needed = (m - target).min(cap.max(1));
        let mut edges: Vec<(usize, usize, f64)> = level_graph
            .edges()
            .map(|(u, v, w)| (u, v, w / level_graph.degree(u).min(level_graph.degree(v))))
            .collect();
        edges.shuffle(&mut rng);
        edges.sort_by(|a, b| b.2.total_cmp(&a.2));

        let mut matched = vec![false; m];
        let mut assignment: Vec<usize> = (0..m).collect();
        let mut merged = 0;
        for (u, v, _) in edges {
            if merged == needed {
                break;
            }
            if matched[u] || matched[v] {
                continue;
            }
            matched[u] = true;
            matched[v] = true;
            assignment[v] = u;
            merged += 1;
        }
        if merged == 0 {
            break;
        }
        let level = Partition::from_assignment(&assignment);
        level_graph = coarse_graph(&level_graph, &level)?.to_graph();
        total = total.compose(&level)?;
    }
    if total.k() > target {
        log::warn!(
            "heavy-edge matching stopped at {} clusters, above the target {target}",
            total.k()
        );
    }
    Ok(total)
}
