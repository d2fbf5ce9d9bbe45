//! Seeded stochastic block model fixtures.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dataset::{GraphBundle, LabelledSplit};
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::graph::Graph;

#[derive(Debug, Clone, PartialEq)]
pub struct SbmConfig {
    pub block_sizes: Vec<usize>,
    pub intra_prob: f64,
    pub inter_prob: f64,
    pub feature_dim: usize,
    pub seed: u64,
    /// Standard deviation of the per-block feature mean entries.
    pub separation: f64,
    /// Standard deviation of per-node feature noise.
    pub noise: f64,
    /// When set, features are 0/1 with this mean density instead of
    /// Gaussian. Each block draws per-feature rates from a log-normal with
    /// log-scale `separation`; `noise` is unused.
    pub feature_density: Option<f64>,
    pub train_per_class: usize,
    pub val_per_class: usize,
}

impl SbmConfig {
    pub fn new(
        block_sizes: Vec<usize>,
        intra_prob: f64,
        inter_prob: f64,
        feature_dim: usize,
        seed: u64,
    ) -> Self {
        let smallest = block_sizes.iter().copied().min().unwrap_or(0);
        Self {
            block_sizes,
            intra_prob,
            inter_prob,
            feature_dim,
            seed,
            separation: 1.0,
            noise: 1.0,
            feature_density: None,
            train_per_class: (smallest / 10).max(1).min(smallest),
            val_per_class: (smallest / 10).max(1).min(smallest.saturating_sub(1)),
        }
    }
}

/// Block index of every node, blocks laid out contiguously.
pub fn block_labels(sizes: &[usize]) -> Vec<usize> {
    sizes
        .iter()
        .enumerate()
        .flat_map(|(b, &s)| std::iter::repeat_n(b, s))
        .collect()
}

pub fn sbm_generate(cfg: &SbmConfig) -> Result<GraphBundle> {
    for (name, p) in [("intra", cfg.intra_prob), ("inter", cfg.inter_prob)] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Config(format!(
                "{name} probability {p} outside [0, 1]"
            )));
        }
    }
    if let Some(d) = cfg.feature_density {
        if !(d > 0.0 && d <= 1.0) {
            return Err(Error::Config(format!("feature density {d} outside (0, 1]")));
        }
    }
    if cfg.block_sizes.is_empty() {
        return Err(Error::Config("at least one block is required".into()));
    }
    for &s in &cfg.block_sizes {
        if cfg.train_per_class + cfg.val_per_class > s {
            return Err(Error::Config(format!(
                "block of size {s} cannot hold {} train + {} val nodes",
                cfg.train_per_class, cfg.val_per_class
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let block = block_labels(&cfg.block_sizes);
    let n = block.len();

    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            let p = if block[u] == block[v] {
                cfg.intra_prob
            } else {
                cfg.inter_prob
            };
            if rng.random::<f64>() < p {
                edges.push((u, v, 1.0));
            }
        }
    }
    let graph = Graph::from_edges(n, &edges)?;

    let d = cfg.feature_dim;
    let means: Vec<Vec<f64>> = (0..cfg.block_sizes.len())
        .map(|_| {
            (0..d)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    z * cfg.separation
                })
                .collect()
        })
        .collect();
    let mut features = DenseMatrix::zeros(n, d);
    match cfg.feature_density {
        None => {
            for v in 0..n {
                for j in 0..d {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    features.set(v, j, means[block[v]][j] + cfg.noise * z);
                }
            }
        }
        Some(density) => {
            // `means` holds separation · z; shifting by −separation²/2 keeps
            // the expected rate at `density`.
            let shift = cfg.separation * cfg.separation / 2.0;
            let rates: Vec<Vec<f64>> = means
                .iter()
                .map(|m| {
                    m.iter()
                        .map(|&x| (density * (x - shift).exp()).min(1.0))
                        .collect()
                })
                .collect();
            for v in 0..n {
                for j in 0..d {
                    if rng.random::<f64>() < rates[block[v]][j] {
                        features.set(v, j, 1.0);
                    }
                }
            }
        }
    }

    let (mut train, mut val, mut test) = (Vec::new(), Vec::new(), Vec::new());
    let mut start = 0;
    for &s in &cfg.block_sizes {
        let mut members: Vec<usize> = (start..start + s).collect();
        members.shuffle(&mut rng);
        train.extend_from_slice(&members[..cfg.train_per_class]);
        val.extend_from_slice(
            &members[cfg.train_per_class..cfg.train_per_class + cfg.val_per_class],
        );
        test.extend_from_slice(&members[cfg.train_per_class + cfg.val_per_class..]);
        start += s;
    }
    for set in [&mut train, &mut val, &mut test] {
        set.sort_unstable();
    }
    let labels = block.iter().map(|&b| Some(b)).collect();
    let split = LabelledSplit::new(labels, train, val, test)?;
    let stats = crate::graph::EdgeListStats {
        listed: edges.len(),
        ..Default::default()
    };
    Ok(GraphBundle {
        graph,
        features,
        split,
        edge_stats: stats,
    })
}
