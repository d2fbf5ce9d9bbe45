//! Train graph neural networks on a coarsened graph and transfer the learned
//! weights back to the original graph.

#![allow(clippy::needless_range_loop)]

pub mod coarse;
pub mod coarsen;
pub mod config;
pub mod dataset;
pub mod dense;
pub mod eigen;
pub mod error;
pub mod fixtures;
pub mod gnn;
pub mod graph;
pub mod kmeans;
pub mod metrics;
pub mod partition;
pub mod pipeline;
pub mod sparse;
pub mod synth;
pub mod verify;

pub use coarse::{
    coarse_features, coarse_graph, coarse_labels, CoarseGraph, CoarseLabels, FeatureMode,
    LabelPolicy,
};
pub use coarsen::{coarsen, CoarsenConfig, Method};
pub use dataset::{load_graph_bundle, save_graph_bundle, GraphBundle, LabelledSplit};
pub use dense::DenseMatrix;
pub use error::{Error, Result};
pub use gnn::{ModelKind, TrainConfig};
pub use graph::Graph;
pub use metrics::ErrorReport;
pub use partition::Partition;
pub use pipeline::{run_pipeline, sweep, ExperimentConfig, ExperimentReport, SplitMode};
pub use sparse::CsrMatrix;
pub use synth::{sbm_generate, SbmConfig};
pub use verify::{verify, Depth, VerifyOptions, VerifyReport};
