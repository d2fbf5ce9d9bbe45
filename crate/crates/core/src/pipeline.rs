//! End-to-end experiments: coarsen, aggregate, train on the coarse graph,
//! then evaluate the trained weights on the original graph.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coarse::{
    coarse_features, coarse_graph, coarse_labels, CoarseGraph, CoarseLabels, FeatureMode,
    LabelPolicy,
};
use crate::coarsen::{coarsen, CoarsenConfig, Method};
use crate::dataset::{load_graph_bundle, GraphBundle, LabelledSplit};
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::gnn::{predict_full, train_with_classes, ModelKind, TrainConfig};
use crate::graph::{normalized_adjacency_selfloops, Graph};
use crate::metrics::{error_report, ErrorReport};
use crate::partition::Partition;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SplitMode {
    /// Use the bundle's split.
    Fixed,
    /// Fresh stratified split per run.
    Random {
        train_per_class: usize,
        val_per_class: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: Option<PathBuf>,
    pub model: ModelKind,
    pub coarsen: CoarsenConfig,
    pub train: TrainConfig,
    pub runs: usize,
    pub label_policy: LabelPolicy,
    pub feature_mode: FeatureMode,
    pub split: SplitMode,
    /// Scale every feature row to unit L1 norm before anything else.
    pub normalize_features: bool,
    /// Worker threads for concurrent runs; 0 uses all cores.
    pub workers: usize,
    /// Samples for the 3ε bound in the error report; 0 skips the report.
    pub error_samples: usize,
}

impl ExperimentConfig {
    pub fn new(model: ModelKind, method: Method, ratio: f64) -> Self {
        Self {
            dataset: None,
            model,
            coarsen: CoarsenConfig::new(method, ratio),
            train: TrainConfig::for_model(model),
            runs: 1,
            label_policy: LabelPolicy::default(),
            feature_mode: FeatureMode::default(),
            split: SplitMode::Fixed,
            normalize_features: true,
            workers: 0,
            error_samples: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        self.coarsen.validate()?;
        self.train.validate()
    }

    /// True when coarsening leaves every node on its own.
    pub fn is_identity(&self) -> bool {
        self.coarsen.method == Method::Identity || self.coarsen.ratio >= 1.0
    }
}

/// Element counts standing in for training memory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorCount {
    /// Input feature elements on the training graph, `n' · d`.
    pub input: usize,
    /// Hidden activation elements, `n' · h`.
    pub hidden: usize,
    pub parameters: usize,
    /// `input + hidden + parameters`.
    pub peak: usize,
}

impl TensorCount {
    fn new(nodes: usize, features: usize, hidden: usize, parameters: usize) -> Self {
        let input = nodes * features;
        let hidden = nodes * hidden;
        Self {
            input,
            hidden,
            parameters,
            peak: input + hidden + parameters,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub seed: u64,
    pub test_accuracy: f64,
    pub train_losses: Vec<f64>,
    pub val_losses: Vec<f64>,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub stopped_early: bool,
    pub train_mask_size: usize,
    pub val_mask_size: usize,
    pub wall_time_s: f64,
    pub tensors: TensorCount,
    pub threads: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    pub nodes: usize,
    pub edges: usize,
    /// Unlabeled isolated nodes removed before coarsening.
    pub removed_isolated: usize,
    pub coarse_nodes: usize,
    pub coarse_edges: usize,
    /// `nodes / coarse_nodes`.
    pub node_reduction: f64,
    /// `edges / coarse_edges`; absent when the coarse graph has no edges.
    pub edge_reduction: Option<f64>,
    pub coarsening_time_s: f64,
    pub discarded_mixed: usize,
    pub discarded_overlap: usize,
    pub runs: Vec<RunMetrics>,
    pub mean_accuracy: f64,
    /// Population standard deviation over runs.
    pub std_accuracy: f64,
    pub errors: Option<ErrorReport>,
}

impl ExperimentReport {
    /// Copy with every wall-clock field zeroed, for reproducibility checks.
    pub fn without_timings(&self) -> Self {
        let mut r = self.clone();
        r.coarsening_time_s = 0.0;
        for run in &mut r.runs {
            run.wall_time_s = 0.0;
        }
        r
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One-row human-readable summary.
    pub fn summary_line(&self) -> String {
        format!(
            "{:<6} {:<24} {:>5.2} {:>7} {:>7} {:>8.2} ± {:<5.2} {:>9.3}s",
            self.config.model,
            self.config.coarsen.method,
            self.config.coarsen.ratio,
            self.coarse_nodes,
            self.coarse_edges,
            100.0 * self.mean_accuracy,
            100.0 * self.std_accuracy,
            self.coarsening_time_s,
        )
    }

    pub fn table_header() -> String {
        format!(
            "{:<6} {:<24} {:>5} {:>7} {:>7} {:>16} {:>10}",
            "model", "method", "ratio", "n'", "m'", "accuracy (%)", "coarsen"
        )
    }

    /// Multi-line human-readable report.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "graph: {} nodes, {} edges ({} unlabeled isolated removed)",
            self.nodes, self.edges, self.removed_isolated
        );
        let _ = writeln!(
            s,
            "coarse: {} nodes, {} edges (reduction x{:.2} nodes, x{} edges) in {:.3}s",
            self.coarse_nodes,
            self.coarse_edges,
            self.node_reduction,
            self.edge_reduction
                .map_or("inf".to_string(), |r| format!("{r:.2}")),
            self.coarsening_time_s
        );
        let _ = writeln!(
            s,
            "super-nodes dropped: {} mixed labels, {} train/val overlap",
            self.discarded_mixed, self.discarded_overlap
        );
        if let Some(e) = &self.errors {
            let _ = writeln!(
                s,
                "errors on largest component ({} nodes, k={}): nuclear {:.4}, spectral {:.4}, eps {:.4}, bound violations {}",
                e.component_nodes,
                e.k_eig,
                e.nuclear_error,
                e.spectral_error,
                e.epsilon_hat,
                e.bound_violations.map_or("n/a".to_string(), |v| v.to_string())
            );
        }
        let _ = writeln!(
            s,
            "{:>6} {:>10} {:>8} {:>8}",
            "seed", "accuracy", "epochs", "time"
        );
        for r in &self.runs {
            let _ = writeln!(
                s,
                "{:>6} {:>9.2}% {:>8} {:>7.2}s",
                r.seed,
                100.0 * r.test_accuracy,
                r.epochs_run,
                r.wall_time_s
            );
        }
        let _ = writeln!(
            s,
            "accuracy: {:.2} ± {:.2} over {} runs",
            100.0 * self.mean_accuracy,
            100.0 * self.std_accuracy,
            self.runs.len()
        );
        s
    }
}

/// Stratified random split: per class, `train_per_class` training and
/// `val_per_class` validation nodes; every other labeled node is a test node.
pub fn random_split(
    labels: &[Option<usize>],
    train_per_class: usize,
    val_per_class: usize,
    seed: u64,
) -> Result<LabelledSplit> {
    let classes = labels.iter().flatten().map(|&c| c + 1).max().unwrap_or(0);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (v, l) in labels.iter().enumerate() {
        if let Some(c) = l {
            by_class[*c].push(v);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut val, mut test) = (Vec::new(), Vec::new(), Vec::new());
    for (c, mut nodes) in by_class.into_iter().enumerate() {
        if nodes.len() < train_per_class + val_per_class {
            return Err(Error::Data(format!(
                "class {c} has {} labeled nodes, fewer than {train_per_class} + {val_per_class}",
                nodes.len()
            )));
        }
        nodes.shuffle(&mut rng);
        train.extend_from_slice(&nodes[..train_per_class]);
        val.extend_from_slice(&nodes[train_per_class..train_per_class + val_per_class]);
        test.extend_from_slice(&nodes[train_per_class + val_per_class..]);
    }
    for s in [&mut train, &mut val, &mut test] {
        s.sort_unstable();
    }
    let mut split = LabelledSplit::new(labels.to_vec(), train, val, test)?;
    split.classes = split.classes.max(classes);
    Ok(split)
}

/// Everything fixed before the seeded runs start.
pub struct Prepared {
    /// Original graph, used for evaluation.
    pub graph: Graph,
    /// Preprocessed features of the original graph.
    pub features: DenseMatrix,
    /// Original nodes that take part in coarsening.
    pub kept: Vec<usize>,
    /// Partition of `kept` (indices into `kept`).
    pub partition: Partition,
    pub coarse: CoarseGraph,
    pub coarse_features: DenseMatrix,
    pub coarsening_time_s: f64,
}

fn stage<T>(name: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| e.in_stage(name))
}

/// Preprocess features, drop unlabeled isolated nodes and coarsen.
pub fn prepare(bundle: &GraphBundle, cfg: &ExperimentConfig) -> Result<Prepared> {
    cfg.validate()?;
    let g = &bundle.graph;
    if bundle.features.rows() != g.n() || bundle.split.n() != g.n() {
        return Err(Error::Data(format!(
            "bundle disagrees on node count: graph {}, features {}, labels {}",
            g.n(),
            bundle.features.rows(),
            bundle.split.n()
        )));
    }
    let features = if cfg.normalize_features {
        bundle.features.row_normalize_l1()
    } else {
        bundle.features.clone()
    };
    // Removing nodes only matters when something is contracted; keeping them
    // for the identity partition keeps that path identical to plain training.
    let kept: Vec<usize> = if cfg.is_identity() {
        (0..g.n()).collect()
    } else {
        (0..g.n())
            .filter(|&v| g.degree(v) > 0.0 || bundle.split.labels[v].is_some())
            .collect()
    };
    let sub = if kept.len() == g.n() {
        g.clone()
    } else {
        g.induced_subgraph(&kept)
    };

    let start = Instant::now();
    let partition = stage("coarsen", coarsen(&sub, &cfg.coarsen))?;
    let coarsening_time_s = start.elapsed().as_secs_f64();

    let coarse = stage("aggregate", coarse_graph(&sub, &partition))?;
    let sub_features = if kept.len() == g.n() {
        features.clone()
    } else {
        features.select_rows(&kept)
    };
    let xc = stage(
        "aggregate",
        coarse_features(&sub_features, &partition, cfg.feature_mode),
    )?;
    Ok(Prepared {
        graph: g.clone(),
        features,
        kept,
        partition,
        coarse,
        coarse_features: xc,
        coarsening_time_s,
    })
}

/// The split used by run `run` under `cfg`.
pub fn split_for_run(
    bundle: &GraphBundle,
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<LabelledSplit> {
    match cfg.split {
        SplitMode::Fixed => Ok(bundle.split.clone()),
        SplitMode::Random {
            train_per_class,
            val_per_class,
        } => random_split(&bundle.split.labels, train_per_class, val_per_class, seed),
    }
}

fn aggregate_labels(
    prep: &Prepared,
    split: &LabelledSplit,
    policy: LabelPolicy,
) -> Result<CoarseLabels> {
    let local = if prep.kept.len() == split.n() {
        split.clone()
    } else {
        split.restrict(&prep.kept)
    };
    let labels = stage("aggregate", coarse_labels(&local, &prep.partition, policy))?;
    if labels.train_mask.is_empty() {
        return Err(Error::Data(format!(
            "no training super-node left after aggregation ({} mixed, {} train/val overlap discarded)",
            labels.discarded_mixed, labels.discarded_overlap
        ))
        .in_stage("aggregate"));
    }
    Ok(labels)
}

/// One seeded run: train on the coarse graph, evaluate on the original.
/// Returns the metrics and the original-graph logits.
pub fn run_once(
    bundle: &GraphBundle,
    prep: &Prepared,
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<(RunMetrics, DenseMatrix)> {
    let start = Instant::now();
    let split = split_for_run(bundle, cfg, seed)?;
    let labels = aggregate_labels(prep, &split, cfg.label_policy)?;
    let tc = TrainConfig {
        seed,
        ..cfg.train.clone()
    };
    let outcome = stage(
        "train",
        train_with_classes(
            cfg.model,
            &prep.coarse.propagation,
            &prep.coarse_features,
            &labels,
            split.classes,
            &tc,
        ),
    )?;
    let (logits, acc) = stage(
        "evaluate",
        predict_full(
            &prep.graph,
            &prep.features,
            &outcome.model,
            &split.labels,
            &split.test,
        ),
    )?;
    let metrics = RunMetrics {
        seed,
        test_accuracy: acc,
        train_losses: outcome.train_losses,
        val_losses: outcome.val_losses,
        epochs_run: outcome.epochs_run,
        best_epoch: outcome.best_epoch,
        stopped_early: outcome.stopped_early,
        train_mask_size: labels.train_mask.len(),
        val_mask_size: labels.val_mask.len(),
        wall_time_s: start.elapsed().as_secs_f64(),
        tensors: TensorCount::new(
            prep.coarse.k(),
            prep.coarse_features.cols(),
            tc.hidden_dim,
            outcome.model.num_params(),
        ),
        threads: rayon::current_num_threads(),
    };
    Ok((metrics, logits))
}

/// Train directly on the original graph, with no coarsening involved.
pub fn baseline_logits(
    bundle: &GraphBundle,
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<DenseMatrix> {
    let features = if cfg.normalize_features {
        bundle.features.row_normalize_l1()
    } else {
        bundle.features.clone()
    };
    let split = split_for_run(bundle, cfg, seed)?;
    let labels = coarse_labels(&split, &Partition::identity(split.n()), cfg.label_policy)?;
    let prop = normalized_adjacency_selfloops(&bundle.graph);
    let tc = TrainConfig {
        seed,
        ..cfg.train.clone()
    };
    let outcome = train_with_classes(cfg.model, &prop, &features, &labels, split.classes, &tc)?;
    outcome.model.forward(&prop, &features, None)
}

fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if workers == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {workers} workers: {e}")))?;
    Ok(pool.install(f))
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Run the whole experiment on an in-memory bundle.
pub fn run_pipeline_on(bundle: &GraphBundle, cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    with_workers(cfg.workers, || run_inner(bundle, cfg))?
}

fn run_inner(bundle: &GraphBundle, cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let prep = prepare(bundle, cfg)?;
    let seeds: Vec<u64> = (0..cfg.runs as u64)
        .map(|r| cfg.train.seed.wrapping_add(r))
        .collect();
    let results: Vec<Result<(RunMetrics, DenseMatrix)>> = seeds
        .par_iter()
        .map(|&s| run_once(bundle, &prep, cfg, s))
        .collect();
    let mut runs = Vec::with_capacity(results.len());
    for r in results {
        runs.push(r?.0);
    }
    let accs: Vec<f64> = runs.iter().map(|r| r.test_accuracy).collect();
    let (mean, std) = mean_std(&accs);

    // Label bookkeeping of the first run's split describes the report.
    let split = split_for_run(bundle, cfg, seeds[0])?;
    let labels = aggregate_labels(&prep, &split, cfg.label_policy)?;

    let errors = if cfg.error_samples > 0 {
        let sub = if prep.kept.len() == bundle.graph.n() {
            bundle.graph.clone()
        } else {
            bundle.graph.induced_subgraph(&prep.kept)
        };
        Some(stage(
            "metrics",
            error_report(
                &sub,
                &prep.partition,
                cfg.coarsen.k_eig,
                cfg.error_samples,
                cfg.coarsen.seed,
            ),
        )?)
    } else {
        None
    };

    let edges = bundle.graph.num_edges();
    let coarse_edges = prep.coarse.num_edges();
    Ok(ExperimentReport {
        schema_version: REPORT_SCHEMA_VERSION,
        config: cfg.clone(),
        nodes: bundle.graph.n(),
        edges,
        removed_isolated: bundle.graph.n() - prep.kept.len(),
        coarse_nodes: prep.coarse.k(),
        coarse_edges,
        node_reduction: bundle.graph.n() as f64 / prep.coarse.k() as f64,
        edge_reduction: (coarse_edges > 0).then(|| edges as f64 / coarse_edges as f64),
        coarsening_time_s: prep.coarsening_time_s,
        discarded_mixed: labels.discarded_mixed,
        discarded_overlap: labels.discarded_overlap,
        runs,
        mean_accuracy: mean,
        std_accuracy: std,
        errors,
    })
}

/// Load the bundle named in `cfg` and run the experiment.
pub fn run_pipeline(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let path = cfg
        .dataset
        .as_ref()
        .ok_or_else(|| Error::Config("no dataset directory given".into()))?;
    let bundle = stage("load", load_graph_bundle(path))?;
    run_pipeline_on(&bundle, cfg)
}

/// One cell of a sweep; failures are kept as messages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub method: Method,
    pub ratio: f64,
    pub report: std::result::Result<ExperimentReport, String>,
}

/// Every (method, ratio) combination, in method-major order.
pub fn sweep_on(
    bundle: &GraphBundle,
    cfg: &ExperimentConfig,
    ratios: &[f64],
    methods: &[Method],
) -> Result<Vec<SweepCell>> {
    if ratios.is_empty() || methods.is_empty() {
        return Err(Error::Config(
            "a sweep needs at least one ratio and one method".into(),
        ));
    }
    let cells: Vec<(Method, f64)> = methods
        .iter()
        .flat_map(|&m| ratios.iter().map(move |&r| (m, r)))
        .collect();
    with_workers(cfg.workers, || {
        cells
            .par_iter()
            .map(|&(method, ratio)| {
                let mut c = cfg.clone();
                c.coarsen.method = method;
                c.coarsen.ratio = ratio;
                c.workers = 0;
                let report = run_inner(bundle, &c).map_err(|e| {
                    log::warn!("sweep cell {method} @ {ratio} failed: {e}");
                    e.to_string()
                });
                SweepCell {
                    method,
                    ratio,
                    report,
                }
            })
            .collect()
    })
}

pub fn sweep(cfg: &ExperimentConfig, ratios: &[f64], methods: &[Method]) -> Result<Vec<SweepCell>> {
    let path = cfg
        .dataset
        .as_ref()
        .ok_or_else(|| Error::Config("no dataset directory given".into()))?;
    let bundle = stage("load", load_graph_bundle(path))?;
    sweep_on(&bundle, cfg, ratios, methods)
}

/// Combined human-readable table for a sweep.
pub fn sweep_table(cells: &[SweepCell]) -> String {
    let mut s = ExperimentReport::table_header();
    s.push('\n');
    for c in cells {
        match &c.report {
            Ok(r) => s.push_str(&r.summary_line()),
            Err(e) => {
                let _ = write!(s, "{:<6} {:<24} {:>5.2} failed: {e}", "", c.method, c.ratio);
            }
        }
        s.push('\n');
    }
    s
}
