use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use gcoarse::coarse::coarse_graph;
use gcoarse::config::apply_config_file;
use gcoarse::metrics::error_report;
use gcoarse::pipeline::{run_pipeline_on, sweep_on, sweep_table};
use gcoarse::verify::verify_bundle;
use gcoarse::{
    coarsen, load_graph_bundle, save_graph_bundle, sbm_generate, verify, Depth, Error,
    ExperimentConfig, GraphBundle, Method, ModelKind, SbmConfig, VerifyOptions,
};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_VERIFY: u8 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "gcoarse",
    version,
    about = "Train GNNs on coarsened graphs and evaluate on the original graph"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Coarsen a graph and write the node-to-cluster assignment.
    Coarsen(CommonArgs),
    /// Train once on the coarse graph and evaluate on the original graph.
    Train(CommonArgs),
    /// Run the full experiment over several seeds.
    Pipeline(CommonArgs),
    /// Run every combination of methods and ratios.
    Sweep(SweepArgs),
    /// Run the invariant suites.
    Verify(VerifyArgs),
    /// Generate a stochastic block model bundle.
    Synth(SynthArgs),
}

#[derive(Args, Debug, Clone)]
struct CommonArgs {
    /// Bundle directory holding edges.tsv, features.csv, labels.csv and split.tsv.
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long, default_value = "gcn")]
    model: ModelKind,
    #[arg(long, default_value = "variation_neighborhoods")]
    method: Method,
    /// Fraction of nodes kept, in (0, 1].
    #[arg(long, default_value_t = 0.5)]
    ratio: f64,
    #[arg(long, default_value_t = 1)]
    runs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file (JSON report, or partition.tsv for `coarsen`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// `key = value` file whose entries override the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Random vectors for the 3ε bound in the error report; 0 skips the report.
    #[arg(long, default_value_t = 0)]
    error_samples: usize,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Comma-separated coarsening ratios.
    #[arg(long, value_delimiter = ',', default_value = "0.7,0.5,0.3,0.1")]
    ratios: Vec<f64>,
    /// Comma-separated method names.
    #[arg(long, value_delimiter = ',', default_value = "variation_neighborhoods")]
    methods: Vec<Method>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long, default_value = "quick")]
    depth: Depth,
    /// Also check the graph-level invariants of this bundle.
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Perturb the partition normalization so the orthonormality check fails.
    #[arg(long)]
    inject_fault: bool,
    /// Write the report as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Comma-separated block sizes.
    #[arg(long, value_delimiter = ',', default_value = "50,50")]
    blocks: Vec<usize>,
    #[arg(long, default_value_t = 0.2)]
    p_in: f64,
    #[arg(long, default_value_t = 0.01)]
    p_out: f64,
    #[arg(long, default_value_t = 16)]
    features: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Standard deviation of the block feature means.
    #[arg(long, default_value_t = 1.0)]
    separation: f64,
    /// Standard deviation of per-node feature noise.
    #[arg(long, default_value_t = 1.0)]
    noise: f64,
    /// Emit 0/1 features with this mean density instead of Gaussian ones.
    #[arg(long)]
    binary_density: Option<f64>,
    #[arg(long)]
    train_per_class: Option<usize>,
    #[arg(long)]
    val_per_class: Option<usize>,
    /// Output bundle directory.
    #[arg(long)]
    out: PathBuf,
}

/// A failure with the exit status it maps to.
struct Failure {
    code: u8,
    msg: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if e.is_usage_error() {
            EXIT_USAGE
        } else {
            EXIT_DATA
        };
        Failure {
            code,
            msg: e.to_string(),
        }
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        msg: msg.into(),
    }
}

fn experiment_config(args: &CommonArgs) -> Result<ExperimentConfig, Failure> {
    let mut cfg = ExperimentConfig::new(args.model, args.method, args.ratio);
    cfg.dataset = args.dataset.clone();
    cfg.runs = args.runs;
    cfg.train.seed = args.seed;
    cfg.coarsen.seed = args.seed;
    cfg.workers = args.workers;
    cfg.error_samples = args.error_samples;
    if let Some(path) = &args.config {
        apply_config_file(&mut cfg, path).map_err(|e| usage(e.to_string()))?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load(cfg: &ExperimentConfig) -> Result<GraphBundle, Failure> {
    let dir = cfg
        .dataset
        .as_ref()
        .ok_or_else(|| usage("--dataset is required"))?;
    Ok(load_graph_bundle(dir)?)
}

fn write_out(path: &Path, body: &str) -> Result<(), Failure> {
    fs::write(path, body).map_err(|e| Failure {
        code: EXIT_DATA,
        msg: format!("cannot write {}: {e}", path.display()),
    })
}

fn cmd_coarsen(args: &CommonArgs) -> Result<(), Failure> {
    let cfg = experiment_config(args)?;
    let bundle = load(&cfg)?;
    let g = &bundle.graph;
    let start = Instant::now();
    let p = coarsen(g, &cfg.coarsen)?;
    let secs = start.elapsed().as_secs_f64();
    let cg = coarse_graph(g, &p)?;
    println!(
        "{} @ {}: {} nodes, {} edges -> {} nodes, {} edges in {secs:.3}s",
        cfg.coarsen.method,
        cfg.coarsen.ratio,
        g.n(),
        g.num_edges(),
        cg.k(),
        cg.num_edges()
    );
    if cfg.error_samples > 0 {
        let e = error_report(
            g,
            &p,
            cfg.coarsen.k_eig,
            cfg.error_samples,
            cfg.coarsen.seed,
        )?;
        println!(
            "{}",
            serde_json::to_string_pretty(&e).expect("report serializes")
        );
    }
    if let Some(out) = &args.out {
        p.save_tsv(out)?;
        log::info!("wrote {}", out.display());
    }
    Ok(())
}

fn cmd_pipeline(args: &CommonArgs, single: bool) -> Result<(), Failure> {
    let mut cfg = experiment_config(args)?;
    if single {
        cfg.runs = 1;
    }
    let bundle = load(&cfg)?;
    let report = run_pipeline_on(&bundle, &cfg)?;
    if single {
        let run = &report.runs[0];
        println!("{:>6} {:>12} {:>12}", "epoch", "train loss", "val loss");
        for (i, (t, v)) in run.train_losses.iter().zip(&run.val_losses).enumerate() {
            println!("{:>6} {t:>12.6} {v:>12.6}", i + 1);
        }
    }
    print!("{}", report.render());
    if let Some(out) = &args.out {
        write_out(out, &report.to_json())?;
    }
    Ok(())
}

fn cmd_sweep(args: &SweepArgs) -> Result<(), Failure> {
    let cfg = experiment_config(&args.common)?;
    let bundle = load(&cfg)?;
    let cells = sweep_on(&bundle, &cfg, &args.ratios, &args.methods)?;
    print!("{}", sweep_table(&cells));
    if let Some(out) = &args.common.out {
        write_out(
            out,
            &serde_json::to_string_pretty(&cells).expect("cells serialize"),
        )?;
    }
    let failed = cells.iter().filter(|c| c.report.is_err()).count();
    if failed == cells.len() {
        return Err(Failure {
            code: EXIT_DATA,
            msg: "every sweep cell failed".into(),
        });
    }
    Ok(())
}

fn cmd_verify(args: &VerifyArgs) -> Result<(), Failure> {
    let opts = VerifyOptions {
        depth: args.depth,
        seed: args.seed,
        inject_fault: args.inject_fault,
    };
    let mut report = verify(&opts);
    if let Some(dir) = &args.dataset {
        let bundle = load_graph_bundle(dir)?;
        report.checks.extend(verify_bundle(&bundle, &opts).checks);
    }
    print!("{}", report.render());
    if let Some(out) = &args.out {
        write_out(
            out,
            &serde_json::to_string_pretty(&report).expect("report serializes"),
        )?;
    }
    if report.all_passed() {
        Ok(())
    } else {
        Err(Failure {
            code: EXIT_VERIFY,
            msg: format!("{} verification check(s) failed", report.failures()),
        })
    }
}

fn cmd_synth(args: &SynthArgs) -> Result<(), Failure> {
    let mut cfg = SbmConfig::new(
        args.blocks.clone(),
        args.p_in,
        args.p_out,
        args.features,
        args.seed,
    );
    cfg.separation = args.separation;
    cfg.noise = args.noise;
    cfg.feature_density = args.binary_density;
    if let Some(t) = args.train_per_class {
        cfg.train_per_class = t;
    }
    if let Some(v) = args.val_per_class {
        cfg.val_per_class = v;
    }
    let bundle = sbm_generate(&cfg)?;
    save_graph_bundle(&bundle, &args.out)?;
    println!(
        "wrote {}: {} nodes, {} edges, {} classes",
        args.out.display(),
        bundle.graph.n(),
        bundle.graph.num_edges(),
        bundle.split.classes
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match &cli.command {
        Command::Coarsen(a) => cmd_coarsen(a),
        Command::Train(a) => cmd_pipeline(a, true),
        Command::Pipeline(a) => cmd_pipeline(a, false),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Synth(a) => cmd_synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
