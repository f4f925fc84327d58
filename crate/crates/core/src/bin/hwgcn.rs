use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use hwgcn::data::{dump_split, load_bundle, load_bundle_with_report, random_split, GraphBundle};
use hwgcn::experiment::{
    best_point, build_filter, depth_study, learn_weights, repeated_training, supports, sweep,
    SplitChoice, WeightConfig, WeightRun,
};
use hwgcn::graph::hadamard_disjoint;
use hwgcn::lasso::{LassoConfig, ProportionMode, ProportionSchedule, SupportMode, WeightDump};
use hwgcn::nn::TrainConfig;
use hwgcn::qp::SolverConfig;
use hwgcn::{Error, Result};

#[derive(Parser)]
#[command(name = "hwgcn", version, about = "Higher-order weighted GCN experiments")]
struct Cli {
    /// Worker threads; 1 reproduces any other count exactly.
    #[arg(long, global = true, env = "HWGCN_THREADS")]
    threads: Option<usize>,
    /// Log progress (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Dataset statistics as JSON.
    Info { bundle: PathBuf },
    /// Entry counts per order.
    Orders {
        bundle: PathBuf,
        #[arg(long, default_value_t = 6)]
        max_order: usize,
        #[arg(long, default_value = "distance")]
        mode: SupportMode,
    },
    /// Learn higher-order weights and print magnitude statistics.
    Weights(WeightsArgs),
    /// Repeated seeded training runs, reported as JSON.
    Train(TrainArgs),
    /// Accuracy as the highest filter order grows.
    Sweep(SweepArgs),
    /// Plain GCN accuracy at several depths.
    Depth(DepthArgs),
    /// Write a seeded random split.
    Split {
        bundle: PathBuf,
        #[arg(long, default_value_t = 20)]
        per_class: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Clone)]
struct SolverArgs {
    #[arg(long, default_value_t = 1.0)]
    rho: f64,
    #[arg(long, default_value_t = 1e-6)]
    sigma: f64,
    /// Over-relaxation factor.
    #[arg(long, default_value_t = 1.6)]
    relax: f64,
    #[arg(long, default_value_t = 4000)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-5)]
    eps_abs: f64,
    #[arg(long, default_value_t = 1e-5)]
    eps_rel: f64,
    #[arg(long)]
    no_adaptive_rho: bool,
    #[arg(long)]
    no_polish: bool,
}

#[derive(Args, Clone)]
struct LearnArgs {
    #[arg(long, default_value = "distance")]
    mode: SupportMode,
    /// `order<TAB>fraction` lines; keeps the top fraction of each row.
    #[arg(long)]
    proportions: Option<PathBuf>,
    /// With proportions, keep the single-solve weights instead of solving
    /// again on the retained neighbors.
    #[arg(long)]
    truncate: bool,
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    row_normalize_features_for_lasso: bool,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct WeightsArgs {
    bundle: PathBuf,
    #[arg(long, default_value_t = 6)]
    max_order: usize,
    #[command(flatten)]
    learn: LearnArgs,
    /// Weight dump destination.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct SplitArgs {
    /// `fixed` reads `<bundle>/split` (or --split-dir); `random` resamples per run.
    #[arg(long, default_value = "fixed")]
    split: String,
    #[arg(long)]
    split_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    per_class: usize,
}

#[derive(Args, Clone)]
struct TrainFlags {
    #[arg(long, default_value_t = 1)]
    runs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 2)]
    layers: usize,
    #[arg(long, default_value_t = 16)]
    hidden: usize,
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    #[arg(long, default_value_t = 5e-4)]
    l2: f64,
    #[arg(long, default_value_t = 0.5)]
    dropout: f64,
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    #[arg(long, default_value_t = 10)]
    early_stop_window: usize,
    #[arg(long)]
    no_early_stop: bool,
    /// Use the learned weights as they are instead of averaging with the transpose.
    #[arg(long)]
    no_symmetrize: bool,
}

#[derive(Args)]
struct TrainArgs {
    bundle: PathBuf,
    #[arg(long, required_unless_present = "plain_gcn", conflicts_with = "plain_gcn")]
    weights: Option<PathBuf>,
    #[arg(long)]
    plain_gcn: bool,
    /// Highest order taken from the weights (default: all).
    #[arg(long)]
    max_order: Option<usize>,
    #[command(flatten)]
    split: SplitArgs,
    #[command(flatten)]
    train: TrainFlags,
    /// JSON report destination (default stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    bundle: PathBuf,
    /// Precomputed weights; learned on the fly when absent.
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Inclusive range `a..b` or a list `a,b,c`; 1 is the plain GCN.
    #[arg(long, default_value = "1..6")]
    orders: String,
    #[command(flatten)]
    learn: LearnArgs,
    #[command(flatten)]
    split: SplitArgs,
    #[command(flatten)]
    train: TrainFlags,
    /// TSV series destination (default stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Full JSON report.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct DepthArgs {
    bundle: PathBuf,
    #[arg(long, default_value = "1..4")]
    layers_range: String,
    #[command(flatten)]
    split: SplitArgs,
    #[command(flatten)]
    train: TrainFlags,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_list(s: &str) -> Result<Vec<usize>> {
    let bad = || Error::InvalidArgument(format!("bad range {s:?}; use a..b or a,b,c"));
    if let Some((a, b)) = s.split_once("..") {
        let a: usize = a.trim().parse().map_err(|_| bad())?;
        let b: usize = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
        if a > b {
            return Err(bad());
        }
        Ok((a..=b).collect())
    } else {
        s.split(',').map(|v| v.trim().parse().map_err(|_| bad())).collect()
    }
}

impl SolverArgs {
    fn config(&self) -> SolverConfig {
        SolverConfig {
            rho: self.rho,
            sigma: self.sigma,
            alpha: self.relax,
            max_iter: self.max_iter,
            eps_abs: self.eps_abs,
            eps_rel: self.eps_rel,
            adaptive_rho: !self.no_adaptive_rho,
            polish: !self.no_polish,
            ..SolverConfig::default()
        }
    }
}

impl LearnArgs {
    fn config(&self, max_order: usize) -> Result<WeightConfig> {
        Ok(WeightConfig {
            max_order,
            mode: self.mode,
            lasso: LassoConfig {
                solver: self.solver.config(),
                proportion_mode: if self.truncate {
                    ProportionMode::Truncate
                } else {
                    ProportionMode::Resolve
                },
            },
            schedule: self.proportions.as_deref().map(ProportionSchedule::load).transpose()?,
            row_normalize_features: self.row_normalize_features_for_lasso,
        })
    }
}

impl SplitArgs {
    fn choice(&self, bundle: &Path) -> Result<SplitChoice> {
        match self.split.as_str() {
            "fixed" => Ok(SplitChoice::Fixed {
                dir: self.split_dir.clone().unwrap_or_else(|| bundle.join("split")),
            }),
            "random" => Ok(SplitChoice::Random {
                per_class: self.per_class,
            }),
            other => Err(Error::InvalidArgument(format!("unknown split {other:?}"))),
        }
    }
}

impl TrainFlags {
    fn config(&self) -> TrainConfig {
        TrainConfig {
            layers: self.layers,
            hidden: self.hidden,
            lr: self.lr,
            l2: self.l2,
            dropout: self.dropout,
            max_epochs: self.epochs,
            early_stop: (!self.no_early_stop).then_some(self.early_stop_window),
            seed: self.seed,
        }
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        }),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| Error::Io {
                    path: "<stdout>".into(),
                    source: e,
                })
        }
    }
}

fn to_json(value: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn weight_stats_tsv(run: &WeightRun) -> String {
    let mut out = String::from(
        "k\tsupport\tsolved\tskipped\tfailed\tmax_iter\tretained\t[0,1e-5)\t[1e-5,1e-4)\t[1e-4,1e-3)\t[1e-3,1e-2)\t[1e-2,1e-1)\t[1e-1,inf)\n",
    );
    for (r, s) in run.reports.iter().zip(&run.stats) {
        let pct: Vec<String> = s.percentages().iter().map(|p| format!("{p:.2}")).collect();
        out += &format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            r.k,
            s.support,
            r.solved,
            r.skipped,
            r.failed,
            r.max_iter,
            r.retained,
            pct.join("\t")
        );
    }
    out
}

fn obtain_weights(bundle: &GraphBundle, path: Option<&Path>, learn: &LearnArgs, max_order: usize) -> Result<WeightDump> {
    match path {
        Some(p) => WeightDump::load(p),
        None => Ok(learn_weights(bundle, &learn.config(max_order)?)?.dump),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Info { bundle } => {
            let (b, report) = load_bundle_with_report(&bundle)?;
            emit(None, &to_json(&json!({ "stats": b.stats(), "load": report })))
        }
        Command::Orders { bundle, max_order, mode } => {
            let b = load_bundle(&bundle)?;
            let sets = supports(&b, max_order, mode)?;
            let mut out = String::from("k\tnnz\n");
            for (k, e) in &sets {
                out += &format!("{k}\t{}\n", e.nnz());
            }
            let mut overlap = false;
            for a in 0..sets.len() {
                for c in a + 1..sets.len() {
                    overlap |= !hadamard_disjoint(&sets[a].1, &sets[c].1)?;
                }
            }
            if mode == SupportMode::Distance && overlap {
                return Err(Error::InvalidArgument("distance orders overlap".into()));
            }
            out += &format!("# overlap\t{overlap}\n");
            emit(None, &out)
        }
        Command::Weights(args) => {
            let b = load_bundle(&args.bundle)?;
            let run = learn_weights(&b, &args.learn.config(args.max_order)?)?;
            run.dump.save(&args.out)?;
            emit(None, &weight_stats_tsv(&run))?;
            let solved: usize = run.reports.iter().map(|r| r.solved).sum();
            let failed: usize = run.reports.iter().map(|r| r.failed).sum();
            if solved == 0 && failed > 0 {
                return Err(Error::InvalidArgument(format!("all {failed} row problems failed")));
            }
            Ok(())
        }
        Command::Train(args) => {
            let start = Instant::now();
            let b = load_bundle(&args.bundle)?;
            let dump = args.weights.as_deref().map(WeightDump::load).transpose()?;
            let filter = build_filter(&b, dump.as_ref(), args.max_order, !args.train.no_symmetrize)?;
            let split = args.split.choice(&args.bundle)?;
            let cfg = args.train.config();
            let summary = repeated_training(&b, &filter, &split, args.train.runs, args.train.seed, &cfg)?;
            let report = json!({
                "command": "train",
                "config": {
                    "bundle": args.bundle,
                    "weights": args.weights,
                    "max_order": args.max_order.or(dump.as_ref().map(|d| d.max_order)),
                    "symmetrize": !args.train.no_symmetrize,
                    "split": split,
                    "runs": args.train.runs,
                    "seed": args.train.seed,
                    "train": cfg,
                },
                "runs": summary.runs,
                "mean": summary.mean,
                "std": summary.std,
                "seeds": summary.seeds,
                "timing": { "wall_seconds": start.elapsed().as_secs_f64() },
            });
            emit(args.out.as_deref(), &to_json(&report))
        }
        Command::Sweep(args) => {
            let start = Instant::now();
            let b = load_bundle(&args.bundle)?;
            let orders = parse_list(&args.orders)?;
            let top = orders.iter().copied().max().unwrap_or(1).max(2);
            let dump = obtain_weights(&b, args.weights.as_deref(), &args.learn, top)?;
            let split = args.split.choice(&args.bundle)?;
            let cfg = args.train.config();
            let points = sweep(&b, &dump, &orders, &split, args.train.runs, args.train.seed, !args.train.no_symmetrize, &cfg);
            let mut tsv = String::from("k\tmean\tstd\n");
            for p in &points {
                tsv += &format!("{}\t{:.6}\t{:.6}\n", p.k, p.mean, p.std);
            }
            if let Some(path) = &args.report {
                let report = json!({
                    "command": "sweep",
                    "config": {
                        "bundle": args.bundle,
                        "weights": args.weights,
                        "mode": dump.mode,
                        "orders": orders,
                        "split": split,
                        "runs": args.train.runs,
                        "seed": args.train.seed,
                        "train": cfg,
                    },
                    "points": points,
                    "best_k": best_point(&points).map(|p| p.k),
                    "timing": { "wall_seconds": start.elapsed().as_secs_f64() },
                });
                emit(Some(path), &to_json(&report))?;
            }
            emit(args.out.as_deref(), &tsv)
        }
        Command::Depth(args) => {
            let start = Instant::now();
            let b = load_bundle(&args.bundle)?;
            let layers = parse_list(&args.layers_range)?;
            let split = args.split.choice(&args.bundle)?;
            let cfg = args.train.config();
            let points = depth_study(&b, &split, &layers, args.train.runs, args.train.seed, &cfg)?;
            let report = json!({
                "command": "depth",
                "config": {
                    "bundle": args.bundle,
                    "layers": layers,
                    "split": split,
                    "runs": args.train.runs,
                    "seed": args.train.seed,
                    "train": cfg,
                },
                "points": points,
                "timing": { "wall_seconds": start.elapsed().as_secs_f64() },
            });
            emit(args.out.as_deref(), &to_json(&report))
        }
        Command::Split { bundle, per_class, seed, out } => {
            let b = load_bundle(&bundle)?;
            dump_split(&random_split(&b, per_class, seed)?, &out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            eprintln!("error: could not size the worker pool: {e}");
            return ExitCode::FAILURE;
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
