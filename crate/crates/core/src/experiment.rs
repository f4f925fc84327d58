//! End-to-end runs: weight learning, filter construction, repeated seeded
//! training, order sweeps and depth studies. Everything here is
//! deterministic given its seeds; wall-clock time is reported separately.

use std::path::PathBuf;
use std::time::Instant;

use crate::data::{fixed_split, random_split, GraphBundle, SplitSpec};
use crate::error::{Error, Result};
use crate::graph::{affinity, order_matrices, power_supports, EntrySet, OrderMatrix};
use crate::lasso::{
    assemble_filter, bucket_stats, normalize_filter, BucketStats, Candidates, LassoConfig,
    LassoInputs, LearnReport, ProportionSchedule, SupportMode, WeightDump, WeightMatrix,
};
use crate::nn::{train, Filter, Masks, TrainConfig, TrainResult};
use crate::sparse::CsrMatrix;

/// Settings for learning every order `2..=max_order`.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct WeightConfig {
    pub max_order: usize,
    pub mode: SupportMode,
    pub lasso: LassoConfig,
    pub schedule: Option<ProportionSchedule>,
    /// Fit against row-normalized features (the ones training sees).
    pub row_normalize_features: bool,
}

impl Default for WeightConfig {
    fn default() -> Self {
        Self {
            max_order: 6,
            mode: SupportMode::Distance,
            lasso: LassoConfig::default(),
            schedule: None,
            row_normalize_features: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightRun {
    pub dump: WeightDump,
    pub reports: Vec<LearnReport>,
    /// Bucket statistics over each order's full candidate support.
    pub stats: Vec<BucketStats>,
    pub seconds: f64,
}

/// Candidate patterns for orders `1..=max_order` in the requested mode.
pub fn supports(bundle: &GraphBundle, max_order: usize, mode: SupportMode) -> Result<Vec<(usize, EntrySet)>> {
    Ok(match mode {
        SupportMode::Distance => order_matrices(&bundle.graph, max_order)?
            .into_iter()
            .map(|m| (m.k, m.entries))
            .collect(),
        SupportMode::Power => power_supports(&bundle.graph, max_order)?
            .into_iter()
            .map(|m| (m.k, m.entries))
            .collect(),
    })
}

pub fn training_features(bundle: &GraphBundle) -> CsrMatrix {
    bundle.features.row_normalized()
}

pub fn learn_weights(bundle: &GraphBundle, cfg: &WeightConfig) -> Result<WeightRun> {
    if cfg.max_order < 2 {
        return Err(Error::InvalidArgument(format!(
            "weights need a maximum order of at least 2, got {}",
            cfg.max_order
        )));
    }
    let start = Instant::now();
    let x = if cfg.row_normalize_features {
        training_features(bundle)
    } else {
        bundle.features.clone()
    };
    let s = affinity(&bundle.graph);
    let inputs = LassoInputs::new(&x, &s)?;
    let mut orders = Vec::new();
    let mut reports = Vec::new();
    let mut stats = Vec::new();
    for (k, entries) in supports(bundle, cfg.max_order, cfg.mode)?.iter().skip(1) {
        let learned = inputs.learn_order_weights(
            Candidates { k: *k, entries },
            cfg.schedule.as_ref(),
            &cfg.lasso,
        )?;
        log::info!(
            "order {k}: {} rows solved, {} failed, {:.1}s elapsed",
            learned.report.solved,
            learned.report.failed,
            start.elapsed().as_secs_f64()
        );
        stats.push(bucket_stats(&learned.weights, entries.nnz())?);
        reports.push(learned.report);
        orders.push(learned.weights);
    }
    Ok(WeightRun {
        dump: WeightDump::new(bundle.n(), cfg.max_order, cfg.mode, orders)?,
        reports,
        stats,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Normalized propagation matrix. Without weights this is the plain GCN
/// affinity; otherwise the composite of orders `2..=upto` from the dump.
pub fn build_filter(
    bundle: &GraphBundle,
    weights: Option<&WeightDump>,
    upto: Option<usize>,
    symmetrize: bool,
) -> Result<Filter> {
    let Some(dump) = weights else {
        return Ok(affinity(&bundle.graph).into());
    };
    if dump.n != bundle.n() {
        return Err(Error::Dimension(format!(
            "weights are for {} nodes, bundle has {}",
            dump.n,
            bundle.n()
        )));
    }
    let upto = upto.unwrap_or(dump.max_order);
    if upto > dump.max_order {
        return Err(Error::InvalidArgument(format!(
            "order {upto} requested, weights stop at {}",
            dump.max_order
        )));
    }
    let a = OrderMatrix {
        k: 1,
        entries: bundle.graph.adjacency_entries(),
    };
    let used: Vec<WeightMatrix> = dump
        .orders
        .iter()
        .filter(|w| w.k() <= upto)
        .cloned()
        .collect();
    let composite = assemble_filter(&a, &used, dump.mode, symmetrize)?;
    Ok(normalize_filter(&composite)?.into())
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case", tag = "split")]
pub enum SplitChoice {
    /// Lists read from a directory, shared by every run.
    Fixed { dir: PathBuf },
    /// A fresh split per run, seeded with the run seed.
    Random { per_class: usize },
}

impl SplitChoice {
    pub fn resolve(&self, bundle: &GraphBundle, seed: u64) -> Result<SplitSpec> {
        match self {
            SplitChoice::Fixed { dir } => fixed_split(bundle, dir),
            SplitChoice::Random { per_class } => random_split(bundle, *per_class, seed),
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct RunRecord {
    pub seed: u64,
    pub test_accuracy: f64,
    pub epochs: usize,
    pub stopped_early: bool,
    pub best_val_epoch: usize,
    pub test_accuracy_at_best_val: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct RunSummary {
    pub runs: Vec<RunRecord>,
    pub seeds: Vec<u64>,
    pub mean: f64,
    /// Sample standard deviation (`n − 1`), zero for a single run.
    pub std: f64,
}

impl RunSummary {
    pub fn from_runs(runs: Vec<RunRecord>) -> Self {
        let acc: Vec<f64> = runs.iter().map(|r| r.test_accuracy).collect();
        let (mean, std) = mean_std(&acc);
        Self {
            seeds: runs.iter().map(|r| r.seed).collect(),
            runs,
            mean,
            std,
        }
    }

    pub fn accuracies(&self) -> Vec<f64> {
        self.runs.iter().map(|r| r.test_accuracy).collect()
    }
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Trains `runs` models with seeds `seed, seed + 1, ...`. The seed drives
/// both the split (random splits only) and the initialization and dropout.
pub fn repeated_training(
    bundle: &GraphBundle,
    filter: &Filter,
    split: &SplitChoice,
    runs: usize,
    seed: u64,
    cfg: &TrainConfig,
) -> Result<RunSummary> {
    if runs == 0 {
        return Err(Error::InvalidArgument("need at least one run".into()));
    }
    let x = training_features(bundle);
    let mut fixed = None;
    let mut records = Vec::with_capacity(runs);
    for r in 0..runs as u64 {
        let run_seed = seed.wrapping_add(r);
        let spec = match split {
            SplitChoice::Fixed { .. } => fixed.get_or_insert(split.resolve(bundle, run_seed)?).clone(),
            SplitChoice::Random { .. } => split.resolve(bundle, run_seed)?,
        };
        let result = train_once(bundle, filter, &x, &spec, &TrainConfig { seed: run_seed, ..*cfg })?;
        records.push(RunRecord {
            seed: run_seed,
            test_accuracy: result.test_accuracy,
            epochs: result.epochs_run,
            stopped_early: result.stopped_early,
            best_val_epoch: result.best_val_epoch,
            test_accuracy_at_best_val: result.test_accuracy_at_best_val,
        });
    }
    Ok(RunSummary::from_runs(records))
}

pub fn train_once(
    bundle: &GraphBundle,
    filter: &Filter,
    x: &CsrMatrix,
    split: &SplitSpec,
    cfg: &TrainConfig,
) -> Result<TrainResult> {
    split.validate(bundle.n())?;
    train(
        filter,
        x,
        &bundle.labels,
        bundle.classes,
        Masks {
            train: &split.train,
            val: &split.val,
            test: &split.test,
        },
        cfg,
    )
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SweepPoint {
    /// Highest order in the filter; 1 is the plain GCN.
    pub k: usize,
    pub mean: f64,
    pub std: f64,
    pub accuracies: Vec<f64>,
    pub error: Option<String>,
}

/// Accuracy of `A + Σ_{j=2}^{k} W^(j)` for each `k` in `orders`. A failing
/// point is recorded and the sweep moves on.
pub fn sweep(
    bundle: &GraphBundle,
    dump: &WeightDump,
    orders: &[usize],
    split: &SplitChoice,
    runs: usize,
    seed: u64,
    symmetrize: bool,
    cfg: &TrainConfig,
) -> Vec<SweepPoint> {
    orders
        .iter()
        .map(|&k| {
            let outcome = (|| {
                let weights = (k >= 2).then_some(dump);
                let filter = build_filter(bundle, weights, Some(k.max(2)), symmetrize)?;
                repeated_training(bundle, &filter, split, runs, seed, cfg)
            })();
            match outcome {
                Ok(summary) => SweepPoint {
                    k,
                    mean: summary.mean,
                    std: summary.std,
                    accuracies: summary.accuracies(),
                    error: None,
                },
                Err(e) => {
                    log::warn!("sweep point k = {k} failed: {e}");
                    SweepPoint {
                        k,
                        mean: f64::NAN,
                        std: f64::NAN,
                        accuracies: Vec::new(),
                        error: Some(e.to_string()),
                    }
                }
            }
        })
        .collect()
}

/// The sweep point with the highest mean, earliest on ties.
pub fn best_point(points: &[SweepPoint]) -> Option<&SweepPoint> {
    points
        .iter()
        .filter(|p| p.mean.is_finite())
        .fold(None, |best: Option<&SweepPoint>, p| match best {
            Some(b) if b.mean >= p.mean => Some(b),
            _ => Some(p),
        })
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct DepthPoint {
    pub layers: usize,
    pub summary: RunSummary,
}

/// Plain GCN at several depths.
pub fn depth_study(
    bundle: &GraphBundle,
    split: &SplitChoice,
    layers: &[usize],
    runs: usize,
    seed: u64,
    cfg: &TrainConfig,
) -> Result<Vec<DepthPoint>> {
    let filter = build_filter(bundle, None, None, true)?;
    layers
        .iter()
        .map(|&l| {
            let summary = repeated_training(bundle, &filter, split, runs, seed, &TrainConfig { layers: l, ..*cfg })?;
            Ok(DepthPoint { layers: l, summary })
        })
        .collect()
}
