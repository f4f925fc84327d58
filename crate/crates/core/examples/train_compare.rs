//! Trains plain GCN and HWGCN on the same split and seeds.
//!
//!     cargo run --release --example train_compare -- data/citeseer weights.tsv 5
//!
//! The weight file comes from `hwgcn weights` or the `learn_weights` example.

use std::path::PathBuf;

use hwgcn::data::load_bundle;
use hwgcn::experiment::{build_filter, repeated_training, SplitChoice};
use hwgcn::lasso::WeightDump;
use hwgcn::nn::TrainConfig;

fn main() -> hwgcn::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "data/citeseer".into()));
    let weights = args.next().map(PathBuf::from).expect("usage: train_compare <bundle> <weights.tsv> [runs]");
    let runs: usize = args.next().map_or(5, |s| s.parse().expect("runs must be an integer"));

    let bundle = load_bundle(&dir)?;
    let dump = WeightDump::load(&weights)?;
    let split = SplitChoice::Fixed { dir: dir.join("split") };
    let cfg = TrainConfig::default();

    for (name, dump) in [("GCN", None), ("HWGCN", Some(&dump))] {
        let filter = build_filter(&bundle, dump, None, true)?;
        let summary = repeated_training(&bundle, &filter, &split, runs, 0, &cfg)?;
        println!(
            "{name:<6} filter nnz {:>8}  test accuracy {:.2} ± {:.2} over {runs} runs",
            filter.matrix().nnz(),
            100.0 * summary.mean,
            100.0 * summary.std
        );
    }
    Ok(())
}
