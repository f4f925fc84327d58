//! Test accuracy as orders 2..=K are added to the filter, on random
//! 20-per-class splits.
//!
//!     cargo run --release --example order_sweep -- data/cora weights.tsv 3

use std::path::PathBuf;

use hwgcn::data::load_bundle;
use hwgcn::experiment::{best_point, sweep, SplitChoice};
use hwgcn::lasso::WeightDump;
use hwgcn::nn::TrainConfig;

fn main() -> hwgcn::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "data/cora".into()));
    let weights = args.next().map(PathBuf::from).expect("usage: order_sweep <bundle> <weights.tsv> [runs]");
    let runs: usize = args.next().map_or(3, |s| s.parse().expect("runs must be an integer"));

    let bundle = load_bundle(&dir)?;
    let dump = WeightDump::load(&weights)?;
    let orders: Vec<usize> = (1..=dump.max_order).collect();
    let split = SplitChoice::Random { per_class: 20 };
    let points = sweep(&bundle, &dump, &orders, &split, runs, 0, true, &TrainConfig::default());

    println!("k\tmean\tstd");
    for p in &points {
        match &p.error {
            Some(e) => println!("{}\terror: {e}", p.k),
            None => println!("{}\t{:.2}\t{:.2}", p.k, 100.0 * p.mean, 100.0 * p.std),
        }
    }
    if let Some(best) = best_point(&points) {
        println!("best k = {}", best.k);
    }
    Ok(())
}
