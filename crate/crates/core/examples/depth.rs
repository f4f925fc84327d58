//! Plain GCN accuracy with one to four layers on a bundle's fixed split.
//!
//!     cargo run --release --example depth -- data/cora 5

use std::path::PathBuf;

use hwgcn::data::load_bundle;
use hwgcn::experiment::{depth_study, SplitChoice};
use hwgcn::nn::TrainConfig;

fn main() -> hwgcn::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "data/cora".into()));
    let runs: usize = args.next().map_or(5, |s| s.parse().expect("runs must be an integer"));

    let bundle = load_bundle(&dir)?;
    let split = SplitChoice::Fixed { dir: dir.join("split") };
    for p in depth_study(&bundle, &split, &[1, 2, 3, 4], runs, 0, &TrainConfig::default())? {
        println!(
            "{} layer(s): {:.2} ± {:.2}",
            p.layers,
            100.0 * p.summary.mean,
            100.0 * p.summary.std
        );
    }
    Ok(())
}
