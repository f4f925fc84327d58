//! Learns higher-order weights for a bundle and prints per-order timing,
//! solver outcomes and the magnitude distribution.
//!
//!     cargo run --release --example learn_weights -- data/cora 6 [out.tsv]

use std::path::PathBuf;
use std::time::Instant;

use hwgcn::data::load_bundle;
use hwgcn::graph::{affinity, order_matrices};
use hwgcn::lasso::{bucket_stats, LassoConfig, LassoInputs, SupportMode, WeightDump};

fn main() -> hwgcn::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "data/cora".into()));
    let max_order: usize = args.next().map_or(4, |s| s.parse().expect("order must be an integer"));
    let out = args.next().map(PathBuf::from);

    let bundle = load_bundle(&dir)?;
    let x = bundle.features.row_normalized();
    let s = affinity(&bundle.graph);
    let inputs = LassoInputs::new(&x, &s)?;
    let orders = order_matrices(&bundle.graph, max_order)?;
    let cfg = LassoConfig::default();

    println!("k\tsupport\tsolved\tfailed\tmax_iter\tmean_iter\tseconds\t<1e-5 %\t(1e-2,1e-1) %");
    let mut learned = Vec::new();
    for ord in &orders[1..] {
        let start = Instant::now();
        let result = inputs.learn_order_weights(ord.into(), None, &cfg)?;
        let r = result.report;
        let stats = bucket_stats(&result.weights, ord.entries.nnz())?;
        let pct = stats.percentages();
        println!(
            "{}\t{}\t{}\t{}\t{}\t{:.1}\t{:.1}\t{:.2}\t{:.2}",
            ord.k,
            ord.entries.nnz(),
            r.solved,
            r.failed,
            r.max_iter,
            r.iterations as f64 / r.solved.max(1) as f64,
            start.elapsed().as_secs_f64(),
            pct[0],
            pct[4]
        );
        learned.push(result.weights);
    }
    if let Some(path) = out {
        WeightDump::new(bundle.n(), max_order, SupportMode::Distance, learned)?.save(&path)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
