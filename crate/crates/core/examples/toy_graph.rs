//! End to end on a generated two-community graph: learn weights up to order
//! 3, then compare plain GCN and HWGCN on a random split.
//!
//!     cargo run --release --example toy_graph

use hwgcn::data::{sbm, SbmConfig};
use hwgcn::experiment::{build_filter, learn_weights, repeated_training, SplitChoice, WeightConfig};
use hwgcn::nn::TrainConfig;

fn main() -> hwgcn::Result<()> {
    let bundle = sbm(&SbmConfig {
        class_sizes: vec![1000, 1000],
        p_in: 0.004,
        p_out: 0.001,
        ..SbmConfig::default()
    })?;
    let stats = bundle.stats();
    println!("{} nodes, {} edges, {} features", stats.nodes, stats.edges, stats.features);

    let run = learn_weights(&bundle, &WeightConfig { max_order: 3, ..WeightConfig::default() })?;
    for (report, s) in run.reports.iter().zip(&run.stats) {
        println!(
            "order {}: {} rows solved, {:.1}% of {} candidates below 1e-5",
            report.k,
            report.solved,
            s.percentages()[0],
            s.support
        );
    }

    let split = SplitChoice::Random { per_class: 5 };
    let cfg = TrainConfig::default();
    for (name, dump) in [("GCN", None), ("HWGCN", Some(&run.dump))] {
        let filter = build_filter(&bundle, dump, None, true)?;
        let s = repeated_training(&bundle, &filter, &split, 5, 0, &cfg)?;
        println!("{name}: {:.2} ± {:.2}", 100.0 * s.mean, 100.0 * s.std);
    }
    Ok(())
}
