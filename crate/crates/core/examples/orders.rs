//! Counts distance-order and power-support entries of a bundle.
//!
//!     cargo run --release --example orders -- data/cora 6

use std::path::PathBuf;

use hwgcn::data::load_bundle_with_report;
use hwgcn::graph::{hadamard_disjoint, order_matrices, power_supports};

fn main() -> hwgcn::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "data/cora".into()));
    let max_order: usize = args.next().map_or(6, |s| s.parse().expect("order must be an integer"));

    let (bundle, report) = load_bundle_with_report(&dir)?;
    let stats = bundle.stats();
    println!(
        "{}: {} nodes, {} edge lines ({} distinct edges), {} classes, {} features",
        stats.name, stats.nodes, report.edge_lines, stats.edges, stats.classes, stats.features
    );

    let orders = order_matrices(&bundle.graph, max_order)?;
    let powers = power_supports(&bundle.graph, max_order.min(4))?;
    println!("k\tdistance\tpower");
    for (p, ord) in orders.iter().enumerate() {
        let power = powers.get(p).map_or("-".to_string(), |s| s.entries.nnz().to_string());
        println!("{}\t{}\t{power}", ord.k, ord.entries.nnz());
    }
    let mut disjoint = true;
    for a in 0..orders.len() {
        for b in a + 1..orders.len() {
            disjoint &= hadamard_disjoint(&orders[a].entries, &orders[b].entries)?;
        }
    }
    println!("distance orders pairwise disjoint: {disjoint}");
    Ok(())
}
