//! Solves a small simplex-constrained least-squares problem with and without
//! the active-set polish.
//!
//!     cargo run --release --example simplex_qp

use hwgcn::qp::{solve, QpProblem, SolverConfig};

fn main() -> hwgcn::Result<()> {
    // minimize ‖F w − y‖² subject to w ≥ 0, Σ w = 3
    let columns = vec![
        vec![1.0, 0.0, 0.5],
        vec![0.0, 1.0, 0.5],
        vec![1.0, 1.0, 0.0],
        vec![-1.0, 0.2, 0.3],
    ];
    let y = vec![2.0, 1.0, 0.8];
    let problem = QpProblem::from_columns(&columns, y, 3.0)?;

    for polish in [false, true] {
        let cfg = SolverConfig {
            polish,
            ..SolverConfig::default()
        };
        let sol = solve(&problem, &cfg)?;
        let w: Vec<String> = sol.w.iter().map(|v| format!("{v:.6}")).collect();
        println!(
            "polish={polish:<5} status={:?} iterations={} objective={:.10} w=[{}] sum={:.12}",
            sol.status,
            sol.iterations,
            sol.objective,
            w.join(", "),
            sol.w.iter().sum::<f64>()
        );
    }
    Ok(())
}
