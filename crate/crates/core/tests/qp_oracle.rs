mod support;

use hwgcn::qp::{solve, solve_batch, QpProblem, QpStatus, SolverConfig};
use support::{active_set_oracle, random_problem, Gen};

#[test]
fn worked_example_matches_oracle() {
    // F = I, y = [3, -1], s = 2: the optimum sits on the boundary w = [2, 0]
    let cols = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
    let y = vec![3.0, -1.0];
    let (oracle, oracle_obj) = active_set_oracle(&cols, &y, 2.0);
    assert_eq!(oracle, vec![2.0, 0.0]);
    assert!((oracle_obj - 2.0).abs() < 1e-12);
    let p = QpProblem::from_columns(&cols, y, 2.0).unwrap();
    let sol = solve(&p, &SolverConfig::default()).unwrap();
    for (a, b) in sol.w.iter().zip(&oracle) {
        assert!((a - b).abs() <= 1e-3, "{:?} vs {:?}", sol.w, oracle);
    }
}

#[test]
fn random_small_problems_match_oracle() {
    let mut g = Gen(7);
    let cfg = SolverConfig::default();
    let mut worst_w: f64 = 0.0;
    let mut worst_obj: f64 = 0.0;
    let mut max_iters = 0;
    for _ in 0..500 {
        let m = 2 + g.below(2) as usize;
        let (cols, y, s) = random_problem(&mut g, m);
        let (oracle, oracle_obj) = active_set_oracle(&cols, &y, s);
        let p = QpProblem::from_columns(&cols, y, s).unwrap();
        let sol = solve(&p, &cfg).unwrap();
        assert_eq!(sol.status, QpStatus::Solved);
        max_iters = max_iters.max(sol.iterations);
        let dw = sol.w.iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        worst_w = worst_w.max(dw);
        worst_obj = worst_obj.max((sol.objective - oracle_obj) / (1.0 + oracle_obj));
        assert!(dw <= 1e-3, "w {:?} oracle {:?}", sol.w, oracle);
        assert!(sol.objective <= oracle_obj + 1e-6 * (1.0 + oracle_obj), "{} vs {}", sol.objective, oracle_obj);
    }
    eprintln!("worst |dw| {worst_w:e}, worst rel obj gap {worst_obj:e}, max iterations {max_iters}");
}

#[test]
fn batch_matches_single_solves_and_keeps_order() {
    let cfg = SolverConfig::default();
    assert!(solve_batch(&[], &cfg).unwrap().is_empty());
    let mut g = Gen(11);
    let problems: Vec<QpProblem> = (0..100)
        .map(|i| {
            let (cols, y, s) = random_problem(&mut g, 1 + i % 3);
            QpProblem::from_columns(&cols, y, s).unwrap()
        })
        .collect();
    let batch = solve_batch(&problems, &cfg).unwrap();
    for (p, b) in problems.iter().zip(&batch) {
        assert_eq!(&solve(p, &cfg).unwrap(), b);
        let cols: Vec<Vec<f64>> = (0..p.vars()).map(|j| p.column(j).to_vec()).collect();
        let (oracle, _) = active_set_oracle(&cols, p.target(), p.sum());
        let dw = b.w.iter().zip(&oracle).map(|(a, o)| (a - o).abs()).fold(0.0, f64::max);
        assert!(dw <= 1e-3);
    }
    let twice = solve_batch(&[problems[5].clone(), problems[5].clone()], &cfg).unwrap();
    assert_eq!(twice[0], twice[1]);
}

#[test]
fn rank_deficient_problems_reach_oracle_objective() {
    // more candidates than features: the minimizer need not be unique, so
    // only the objective is compared
    let mut g = Gen(23);
    let cfg = SolverConfig::default();
    for _ in 0..200 {
        let m = 4 + g.below(6) as usize;
        let c = 2 + g.below(3) as usize;
        let cols: Vec<Vec<f64>> = (0..m).map(|_| (0..c).map(|_| g.normal()).collect()).collect();
        let y: Vec<f64> = (0..c).map(|_| 2.0 * g.normal()).collect();
        let s = 0.1 + 3.0 * g.uniform();
        let (_, oracle_obj) = active_set_oracle(&cols, &y, s);
        let p = QpProblem::from_columns(&cols, y, s).unwrap();
        let sol = solve(&p, &cfg).unwrap();
        assert!(sol.w.iter().all(|&v| v >= 0.0));
        assert!((sol.w.iter().sum::<f64>() - s).abs() <= 1e-9 * s);
        assert!(
            sol.objective <= oracle_obj + 1e-6 * (1.0 + oracle_obj),
            "m={m} c={c}: {} vs {}",
            sol.objective,
            oracle_obj
        );
    }
}

#[test]
fn unpolished_admm_is_close_and_never_worse_than_uniform() {
    let mut g = Gen(31);
    let cfg = SolverConfig {
        polish: false,
        ..SolverConfig::default()
    };
    for _ in 0..200 {
        let m = 2 + g.below(5) as usize;
        let (cols, y, s) = random_problem(&mut g, m);
        let (_, oracle_obj) = active_set_oracle(&cols, &y, s);
        let p = QpProblem::from_columns(&cols, y, s).unwrap();
        let sol = solve(&p, &cfg).unwrap();
        let uniform = p.objective(&vec![s / m as f64; m]);
        assert!(sol.objective <= uniform + 1e-12 * (1.0 + uniform));
        assert!(sol.objective <= oracle_obj + 1e-3 * (1.0 + oracle_obj));
    }
}
