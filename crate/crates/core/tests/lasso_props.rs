mod support;

use hwgcn::data::{sbm, SbmConfig};
use hwgcn::graph::{affinity, build_graph, order_matrices, power_supports, OrderMatrix};
use hwgcn::lasso::{
    assemble_filter, build_row_problem, learn_order_weights, normalize_filter, scale_coefficients,
    BucketStats, LassoConfig, LassoInputs, ProportionMode, ProportionSchedule, SupportMode,
    WeightMatrix,
};
use hwgcn::qp::{solve, SolverConfig};
use hwgcn::sparse::CsrMatrix;
use support::{active_set_oracle, dense_normalize, mat_mul, objective};

fn dense(x: &CsrMatrix) -> Vec<Vec<f64>> {
    (0..x.nrows())
        .map(|r| (0..x.ncols()).map(|c| x.get(r, c)).collect())
        .collect()
}

fn toy() -> hwgcn::data::GraphBundle {
    sbm(&SbmConfig {
        class_sizes: vec![20, 20, 20],
        p_in: 0.15,
        p_out: 0.02,
        words_per_class: 6,
        own_words: 3,
        noise_words: 2,
        seed: 5,
    })
    .unwrap()
}

#[test]
fn alpha_is_one_for_an_exact_match() {
    let g = build_graph(&[(0, 1), (1, 2)], 3).unwrap();
    let s = affinity(&g);
    let orders = order_matrices(&g, 2).unwrap();
    let x = CsrMatrix::from_triplets(
        3,
        2,
        [(0, 0, 1.0), (1, 1, 1.0), (2, 0, s.get(0, 0)), (2, 1, s.get(0, 1))],
    )
    .unwrap();
    let alpha = scale_coefficients(&x, &orders[1], &s).unwrap();
    assert_eq!(alpha.alpha[0], 1.0);
    assert_eq!(alpha.alpha[1], 0.0, "node 1 has no order-2 neighbor");
}

#[test]
fn alpha_zeroes_the_scale_derivative() {
    // triangle plus a pendant: node 3 has order-2 neighbors 0 and 1
    let edges = [(0, 1), (1, 2), (2, 0), (2, 3)];
    let g = build_graph(&edges, 4).unwrap();
    let s = affinity(&g);
    let orders = order_matrices(&g, 2).unwrap();
    let x = CsrMatrix::from_triplets(
        4,
        3,
        [(0, 0, 0.7), (0, 1, 0.2), (1, 1, 0.9), (1, 2, 0.4), (2, 0, 0.3), (2, 2, 1.1), (3, 1, 0.5)],
    )
    .unwrap();
    let alpha = scale_coefficients(&x, &orders[1], &s).unwrap();
    let mut a = vec![vec![0.0; 4]; 4];
    for &(u, v) in &edges {
        a[u][v] = 1.0;
        a[v][u] = 1.0;
    }
    let b = mat_mul(&dense_normalize(&a), &dense(&x));
    let xd = dense(&x);
    for i in 0..4 {
        let nbrs: Vec<usize> = orders[1].entries.row(i).iter().map(|&j| j as usize).collect();
        if nbrs.is_empty() {
            assert_eq!(alpha.alpha[i], 0.0);
            continue;
        }
        let agg: Vec<f64> = (0..3).map(|c| nbrs.iter().map(|&j| xd[j][c]).sum()).collect();
        let l = |t: f64| -> f64 { (0..3).map(|c| (t * agg[c] - b[i][c]).powi(2)).sum() };
        let h = 1e-5;
        let deriv = (l(alpha.alpha[i] + h) - l(alpha.alpha[i] - h)) / (2.0 * h);
        assert!(alpha.alpha[i] > 0.0);
        assert!(deriv.abs() <= 1e-6, "node {i}: dL/dα = {deriv}");
    }
}

#[test]
fn row_problem_shape_and_errors() {
    let g = build_graph(&[(0, 1), (1, 2), (2, 3)], 4).unwrap();
    let s = affinity(&g);
    let orders = order_matrices(&g, 2).unwrap();
    let x = CsrMatrix::from_triplets(4, 2, [(0, 0, 1.0), (1, 1, 1.0), (2, 0, 1.0), (3, 0, 0.5), (3, 1, 0.5)])
        .unwrap();
    let alpha = scale_coefficients(&x, &orders[1], &s).unwrap();
    // node 0 has the single order-2 neighbor 2
    let p = build_row_problem(0, &orders[1], &x, &s, &alpha).unwrap();
    assert_eq!(p.vars(), 1);
    assert_eq!(p.sum(), alpha.alpha[0]);
    assert!(p.target().iter().all(|&v| v == 0.0));
    let b0 = [s.get(0, 0) * 1.0, s.get(0, 1) * 1.0];
    assert_eq!(p.column(0), &[1.0 - b0[0], -b0[1]]);
    let sol = solve(&p, &SolverConfig::default()).unwrap();
    assert_eq!(sol.w, vec![alpha.alpha[0]]);

    let zero = hwgcn::lasso::ScaleCoefficients {
        k: 2,
        alpha: vec![0.0; 4],
    };
    assert!(build_row_problem(0, &orders[1], &x, &s, &zero).is_err());
    let lonely = build_graph(&[(0, 1)], 4).unwrap();
    let lonely_orders = order_matrices(&lonely, 2).unwrap();
    assert!(build_row_problem(0, &lonely_orders[1], &x, &s, &alpha).is_err());
}

#[test]
fn mass_goes_to_the_matching_neighbor() {
    // star: centre 0 with leaves 1, 2; leaves 3, 4 hang off 1 and 2, so
    // node 0's order-2 neighbors are 3 and 4
    let g = build_graph(&[(0, 1), (0, 2), (1, 3), (2, 4)], 5).unwrap();
    let s = affinity(&g);
    let orders = order_matrices(&g, 2).unwrap();
    let b0 = |x: &CsrMatrix| LassoInputs::new(x, &s).unwrap().targets().row(0).1.to_vec();
    let base = CsrMatrix::from_triplets(5, 3, [(0, 0, 1.0), (1, 0, 1.0), (2, 0, 1.0)]).unwrap();
    let target = b0(&base);
    assert_eq!(target.len(), 1);
    // node 3 copies the aggregate, node 4 is orthogonal to it
    let x = CsrMatrix::from_triplets(
        5,
        3,
        [(0, 0, 1.0), (1, 0, 1.0), (2, 0, 1.0), (3, 0, target[0]), (4, 1, 1.0)],
    )
    .unwrap();
    let alpha = scale_coefficients(&x, &orders[1], &s).unwrap();
    let p = build_row_problem(0, &orders[1], &x, &s, &alpha).unwrap();
    let cols: Vec<Vec<f64>> = (0..2).map(|j| p.column(j).to_vec()).collect();
    let (oracle, _) = active_set_oracle(&cols, p.target(), p.sum());
    let sol = solve(&p, &SolverConfig::default()).unwrap();
    assert!(oracle[0] >= 0.99 * p.sum(), "{oracle:?}");
    assert!((sol.w[0] - oracle[0]).abs() <= 1e-3 && (sol.w[1] - oracle[1]).abs() <= 1e-3);
}

#[test]
fn learned_rows_are_optimal_and_feasible() {
    let bundle = toy();
    let x = bundle.features.row_normalized();
    let s = affinity(&bundle.graph);
    let orders = order_matrices(&bundle.graph, 3).unwrap();
    let inputs = LassoInputs::new(&x, &s).unwrap();
    let mut checked = 0;
    for ord in &orders[1..] {
        let learned = inputs.learn_order_weights(ord.into(), None, &LassoConfig::default()).unwrap();
        assert_eq!(learned.report.failed, 0);
        let w = &learned.weights;
        assert!(w.support().is_subset_of(&ord.entries));
        assert!(BucketStats::above(w, 1e-5) <= ord.entries.nnz());
        let sums = w.row_sums();
        for i in 0..bundle.n() {
            let m = ord.entries.row_len(i);
            let a = learned.alpha.alpha[i];
            if m == 0 || a == 0.0 {
                assert_eq!(sums[i], 0.0);
                continue;
            }
            assert!((sums[i] - a * m as f64).abs() <= 1e-8 * (1.0 + a * m as f64));
            if m > 10 {
                continue;
            }
            let p = inputs.build_row_problem(i, ord.into(), &learned.alpha).unwrap();
            let cols: Vec<Vec<f64>> = (0..m).map(|j| p.column(j).to_vec()).collect();
            let (_, oracle_obj) = active_set_oracle(&cols, p.target(), p.sum());
            let row: Vec<f64> = ord.entries.row(i).iter().map(|&j| w.get(i, j as usize)).collect();
            let got = objective(&cols, p.target(), &row);
            assert!(got <= oracle_obj + 1e-6 * (1.0 + oracle_obj), "row {i}: {got} vs {oracle_obj}");
            checked += 1;
        }
    }
    assert!(checked > 20, "only {checked} rows compared");
}

#[test]
fn proportion_filter_keeps_top_fraction_and_restores_sums() {
    let bundle = toy();
    let x = bundle.features.row_normalized();
    let s = affinity(&bundle.graph);
    let orders = order_matrices(&bundle.graph, 2).unwrap();
    let schedule = ProportionSchedule::new([(2, 0.2)]).unwrap();
    let full = learn_order_weights(&x, &orders[1], &s, None, &LassoConfig::default()).unwrap();
    let resolved = learn_order_weights(&x, &orders[1], &s, Some(&schedule), &LassoConfig::default()).unwrap();
    let truncated = learn_order_weights(
        &x,
        &orders[1],
        &s,
        Some(&schedule),
        &LassoConfig {
            proportion_mode: ProportionMode::Truncate,
            ..LassoConfig::default()
        },
    )
    .unwrap();
    let mut expected = 0;
    for i in 0..bundle.n() {
        let m = orders[1].entries.row_len(i);
        if m > 0 && full.alpha.alpha[i] > 0.0 {
            expected += ProportionSchedule::retained(0.2, m);
        }
    }
    assert_eq!(resolved.report.retained, expected);
    assert_eq!(resolved.weights.nnz(), expected);
    assert_eq!(truncated.weights.support(), resolved.weights.support());
    let sums = resolved.weights.row_sums();
    for i in 0..bundle.n() {
        let m = orders[1].entries.row_len(i) as f64;
        let target = full.alpha.alpha[i] * m;
        assert!((sums[i] - target).abs() <= 1e-8 * (1.0 + target));
    }
    for &(i, j, w) in truncated.weights.triplets() {
        assert_eq!(w, full.weights.get(i, j));
    }
}

#[test]
fn empty_weights_reduce_to_plain_affinity_bitwise() {
    let bundle = toy();
    let a = OrderMatrix {
        k: 1,
        entries: bundle.graph.adjacency_entries(),
    };
    let empty = vec![WeightMatrix::empty(2, bundle.n()), WeightMatrix::empty(3, bundle.n())];
    for symmetrize in [true, false] {
        let w = assemble_filter(&a, &empty, SupportMode::Distance, symmetrize).unwrap();
        let filt = normalize_filter(&w).unwrap();
        let plain = affinity(&bundle.graph);
        assert_eq!(filt.as_csr().indptr(), plain.as_csr().indptr());
        assert_eq!(filt.as_csr().indices(), plain.as_csr().indices());
        let bits = |m: &CsrMatrix| m.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(filt.as_csr()), bits(plain.as_csr()));
    }
}

#[test]
fn composite_count_is_the_disjoint_sum() {
    let bundle = toy();
    let x = bundle.features.row_normalized();
    let s = affinity(&bundle.graph);
    let orders = order_matrices(&bundle.graph, 4).unwrap();
    let inputs = LassoInputs::new(&x, &s).unwrap();
    let learned: Vec<WeightMatrix> = orders[1..]
        .iter()
        .map(|o| inputs.learn_order_weights(o.into(), None, &LassoConfig::default()).unwrap().weights)
        .collect();
    let w = assemble_filter(&orders[0], &learned, SupportMode::Distance, false).unwrap();
    let expected = orders[0].entries.nnz() + learned.iter().map(WeightMatrix::nnz).sum::<usize>();
    assert_eq!(w.nnz(), expected);
    // set-union recount
    let mut all: Vec<(usize, usize)> = orders[0].entries.iter().collect();
    for l in &learned {
        all.extend(l.triplets().iter().map(|&(i, j, _)| (i, j)));
    }
    all.sort_unstable();
    all.dedup();
    assert_eq!(all.len(), expected);
    for (i, j) in orders[0].entries.iter() {
        assert_eq!(w.get(i, j), 1.0);
    }
    let sym = assemble_filter(&orders[0], &learned, SupportMode::Distance, true).unwrap();
    assert_eq!(sym.nnz(), expected);
    assert!(sym.to_csr().is_symmetric());
}

#[test]
fn normalization_matches_hand_evaluation() {
    // path 0-1-2 plus a 0.5 weight on (0, 2) both ways, and an isolated node 3
    let g = build_graph(&[(0, 1), (1, 2)], 4).unwrap();
    let orders = order_matrices(&g, 2).unwrap();
    let w2 = WeightMatrix::new(2, 4, vec![(0, 2, 0.5), (2, 0, 0.5)]).unwrap();
    let w = assemble_filter(&orders[0], &[w2], SupportMode::Distance, true).unwrap();
    let s = normalize_filter(&w).unwrap();
    // degrees of W + I: 2.5, 3, 2.5, 1
    let expect = [
        (0, 0, 1.0 / 2.5),
        (0, 1, 1.0 / (2.5f64 * 3.0).sqrt()),
        (0, 2, 0.5 / 2.5),
        (1, 1, 1.0 / 3.0),
        (3, 3, 1.0),
        (3, 0, 0.0),
    ];
    for (i, j, v) in expect {
        assert!((s.get(i, j) - v).abs() < 1e-15, "({i},{j}) {} vs {v}", s.get(i, j));
        assert_eq!(s.get(i, j), s.get(j, i));
    }
}

#[test]
fn power_mode_learns_on_walk_supports() {
    let bundle = toy();
    let x = bundle.features.row_normalized();
    let s = affinity(&bundle.graph);
    let powers = power_supports(&bundle.graph, 3).unwrap();
    let learned = learn_order_weights(&x, &powers[2], &s, None, &LassoConfig::default()).unwrap();
    assert!(learned.weights.support().is_subset_of(&powers[2].entries));
    let a = OrderMatrix {
        k: 1,
        entries: bundle.graph.adjacency_entries(),
    };
    assert!(assemble_filter(&a, &[learned.weights.clone()], SupportMode::Distance, true).is_err());
    let w = assemble_filter(&a, &[learned.weights], SupportMode::Power, true).unwrap();
    assert!(normalize_filter(&w).is_ok());
}

#[test]
fn weights_do_not_depend_on_thread_count() {
    let bundle = toy();
    let x = bundle.features.row_normalized();
    let s = affinity(&bundle.graph);
    let orders = order_matrices(&bundle.graph, 3).unwrap();
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            orders[1..]
                .iter()
                .map(|o| learn_order_weights(&x, o, &s, None, &LassoConfig::default()).unwrap().weights)
                .collect::<Vec<_>>()
        })
    };
    assert_eq!(run(1), run(4));
}
