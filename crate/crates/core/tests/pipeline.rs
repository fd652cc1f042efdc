use stabsel::graph::edge_index;
use stabsel::metrics::{confusion, precision_recall_f1};
use stabsel::resampling::{selection_proportions, GlassoSelector, LassoSelector, ResamplingPlan};
use stabsel::simulate::{simulate_graph_dataset, simulate_regression, GraphSpec, Topology};
use stabsel::solvers::{empirical_covariance, GlassoOptions, LassoOptions};
use stabsel::stability::{
    build_pi_grid, calibrate, glasso_lambda_grid, lasso_lambda_grid, score_surface, CalibrationGrid, PferMethod,
};
use stabsel::Execution;

#[test]
fn graph_recovery_end_to_end() {
    let spec = GraphSpec { topology: Topology::ErdosRenyi { nu: 0.1 }, p: 25, seed: 5 };
    let d = simulate_graph_dataset(&spec, 400, None, 1.0).unwrap();
    let s = empirical_covariance(&d.x).unwrap();
    let opts = GlassoOptions::default();
    let grid = glasso_lambda_grid(&s, 15, &opts).unwrap();
    let selector = GlassoSelector::scalar(&d.x, &grid.lambdas, opts).unwrap();
    let plan = ResamplingPlan::complementary_pairs(20, 11);
    let props = selection_proportions(&selector, &plan, Execution::Parallel).unwrap();
    assert_eq!(props, selection_proportions(&selector, &plan, Execution::Sequential).unwrap());

    let cgrid = CalibrationGrid::from_proportions(&props, build_pi_grid(31).unwrap()).unwrap();
    let surface = score_surface(&props, &cgrid, PferMethod::Mb, Some(10.0)).unwrap();
    let result = calibrate(&surface, &cgrid, &props).unwrap();
    assert!(result.pfer_bound <= 10.0);
    let truth: Vec<usize> = d.theta.edges().iter().map(|&(i, j)| edge_index(i, j, 25)).collect();
    let perf = precision_recall_f1(&confusion(&result.selected, &truth, 300).unwrap());
    assert!(perf.f1 > 0.6, "F1 {}", perf.f1);
}

#[test]
fn regression_recovery_end_to_end() {
    let d = simulate_regression(300, 40, 5, 0.8, 2).unwrap();
    let opts = LassoOptions::default();
    let grid = lasso_lambda_grid(&d.x, &d.y, 20, &opts).unwrap();
    let selector = LassoSelector::new(&d.x, &d.y, &grid.lambdas, opts).unwrap();
    let props = selection_proportions(&selector, &ResamplingPlan::subsample(0.5, 50, 4), Execution::Parallel).unwrap();
    let cgrid = CalibrationGrid::from_proportions(&props, build_pi_grid(31).unwrap()).unwrap();
    let surface = score_surface(&props, &cgrid, PferMethod::Ss, None).unwrap();
    let result = calibrate(&surface, &cgrid, &props).unwrap();
    let perf = precision_recall_f1(&confusion(&result.selected, &d.signal_set, 40).unwrap());
    assert!(perf.recall >= 0.6 && perf.precision >= 0.6, "{perf:?}");
}
