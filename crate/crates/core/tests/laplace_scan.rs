use meanfield_core::laplace::{
    laplace_naive, ldp_scaling_scan, variational_bound, InitFamily, LaplaceFunctional, ScanSchedule,
};
use meanfield_core::model::{CoefficientModel, InitialEnsemble};
use meanfield_core::rate::RateOptions;
use meanfield_core::simulator::{ControlSpec, SimConfig};

fn ou() -> CoefficientModel {
    CoefficientModel::linear_1d(-1.0, 1.0, 0.0, 1.0, 2.0).unwrap()
}

fn tanh_mean() -> LaplaceFunctional {
    LaplaceFunctional::TanhOfMean { w: vec![1.0], q: 0.0, kappa: 0.02 }
}

#[test]
fn independent_seeds_agree_within_three_errors() {
    let init = InitialEnsemble::normal_quantiles(64, 0.5, 1.0).unwrap();
    let f = LaplaceFunctional::TanhOfMean { w: vec![1.0], q: 0.0, kappa: 0.5 };
    let a = laplace_naive(&ou(), &init, &SimConfig::new(64, 1.0, 32, 0.3).with_seed(1), &f, 256).unwrap();
    let b = laplace_naive(&ou(), &init, &SimConfig::new(64, 1.0, 32, 0.3).with_seed(2), &f, 256).unwrap();
    let se = (a.std_error.powi(2) + b.std_error.powi(2)).sqrt();
    assert!((a.value - b.value).abs() <= 3.0 * se, "{} {} {se}", a.value, b.value);
}

#[test]
fn default_scan_satisfies_variational_inequalities() {
    let report = ldp_scaling_scan(
        &ou(),
        &InitFamily::NormalQuantiles { mean: 0.5, std: 1.0 },
        &tanh_mean(),
        &ScanSchedule::default_ou(),
        &RateOptions::default(),
        64,
    )
    .unwrap();
    eprintln!("{}", report.to_csv());
    assert_eq!(report.rows.len(), 6);
    assert!(report.all_hold(), "{}", report.to_csv());
    assert!(report.optimized.as_ref().unwrap().converged);

    // the estimate approaches F at the noiseless limit as N grows
    let gap = |n: usize| {
        let r = report.rows.iter().find(|r| r.n == n).unwrap();
        ((r.laplace - r.limit_value).abs(), r.laplace_se)
    };
    let (small, _) = gap(32);
    let (large, se) = gap(512);
    assert!(large <= small + 3.0 * se, "gap {small} at N=32, {large} at N=512");
}

#[test]
fn zero_control_bound_dominates_estimate() {
    let init = InitialEnsemble::normal_quantiles(32, 0.5, 1.0).unwrap();
    let cfg = SimConfig::new(32, 1.0, 16, 0.0).with_power_law(0.25).with_seed(9);
    let naive = laplace_naive(&ou(), &init, &cfg, &tanh_mean(), 64).unwrap();
    let bound = variational_bound(&ou(), &init, &cfg, &tanh_mean(), &ControlSpec::None, 64).unwrap();
    assert!(naive.value <= bound.value);
}
