//! Worst-case distribution, feasibility and discrete Sinkhorn distance checks.

use sinkhorn_dro::apps::{exp_demand_sample, NewsvendorLoss};
use sinkhorn_dro::dual::{LinearGaussianDual, SamplePool};
use sinkhorn_dro::loss::FixedLinearLoss;
use sinkhorn_dro::optimizer::{sinkhorn_solve, InnerSolverConfig, StepSchedule};
use sinkhorn_dro::worstcase::{
    importance_reference_weights, sinkhorn_distance_discrete, verify_feasibility, worstcase_sample, FeasibilityConfig,
    TiltedSamplerState,
};
use sinkhorn_dro::{CostSpec, EmpiricalDistribution, Loss, SeedSpec};

fn mean_and_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

struct LinearSetup {
    data: EmpiricalDistribution,
    cost: CostSpec,
    loss: FixedLinearLoss,
    rho_bar: f64,
    lambda: f64,
    value: f64,
}

fn linear_setup() -> LinearSetup {
    let data = EmpiricalDistribution::from_scalars(&[-0.4, 0.3, 1.1]).unwrap();
    let cost = CostSpec::quadratic(0.5).unwrap();
    let rho_bar = 0.08;
    let closed = LinearGaussianDual::new(&[1.5], &data, &cost, rho_bar).unwrap();
    LinearSetup {
        lambda: closed.optimal_lambda(),
        value: closed.optimal_value(),
        data,
        cost,
        loss: FixedLinearLoss { a: vec![1.5] },
        rho_bar,
    }
}

#[test]
fn worst_case_sample_of_linear_instance_is_feasible() {
    let s = linear_setup();
    let pool = SamplePool::draw(&s.data, &s.cost, 4000, SeedSpec::new(31)).unwrap();
    let state = TiltedSamplerState::new(s.lambda, &[], &pool, &s.loss).unwrap();
    let sample = worstcase_sample(&state, 3000, SeedSpec::new(32)).unwrap();
    assert!(!sample.ess_warning);
    let logd: Vec<f64> = sample.points.iter().map(|z| state.log_density(z).unwrap()).collect();
    let nu = importance_reference_weights(&logd);
    let report = verify_feasibility(
        &s.data,
        &sample.points,
        &nu,
        s.rho_bar,
        &s.cost,
        &FeasibilityConfig::default(),
    )
    .unwrap();
    assert!(report.feasible, "{report:?}");
    // the constraint binds at λ* > 0
    assert!(
        (report.budget - s.rho_bar).abs() <= 0.1 * s.rho_bar + 0.01,
        "{report:?}"
    );
}

#[test]
fn untilted_sample_spends_no_budget() {
    let s = linear_setup();
    let pool = SamplePool::draw(&s.data, &s.cost, 4000, SeedSpec::new(41)).unwrap();
    let state = TiltedSamplerState::new(1e9, &[], &pool, &s.loss).unwrap();
    let sample = worstcase_sample(&state, 3000, SeedSpec::new(42)).unwrap();
    let logd: Vec<f64> = sample.points.iter().map(|z| state.log_density(z).unwrap()).collect();
    let nu = importance_reference_weights(&logd);
    let report = verify_feasibility(
        &s.data,
        &sample.points,
        &nu,
        0.0,
        &s.cost,
        &FeasibilityConfig::default(),
    )
    .unwrap();
    assert!(report.budget.abs() <= 0.1 * s.rho_bar + 0.01, "{report:?}");
    assert!(report.feasible);
}

#[test]
fn worst_case_mean_matches_linear_dual_value() {
    let s = linear_setup();
    let pool = SamplePool::draw(&s.data, &s.cost, 20_000, SeedSpec::new(51)).unwrap();
    let state = TiltedSamplerState::new(s.lambda, &[], &pool, &s.loss).unwrap();
    let n = 100_000;
    let sample = worstcase_sample(&state, n, SeedSpec::new(52)).unwrap();
    let values: Vec<f64> = sample.points.iter().map(|z| s.loss.value(&[], z)).collect();
    let (mean, sd) = mean_and_sd(&values);
    // pool error of the tilted expectation adds to the resampling error
    let tol = 3.0 * sd * (1.0 / n as f64 + 1.0 / (3.0 * 20_000.0)).sqrt();
    assert!((mean - s.value).abs() <= tol, "{mean} vs {} (tol {tol})", s.value);
}

#[test]
fn worst_case_mean_matches_newsvendor_dual_value() {
    let data = exp_demand_sample(1.0, 10, SeedSpec::new(60)).unwrap();
    let loss = NewsvendorLoss::for_demands(&data).unwrap();
    let cost = CostSpec::quadratic(0.2).unwrap();
    let pool = SamplePool::draw(&data, &cost, 1000, SeedSpec::new(61)).unwrap();
    let inner = InnerSolverConfig {
        schedule: StepSchedule::InverseSqrt,
        rel_tol: 1e-7,
        max_steps: 3000,
        ..Default::default()
    };
    let sol = sinkhorn_solve(&pool, 0.05, &loss, &inner, &data.mean()).unwrap();
    let state = TiltedSamplerState::new(sol.lambda, &sol.theta, &pool, &loss).unwrap();
    let n = 100_000;
    let sample = worstcase_sample(&state, n, SeedSpec::new(62)).unwrap();
    let values: Vec<f64> = sample.points.iter().map(|z| loss.value(&sol.theta, z)).collect();
    let (mean, sd) = mean_and_sd(&values);
    let tol = 3.0 * sd / (n as f64).sqrt();
    assert!((mean - sol.value).abs() <= tol, "{mean} vs {} (tol {tol})", sol.value);
}

#[test]
fn discrete_distance_is_monotone_in_epsilon_and_tends_to_transport() {
    let p = [0.2, 0.5, 0.3];
    let q = [0.4, 0.35, 0.25];
    let cost = [0.0, 1.0, 4.0, 1.0, 0.0, 1.0, 4.0, 1.0, 0.0];
    let mut last = f64::INFINITY;
    for eps in [1.0, 0.5, 0.2, 0.1, 0.05, 0.01, 0.002] {
        let (v, coupling) = sinkhorn_distance_discrete(&p, &q, &cost, eps, &q, 1e-12, 200_000).unwrap();
        assert!(coupling.marginal_violation() <= 1e-10);
        assert!(v <= last + 1e-12, "eps {eps}: {v} > {last}");
        last = v;
    }
    // optimal transport for these marginals on a line: move 0.2 from atom 1 to atom 0,
    // then 0.05 from atom 2 to atom 1
    let ot = 0.2 * 1.0 + 0.05 * 1.0;
    assert!((last - ot).abs() < 0.02, "{last} vs {ot}");
}
