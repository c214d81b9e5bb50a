//! Properties of the outer bisection and the simplex projection.

use std::cell::RefCell;

use proptest::prelude::*;
use sinkhorn_dro::dual::{DualEvaluation, DualObjective, LinearGaussianDual, SamplePool, SinkhornDual};
use sinkhorn_dro::loss::FixedLinearLoss;
use sinkhorn_dro::optimizer::{bisection_solve, project_simplex, solve_dual, BisectionConfig, InnerSolverConfig};
use sinkhorn_dro::{CostSpec, EmpiricalDistribution, FeasibleSet, Result, SeedSpec};

/// Records every multiplier the solver asks for.
struct Recording<'a, D> {
    inner: &'a D,
    seen: RefCell<Vec<f64>>,
}

impl<D: DualObjective> DualObjective for Recording<'_, D> {
    fn theta_dim(&self) -> usize {
        self.inner.theta_dim()
    }
    fn feasible_set(&self) -> FeasibleSet {
        self.inner.feasible_set()
    }
    fn evaluate(&self, lambda: f64, theta: &[f64]) -> Result<DualEvaluation> {
        self.seen.borrow_mut().push(lambda);
        self.inner.evaluate(lambda, theta)
    }
}

fn linear_instance(a0: f64, a1: f64, rho_bar: f64) -> LinearGaussianDual {
    let data = EmpiricalDistribution::from_rows(&[[0.5, 1.0], [1.5, -0.5], [0.0, 0.2]]).unwrap();
    let cost = CostSpec::quadratic(0.3).unwrap();
    LinearGaussianDual::new(&[a0, a1], &data, &cost, rho_bar).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bisection_stays_positive_and_inside_bracket(
        a0 in 0.1f64..3.0,
        a1 in -3.0f64..3.0,
        rho_bar in 0.001f64..2.0,
    ) {
        let dual = linear_instance(a0, a1, rho_bar);
        let rec = Recording { inner: &dual, seen: RefCell::new(Vec::new()) };
        let cfg = BisectionConfig::new(1e-4, 1e4, InnerSolverConfig::default());
        let r = bisection_solve(&rec, &cfg, &[]).unwrap();
        prop_assert!(rec.seen.borrow().iter().all(|&l| l > 0.0));
        prop_assert!(r.lambda >= cfg.lower && r.lambda <= cfg.upper);
        // unimodality along the trace: no evaluated point beats the returned one
        for step in &r.trace {
            prop_assert!(step.value >= r.value - 1e-6, "{} < {}", step.value, r.value);
        }
        for w in r.trace.windows(2) {
            // exact halving up to rounding of the midpoint
            let ulp = 4.0 * f64::EPSILON * w[0].upper;
            prop_assert!((w[1].width() - 0.5 * w[0].width()).abs() <= ulp);
        }
    }

    #[test]
    fn simplex_projection_is_idempotent(v in prop::collection::vec(-5.0f64..5.0, 1..12)) {
        let p = project_simplex(&v).unwrap();
        let pp = project_simplex(&p).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|&x| x >= 0.0));
        for (a, b) in p.iter().zip(&pp) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn simplex_projection_is_nonexpansive(
        pair in (1usize..10).prop_flat_map(|d| (
            prop::collection::vec(-5.0f64..5.0, d),
            prop::collection::vec(-5.0f64..5.0, d),
        ))
    ) {
        let (u, v) = pair;
        let (pu, pv) = (project_simplex(&u).unwrap(), project_simplex(&v).unwrap());
        let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        prop_assert!(dist(&pu, &pv) <= dist(&u, &v) + 1e-12);
    }
}

#[test]
fn monte_carlo_value_converges_in_pool_size() {
    let data = EmpiricalDistribution::from_rows(&[[0.2, 0.4], [1.0, -0.3], [-0.5, 0.8]]).unwrap();
    let a = [1.0, 2.0];
    let cost = CostSpec::quadratic(0.5).unwrap();
    let rho_bar = 0.1;
    let exact = LinearGaussianDual::new(&a, &data, &cost, rho_bar)
        .unwrap()
        .optimal_value();
    let loss = FixedLinearLoss { a: a.to_vec() };
    let sizes = [100usize, 1000, 10_000, 100_000];
    let reps = 8;
    let mut errors = Vec::new();
    for &m in &sizes {
        let mut total = 0.0;
        for r in 0..reps {
            let pool = SamplePool::draw(&data, &cost, m, SeedSpec::new(900 + r)).unwrap();
            let dual = SinkhornDual::new(&pool, rho_bar, &loss);
            let sol = solve_dual(&dual, rho_bar, &[], &InnerSolverConfig::default(), 1e-8, 100).unwrap();
            total += (sol.value - exact).abs();
        }
        errors.push(total / reps as f64);
    }
    let xs: Vec<f64> = sizes.iter().map(|&m| (m as f64).ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / 4.0, ys.iter().sum::<f64>() / 4.0);
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx) * (x - mx)).sum::<f64>();
    assert!(slope <= -0.3, "slope {slope}, errors {errors:?}");
}
