//! Property tests of the Monte Carlo dual objective.

use proptest::prelude::*;
use sinkhorn_dro::apps::LogisticLoss;
use sinkhorn_dro::dual::{jensen_kl_upper_bound, mc_dual_value, SamplePool};
use sinkhorn_dro::loss::TrackingLoss;
use sinkhorn_dro::{CostSpec, EmpiricalDistribution, FeasibleSet, Loss, SeedSpec};

/// `f + c` for a wrapped loss.
struct Shifted<'a, L> {
    inner: &'a L,
    c: f64,
}

impl<L: Loss> Loss for Shifted<'_, L> {
    fn name(&self) -> &str {
        "shifted"
    }
    fn theta_dim(&self) -> usize {
        self.inner.theta_dim()
    }
    fn feasible_set(&self) -> FeasibleSet {
        self.inner.feasible_set()
    }
    fn value(&self, theta: &[f64], z: &[f64]) -> f64 {
        self.inner.value(theta, z) + self.c
    }
    fn theta_subgrad(&self, theta: &[f64], z: &[f64], out: &mut [f64]) {
        self.inner.theta_subgrad(theta, z, out)
    }
}

fn tracking_pool(seed: u64, eps: f64) -> (SamplePool, TrackingLoss) {
    let data = EmpiricalDistribution::from_rows(&[[0.3, -0.2], [1.0, 0.5], [-0.4, 0.9]]).unwrap();
    let cost = CostSpec::quadratic(eps).unwrap();
    let pool = SamplePool::draw(&data, &cost, 40, SeedSpec::new(seed)).unwrap();
    let loss = TrackingLoss {
        lower: -5.0,
        upper: 5.0,
        dim: 2,
    };
    (pool, loss)
}

fn logistic_pool(seed: u64, eps: f64) -> (SamplePool, LogisticLoss) {
    let data = EmpiricalDistribution::from_rows(&[[0.5, -1.0, 1.0], [-0.3, 0.8, -1.0], [1.2, 0.1, 1.0]]).unwrap();
    let cost = CostSpec::feature_label(eps).unwrap();
    let pool = SamplePool::draw(&data, &cost, 30, SeedSpec::new(seed)).unwrap();
    (pool, LogisticLoss::new(2))
}

fn check_gradients<L: Loss>(pool: &SamplePool, loss: &L, lambda: f64, theta: &[f64], rho_bar: f64) {
    let e = mc_dual_value(lambda, theta, pool, rho_bar, loss).unwrap();
    let h = 1e-5;
    let norm = e.grad_theta.iter().map(|g| g * g).sum::<f64>().sqrt();
    for k in 0..theta.len() {
        let mut up = theta.to_vec();
        let mut dn = theta.to_vec();
        up[k] += h;
        dn[k] -= h;
        let fd = (mc_dual_value(lambda, &up, pool, rho_bar, loss).unwrap().value
            - mc_dual_value(lambda, &dn, pool, rho_bar, loss).unwrap().value)
            / (2.0 * h);
        assert!(
            (fd - e.grad_theta[k]).abs() <= 1e-4 * (1.0 + norm),
            "theta[{k}]: fd {fd} vs {}",
            e.grad_theta[k]
        );
    }
    let hl = 1e-5 * lambda;
    let fd = (mc_dual_value(lambda + hl, theta, pool, rho_bar, loss).unwrap().value
        - mc_dual_value(lambda - hl, theta, pool, rho_bar, loss).unwrap().value)
        / (2.0 * hl);
    assert!(
        (fd - e.grad_lambda).abs() <= 1e-4 * (1.0 + e.grad_lambda.abs()),
        "lambda: fd {fd} vs {}",
        e.grad_lambda
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn gradients_match_finite_differences_tracking(
        seed in 0u64..1000,
        eps in 0.05f64..1.0,
        lambda in 0.3f64..20.0,
        t0 in -1.5f64..1.5,
        t1 in -1.5f64..1.5,
        rho_bar in 0.0f64..0.5,
    ) {
        let (pool, loss) = tracking_pool(seed, eps);
        check_gradients(&pool, &loss, lambda, &[t0, t1], rho_bar);
    }

    #[test]
    fn gradients_match_finite_differences_logistic(
        seed in 0u64..1000,
        eps in 0.05f64..1.0,
        lambda in 0.05f64..10.0,
        t0 in -3.0f64..3.0,
        t1 in -3.0f64..3.0,
    ) {
        let (pool, loss) = logistic_pool(seed, eps);
        check_gradients(&pool, &loss, lambda, &[t0, t1], 0.1);
    }

    #[test]
    fn convex_in_lambda(
        seed in 0u64..1000,
        eps in 0.05f64..1.0,
        a in 0.05f64..20.0,
        b in 0.05f64..20.0,
        t in 0.0f64..1.0,
    ) {
        let (pool, loss) = tracking_pool(seed, eps);
        let theta = [0.2, -0.1];
        let f = |l: f64| mc_dual_value(l, &theta, &pool, 0.05, &loss).unwrap().value;
        let mid = t * a + (1.0 - t) * b;
        let chord = t * f(a) + (1.0 - t) * f(b);
        prop_assert!(f(mid) <= chord + 1e-9 * (1.0 + chord.abs()), "{} > {}", f(mid), chord);
    }

    #[test]
    fn constant_shift_moves_value_only(
        seed in 0u64..1000,
        c in -50.0f64..50.0,
        lambda in 0.1f64..10.0,
        t0 in -1.0f64..1.0,
    ) {
        let (pool, loss) = tracking_pool(seed, 0.3);
        let theta = [t0, 0.4];
        let base = mc_dual_value(lambda, &theta, &pool, 0.1, &loss).unwrap();
        let shifted = mc_dual_value(lambda, &theta, &pool, 0.1, &Shifted { inner: &loss, c }).unwrap();
        prop_assert!((shifted.value - base.value - c).abs() <= 1e-9 * (1.0 + base.value.abs() + c.abs()));
        prop_assert!((shifted.grad_lambda - base.grad_lambda).abs() <= 1e-9 * (1.0 + base.grad_lambda.abs() + c.abs() / lambda));
        for (a, b) in shifted.grad_theta.iter().zip(&base.grad_theta) {
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn large_offset_is_stable(seed in 0u64..1000, lambda in 1e-3f64..5.0) {
        let (pool, loss) = tracking_pool(seed, 0.2);
        let theta = [0.5, 0.5];
        let base = mc_dual_value(lambda, &theta, &pool, 0.1, &loss).unwrap().value;
        let big = mc_dual_value(lambda, &theta, &pool, 0.1, &Shifted { inner: &loss, c: 1e3 }).unwrap().value;
        prop_assert!(base.is_finite() && big.is_finite());
        prop_assert!(((big - 1e3) - base).abs() <= 1e-10 * base.abs().max(1.0) * 1e3, "{base} vs {}", big - 1e3);
    }

    #[test]
    fn sinkhorn_never_exceeds_pooled_kl(
        seed in 0u64..1000,
        eps in 0.01f64..1.0,
        lambda in 0.01f64..50.0,
        rho_bar in 0.0f64..1.0,
        t0 in -2.0f64..2.0,
    ) {
        let (pool, loss) = tracking_pool(seed, eps);
        let pair = jensen_kl_upper_bound(lambda, &[t0, 0.0], &pool, rho_bar, &loss).unwrap();
        prop_assert!(pair.sinkhorn <= pair.kl_kde + 1e-12 * (1.0 + pair.kl_kde.abs()));
    }
}
