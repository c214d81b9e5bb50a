//! Application losses and out-of-sample evaluation.

use sinkhorn_dro::apps::{
    classification_error, factor_model_moments, newsvendor_true_optimum, LogisticLoss, NewsvendorLoss, PortfolioLoss,
};
use sinkhorn_dro::optimizer::project_simplex;
use sinkhorn_dro::{EmpiricalDistribution, FeasibleSet, Loss};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::Result;

/// The loss of one of the three applications.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AppLoss {
    Newsvendor(NewsvendorLoss),
    Portfolio(PortfolioLoss),
    Logistic(LogisticLoss),
}

impl AppLoss {
    fn inner(&self) -> &dyn Loss {
        match self {
            AppLoss::Newsvendor(l) => l,
            AppLoss::Portfolio(l) => l,
            AppLoss::Logistic(l) => l,
        }
    }

    /// Starting decision for every solver.
    pub fn start(&self, train: &EmpiricalDistribution) -> Vec<f64> {
        match self {
            AppLoss::Newsvendor(_) => train.mean(),
            AppLoss::Portfolio(l) => sinkhorn_dro::apps::portfolio_start(l.dim),
            AppLoss::Logistic(l) => vec![0.0; l.dim],
        }
    }
}

impl Loss for AppLoss {
    fn name(&self) -> &str {
        self.inner().name()
    }
    fn theta_dim(&self) -> usize {
        self.inner().theta_dim()
    }
    fn feasible_set(&self) -> FeasibleSet {
        self.inner().feasible_set()
    }
    fn value(&self, theta: &[f64], z: &[f64]) -> f64 {
        self.inner().value(theta, z)
    }
    fn theta_subgrad(&self, theta: &[f64], z: &[f64], out: &mut [f64]) {
        self.inner().theta_subgrad(theta, z, out)
    }
    fn growth_order(&self) -> Option<u32> {
        self.inner().growth_order()
    }
}

/// `(J(θ) − J*)/(1 + |J*|)`.
pub fn relative_gap(j: f64, j_star: f64) -> f64 {
    (j - j_star) / (1.0 + j_star.abs())
}

/// Sample mean of the loss over `test`.
pub fn mean_loss<L: Loss + ?Sized>(loss: &L, theta: &[f64], test: &EmpiricalDistribution) -> f64 {
    test.iter().map(|z| loss.value(theta, z)).sum::<f64>() / test.len() as f64
}

/// Sample mean-CVaR of the weights in `theta`, minimizing over the threshold
/// on `test` itself rather than using the stored one.
pub fn empirical_mean_cvar(loss: &PortfolioLoss, theta: &[f64], test: &EmpiricalDistribution) -> f64 {
    let w = &theta[..loss.dim];
    let mut losses: Vec<f64> = test
        .iter()
        .map(|z| -w.iter().zip(z).map(|(a, b)| a * b).sum::<f64>())
        .collect();
    let n = losses.len();
    let mean = losses.iter().sum::<f64>() / n as f64;
    let k = (((1.0 - loss.alpha) * n as f64).ceil() as usize).clamp(1, n) - 1;
    let (_, &mut tau, _) = losses.select_nth_unstable_by(k, f64::total_cmp);
    let excess = losses.iter().map(|l| (l - tau).max(0.0)).sum::<f64>() / n as f64;
    mean + loss.varrho * (tau + excess / loss.alpha)
}

/// Mean-CVaR of weights `w` under the Gaussian factor model, with gradient.
///
/// Portfolio loss `−wᵀz` is `N(−μ_w, σ_w²)`, so the objective is
/// `−(1+ϱ)·μ_w + ϱ·σ_w·φ(Φ⁻¹(1−α))/α`.
pub struct GaussianMeanCvar {
    mean: Vec<f64>,
    cov: Vec<f64>,
    varrho: f64,
    kappa: f64,
}

impl GaussianMeanCvar {
    pub fn factor_model(loss: &PortfolioLoss) -> Self {
        let (mean, cov) = factor_model_moments(loss.dim);
        let std = Normal::standard();
        let kappa = std.pdf(std.inverse_cdf(1.0 - loss.alpha)) / loss.alpha;
        Self {
            mean,
            cov,
            varrho: loss.varrho,
            kappa,
        }
    }

    pub fn value_and_grad(&self, w: &[f64]) -> (f64, Vec<f64>) {
        let d = w.len();
        let sigma_w: Vec<f64> = (0..d)
            .map(|i| (0..d).map(|j| self.cov[i * d + j] * w[j]).sum())
            .collect();
        let var: f64 = w.iter().zip(&sigma_w).map(|(a, b)| a * b).sum();
        let sd = var.sqrt();
        let mu: f64 = w.iter().zip(&self.mean).map(|(a, b)| a * b).sum();
        let c = self.varrho * self.kappa;
        let value = -(1.0 + self.varrho) * mu + c * sd;
        let grad = (0..d)
            .map(|i| -(1.0 + self.varrho) * self.mean[i] + c * sigma_w[i] / sd)
            .collect();
        (value, grad)
    }

    /// Minimizes over the simplex by projected gradient with backtracking.
    pub fn minimize(&self) -> Result<(Vec<f64>, f64)> {
        let d = self.mean.len();
        let mut w = vec![1.0 / d as f64; d];
        let (mut value, mut grad) = self.value_and_grad(&w);
        let mut step = 1.0;
        for _ in 0..20_000 {
            let mut accepted = None;
            while step > 1e-16 {
                let trial: Vec<f64> = w.iter().zip(&grad).map(|(a, g)| a - step * g).collect();
                let next = project_simplex(&trial)?;
                let (v, g) = self.value_and_grad(&next);
                let moved: f64 = next.iter().zip(&w).map(|(a, b)| (a - b) * (a - b)).sum();
                let decrease: f64 = grad
                    .iter()
                    .zip(next.iter().zip(&w))
                    .map(|(g, (a, b))| g * (a - b))
                    .sum();
                if v <= value + decrease + moved / (2.0 * step) {
                    accepted = Some((next, v, g, moved));
                    break;
                }
                step *= 0.5;
            }
            let Some((next, v, g, moved)) = accepted else { break };
            w = next;
            value = v;
            grad = g;
            step *= 2.0;
            if moved.sqrt() < 1e-14 {
                break;
            }
        }
        Ok((w, value))
    }
}

/// Exact optimal value of the application, when one is known.
pub fn true_optimum(loss: &AppLoss, newsvendor_scale: f64) -> Result<Option<f64>> {
    Ok(match loss {
        AppLoss::Newsvendor(l) => Some(newsvendor_true_optimum(l, newsvendor_scale)?.1),
        AppLoss::Portfolio(l) => Some(GaussianMeanCvar::factor_model(l).minimize()?.1),
        AppLoss::Logistic(_) => None,
    })
}

/// Out-of-sample objective: mean loss for the newsvendor, mean-CVaR for the
/// portfolio and misclassification rate for the classifier.
pub fn out_of_sample(loss: &AppLoss, theta: &[f64], test: &EmpiricalDistribution) -> Result<f64> {
    Ok(match loss {
        AppLoss::Newsvendor(l) => mean_loss(l, theta, test),
        AppLoss::Portfolio(l) => empirical_mean_cvar(l, theta, test),
        AppLoss::Logistic(_) => classification_error(theta, test)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use sinkhorn_dro::apps::factor_returns_sample;
    use sinkhorn_dro::SeedSpec;

    #[test]
    fn gaussian_gradient_matches_differences() {
        let loss = PortfolioLoss::standard(5).unwrap();
        let obj = GaussianMeanCvar::factor_model(&loss);
        let w = [0.1, 0.3, 0.2, 0.25, 0.15];
        let (_, g) = obj.value_and_grad(&w);
        for i in 0..5 {
            let mut hi = w;
            let mut lo = w;
            hi[i] += 1e-6;
            lo[i] -= 1e-6;
            let fd = (obj.value_and_grad(&hi).0 - obj.value_and_grad(&lo).0) / 2e-6;
            assert!((fd - g[i]).abs() < 1e-6, "{i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn closed_form_matches_large_sample() {
        let loss = PortfolioLoss::standard(10).unwrap();
        let obj = GaussianMeanCvar::factor_model(&loss);
        let (w, j_star) = obj.minimize().unwrap();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let test = factor_returns_sample(10, 400_000, SeedSpec::new(11)).unwrap();
        let mut theta = w.clone();
        theta.push(0.0);
        let emp = empirical_mean_cvar(&loss, &theta, &test);
        assert!((emp - j_star).abs() < 0.02 * (1.0 + j_star.abs()), "{emp} vs {j_star}");
        // equal weights are no better than the optimum
        let eq = vec![0.1; 10];
        assert!(obj.value_and_grad(&eq).0 >= j_star - 1e-12);
    }

    #[test]
    fn optimum_satisfies_simplex_kkt() {
        let loss = PortfolioLoss::standard(10).unwrap();
        let obj = GaussianMeanCvar::factor_model(&loss);
        let (w, _) = obj.minimize().unwrap();
        let (_, g) = obj.value_and_grad(&w);
        // on the support the gradient is constant and no smaller elsewhere
        let support: Vec<usize> = (0..10).filter(|&i| w[i] > 1e-9).collect();
        let level = g[support[0]];
        for i in 0..10 {
            if support.contains(&i) {
                assert!((g[i] - level).abs() < 1e-6, "{i}: {} vs {level}", g[i]);
            } else {
                assert!(g[i] >= level - 1e-6);
            }
        }
    }

    #[test]
    fn empirical_cvar_of_known_sample() {
        let loss = PortfolioLoss::new(1, 0.5, 1.0).unwrap();
        // losses −z = {−1, −2, −3, −4}; mean −2.5, upper half mean −1.5
        let test = EmpiricalDistribution::from_scalars(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        let v = empirical_mean_cvar(&loss, &[1.0, 0.0], &test);
        assert!((v - (-2.5 - 1.5)).abs() < 1e-12, "{v}");
    }
}
