//! One solve per method at fixed hyper-parameters.

use sinkhorn_dro::apps::{wasserstein_newsvendor_solve, wasserstein_portfolio_solve, NewsvendorCost};
use sinkhorn_dro::dual::SamplePool;
use sinkhorn_dro::optimizer::{kl_dro_solve, saa_solve, sinkhorn_solve, InnerSolverConfig};
use sinkhorn_dro::{CostSpec, EmpiricalDistribution, SeedSpec};

use crate::config::{Hyper, Method};
use crate::error::{HarnessError, Result};
use crate::eval::AppLoss;

/// Training data seen by the solvers.
#[derive(Debug, Clone)]
pub struct TrainSet {
    /// Observed samples, labeled ones for classification.
    pub data: EmpiricalDistribution,
    /// Unlabeled feature rows, used by the Sinkhorn method only.
    pub unlabeled: Option<EmpiricalDistribution>,
}

impl TrainSet {
    pub fn plain(data: EmpiricalDistribution) -> Self {
        Self { data, unlabeled: None }
    }

    /// Rows at `indices` of the observed samples; unlabeled rows are kept whole.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        Ok(Self {
            data: self.data.select(indices)?,
            unlabeled: self.unlabeled.clone(),
        })
    }
}

/// Everything a solve needs besides the data.
#[derive(Debug, Clone, Copy)]
pub struct SolveContext<'a> {
    pub loss: &'a AppLoss,
    pub inner: &'a InnerSolverConfig,
    pub m: usize,
    pub newsvendor_cost: NewsvendorCost,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solved {
    pub theta: Vec<f64>,
    /// Optimal value of the training problem.
    pub value: f64,
}

fn missing(name: &str) -> HarnessError {
    HarnessError::Config(format!("hyper-parameter `{name}` is not set"))
}

/// Solves `method` on `train`; `pool_seed` feeds the Sinkhorn kernel draws.
pub fn solve_method(
    ctx: &SolveContext<'_>,
    method: Method,
    hyper: &Hyper,
    train: &TrainSet,
    pool_seed: SeedSpec,
) -> Result<Solved> {
    let loss = ctx.loss;
    let theta0 = loss.start(&train.data);
    match method {
        Method::Saa => {
            let r = saa_solve(&train.data, loss, ctx.inner, &theta0)?;
            Ok(Solved {
                theta: r.theta,
                value: r.value,
            })
        }
        Method::Sinkhorn => {
            let eps = hyper.epsilon.ok_or_else(|| missing("epsilon"))?;
            let rho_bar = hyper.rho_bar.ok_or_else(|| missing("rho_bar"))?;
            let (centers, cost) = match (loss, &train.unlabeled) {
                (AppLoss::Logistic(_), unlabeled) => (
                    sinkhorn_dro::apps::semisup_dataset_build(&train.data, unlabeled.as_ref())?,
                    CostSpec::feature_label(eps)?,
                ),
                _ => (train.data.clone(), CostSpec::quadratic(eps)?),
            };
            let pool = SamplePool::draw(&centers, &cost, ctx.m, pool_seed)?;
            let r = sinkhorn_solve(&pool, rho_bar, loss, ctx.inner, &theta0)?;
            Ok(Solved {
                theta: r.theta,
                value: r.value,
            })
        }
        Method::Kl => {
            let eta = hyper.eta.ok_or_else(|| missing("eta"))?;
            let r = kl_dro_solve(&train.data, eta, loss, ctx.inner, &theta0)?;
            Ok(Solved {
                theta: r.theta,
                value: r.value,
            })
        }
        Method::Wasserstein => {
            let rho = hyper.rho.ok_or_else(|| missing("rho"))?;
            match loss {
                AppLoss::Newsvendor(l) => {
                    let r = wasserstein_newsvendor_solve(l, ctx.newsvendor_cost, &train.data, rho)?;
                    Ok(Solved {
                        theta: vec![r.theta],
                        value: r.value,
                    })
                }
                AppLoss::Portfolio(l) => {
                    let r = wasserstein_portfolio_solve(l, &train.data, rho, ctx.inner, &theta0)?;
                    Ok(Solved {
                        theta: r.theta,
                        value: r.value,
                    })
                }
                AppLoss::Logistic(_) => Err(HarnessError::Config(
                    "no Wasserstein baseline for classification".into(),
                )),
            }
        }
    }
}
