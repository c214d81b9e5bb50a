//! K-fold cross-validation over hyper-parameter grids.
//!
//! The Sinkhorn method is tuned in two stages: the regularization `ε` is
//! chosen with the radius held at zero, then the radius `ρ̄` is chosen at that
//! `ε`. The KL and Wasserstein radii are tuned over a single grid. The score
//! of a grid point is the mean over folds of the held-out sample loss, and
//! ties go to the earliest grid point.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;
use sinkhorn_dro::SeedSpec;

use crate::config::{Grids, Hyper, Method};
use crate::error::{HarnessError, Result};
use crate::eval::mean_loss;
use crate::methods::{solve_method, SolveContext, TrainSet};

/// Seeded permutation of `0..n` cut into `k` contiguous blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Folds {
    perm: Vec<usize>,
    bounds: Vec<usize>,
}

impl Folds {
    pub fn new(n: usize, k: usize, seed: SeedSpec) -> Result<Self> {
        if k < 2 {
            return Err(HarnessError::Config(format!("folds must be >= 2, got {k}")));
        }
        if n < k {
            return Err(HarnessError::Config(format!("cannot split {n} samples into {k} folds")));
        }
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut seed.rng());
        // the first n % k blocks take one extra element
        let (base, extra) = (n / k, n % k);
        let mut bounds = vec![0];
        for f in 0..k {
            bounds.push(bounds[f] + base + usize::from(f < extra));
        }
        Ok(Self { perm, bounds })
    }

    pub fn len(&self) -> usize {
        self.bounds.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validation(&self, fold: usize) -> &[usize] {
        &self.perm[self.bounds[fold]..self.bounds[fold + 1]]
    }

    pub fn training(&self, fold: usize) -> Vec<usize> {
        let (lo, hi) = (self.bounds[fold], self.bounds[fold + 1]);
        self.perm[..lo].iter().chain(&self.perm[hi..]).copied().collect()
    }

    /// Every fold's training and validation indices are disjoint, together
    /// cover `0..n`, and none reaches into `test`.
    pub fn audit(&self, test: std::ops::Range<usize>) -> bool {
        let n = self.perm.len();
        (0..self.len()).all(|f| {
            let mut seen = vec![0u8; n];
            for &i in self.validation(f) {
                seen[i] += 1;
            }
            for i in self.training(f) {
                seen[i] += 2;
            }
            seen.iter().all(|&s| s == 1 || s == 2) && self.perm.iter().all(|i| !test.contains(i))
        })
    }
}

/// Score of one grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridScore {
    pub stage: &'static str,
    pub value: f64,
    /// Mean held-out loss; `+∞` when a fold failed.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvOutcome {
    pub hyper: Hyper,
    pub scores: Vec<GridScore>,
}

/// Index of the smallest score, the earliest one on ties.
pub fn argmin_first(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        if best.is_none_or(|b| s < scores[b]) {
            best = Some(i);
        }
    }
    best
}

/// Seeds of one cross-validation run.
#[derive(Debug, Clone, Copy)]
pub struct CvSeeds {
    /// Fold permutation.
    pub folds: SeedSpec,
    /// Kernel pools; fold `k` uses `pools.with_fold(pools.path[1] + k)`.
    pub pools: SeedSpec,
}

fn fold_pool_seed(seeds: &CvSeeds, fold: usize) -> SeedSpec {
    seeds.pools.with_fold(seeds.pools.path[1] + fold as u64)
}

/// Mean over folds of the held-out loss of `method` at `hyper`.
fn score(
    ctx: &SolveContext<'_>,
    method: Method,
    hyper: &Hyper,
    train: &TrainSet,
    folds: &Folds,
    seeds: &CvSeeds,
) -> f64 {
    let per_fold: Vec<f64> = (0..folds.len())
        .into_par_iter()
        .map(|f| {
            let fit = match train.select(&folds.training(f)) {
                Ok(t) => t,
                Err(_) => return f64::INFINITY,
            };
            let held = match train.data.select(folds.validation(f)) {
                Ok(h) => h,
                Err(_) => return f64::INFINITY,
            };
            match solve_method(ctx, method, hyper, &fit, fold_pool_seed(seeds, f)) {
                Ok(s) => mean_loss(ctx.loss, &s.theta, &held),
                Err(_) => f64::INFINITY,
            }
        })
        .collect();
    let mean = per_fold.iter().sum::<f64>() / per_fold.len() as f64;
    if mean.is_nan() {
        f64::INFINITY
    } else {
        mean
    }
}

fn sweep(
    ctx: &SolveContext<'_>,
    method: Method,
    grid: &[f64],
    at: impl Fn(f64) -> Hyper + Sync,
    train: &TrainSet,
    folds: &Folds,
    seeds: &CvSeeds,
    stage: &'static str,
) -> Result<(f64, Vec<GridScore>)> {
    let scores: Vec<f64> = grid
        .par_iter()
        .map(|&v| score(ctx, method, &at(v), train, folds, seeds))
        .collect();
    let best = argmin_first(&scores).ok_or_else(|| HarnessError::Config(format!("empty `{stage}` grid")))?;
    let table = grid
        .iter()
        .zip(&scores)
        .map(|(&value, &score)| GridScore { stage, value, score })
        .collect();
    Ok((grid[best], table))
}

/// Chooses the hyper-parameters of `method` that `fixed` leaves unset.
///
/// Training samples are indexed `0..n`; `test_indices` are the indices the
/// caller gives its test samples, audited to be out of reach of every fold.
pub fn cross_validate(
    ctx: &SolveContext<'_>,
    method: Method,
    fixed: &Hyper,
    grids: &Grids,
    train: &TrainSet,
    k: usize,
    seeds: &CvSeeds,
    test_indices: std::ops::Range<usize>,
) -> Result<CvOutcome> {
    let mut hyper = fixed.restrict(method);
    let mut scores = Vec::new();
    if hyper.complete_for(method) {
        return Ok(CvOutcome { hyper, scores });
    }
    let folds = Folds::new(train.data.len(), k, seeds.folds)?;
    assert!(
        folds.audit(test_indices),
        "cross-validation folds overlap each other or the test set"
    );
    match method {
        Method::Saa => {}
        Method::Sinkhorn => {
            let eps = match hyper.epsilon {
                Some(e) => e,
                None => {
                    let at = |e| Hyper {
                        epsilon: Some(e),
                        rho_bar: Some(0.0),
                        ..Hyper::default()
                    };
                    let (e, t) = sweep(ctx, method, &grids.epsilon, at, train, &folds, seeds, "epsilon")?;
                    scores.extend(t);
                    e
                }
            };
            hyper.epsilon = Some(eps);
            if hyper.rho_bar.is_none() {
                let at = |r| Hyper {
                    epsilon: Some(eps),
                    rho_bar: Some(r),
                    ..Hyper::default()
                };
                let (r, t) = sweep(ctx, method, &grids.rho_bar, at, train, &folds, seeds, "rho_bar")?;
                scores.extend(t);
                hyper.rho_bar = Some(r);
            }
        }
        Method::Kl => {
            let at = |e| Hyper {
                eta: Some(e),
                ..Hyper::default()
            };
            let (e, t) = sweep(ctx, method, &grids.eta, at, train, &folds, seeds, "eta")?;
            scores.extend(t);
            hyper.eta = Some(e);
        }
        Method::Wasserstein => {
            let at = |r| Hyper {
                rho: Some(r),
                ..Hyper::default()
            };
            let (r, t) = sweep(ctx, method, &grids.rho, at, train, &folds, seeds, "rho")?;
            scores.extend(t);
            hyper.rho = Some(r);
        }
    }
    Ok(CvOutcome { hyper, scores })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn folds_partition_and_balance() {
        let folds = Folds::new(23, 10, SeedSpec::new(1)).unwrap();
        let sizes: Vec<usize> = (0..10).map(|f| folds.validation(f).len()).collect();
        assert_eq!(sizes.iter().sum::<usize>(), 23);
        assert!(sizes.iter().all(|&s| s == 2 || s == 3));
        assert!(folds.audit(23..100));
        let mut all: Vec<usize> = (0..10).flat_map(|f| folds.validation(f).to_vec()).collect();
        all.sort();
        assert_eq!(all, (0..23).collect::<Vec<_>>());
    }

    #[test]
    fn audit_catches_test_overlap() {
        let folds = Folds::new(10, 2, SeedSpec::new(1)).unwrap();
        assert!(!folds.audit(5..20));
    }

    #[test]
    fn too_few_samples_is_an_error() {
        assert!(Folds::new(5, 10, SeedSpec::new(0)).is_err());
    }

    #[test]
    fn folds_are_seeded() {
        let a = Folds::new(30, 5, SeedSpec::new(4)).unwrap();
        let b = Folds::new(30, 5, SeedSpec::new(4)).unwrap();
        let c = Folds::new(30, 5, SeedSpec::new(5)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn ties_go_to_the_first_index() {
        assert_eq!(argmin_first(&[2.0, 1.0, 1.0, 3.0]), Some(1));
        assert_eq!(argmin_first(&[1.0, 1.0]), Some(0));
        assert_eq!(argmin_first(&[f64::INFINITY, f64::INFINITY]), Some(0));
        assert_eq!(argmin_first(&[]), None);
    }
}
