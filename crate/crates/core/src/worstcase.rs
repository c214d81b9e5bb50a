//! The worst-case distribution and optimality diagnostics.
//!
//! At an optimal `λ* > 0` the worst case is the mixture over centers of the
//! exponentially tilted kernels `dγᵢ ∝ exp(f/(λ*ε)) dQᵢ`. On a frozen pool the
//! tilt becomes a set of self-normalized weights, which is what
//! [`worstcase_sample`] resamples from. The module also evaluates the
//! stationarity residual in `λ`, the transport budget spent by the tilt, the
//! `λ* = 0` test on finite spaces, and a log-domain discrete Sinkhorn distance
//! used as a plug-in feasibility check.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::cost::CostSpec;
use crate::data::EmpiricalDistribution;
use crate::dual::{tilt, tilt_weights, SamplePool, TiltedMoments};
use crate::error::{Error, Result};
use crate::loss::Loss;
use crate::rng::SeedSpec;

/// Centers whose effective sample size drops below this fraction of `m` are flagged.
pub const ESS_WARNING_FRACTION: f64 = 0.01;

/// Tilted pool weights `wᵢⱼ ∝ exp(f_θ(ẑᵢⱼ)/(λε))`, normalized per center.
#[derive(Debug, Clone)]
pub struct TiltedSamplerState<'a, L: ?Sized> {
    lambda: f64,
    theta: Vec<f64>,
    pool: &'a SamplePool,
    loss: &'a L,
    /// Row-major `n × m`.
    weights: Vec<f64>,
    /// `log Ê_{Qᵢ}[exp(f/(λε))]` per center.
    log_mgf: Vec<f64>,
}

impl<'a, L: Loss + ?Sized> TiltedSamplerState<'a, L> {
    pub fn new(lambda: f64, theta: &[f64], pool: &'a SamplePool, loss: &'a L) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::LambdaOutOfDomain(lambda));
        }
        if theta.len() != loss.theta_dim() {
            return Err(Error::DimensionMismatch {
                expected: loss.theta_dim(),
                got: theta.len(),
            });
        }
        let t = lambda * pool.epsilon();
        let mut weights = Vec::with_capacity(pool.n() * pool.m());
        let mut log_mgf = Vec::with_capacity(pool.n());
        let mut values = vec![0.0; pool.m()];
        for i in 0..pool.n() {
            for (v, z) in values.iter_mut().zip(pool.center_draws(i)) {
                *v = loss.value(theta, z);
            }
            let tl = tilt(&values, t);
            if !tl.log_mean_exp.is_finite() {
                return Err(Error::NonFinite(tl.log_mean_exp));
            }
            log_mgf.push(tl.log_mean_exp);
            weights.extend(tilt_weights(&values, t));
        }
        Ok(Self {
            lambda,
            theta: theta.to_vec(),
            pool,
            loss,
            weights,
            log_mgf,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn pool(&self) -> &SamplePool {
        self.pool
    }

    /// Normalized weights of center `i`.
    pub fn weights(&self, i: usize) -> &[f64] {
        let m = self.pool.m();
        &self.weights[i * m..(i + 1) * m]
    }

    /// Kish effective sample size `1/Σⱼ wᵢⱼ²` of center `i`.
    pub fn ess(&self, i: usize) -> f64 {
        1.0 / self.weights(i).iter().map(|w| w * w).sum::<f64>()
    }

    pub fn min_ess(&self) -> f64 {
        (0..self.pool.n()).map(|i| self.ess(i)).fold(f64::INFINITY, f64::min)
    }

    /// Some center has `ESS < 0.01·m`.
    pub fn degenerate(&self) -> bool {
        self.min_ess() < ESS_WARNING_FRACTION * self.pool.m() as f64
    }

    /// Expected loss under the tilted pool, the plug-in worst-case value.
    pub fn tilted_expectation(&self) -> f64 {
        let mut total = 0.0;
        for i in 0..self.pool.n() {
            for (w, z) in self.weights(i).iter().zip(self.pool.center_draws(i)) {
                total += w * self.loss.value(&self.theta, z);
            }
        }
        total / self.pool.n() as f64
    }

    /// Log-density of the worst-case mixture with respect to Lebesgue measure.
    ///
    /// Uses the closed-form kernel density and the pool estimate of each
    /// center's normalizing constant.
    pub fn log_density(&self, z: &[f64]) -> Result<f64> {
        let cost = self.pool.cost();
        let f = self.loss.value(&self.theta, z) / (self.lambda * cost.epsilon());
        let mut terms = Vec::with_capacity(self.pool.n());
        for (x, lm) in self.pool.centers().iter().zip(&self.log_mgf) {
            terms.push(cost.kernel_log_density(x, z)? + f - lm);
        }
        Ok(log_sum_exp(&terms) - (self.pool.n() as f64).ln())
    }
}

/// Draws from the worst-case distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct WorstCaseSample {
    pub points: EmpiricalDistribution,
    pub min_ess: f64,
    /// Set when the effective-sample-size guard tripped.
    pub ess_warning: bool,
}

/// Self-normalized importance resampling: a uniform center, then a pool
/// index drawn with the tilted weights.
pub fn worstcase_sample<L: Loss + ?Sized>(
    state: &TiltedSamplerState<'_, L>,
    count: usize,
    seed: SeedSpec,
) -> Result<WorstCaseSample> {
    if count == 0 {
        return Err(Error::InvalidParameter {
            name: "count",
            value: 0.0,
        });
    }
    let pool = state.pool;
    let indices = (0..pool.n())
        .map(|i| WeightedIndex::new(state.weights(i)).map_err(|_| Error::NonFinite(f64::NAN)))
        .collect::<Result<Vec<_>>>()?;
    let mut rng = seed.rng();
    let mut flat = Vec::with_capacity(count * pool.dim());
    for _ in 0..count {
        let i = rng.random_range(0..pool.n());
        let j = indices[i].sample(&mut rng);
        flat.extend_from_slice(pool.get(i, j));
    }
    Ok(WorstCaseSample {
        points: EmpiricalDistribution::from_flat(pool.dim(), flat)?,
        min_ess: state.min_ess(),
        ess_warning: state.degenerate(),
    })
}

/// `|λ(ρ̄ + ε·(1/n)Σᵢ log E_{Qᵢ}e^{f/(λε)}) − (1/n)Σᵢ E_{γᵢ}[f]|`.
///
/// Zero exactly when `∂F/∂λ = 0`; the residual equals `λ·|∂F/∂λ|`.
pub fn check_first_order<M: TiltedMoments + ?Sized>(moments: &M, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::LambdaOutOfDomain(lambda));
    }
    let (log_mgf, tilted_mean) = moments.mean_moments(lambda);
    let lhs = lambda * (moments.rho_bar() + moments.epsilon() * log_mgf);
    Ok((lhs - tilted_mean).abs())
}

/// `(1/n)Σᵢ [E_{γᵢ}[f]/λ − ε·log E_{Qᵢ}e^{f/(λε)}]`, i.e. `ε` times the mean
/// KL divergence of the tilted conditionals from the kernels.
pub fn kl_budget<M: TiltedMoments + ?Sized>(moments: &M, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::LambdaOutOfDomain(lambda));
    }
    let (log_mgf, tilted_mean) = moments.mean_moments(lambda);
    Ok(tilted_mean / lambda - moments.epsilon() * log_mgf)
}

/// Outcome of the `λ* = 0` test on a finite support.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaZeroDiagnostic {
    pub lambda_zero: bool,
    /// `ρ̄ + ε·(1/n)Σᵢ log Qᵢ(A)` with `A` the argmax set of `f`.
    pub adjusted_radius: f64,
    pub max_f: f64,
}

/// Tie tolerance when collecting the argmax set.
pub const ARGMAX_TIE: f64 = 1e-12;

/// Decides whether `λ* = 0` for loss values `f` (length `L`) and kernel
/// masses `q` (row-major `n × L`).
pub fn lambda_zero_diagnostic(f: &[f64], q: &[f64], rho_bar: f64, epsilon: f64) -> Result<LambdaZeroDiagnostic> {
    if f.is_empty() {
        return Err(Error::Empty("support"));
    }
    if q.is_empty() || !q.len().is_multiple_of(f.len()) {
        return Err(Error::DimensionMismatch {
            expected: f.len(),
            got: q.len(),
        });
    }
    let max_f = f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tie = ARGMAX_TIE * (1.0 + max_f.abs());
    let rows = q.chunks_exact(f.len());
    let n = rows.len() as f64;
    let mut mean_log = 0.0;
    for row in rows {
        let mass: f64 = row
            .iter()
            .zip(f)
            .filter(|(_, v)| **v >= max_f - tie)
            .map(|(q, _)| q)
            .sum();
        mean_log += mass.ln() / n;
    }
    let adjusted_radius = rho_bar + epsilon * mean_log;
    Ok(LambdaZeroDiagnostic {
        lambda_zero: max_f.is_finite() && adjusted_radius >= 0.0,
        adjusted_radius,
        max_f,
    })
}

/// A transport plan with its marginals.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteCoupling {
    /// Row-major `n × L`.
    pub gamma: Vec<f64>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

impl DiscreteCoupling {
    pub fn rows(&self) -> usize {
        self.p.len()
    }

    pub fn cols(&self) -> usize {
        self.q.len()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.gamma.chunks_exact(self.cols()).map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cols()];
        for r in self.gamma.chunks_exact(self.cols()) {
            for (o, g) in out.iter_mut().zip(r) {
                *o += g;
            }
        }
        out
    }

    /// `Σ|row sums − p| + Σ|column sums − q|`.
    pub fn marginal_violation(&self) -> f64 {
        let r: f64 = self.row_sums().iter().zip(&self.p).map(|(a, b)| (a - b).abs()).sum();
        let c: f64 = self.col_sums().iter().zip(&self.q).map(|(a, b)| (a - b).abs()).sum();
        r + c
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

fn check_probability(v: &[f64], what: &'static str) -> Result<()> {
    if v.is_empty() {
        return Err(Error::Empty(what));
    }
    let total: f64 = v.iter().sum();
    if v.iter().any(|x| !(*x >= 0.0)) || (total - 1.0).abs() > 1e-9 {
        return Err(Error::NotProbability(what));
    }
    Ok(())
}

/// Entropic transport distance between discrete `p` (n atoms) and `q` (L atoms).
///
/// Minimizes `Σγᵢⱼ Cᵢⱼ + ε Σγᵢⱼ log(γᵢⱼ/(pᵢ νⱼ))` over couplings of `(p, q)` by
/// alternating log-domain scaling, stopping once the row-marginal violation is
/// at most `tol` (columns are matched exactly after each sweep). Atoms with
/// zero mass are dropped and reinserted as zero rows or columns.
pub fn sinkhorn_distance_discrete(
    p: &[f64],
    q: &[f64],
    cost: &[f64],
    epsilon: f64,
    nu: &[f64],
    tol: f64,
    max_iters: usize,
) -> Result<(f64, DiscreteCoupling)> {
    check_probability(p, "p")?;
    check_probability(q, "q")?;
    let (n, l) = (p.len(), q.len());
    if cost.len() != n * l {
        return Err(Error::DimensionMismatch {
            expected: n * l,
            got: cost.len(),
        });
    }
    if nu.len() != l {
        return Err(Error::DimensionMismatch {
            expected: l,
            got: nu.len(),
        });
    }
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::InvalidEpsilon(epsilon));
    }
    if let Some(v) = nu.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidParameter { name: "nu", value: *v });
    }
    if let Some(c) = cost.iter().find(|c| !(**c >= 0.0) || !c.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "cost",
            value: *c,
        });
    }

    let rows: Vec<usize> = (0..n).filter(|&i| p[i] > 0.0).collect();
    let cols: Vec<usize> = (0..l).filter(|&j| q[j] > 0.0).collect();
    let log_p: Vec<f64> = rows.iter().map(|&i| p[i].ln()).collect();
    let log_q: Vec<f64> = cols.iter().map(|&j| q[j].ln()).collect();
    let log_nu: Vec<f64> = cols.iter().map(|&j| nu[j].ln()).collect();
    // log Kᵢⱼ relative to pᵢνⱼ
    let log_k: Vec<f64> = rows
        .iter()
        .flat_map(|&i| cols.iter().map(move |&j| -cost[i * l + j] / epsilon))
        .collect();
    let (nr, nc) = (rows.len(), cols.len());

    // γᵢⱼ = exp(aᵢ + bⱼ + log pᵢ + log νⱼ + log Kᵢⱼ)
    let mut a = vec![0.0; nr];
    let mut b = vec![0.0; nc];
    let mut buf = vec![0.0; nr.max(nc)];
    let mut violation = f64::INFINITY;
    let mut iterations = 0;
    while iterations < max_iters {
        iterations += 1;
        for i in 0..nr {
            for j in 0..nc {
                buf[j] = b[j] + log_nu[j] + log_k[i * nc + j];
            }
            a[i] = -log_sum_exp(&buf[..nc]);
        }
        for j in 0..nc {
            for i in 0..nr {
                buf[i] = a[i] + log_p[i] + log_k[i * nc + j];
            }
            b[j] = log_q[j] - log_nu[j] - log_sum_exp(&buf[..nr]);
        }
        violation = 0.0;
        for i in 0..nr {
            let row: f64 = (0..nc)
                .map(|j| (a[i] + b[j] + log_p[i] + log_nu[j] + log_k[i * nc + j]).exp())
                .sum();
            violation += (row - p[rows[i]]).abs();
        }
        if violation <= tol {
            break;
        }
    }
    if !(violation <= tol) {
        return Err(Error::NotConverged { iterations, violation });
    }

    let mut gamma = vec![0.0; n * l];
    let mut value = 0.0;
    for (ri, &i) in rows.iter().enumerate() {
        for (cj, &j) in cols.iter().enumerate() {
            let log_ratio = a[ri] + b[cj] + log_k[ri * nc + cj];
            let g = (log_ratio + log_p[ri] + log_nu[cj]).exp();
            gamma[i * l + j] = g;
            value += g * (cost[i * l + j] + epsilon * log_ratio);
        }
    }
    Ok((
        value,
        DiscreteCoupling {
            gamma,
            p: p.to_vec(),
            q: q.to_vec(),
        },
    ))
}

/// Tolerances for [`verify_feasibility`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeasibilityConfig {
    /// Budget may exceed `ρ̄` by this fraction of `ρ̄`.
    pub rel_slack: f64,
    /// Absolute slack, so that `ρ̄ = 0` remains testable.
    pub abs_slack: f64,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for FeasibilityConfig {
    fn default() -> Self {
        Self {
            rel_slack: 0.1,
            abs_slack: 1e-2,
            tol: 1e-9,
            max_iters: 20_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeasibilityReport {
    /// Plug-in Sinkhorn distance between the data and the sample.
    pub distance: f64,
    /// `distance − ρ + ρ̄`, the estimate of `ε`·(mean KL) spent by the sample.
    pub budget: f64,
    pub rho_bar: f64,
    pub feasible: bool,
}

/// Reference weights `νⱼ = 1/(L·p(zⱼ))` that turn the empirical measure of a
/// sample drawn from density `p` into an unbiased stand-in for Lebesgue measure.
pub fn importance_reference_weights(log_density: &[f64]) -> Vec<f64> {
    let l = log_density.len() as f64;
    log_density.iter().map(|ld| (-ld - l.ln()).exp()).collect()
}

/// Plug-in check that a worst-case sample lies in the Sinkhorn ball of
/// adjusted radius `ρ̄` (the unadjusted radius may be negative).
///
/// `nu` is the reference weight of each sample atom; pass
/// [`importance_reference_weights`] of the sampling density so that the
/// entropy term approximates the continuous one.
pub fn verify_feasibility(
    data: &EmpiricalDistribution,
    sample: &EmpiricalDistribution,
    nu: &[f64],
    rho_bar: f64,
    cost: &CostSpec,
    cfg: &FeasibilityConfig,
) -> Result<FeasibilityReport> {
    if !(rho_bar >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "rho_bar",
            value: rho_bar,
        });
    }
    if data.dim() != sample.dim() {
        return Err(Error::DimensionMismatch {
            expected: data.dim(),
            got: sample.dim(),
        });
    }
    let rho = crate::cost::rho_from_rho_bar(rho_bar, cost, data.dim())?;
    let rows: Vec<&[f64]> = data.iter().collect();
    let cols: Vec<&[f64]> = sample.iter().collect();
    let c = crate::cost::cost_matrix(cost, &rows, &cols);
    let p = vec![data.weight(); data.len()];
    let q = vec![sample.weight(); sample.len()];
    let (distance, _) = sinkhorn_distance_discrete(&p, &q, &c, cost.epsilon(), nu, cfg.tol, cfg.max_iters)?;
    let budget = distance - rho + rho_bar;
    Ok(FeasibilityReport {
        distance,
        budget,
        rho_bar,
        feasible: budget <= rho_bar * (1.0 + cfg.rel_slack) + cfg.abs_slack,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::CostSpec;
    use crate::dual::{LinearGaussianDual, PoolMoments};
    use crate::loss::{ConstantLoss, FixedLinearLoss};

    fn pool_1d(centers: &[f64], eps: f64, m: usize, seed: u64) -> SamplePool {
        let data = EmpiricalDistribution::from_scalars(centers).unwrap();
        let cost = CostSpec::quadratic(eps).unwrap();
        SamplePool::draw(&data, &cost, m, SeedSpec::new(seed)).unwrap()
    }

    #[test]
    fn constant_loss_gives_uniform_weights() {
        let pool = pool_1d(&[0.0, 2.0], 0.5, 50, 1);
        let loss = ConstantLoss::new(3.0);
        let s = TiltedSamplerState::new(0.2, &[], &pool, &loss).unwrap();
        for i in 0..2 {
            assert!(s.weights(i).iter().all(|w| (w - 0.02).abs() < 1e-15));
            assert!((s.ess(i) - 50.0).abs() < 1e-9);
        }
        assert!(!s.degenerate());
        let moments = PoolMoments {
            pool: &pool,
            loss: &loss,
            theta: &[],
            rho_bar: 0.4,
        };
        assert!((check_first_order(&moments, 0.7).unwrap() - 0.7 * 0.4).abs() < 1e-12);
        assert!(kl_budget(&moments, 0.7).unwrap().abs() < 1e-12);
    }

    #[test]
    fn linear_tilt_shifts_mean_by_inverse_lambda() {
        let eps = 0.5;
        let lambda = 2.0;
        let pool = pool_1d(&[0.0], eps, 200_000, 3);
        let loss = FixedLinearLoss { a: vec![1.0] };
        let s = TiltedSamplerState::new(lambda, &[], &pool, &loss).unwrap();
        let n = 100_000;
        let draw = worstcase_sample(&s, n, SeedSpec::new(5)).unwrap();
        let mean = draw.points.mean()[0];
        let tol = 4.0 * eps.sqrt() / (n as f64).sqrt();
        assert!((mean - 1.0 / lambda).abs() < tol, "{mean}");
        assert!(!draw.ess_warning);
    }

    #[test]
    fn huge_lambda_recovers_the_kernel_mixture() {
        let pool = pool_1d(&[0.0, 1.0], 1.0, 100, 2);
        let loss = FixedLinearLoss { a: vec![1.0] };
        let s = TiltedSamplerState::new(1e12, &[], &pool, &loss).unwrap();
        assert!(s.weights(1).iter().all(|w| (w - 0.01).abs() < 1e-9));
    }

    #[test]
    fn degenerate_weights_trip_the_guard() {
        let pool = pool_1d(&[0.0], 1.0, 1000, 2);
        let loss = FixedLinearLoss { a: vec![1.0] };
        let s = TiltedSamplerState::new(1e-3, &[], &pool, &loss).unwrap();
        assert!(s.degenerate());
        assert!(worstcase_sample(&s, 10, SeedSpec::new(0)).unwrap().ess_warning);
        assert!(TiltedSamplerState::new(0.0, &[], &pool, &loss).is_err());
    }

    #[test]
    fn analytic_first_order_and_budget() {
        let data = EmpiricalDistribution::from_rows(&[[0.0, 1.0], [2.0, -1.0]]).unwrap();
        let cost = CostSpec::quadratic(0.3).unwrap();
        let d = LinearGaussianDual::new(&[1.0, 2.0], &data, &cost, 0.05).unwrap();
        let star = d.optimal_lambda();
        assert!(check_first_order(&d, star).unwrap() < 1e-12);
        assert!(check_first_order(&d, 2.0 * star).unwrap() >= 0.1 * 0.05);
        assert!((kl_budget(&d, star).unwrap() - 0.05).abs() < 1e-12);
        assert!(kl_budget(&d, 10.0 * star).unwrap() < 0.05);
    }

    #[test]
    fn lambda_zero_examples() {
        let uniform = [0.5, 0.5];
        let d = lambda_zero_diagnostic(&[0.0, 1.0], &uniform, 0.1, 1.0).unwrap();
        assert!(!d.lambda_zero);
        assert!((d.adjusted_radius - (0.1 + 0.5f64.ln())).abs() < 1e-15);
        let d = lambda_zero_diagnostic(&[0.0, 1.0], &uniform, 1.0, 1.0).unwrap();
        assert!(d.lambda_zero);
        assert_eq!(d.max_f, 1.0);
        let d = lambda_zero_diagnostic(&[2.0; 3], &[0.2, 0.3, 0.5], 0.0, 1.0).unwrap();
        assert!(d.lambda_zero);
        assert!(lambda_zero_diagnostic(&[], &[], 0.0, 1.0).is_err());
    }

    #[test]
    fn sinkhorn_single_atom() {
        let (v, g) = sinkhorn_distance_discrete(&[1.0], &[1.0], &[0.0], 1.0, &[1.0], 1e-12, 10).unwrap();
        assert!(v.abs() < 1e-15);
        assert!((g.gamma[0] - 1.0).abs() < 1e-15);
    }

    fn two_by_two_grid(eps: f64) -> (f64, f64) {
        // couplings of (½,½),(½,½) are [[t, ½−t],[½−t, t]]
        let steps = 200;
        let mut best = (f64::INFINITY, 0.0);
        for k in 1..steps {
            let t = 0.5 * k as f64 / steps as f64;
            let g = [t, 0.5 - t, 0.5 - t, t];
            let c = [0.0, 1.0, 1.0, 0.0];
            let v: f64 = g.iter().zip(&c).map(|(g, c)| g * c + eps * g * (g / 0.25).ln()).sum();
            if v < best.0 {
                best = (v, t);
            }
        }
        best
    }

    #[test]
    fn sinkhorn_two_by_two_matches_grid() {
        let (v, g) = sinkhorn_distance_discrete(
            &[0.5, 0.5],
            &[0.5, 0.5],
            &[0.0, 1.0, 1.0, 0.0],
            1.0,
            &[0.5, 0.5],
            1e-12,
            1000,
        )
        .unwrap();
        let (gv, _) = two_by_two_grid(1.0);
        assert!((v - gv).abs() < 1e-3, "{v} vs {gv}");
        assert!(g.marginal_violation() < 1e-10);
    }

    #[test]
    fn large_epsilon_approaches_independence() {
        let p = [0.3, 0.7];
        let q = [0.6, 0.4];
        let (_, g) = sinkhorn_distance_discrete(&p, &q, &[0.0, 1.0, 1.0, 0.0], 1e4, &[0.5, 0.5], 1e-12, 1000).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((g.gamma[i * 2 + j] - p[i] * q[j]).abs() < 1e-3);
            }
        }
    }

    #[test]
    fn sinkhorn_rejects_bad_input() {
        assert!(sinkhorn_distance_discrete(&[0.4], &[1.0], &[0.0], 1.0, &[1.0], 1e-9, 10).is_err());
        assert!(sinkhorn_distance_discrete(&[1.0], &[1.0], &[0.0], 0.0, &[1.0], 1e-9, 10).is_err());
        let r = sinkhorn_distance_discrete(
            &[0.5, 0.5],
            &[0.5, 0.5],
            &[0.0, 1.0, 1.0, 0.0],
            1.0,
            &[1.0, 1.0],
            1e-9,
            0,
        );
        assert!(matches!(r, Err(Error::NotConverged { iterations: 0, .. })));
    }

    #[test]
    fn zero_mass_atoms_are_padded() {
        let (v, g) = sinkhorn_distance_discrete(
            &[1.0, 0.0],
            &[0.5, 0.5],
            &[0.0, 1.0, 1.0, 0.0],
            1.0,
            &[0.5, 0.5],
            1e-12,
            100,
        )
        .unwrap();
        assert!(v.is_finite());
        assert_eq!(g.gamma[2], 0.0);
        assert_eq!(g.gamma[3], 0.0);
    }
}
