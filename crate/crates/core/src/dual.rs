//! The Sinkhorn dual objective and its relatives.
//!
//! For an empirical nominal `P̂ = (1/n) Σ δ_{x̂ᵢ}` the worst-case expected loss
//! over the Sinkhorn ball equals
//!
//! ```text
//! F(λ, θ) = λρ̄ + (λε/n) Σᵢ log E_{Q_{x̂ᵢ,ε}}[exp(f_θ(z)/(λε))]
//! ```
//!
//! minimized over `λ > 0`. [`mc_dual_value`] replaces each kernel expectation
//! by the average over a frozen [`SamplePool`]; every log-mean-exp is shifted
//! by its per-center maximum so that `exp` never overflows, whatever `λε`.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::cost::{CostKind, CostSpec};
use crate::data::EmpiricalDistribution;
use crate::error::{Error, Result};
use crate::kernel::KernelSampler;
use crate::loss::{FeasibleSet, Loss};
use crate::rng::SeedSpec;

/// Frozen kernel draws `ẑᵢⱼ ~ Q_{x̂ᵢ,ε}`, `i < n`, `j < m`.
///
/// Draw `(i, j)` comes from the stream `seed.with_i(i).with_j(j)`, so a pool
/// of size `m` is a prefix of any larger pool built from the same seed.
#[derive(Debug, Clone)]
pub struct SamplePool {
    centers: EmpiricalDistribution,
    cost: CostSpec,
    seed: Option<SeedSpec>,
    m: usize,
    draws: Vec<f64>,
}

impl SamplePool {
    pub fn draw(centers: &EmpiricalDistribution, cost: &CostSpec, m: usize, seed: SeedSpec) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidParameter { name: "m", value: 0.0 });
        }
        let d = centers.dim();
        let mut draws = vec![0.0; centers.len() * m * d];
        for (i, x) in centers.iter().enumerate() {
            let sampler = KernelSampler::new(cost, x)?;
            let block = &mut draws[i * m * d..(i + 1) * m * d];
            for (j, row) in block.chunks_exact_mut(d).enumerate() {
                let mut rng = seed.with_i(i as u64).with_j(j as u64).rng();
                sampler.draw_into(&mut rng, row);
            }
        }
        Ok(Self {
            centers: centers.clone(),
            cost: cost.clone(),
            seed: Some(seed),
            m,
            draws,
        })
    }

    /// Pool from explicit draws, flat `n × m × d`.
    pub fn from_draws(centers: &EmpiricalDistribution, cost: &CostSpec, m: usize, draws: Vec<f64>) -> Result<Self> {
        let expected = centers.len() * m * centers.dim();
        if m == 0 || draws.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: draws.len(),
            });
        }
        Ok(Self {
            centers: centers.clone(),
            cost: cost.clone(),
            seed: None,
            m,
            draws,
        })
    }

    pub fn centers(&self) -> &EmpiricalDistribution {
        &self.centers
    }

    pub fn cost(&self) -> &CostSpec {
        &self.cost
    }

    pub fn epsilon(&self) -> f64 {
        self.cost.epsilon()
    }

    pub fn seed(&self) -> Option<SeedSpec> {
        self.seed
    }

    pub fn n(&self) -> usize {
        self.centers.len()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.centers.dim()
    }

    pub fn get(&self, i: usize, j: usize) -> &[f64] {
        let d = self.dim();
        let at = (i * self.m + j) * d;
        &self.draws[at..at + d]
    }

    pub fn center_draws(&self, i: usize) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        let d = self.dim();
        self.draws[i * self.m * d..(i + 1) * self.m * d].chunks_exact(d)
    }

    pub fn all_draws(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.draws.chunks_exact(self.dim())
    }

    /// KDE-SAA value `(1/(nm)) Σᵢⱼ f_θ(ẑᵢⱼ)`: the dual at `ρ̄ = 0`, `λ → ∞`.
    pub fn mean_loss<L: Loss + ?Sized>(&self, loss: &L, theta: &[f64]) -> f64 {
        let total: f64 = self.all_draws().map(|z| loss.value(theta, z)).sum();
        total / (self.n() * self.m) as f64
    }
}

/// Exponential tilt of one center's loss values at temperature `t = λε`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CenterTilt {
    /// `log((1/m) Σⱼ exp(vⱼ/t))`.
    pub log_mean_exp: f64,
    /// `Σⱼ wⱼ vⱼ` with `wⱼ ∝ exp(vⱼ/t)`.
    pub tilted_mean: f64,
    /// Largest value, used as the shift.
    pub max: f64,
    /// `Σⱼ exp((vⱼ − max)/t)`.
    pub shifted_sum: f64,
}

/// Stabilized log-mean-exp and tilted mean of `values / temperature`.
pub fn tilt(values: &[f64], temperature: f64) -> CenterTilt {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    let mut weighted = 0.0;
    for &v in values {
        let w = ((v - max) / temperature).exp();
        sum += w;
        weighted += w * (v - max);
    }
    CenterTilt {
        log_mean_exp: max / temperature + (sum / values.len() as f64).ln(),
        tilted_mean: max + weighted / sum,
        max,
        shifted_sum: sum,
    }
}

/// Normalized tilt weights `exp((vⱼ − max)/t) / Σ`.
pub fn tilt_weights(values: &[f64], temperature: f64) -> Vec<f64> {
    let t = tilt(values, temperature);
    values
        .iter()
        .map(|v| ((v - t.max) / temperature).exp() / t.shifted_sum)
        .collect()
}

/// Value and derivatives of a dual objective at one `(λ, θ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualEvaluation {
    pub value: f64,
    pub grad_theta: Vec<f64>,
    pub grad_lambda: f64,
    /// `log Ê_{Qᵢ}[exp(f/(λε))]` per center; empty for objectives without centers.
    pub per_center_logmeanexp: Vec<f64>,
}

/// Per-center moments of the tilted kernel laws.
///
/// For center `i` and multiplier `λ`, `log_mgf` is
/// `log E_{Qᵢ}[exp(f/(λε))]` and `tilted_mean` is `E_{γᵢ}[f]` under
/// `dγᵢ ∝ exp(f/(λε)) dQᵢ`. The dual value, its `λ`-derivative, the first-order
/// residual and the transport budget are all functions of these two numbers.
pub trait TiltedMoments {
    fn centers(&self) -> usize;
    fn epsilon(&self) -> f64;
    fn rho_bar(&self) -> f64;
    /// `(log_mgf, tilted_mean)` of center `i` at `λ`.
    fn center_moments(&self, i: usize, lambda: f64) -> (f64, f64);

    fn mean_moments(&self, lambda: f64) -> (f64, f64) {
        let n = self.centers();
        let (mut a, mut b) = (0.0, 0.0);
        for i in 0..n {
            let (l, t) = self.center_moments(i, lambda);
            a += l;
            b += t;
        }
        (a / n as f64, b / n as f64)
    }

    fn dual_value(&self, lambda: f64) -> f64 {
        let (l, _) = self.mean_moments(lambda);
        lambda * self.rho_bar() + lambda * self.epsilon() * l
    }

    fn dual_grad_lambda(&self, lambda: f64) -> f64 {
        let (l, t) = self.mean_moments(lambda);
        self.rho_bar() + self.epsilon() * l - t / lambda
    }
}

/// Monte Carlo moments of one pool at a fixed decision.
pub struct PoolMoments<'a, L: ?Sized> {
    pub pool: &'a SamplePool,
    pub loss: &'a L,
    pub theta: &'a [f64],
    pub rho_bar: f64,
}

impl<L: Loss + ?Sized> TiltedMoments for PoolMoments<'_, L> {
    fn centers(&self) -> usize {
        self.pool.n()
    }
    fn epsilon(&self) -> f64 {
        self.pool.epsilon()
    }
    fn rho_bar(&self) -> f64 {
        self.rho_bar
    }
    fn center_moments(&self, i: usize, lambda: f64) -> (f64, f64) {
        let values: Vec<f64> = self
            .pool
            .center_draws(i)
            .map(|z| self.loss.value(self.theta, z))
            .collect();
        let t = tilt(&values, lambda * self.pool.epsilon());
        (t.log_mean_exp, t.tilted_mean)
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::LambdaOutOfDomain(lambda))
    }
}

/// Monte Carlo dual `F̂⁽ᵐ⁾(λ, θ)` with gradients in `θ` and `λ`.
pub fn mc_dual_value<L: Loss + ?Sized>(
    lambda: f64,
    theta: &[f64],
    pool: &SamplePool,
    rho_bar: f64,
    loss: &L,
) -> Result<DualEvaluation> {
    check_lambda(lambda)?;
    let n = pool.n();
    let m = pool.m();
    let eps = pool.epsilon();
    let temp = lambda * eps;
    let k = theta.len();

    let mut values = vec![0.0; m];
    let mut sub = vec![0.0; k];
    let mut grad_theta = vec![0.0; k];
    let mut per_center = Vec::with_capacity(n);
    let (mut sum_lme, mut sum_tilted) = (0.0, 0.0);

    for i in 0..n {
        for (v, z) in values.iter_mut().zip(pool.center_draws(i)) {
            *v = loss.value(theta, z);
        }
        let t = tilt(&values, temp);
        if k > 0 {
            for (z, v) in pool.center_draws(i).zip(&values) {
                let w = ((v - t.max) / temp).exp() / t.shifted_sum;
                if w == 0.0 {
                    continue;
                }
                loss.theta_subgrad(theta, z, &mut sub);
                for (g, s) in grad_theta.iter_mut().zip(&sub) {
                    *g += w * s;
                }
            }
        }
        sum_lme += t.log_mean_exp;
        sum_tilted += t.tilted_mean;
        per_center.push(t.log_mean_exp);
    }

    let inv_n = 1.0 / n as f64;
    grad_theta.iter_mut().for_each(|g| *g *= inv_n);
    let value = lambda * rho_bar + temp * sum_lme * inv_n;
    if !value.is_finite() {
        return Err(Error::NonFinite(value));
    }
    Ok(DualEvaluation {
        value,
        grad_theta,
        grad_lambda: rho_bar + eps * sum_lme * inv_n - sum_tilted * inv_n / lambda,
        per_center_logmeanexp: per_center,
    })
}

/// Closed-form dual of a linear loss `f(z) = aᵀz` under a Gaussian kernel.
///
/// With `Q_{x,ε} = N(x, εΩ⁻¹)` the log moment generating function is explicit
/// and the dual becomes `λρ̄ + aᵀx̄ + aᵀΩ⁻¹a/(2λ)`.
#[derive(Debug, Clone)]
pub struct LinearGaussianDual {
    /// `aᵀx̂ᵢ` per center.
    projections: Vec<f64>,
    /// `aᵀΩ⁻¹a`.
    inv_quad: f64,
    epsilon: f64,
    rho_bar: f64,
}

impl LinearGaussianDual {
    pub fn new(a: &[f64], data: &EmpiricalDistribution, cost: &CostSpec, rho_bar: f64) -> Result<Self> {
        if a.len() != data.dim() {
            return Err(Error::DimensionMismatch {
                expected: data.dim(),
                got: a.len(),
            });
        }
        let inv_quad = match &cost.kind {
            CostKind::Quadratic => a.iter().map(|v| v * v).sum(),
            CostKind::Mahalanobis(m) => {
                cost.check_dim(a.len())?;
                m.inverse_quad_form(a)
            }
            CostKind::FeatureLabel { .. } => return Err(Error::UnsupportedSampling("feature-label")),
        };
        let projections = data.iter().map(|x| a.iter().zip(x).map(|(a, x)| a * x).sum()).collect();
        Ok(Self {
            projections,
            inv_quad,
            epsilon: cost.epsilon(),
            rho_bar,
        })
    }

    /// `‖a‖²_{Ω⁻¹}`.
    pub fn inv_quad(&self) -> f64 {
        self.inv_quad
    }

    pub fn mean_projection(&self) -> f64 {
        self.projections.iter().sum::<f64>() / self.projections.len() as f64
    }

    /// Closed-form minimizer `‖a‖_{Ω⁻¹}/√(2ρ̄)`.
    pub fn optimal_lambda(&self) -> f64 {
        self.inv_quad.sqrt() / (2.0 * self.rho_bar).sqrt()
    }

    /// Closed-form optimal value `aᵀx̄ + √(2ρ̄)·‖a‖_{Ω⁻¹}`.
    pub fn optimal_value(&self) -> f64 {
        self.mean_projection() + (2.0 * self.rho_bar).sqrt() * self.inv_quad.sqrt()
    }

    pub fn value(&self, lambda: f64) -> f64 {
        lambda * self.rho_bar + self.mean_projection() + self.inv_quad / (2.0 * lambda)
    }
}

impl TiltedMoments for LinearGaussianDual {
    fn centers(&self) -> usize {
        self.projections.len()
    }
    fn epsilon(&self) -> f64 {
        self.epsilon
    }
    fn rho_bar(&self) -> f64 {
        self.rho_bar
    }
    fn center_moments(&self, i: usize, lambda: f64) -> (f64, f64) {
        let ax = self.projections[i];
        let t = lambda * self.epsilon;
        (ax / t + self.inv_quad / (2.0 * lambda * t), ax + self.inv_quad / lambda)
    }
}

/// Closed-form dual value for `f(z) = aᵀz` with a quadratic or Mahalanobis cost.
pub fn analytic_dual_value(
    lambda: f64,
    a: &[f64],
    data: &EmpiricalDistribution,
    cost: &CostSpec,
    rho_bar: f64,
) -> Result<f64> {
    check_lambda(lambda)?;
    Ok(LinearGaussianDual::new(a, data, cost, rho_bar)?.value(lambda))
}

/// KL-divergence DRO dual `λη + λ log((1/n) Σᵢ exp(f_θ(x̂ᵢ)/λ))` with gradients.
pub fn kl_dual_evaluation<L: Loss + ?Sized>(
    lambda: f64,
    theta: &[f64],
    data: &EmpiricalDistribution,
    eta: f64,
    loss: &L,
) -> Result<DualEvaluation> {
    check_lambda(lambda)?;
    let values: Vec<f64> = data.iter().map(|x| loss.value(theta, x)).collect();
    let t = tilt(&values, lambda);
    let k = theta.len();
    let mut grad_theta = vec![0.0; k];
    if k > 0 {
        let mut sub = vec![0.0; k];
        for (x, v) in data.iter().zip(&values) {
            let w = ((v - t.max) / lambda).exp() / t.shifted_sum;
            loss.theta_subgrad(theta, x, &mut sub);
            for (g, s) in grad_theta.iter_mut().zip(&sub) {
                *g += w * s;
            }
        }
    }
    let value = lambda * eta + lambda * t.log_mean_exp;
    if !value.is_finite() {
        return Err(Error::NonFinite(value));
    }
    Ok(DualEvaluation {
        value,
        grad_theta,
        grad_lambda: eta + t.log_mean_exp - t.tilted_mean / lambda,
        per_center_logmeanexp: Vec::new(),
    })
}

pub fn kl_dual_value<L: Loss + ?Sized>(
    lambda: f64,
    theta: &[f64],
    data: &EmpiricalDistribution,
    eta: f64,
    loss: &L,
) -> Result<f64> {
    kl_dual_evaluation(lambda, theta, data, eta, loss).map(|e| e.value)
}

/// Sinkhorn dual next to the pooled-KDE KL dual it is bounded by.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JensenPair {
    pub sinkhorn: f64,
    pub kl_kde: f64,
}

/// Evaluates the Sinkhorn dual and `λρ̄ + λε log((1/(nm)) Σᵢⱼ exp(f/(λε)))`.
///
/// By Jensen's inequality the first never exceeds the second.
pub fn jensen_kl_upper_bound<L: Loss + ?Sized>(
    lambda: f64,
    theta: &[f64],
    pool: &SamplePool,
    rho_bar: f64,
    loss: &L,
) -> Result<JensenPair> {
    let sinkhorn = mc_dual_value(lambda, theta, pool, rho_bar, loss)?.value;
    let values: Vec<f64> = pool.all_draws().map(|z| loss.value(theta, z)).collect();
    let temp = lambda * pool.epsilon();
    let kl_kde = lambda * rho_bar + temp * tilt(&values, temp).log_mean_exp;
    Ok(JensenPair { sinkhorn, kl_kde })
}

/// Sinkhorn duals along a sequence of `ε` next to the Wasserstein dual.
#[derive(Debug, Clone, PartialEq)]
pub struct WassersteinLimit {
    /// `λρ + (1/n) Σᵢ sup_z {f(z) − λ c(x̂ᵢ, z)}`.
    pub wasserstein: f64,
    /// Sinkhorn dual at each `ε` of the input sequence.
    pub sinkhorn: Vec<f64>,
}

const SUP_GRID: usize = 2001;
const INTEGRAL_GRID: usize = 40_001;

/// One-dimensional comparison of the Sinkhorn dual with its `ε ↓ 0` limit.
///
/// The inner supremum is taken on a 2001-point grid over the data range
/// widened by five standard deviations, refined once around the best point.
/// Kernel expectations are computed by trapezoidal quadrature, so no Monte
/// Carlo error enters. The cost must be quadratic (or Mahalanobis in 1-D).
pub fn wasserstein_limit_value<L: Loss + ?Sized>(
    lambda: f64,
    rho: f64,
    theta: &[f64],
    data: &EmpiricalDistribution,
    loss: &L,
    cost: &CostSpec,
    epsilons: &[f64],
) -> Result<WassersteinLimit> {
    check_lambda(lambda)?;
    if data.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: data.dim(),
        });
    }
    let xs = data.as_flat();
    let (lo, hi) = span_with_margin(xs, 5.0);

    let mut sup_total = 0.0;
    for &x in xs {
        let g = |z: f64| loss.value(theta, &[z]) - lambda * cost.eval(&[x], &[z]);
        let (zbest, vbest) = grid_argmax(&g, lo, hi, SUP_GRID);
        let h = (hi - lo) / (SUP_GRID - 1) as f64;
        if zbest <= lo + 0.5 * h || zbest >= hi - 0.5 * h {
            return Err(Error::GrowthCondition(zbest));
        }
        let (_, vfine) = crate::optimizer::golden_section(|z| -g(z), zbest - h, zbest + h, 1e-12, 200);
        sup_total += vbest.max(-vfine);
    }
    let wasserstein = lambda * rho + sup_total / xs.len() as f64;

    let mut sinkhorn = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let c = cost.with_epsilon(eps)?;
        let rho_bar = crate::cost::compute_rho_bar(rho, &c, 1)?;
        let log_norm = c.log_normalizer(1)?;
        let spread = 12.0 * eps.sqrt();
        let (ilo, ihi) = (lo - spread, hi + spread);
        let mut acc = 0.0;
        for &x in xs {
            // log E_Q[exp(f/(λε))] = log ∫ exp((f/λ − c)/ε) dz − log ∫ exp(−c/ε) dz
            let log_int = log_trapezoid(
                |z| (loss.value(theta, &[z]) / lambda - c.eval(&[x], &[z])) / eps,
                ilo,
                ihi,
                INTEGRAL_GRID,
            );
            acc += log_int - log_norm;
        }
        sinkhorn.push(lambda * rho_bar + lambda * eps * acc / xs.len() as f64);
    }
    Ok(WassersteinLimit { wasserstein, sinkhorn })
}

fn span_with_margin(xs: &[f64], k: f64) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
    let min = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (min - k * sd, max + k * sd)
}

fn grid_argmax(g: &impl Fn(f64) -> f64, lo: f64, hi: f64, points: usize) -> (f64, f64) {
    let h = (hi - lo) / (points - 1) as f64;
    let mut best = (lo, f64::NEG_INFINITY);
    for k in 0..points {
        let z = lo + h * k as f64;
        let v = g(z);
        if v > best.1 {
            best = (z, v);
        }
    }
    best
}

/// `log ∫_lo^hi exp(φ(z)) dz` by the trapezoid rule in log space.
fn log_trapezoid(phi: impl Fn(f64) -> f64, lo: f64, hi: f64, points: usize) -> f64 {
    let h = (hi - lo) / (points - 1) as f64;
    let vals: Vec<f64> = (0..points).map(|k| phi(lo + h * k as f64)).collect();
    let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for (k, v) in vals.iter().enumerate() {
        let w = if k == 0 || k == points - 1 { 0.5 } else { 1.0 };
        s += w * (v - max).exp();
    }
    max + (s * h).ln()
}

/// A dual objective `(λ, θ) ↦ F(λ, θ)` jointly convex, minimized over `λ > 0, θ ∈ Θ`.
pub trait DualObjective {
    fn theta_dim(&self) -> usize;
    fn feasible_set(&self) -> FeasibleSet;
    fn evaluate(&self, lambda: f64, theta: &[f64]) -> Result<DualEvaluation>;
}

/// Monte Carlo Sinkhorn dual over a frozen pool.
pub struct SinkhornDual<'a, L: ?Sized> {
    pub pool: &'a SamplePool,
    pub rho_bar: f64,
    pub loss: &'a L,
}

impl<'a, L: Loss + ?Sized> SinkhornDual<'a, L> {
    pub fn new(pool: &'a SamplePool, rho_bar: f64, loss: &'a L) -> Self {
        Self { pool, rho_bar, loss }
    }
}

impl<L: Loss + ?Sized> DualObjective for SinkhornDual<'_, L> {
    fn theta_dim(&self) -> usize {
        self.loss.theta_dim()
    }
    fn feasible_set(&self) -> FeasibleSet {
        self.loss.feasible_set()
    }
    fn evaluate(&self, lambda: f64, theta: &[f64]) -> Result<DualEvaluation> {
        mc_dual_value(lambda, theta, self.pool, self.rho_bar, self.loss)
    }
}

/// KL-divergence DRO dual over the empirical distribution.
pub struct KlDual<'a, L: ?Sized> {
    pub data: &'a EmpiricalDistribution,
    pub eta: f64,
    pub loss: &'a L,
}

impl<L: Loss + ?Sized> DualObjective for KlDual<'_, L> {
    fn theta_dim(&self) -> usize {
        self.loss.theta_dim()
    }
    fn feasible_set(&self) -> FeasibleSet {
        self.loss.feasible_set()
    }
    fn evaluate(&self, lambda: f64, theta: &[f64]) -> Result<DualEvaluation> {
        kl_dual_evaluation(lambda, theta, self.data, self.eta, self.loss)
    }
}

impl DualObjective for LinearGaussianDual {
    fn theta_dim(&self) -> usize {
        0
    }
    fn feasible_set(&self) -> FeasibleSet {
        FeasibleSet::Unconstrained
    }
    fn evaluate(&self, lambda: f64, _theta: &[f64]) -> Result<DualEvaluation> {
        check_lambda(lambda)?;
        Ok(DualEvaluation {
            value: self.value(lambda),
            grad_theta: Vec::new(),
            grad_lambda: self.rho_bar - self.inv_quad / (2.0 * lambda * lambda),
            per_center_logmeanexp: (0..self.centers()).map(|i| self.center_moments(i, lambda).0).collect(),
        })
    }
}

/// A `θ`-free objective given by a closure returning `(value, derivative)`.
pub struct ScalarDual<F>(pub F);

impl<F: Fn(f64) -> (f64, f64)> DualObjective for ScalarDual<F> {
    fn theta_dim(&self) -> usize {
        0
    }
    fn feasible_set(&self) -> FeasibleSet {
        FeasibleSet::Unconstrained
    }
    fn evaluate(&self, lambda: f64, _theta: &[f64]) -> Result<DualEvaluation> {
        check_lambda(lambda)?;
        let (value, grad_lambda) = (self.0)(lambda);
        Ok(DualEvaluation {
            value,
            grad_theta: Vec::new(),
            grad_lambda,
            per_center_logmeanexp: Vec::new(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::{ConstantLoss, FixedLinearLoss, SquaredNormLoss};

    fn pool_1d(centers: &[f64], eps: f64, m: usize, seed: u64) -> SamplePool {
        let data = EmpiricalDistribution::from_scalars(centers).unwrap();
        let cost = CostSpec::quadratic(eps).unwrap();
        SamplePool::draw(&data, &cost, m, SeedSpec::new(seed)).unwrap()
    }

    #[test]
    fn constant_loss_value_and_lambda_gradient() {
        let pool = pool_1d(&[0.0, 1.0, 4.0], 0.5, 7, 1);
        let loss = ConstantLoss::new(2.5);
        for lambda in [1e-3, 0.7, 40.0] {
            let e = mc_dual_value(lambda, &[], &pool, 0.3, &loss).unwrap();
            assert!((e.value - (lambda * 0.3 + 2.5)).abs() < 1e-12);
            assert!((e.grad_lambda - 0.3).abs() < 1e-9);
        }
    }

    #[test]
    fn single_atom_pool() {
        let data = EmpiricalDistribution::from_scalars(&[0.0]).unwrap();
        let cost = CostSpec::quadratic(1.0).unwrap();
        let pool = SamplePool::from_draws(&data, &cost, 1, vec![1.7]).unwrap();
        let e = mc_dual_value(2.0, &[], &pool, 0.4, &SquaredNormLoss).unwrap();
        assert!((e.value - (0.8 + 1.7 * 1.7)).abs() < 1e-12);
    }

    #[test]
    fn value_matches_per_center_decomposition() {
        let pool = pool_1d(&[0.0, 2.0], 0.3, 50, 3);
        let e = mc_dual_value(0.8, &[], &pool, 0.2, &SquaredNormLoss).unwrap();
        let recon = 0.8 * 0.2 + 0.8 * 0.3 / 2.0 * e.per_center_logmeanexp.iter().sum::<f64>();
        assert!((e.value - recon).abs() < 1e-12);
    }

    #[test]
    fn stabilization_survives_large_offsets() {
        let pool = pool_1d(&[0.0, 1.0], 0.1, 30, 5);
        let a = mc_dual_value(1e-3, &[], &pool, 0.2, &FixedLinearLoss { a: vec![1.0] }).unwrap();
        assert!(a.value.is_finite());
        struct Shifted;
        impl Loss for Shifted {
            fn name(&self) -> &str {
                "shifted"
            }
            fn theta_dim(&self) -> usize {
                0
            }
            fn feasible_set(&self) -> FeasibleSet {
                FeasibleSet::Unconstrained
            }
            fn value(&self, _: &[f64], z: &[f64]) -> f64 {
                z[0] + 1e3
            }
            fn theta_subgrad(&self, _: &[f64], _: &[f64], _: &mut [f64]) {}
        }
        let b = mc_dual_value(1e-3, &[], &pool, 0.2, &Shifted).unwrap();
        assert!(((b.value - 1e3) - a.value).abs() <= 1e-10 * (1.0 + a.value.abs()));
        assert!((b.grad_lambda - a.grad_lambda).abs() < 1e-6);
    }

    #[test]
    fn rejects_nonpositive_lambda() {
        let pool = pool_1d(&[0.0], 1.0, 3, 0);
        assert_eq!(
            mc_dual_value(0.0, &[], &pool, 0.1, &SquaredNormLoss),
            Err(Error::LambdaOutOfDomain(0.0))
        );
        assert!(mc_dual_value(-1.0, &[], &pool, 0.1, &SquaredNormLoss).is_err());
    }

    #[test]
    fn analytic_examples() {
        let data = EmpiricalDistribution::from_scalars(&[0.0]).unwrap();
        let cost = CostSpec::quadratic(1.0).unwrap();
        let v = analytic_dual_value(1.0, &[1.0], &data, &cost, 0.5).unwrap();
        assert!((v - 1.0).abs() < 1e-15);

        let data = EmpiricalDistribution::from_scalars(&[1.0, 3.0]).unwrap();
        let v = analytic_dual_value(1e8, &[2.0], &data, &cost, 0.0).unwrap();
        assert!((v - 4.0).abs() < 1e-7);
    }

    #[test]
    fn linear_mc_matches_closed_form() {
        let pool = pool_1d(&[0.0, 1.0, -0.5], 1.0, 100_000, 17);
        let loss = FixedLinearLoss { a: vec![1.0] };
        let lambda = 1.0;
        let mc = mc_dual_value(lambda, &[], &pool, 0.5, &loss).unwrap().value;
        let exact = analytic_dual_value(lambda, &[1.0], pool.centers(), pool.cost(), 0.5).unwrap();
        assert!((mc - exact).abs() < 0.02 * exact.abs(), "{mc} vs {exact}");
    }

    #[test]
    fn kl_examples() {
        let data = EmpiricalDistribution::from_scalars(&[0.0, 1.0]).unwrap();
        let v = kl_dual_value(1.0, &[], &data, 0.1, &FixedLinearLoss { a: vec![1.0] }).unwrap();
        let expected = 0.1 + ((1.0 + core::f64::consts::E) / 2.0).ln();
        assert!((v - expected).abs() < 1e-12);
        assert!((v - 0.720_114_506_958_277_5).abs() < 1e-12);

        let c = kl_dual_value(0.3, &[], &data, 0.2, &ConstantLoss::new(4.0)).unwrap();
        assert!((c - (0.3 * 0.2 + 4.0)).abs() < 1e-12);

        let bounded = kl_dual_value(1e6, &[], &data, 0.0, &FixedLinearLoss { a: vec![1.0] }).unwrap();
        assert!((bounded - 0.5).abs() < 1e-3);
    }

    #[test]
    fn jensen_cases() {
        let pool = pool_1d(&[0.0, 10.0], 1.0, 200, 8);
        let c = jensen_kl_upper_bound(0.7, &[], &pool, 0.1, &ConstantLoss::new(1.5)).unwrap();
        assert!((c.sinkhorn - c.kl_kde).abs() < 1e-12);
        assert!((c.sinkhorn - (0.07 + 1.5)).abs() < 1e-12);

        let q = jensen_kl_upper_bound(0.7, &[], &pool, 0.1, &SquaredNormLoss).unwrap();
        assert!(q.sinkhorn < q.kl_kde - 1.0);

        let single = pool_1d(&[3.0], 1.0, 200, 8);
        let s = jensen_kl_upper_bound(0.7, &[], &single, 0.1, &SquaredNormLoss).unwrap();
        assert!((s.sinkhorn - s.kl_kde).abs() < 1e-9 * s.kl_kde.abs());
    }

    #[test]
    fn wasserstein_limit_of_constant_loss() {
        let data = EmpiricalDistribution::from_scalars(&[0.0, 1.0, 2.5]).unwrap();
        let cost = CostSpec::quadratic(1.0).unwrap();
        let r =
            wasserstein_limit_value(2.0, 0.3, &[], &data, &ConstantLoss::new(1.25), &cost, &[1.0, 0.1, 0.01]).unwrap();
        let target = 2.0 * 0.3 + 1.25;
        assert!((r.wasserstein - target).abs() < 1e-12);
        // the kernel normalizer survives as λ·ε·½·log(2πε), vanishing as ε ↓ 0
        let mut last_gap = f64::INFINITY;
        for (s, eps) in r.sinkhorn.iter().zip([1.0, 0.1, 0.01]) {
            let shift = 2.0 * eps * 0.5 * (2.0 * core::f64::consts::PI * eps).ln();
            assert!((s - target - shift).abs() < 1e-6, "{s}");
            assert!((s - target).abs() < last_gap);
            last_gap = (s - target).abs();
        }
    }

    #[test]
    fn wasserstein_limit_flags_unbounded_sup() {
        let data = EmpiricalDistribution::from_scalars(&[0.0, 1.0]).unwrap();
        let cost = CostSpec::quadratic(1.0).unwrap();
        // cubic growth beats the quadratic transport penalty
        struct Cubic;
        impl Loss for Cubic {
            fn name(&self) -> &str {
                "cubic"
            }
            fn theta_dim(&self) -> usize {
                0
            }
            fn feasible_set(&self) -> FeasibleSet {
                FeasibleSet::Unconstrained
            }
            fn value(&self, _: &[f64], z: &[f64]) -> f64 {
                z[0] * z[0] * z[0]
            }
            fn theta_subgrad(&self, _: &[f64], _: &[f64], _: &mut [f64]) {}
        }
        assert!(matches!(
            wasserstein_limit_value(1.0, 0.1, &[], &data, &Cubic, &cost, &[0.1]),
            Err(Error::GrowthCondition(_))
        ));
    }
}
