//! Newsvendor, mean-CVaR portfolio and semi-supervised classification.
//!
//! Each application provides its loss, a seeded data generator and the
//! problem-specific Wasserstein baseline where one exists.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::data::EmpiricalDistribution;
use crate::error::{Error, Result};
use crate::loss::{FeasibleSet, Loss};
use crate::optimizer::{golden_section, inner_solve, InnerResult, InnerSolverConfig, ThetaObjective};
use crate::rng::SeedSpec;

/// `f_θ(z) = kθ − u·min(θ, z)` over `θ ∈ [0, θ_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewsvendorLoss {
    /// Overage cost.
    pub k: f64,
    /// Underage cost.
    pub u: f64,
    pub theta_max: f64,
}

impl NewsvendorLoss {
    pub fn new(k: f64, u: f64, theta_max: f64) -> Result<Self> {
        if !(k > 0.0) {
            return Err(Error::InvalidParameter { name: "k", value: k });
        }
        if !(u >= k) {
            return Err(Error::InvalidParameter { name: "u", value: u });
        }
        if !(theta_max > 0.0) {
            return Err(Error::InvalidParameter {
                name: "theta_max",
                value: theta_max,
            });
        }
        Ok(Self { k, u, theta_max })
    }

    /// `k = 5`, `u = 7` and `θ_max` three times the largest demand.
    pub fn for_demands(demands: &EmpiricalDistribution) -> Result<Self> {
        let max = demands.as_flat().iter().copied().fold(0.0, f64::max);
        Self::new(5.0, 7.0, 3.0 * max.max(f64::MIN_POSITIVE))
    }

    pub fn eval(&self, theta: f64, z: f64) -> f64 {
        self.k * theta - self.u * theta.min(z)
    }
}

impl Loss for NewsvendorLoss {
    fn name(&self) -> &str {
        "newsvendor"
    }
    fn theta_dim(&self) -> usize {
        1
    }
    fn feasible_set(&self) -> FeasibleSet {
        FeasibleSet::interval(0.0, self.theta_max)
    }
    fn value(&self, theta: &[f64], z: &[f64]) -> f64 {
        self.eval(theta[0], z[0])
    }
    fn theta_subgrad(&self, theta: &[f64], z: &[f64], out: &mut [f64]) {
        out[0] = if theta[0] < z[0] { self.k - self.u } else { self.k };
    }
    fn growth_order(&self) -> Option<u32> {
        Some(1)
    }
}

/// Optimal order and cost under exponential demand with mean `s`:
/// `θ* = s·ln(u/k)` and `J* = s·(k·ln(u/k) − (u − k))`.
pub fn newsvendor_true_optimum(loss: &NewsvendorLoss, s: f64) -> Result<(f64, f64)> {
    if !(s > 0.0) {
        return Err(Error::InvalidParameter { name: "s", value: s });
    }
    let r = (loss.u / loss.k).ln();
    Ok((s * r, s * (loss.k * r - (loss.u - loss.k))))
}

/// Expected cost `E[f_θ(z)]` for exponential demand with mean `s`.
pub fn newsvendor_expected_cost(loss: &NewsvendorLoss, s: f64, theta: f64) -> f64 {
    loss.k * theta - loss.u * s * (1.0 - (-theta / s).exp())
}

/// `n` exponential demands with mean `s` by inverse CDF.
pub fn exp_demand_sample(s: f64, n: usize, seed: SeedSpec) -> Result<EmpiricalDistribution> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::InvalidParameter { name: "s", value: s });
    }
    let mut rng = seed.rng();
    let values: Vec<f64> = (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            -s * (1.0 - u).ln()
        })
        .collect();
    EmpiricalDistribution::from_scalars(&values)
}

/// Variance of the common factor.
pub const FACTOR_VARIANCE: f64 = 0.02;
/// Mean step of the idiosyncratic terms.
pub const IDIO_MEAN_STEP: f64 = 0.03;
/// Variance step of the idiosyncratic terms.
pub const IDIO_VARIANCE_STEP: f64 = 0.025;

/// Mean and covariance (row-major) of the factor model for `D` assets.
pub fn factor_model_moments(d: usize) -> (Vec<f64>, Vec<f64>) {
    let mean = (1..=d).map(|i| IDIO_MEAN_STEP * i as f64).collect();
    let mut cov = vec![FACTOR_VARIANCE; d * d];
    for i in 0..d {
        cov[i * d + i] += IDIO_VARIANCE_STEP * (i + 1) as f64;
    }
    (mean, cov)
}

/// Returns `zᵢ = ψ + εᵢ` with `ψ ~ N(0, 0.02)` and `εᵢ ~ N(0.03i, 0.025i)`,
/// second arguments being variances, for assets `i = 1..D`.
pub fn factor_returns_sample(d: usize, n: usize, seed: SeedSpec) -> Result<EmpiricalDistribution> {
    if d < 1 {
        return Err(Error::InvalidParameter {
            name: "D",
            value: d as f64,
        });
    }
    let factor = Normal::new(0.0, FACTOR_VARIANCE.sqrt()).map_err(|_| Error::NonFinite(FACTOR_VARIANCE))?;
    let idio: Vec<Normal<f64>> = (1..=d)
        .map(|i| Normal::new(IDIO_MEAN_STEP * i as f64, (IDIO_VARIANCE_STEP * i as f64).sqrt()))
        .collect::<core::result::Result<_, _>>()
        .map_err(|_| Error::NonFinite(f64::NAN))?;
    let mut rng = seed.rng();
    let mut flat = Vec::with_capacity(n * d);
    for _ in 0..n {
        let psi = factor.sample(&mut rng);
        flat.extend(idio.iter().map(|e| psi + e.sample(&mut rng)));
    }
    EmpiricalDistribution::from_flat(d, flat)
}

/// `f_{(θ,τ)}(z) = −θᵀz + ϱτ + (ϱ/α)·max(−θᵀz − τ, 0)`, decision `(θ, τ)`.
///
/// Minimizing over `τ` gives mean loss plus `ϱ` times the CVaR at level `α`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PortfolioLoss {
    pub dim: usize,
    pub alpha: f64,
    pub varrho: f64,
}

impl PortfolioLoss {
    pub fn new(dim: usize, alpha: f64, varrho: f64) -> Result<Self> {
        if dim < 1 {
            return Err(Error::InvalidParameter {
                name: "D",
                value: dim as f64,
            });
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidParameter {
                name: "alpha",
                value: alpha,
            });
        }
        if !(varrho >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "varrho",
                value: varrho,
            });
        }
        Ok(Self { dim, alpha, varrho })
    }

    /// `α = 0.2`, `ϱ = 10`.
    pub fn standard(dim: usize) -> Result<Self> {
        Self::new(dim, 0.2, 10.0)
    }

    /// Affine pieces `(a_j, b_j)` with `f = max_j (b_j·τ + a_j·θᵀz)`.
    pub fn pieces(&self) -> [(f64, f64); 2] {
        let r = self.varrho / self.alpha;
        [(-1.0, self.varrho), (-1.0 - r, self.varrho - r)]
    }

    fn split<'t>(&self, theta: &'t [f64]) -> (&'t [f64], f64) {
        (&theta[..self.dim], theta[self.dim])
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(a, b)| a * b).sum()
}

impl Loss for PortfolioLoss {
    fn name(&self) -> &str {
        "portfolio"
    }
    fn theta_dim(&self) -> usize {
        self.dim + 1
    }
    fn feasible_set(&self) -> FeasibleSet {
        FeasibleSet::SimplexTimesReal
    }
    fn value(&self, theta: &[f64], z: &[f64]) -> f64 {
        let (w, tau) = self.split(theta);
        let ret = dot(w, z);
        -ret + self.varrho * tau + self.varrho / self.alpha * (-ret - tau).max(0.0)
    }
    fn theta_subgrad(&self, theta: &[f64], z: &[f64], out: &mut [f64]) {
        let (w, tau) = self.split(theta);
        let active = -dot(w, z) - tau > 0.0;
        let r = if active { self.varrho / self.alpha } else { 0.0 };
        for (o, zi) in out[..self.dim].iter_mut().zip(z) {
            *o = -zi - r * zi;
        }
        out[self.dim] = self.varrho - r;
    }
    fn growth_order(&self) -> Option<u32> {
        Some(1)
    }
}

/// `ℓ(θ; (x, y)) = log(1 + exp(−y·θᵀx))` over a ball; the label is the last coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticLoss {
    /// Feature dimension.
    pub dim: usize,
    pub radius: f64,
}

impl LogisticLoss {
    pub fn new(dim: usize) -> Self {
        Self { dim, radius: 10.0 }
    }

    fn margin(&self, theta: &[f64], z: &[f64]) -> f64 {
        z[self.dim] * dot(theta, &z[..self.dim])
    }
}

/// `log(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

impl Loss for LogisticLoss {
    fn name(&self) -> &str {
        "logistic"
    }
    fn theta_dim(&self) -> usize {
        self.dim
    }
    fn feasible_set(&self) -> FeasibleSet {
        FeasibleSet::Ball { radius: self.radius }
    }
    fn value(&self, theta: &[f64], z: &[f64]) -> f64 {
        softplus(-self.margin(theta, z))
    }
    fn theta_subgrad(&self, theta: &[f64], z: &[f64], out: &mut [f64]) {
        let m = self.margin(theta, z);
        // d/dθ softplus(−m) = −σ(−m)·y·x
        let s = 1.0 / (1.0 + m.exp());
        let y = z[self.dim];
        for (o, x) in out.iter_mut().zip(&z[..self.dim]) {
            *o = -s * y * x;
        }
    }
    fn growth_order(&self) -> Option<u32> {
        Some(1)
    }
}

fn check_label(y: f64) -> Result<()> {
    if y == 1.0 || y == -1.0 {
        Ok(())
    } else {
        Err(Error::InvalidLabel(y))
    }
}

/// Labeled rows plus each unlabeled row twice, once per label.
///
/// `labeled` rows end with a `±1` label; `unlabeled` rows carry features only.
pub fn semisup_dataset_build(
    labeled: &EmpiricalDistribution,
    unlabeled: Option<&EmpiricalDistribution>,
) -> Result<EmpiricalDistribution> {
    let d = labeled.dim();
    for row in labeled.iter() {
        check_label(row[d - 1])?;
    }
    let mut flat = labeled.as_flat().to_vec();
    if let Some(u) = unlabeled {
        if u.dim() + 1 != d {
            return Err(Error::DimensionMismatch {
                expected: d - 1,
                got: u.dim(),
            });
        }
        for y in [1.0, -1.0] {
            for x in u.iter() {
                flat.extend_from_slice(x);
                flat.push(y);
            }
        }
    }
    EmpiricalDistribution::from_flat(d, flat)
}

/// Fraction of rows with `sign(θᵀx) ≠ y`; a zero score counts as an error.
pub fn classification_error(theta: &[f64], data: &EmpiricalDistribution) -> Result<f64> {
    let d = data.dim();
    if theta.len() + 1 != d {
        return Err(Error::DimensionMismatch {
            expected: d - 1,
            got: theta.len(),
        });
    }
    let mut wrong = 0usize;
    for row in data.iter() {
        let y = row[d - 1];
        check_label(y)?;
        if y * dot(theta, &row[..d - 1]) <= 0.0 {
            wrong += 1;
        }
    }
    Ok(wrong as f64 / data.len() as f64)
}

/// Ground cost of the newsvendor Wasserstein baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NewsvendorCost {
    /// `½(z − x)²`.
    Quadratic,
    /// `|z − x|`.
    Absolute,
}

impl NewsvendorCost {
    pub fn eval(self, x: f64, z: f64) -> f64 {
        match self {
            NewsvendorCost::Quadratic => 0.5 * (z - x) * (z - x),
            NewsvendorCost::Absolute => (z - x).abs(),
        }
    }
}

/// `sup_{z ≥ 0} f_θ(z) − λ·c(x, z)`, in closed form.
///
/// The objective is concave piecewise in `z` with a kink at `θ`, so the
/// supremum is attained at a breakpoint or at a stationary point of a piece.
pub fn newsvendor_inner_sup(loss: &NewsvendorLoss, cost: NewsvendorCost, theta: f64, lambda: f64, x: f64) -> f64 {
    let g = |z: f64| loss.eval(theta, z) - lambda * cost.eval(x, z);
    let mut best = g(0.0).max(g(theta)).max(g(x.max(0.0)));
    if cost == NewsvendorCost::Quadratic && lambda > 0.0 {
        // stationary point on [0, θ] where the slope of f is −u
        best = best.max(g((x - loss.u / lambda).clamp(0.0, theta)));
        best = best.max(g(x.max(theta)));
    }
    best
}

/// `min_{λ ≥ 0} λρ + (1/n)Σᵢ sup_z {f_θ(z) − λc(x̂ᵢ, z)}` at a fixed order `θ`.
pub fn wasserstein_newsvendor_value(
    loss: &NewsvendorLoss,
    cost: NewsvendorCost,
    demands: &EmpiricalDistribution,
    rho: f64,
    theta: f64,
) -> (f64, f64) {
    let n = demands.len() as f64;
    let obj = |lambda: f64| {
        lambda * rho
            + demands
                .as_flat()
                .iter()
                .map(|&x| newsvendor_inner_sup(loss, cost, theta, lambda, x))
                .sum::<f64>()
                / n
    };
    let mut hi = 1.0;
    while hi < 1e12 && obj(2.0 * hi) < obj(hi) {
        hi *= 2.0;
    }
    let (lambda, value) = golden_section(obj, 0.0, 2.0 * hi, 1e-10 * (1.0 + hi), 400);
    let at_zero = obj(0.0);
    if at_zero <= value {
        (0.0, at_zero)
    } else {
        (lambda, value)
    }
}

/// Outcome of a newsvendor baseline solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewsvendorSolution {
    pub theta: f64,
    pub lambda: f64,
    pub value: f64,
}

/// Wasserstein DRO newsvendor: golden-section search over `θ ∈ [0, θ_max]`.
pub fn wasserstein_newsvendor_solve(
    loss: &NewsvendorLoss,
    cost: NewsvendorCost,
    demands: &EmpiricalDistribution,
    rho: f64,
) -> Result<NewsvendorSolution> {
    if !(rho >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "rho",
            value: rho,
        });
    }
    if demands.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: demands.dim(),
        });
    }
    let (theta, value) = golden_section(
        |t| wasserstein_newsvendor_value(loss, cost, demands, rho, t).1,
        0.0,
        loss.theta_max,
        1e-9 * loss.theta_max,
        400,
    );
    let (lambda, _) = wasserstein_newsvendor_value(loss, cost, demands, rho, theta);
    Ok(NewsvendorSolution { theta, lambda, value })
}

/// `ρ·max_j|a_j|·‖θ‖₂ + (1/n)Σᵢ f_{(θ,τ)}(ẑᵢ)`.
pub struct WassersteinPortfolio<'a> {
    pub loss: &'a PortfolioLoss,
    pub data: &'a EmpiricalDistribution,
    pub rho: f64,
}

impl WassersteinPortfolio<'_> {
    /// `max_j |a_j|`.
    pub fn lipschitz(&self) -> f64 {
        self.loss.pieces().iter().map(|p| p.0.abs()).fold(0.0, f64::max)
    }
}

impl ThetaObjective for WassersteinPortfolio<'_> {
    fn theta_dim(&self) -> usize {
        self.loss.theta_dim()
    }
    fn feasible_set(&self) -> FeasibleSet {
        self.loss.feasible_set()
    }
    fn eval(&self, theta: &[f64], grad: &mut [f64]) -> Result<f64> {
        let d = self.loss.dim;
        let n = self.data.len() as f64;
        grad.fill(0.0);
        let mut sub = vec![0.0; theta.len()];
        let mut total = 0.0;
        for z in self.data.iter() {
            total += self.loss.value(theta, z);
            self.loss.theta_subgrad(theta, z, &mut sub);
            for (g, s) in grad.iter_mut().zip(&sub) {
                *g += s / n;
            }
        }
        let norm = dot(&theta[..d], &theta[..d]).sqrt();
        let c = self.rho * self.lipschitz();
        if norm > 0.0 {
            for (g, t) in grad[..d].iter_mut().zip(&theta[..d]) {
                *g += c * t / norm;
            }
        }
        Ok(c * norm + total / n)
    }
}

/// Wasserstein DRO mean-CVaR portfolio by projected subgradient descent.
pub fn wasserstein_portfolio_solve(
    loss: &PortfolioLoss,
    data: &EmpiricalDistribution,
    rho: f64,
    cfg: &InnerSolverConfig,
    theta0: &[f64],
) -> Result<InnerResult> {
    if !(rho >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "rho",
            value: rho,
        });
    }
    inner_solve(&WassersteinPortfolio { loss, data, rho }, theta0, cfg)
}

/// Equal weights and `τ = 0`.
pub fn portfolio_start(dim: usize) -> Vec<f64> {
    let mut t = vec![1.0 / dim as f64; dim + 1];
    t[dim] = 0.0;
    t
}
