//! Batch gradient descent with bisection search.
//!
//! The outer loop bisects over the multiplier `λ`; at every trial `λ` the
//! decision `θ` is optimized by projected subgradient descent and the sign of
//! `∂F/∂λ` at the inner solution decides which half of the bracket to keep.
//! The same machinery runs the SAA, KDE-SAA and KL-DRO baselines.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::data::EmpiricalDistribution;
use crate::dual::{DualEvaluation, DualObjective, KlDual, SamplePool, SinkhornDual};
use crate::error::{Error, Result};
use crate::loss::{FeasibleSet, Loss};

/// Smallest multiplier tried before declaring the `λ* ≈ 0` regime.
pub const LAMBDA_FLOOR: f64 = 1e-6;
/// Largest multiplier tried when expanding the bracket upward.
pub const LAMBDA_CEILING: f64 = 1e12;
/// `|∂F/∂λ|` below this counts as an exact zero.
pub const ZERO_GRADIENT: f64 = 1e-10;

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(v: &[f64]) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(Error::Empty("vector to project"));
    }
    let mut out = v.to_vec();
    project_simplex_in_place(&mut out);
    Ok(out)
}

pub(crate) fn project_simplex_in_place(v: &mut [f64]) {
    if v.is_empty() {
        return;
    }
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (j, u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - 1.0) / (j + 1) as f64;
        if u - t > 0.0 {
            tau = t;
        }
    }
    for x in v.iter_mut() {
        *x = (*x - tau).max(0.0);
    }
}

/// Step size rule `η_ℓ` for the `ℓ`-th inner iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepSchedule {
    /// `1/(ℓ+1)`.
    InverseLinear,
    /// `1/√(ℓ+1)`.
    InverseSqrt,
}

impl StepSchedule {
    pub fn step(self, l: usize) -> f64 {
        let k = (l + 1) as f64;
        match self {
            StepSchedule::InverseLinear => 1.0 / k,
            StepSchedule::InverseSqrt => 1.0 / k.sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerSolverConfig {
    pub schedule: StepSchedule,
    /// Multiplies every step.
    pub step_scale: f64,
    /// Divide the subgradient by its norm before stepping.
    pub normalized: bool,
    /// Stop when `|obj_{ℓ+1} − obj_ℓ| / (1 + |obj_ℓ|) ≤ rel_tol`.
    pub rel_tol: f64,
    pub max_steps: usize,
}

impl Default for InnerSolverConfig {
    fn default() -> Self {
        Self {
            schedule: StepSchedule::InverseLinear,
            step_scale: 1.0,
            normalized: false,
            rel_tol: 1e-3,
            max_steps: 1000,
        }
    }
}

impl InnerSolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) {
            return Err(Error::InvalidParameter {
                name: "rel_tol",
                value: self.rel_tol,
            });
        }
        if !(self.step_scale > 0.0) {
            return Err(Error::InvalidParameter {
                name: "step_scale",
                value: self.step_scale,
            });
        }
        Ok(())
    }
}

/// Objective in `θ` alone.
pub trait ThetaObjective {
    fn theta_dim(&self) -> usize;
    fn feasible_set(&self) -> FeasibleSet;
    /// Returns the value and writes a subgradient into `grad`.
    fn eval(&self, theta: &[f64], grad: &mut [f64]) -> Result<f64>;
}

/// A dual objective with `λ` held fixed.
pub struct AtLambda<'a, D: ?Sized> {
    pub dual: &'a D,
    pub lambda: f64,
}

impl<D: DualObjective + ?Sized> ThetaObjective for AtLambda<'_, D> {
    fn theta_dim(&self) -> usize {
        self.dual.theta_dim()
    }
    fn feasible_set(&self) -> FeasibleSet {
        self.dual.feasible_set()
    }
    fn eval(&self, theta: &[f64], grad: &mut [f64]) -> Result<f64> {
        let e = self.dual.evaluate(self.lambda, theta)?;
        grad.copy_from_slice(&e.grad_theta);
        Ok(e.value)
    }
}

/// Empirical average `(1/n) Σ f_θ(x̂ᵢ)`.
pub struct SaaObjective<'a, L: ?Sized> {
    pub data: &'a EmpiricalDistribution,
    pub loss: &'a L,
}

impl<L: Loss + ?Sized> ThetaObjective for SaaObjective<'_, L> {
    fn theta_dim(&self) -> usize {
        self.loss.theta_dim()
    }
    fn feasible_set(&self) -> FeasibleSet {
        self.loss.feasible_set()
    }
    fn eval(&self, theta: &[f64], grad: &mut [f64]) -> Result<f64> {
        average_loss(self.data.iter(), self.data.len(), self.loss, theta, grad)
    }
}

/// Pool average `(1/(nm)) Σᵢⱼ f_θ(ẑᵢⱼ)`: the `ρ̄ = 0` problem.
pub struct KdeSaaObjective<'a, L: ?Sized> {
    pub pool: &'a SamplePool,
    pub loss: &'a L,
}

impl<L: Loss + ?Sized> ThetaObjective for KdeSaaObjective<'_, L> {
    fn theta_dim(&self) -> usize {
        self.loss.theta_dim()
    }
    fn feasible_set(&self) -> FeasibleSet {
        self.loss.feasible_set()
    }
    fn eval(&self, theta: &[f64], grad: &mut [f64]) -> Result<f64> {
        let count = self.pool.n() * self.pool.m();
        average_loss(self.pool.all_draws(), count, self.loss, theta, grad)
    }
}

fn average_loss<'z, L: Loss + ?Sized>(
    points: impl Iterator<Item = &'z [f64]>,
    count: usize,
    loss: &L,
    theta: &[f64],
    grad: &mut [f64],
) -> Result<f64> {
    grad.fill(0.0);
    let mut sub = vec![0.0; theta.len()];
    let mut total = 0.0;
    for z in points {
        total += loss.value(theta, z);
        if !theta.is_empty() {
            loss.theta_subgrad(theta, z, &mut sub);
            for (g, s) in grad.iter_mut().zip(&sub) {
                *g += s;
            }
        }
    }
    let inv = 1.0 / count as f64;
    grad.iter_mut().for_each(|g| *g *= inv);
    let value = total * inv;
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite(value))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InnerResult {
    /// Best iterate found.
    pub theta: Vec<f64>,
    pub value: f64,
    pub steps: usize,
    /// Objective after every step, starting with the projected `θ₀`.
    pub history: Vec<f64>,
}

/// Projected subgradient descent on `θ`, returning the best iterate.
pub fn inner_solve<O: ThetaObjective + ?Sized>(
    objective: &O,
    theta0: &[f64],
    cfg: &InnerSolverConfig,
) -> Result<InnerResult> {
    cfg.validate()?;
    let k = objective.theta_dim();
    if theta0.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: theta0.len(),
        });
    }
    let set = objective.feasible_set();
    let mut theta = theta0.to_vec();
    set.project(&mut theta);
    let mut grad = vec![0.0; k];
    let mut value = objective.eval(&theta, &mut grad)?;
    let mut best = (theta.clone(), value);
    let mut history = vec![value];
    let mut steps = 0;

    while steps < cfg.max_steps {
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if norm == 0.0 {
            break;
        }
        let mut eta = cfg.step_scale * cfg.schedule.step(steps);
        if cfg.normalized {
            eta /= norm;
        }
        for (t, g) in theta.iter_mut().zip(&grad) {
            *t -= eta * g;
        }
        set.project(&mut theta);
        let next = objective.eval(&theta, &mut grad)?;
        steps += 1;
        history.push(next);
        if next < best.1 {
            best = (theta.clone(), next);
        }
        let change = (next - value).abs() / (1.0 + value.abs());
        value = next;
        if change <= cfg.rel_tol {
            break;
        }
    }
    Ok(InnerResult {
        theta: best.0,
        value: best.1,
        steps,
        history,
    })
}

/// Solves `min_θ (1/n) Σ f_θ(x̂ᵢ)`.
pub fn saa_solve<L: Loss + ?Sized>(
    data: &EmpiricalDistribution,
    loss: &L,
    cfg: &InnerSolverConfig,
    theta0: &[f64],
) -> Result<InnerResult> {
    inner_solve(&SaaObjective { data, loss }, theta0, cfg)
}

/// Solves the `ρ̄ = 0` Sinkhorn problem, an SAA over the pooled kernel draws.
pub fn kde_saa_solve<L: Loss + ?Sized>(
    pool: &SamplePool,
    loss: &L,
    cfg: &InnerSolverConfig,
    theta0: &[f64],
) -> Result<InnerResult> {
    inner_solve(&KdeSaaObjective { pool, loss }, theta0, cfg)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BisectionConfig {
    pub lower: f64,
    pub upper: f64,
    /// Stop once the bracket is narrower than this.
    pub tolerance: f64,
    pub max_iters: usize,
    pub inner: InnerSolverConfig,
}

impl BisectionConfig {
    pub fn new(lower: f64, upper: f64, inner: InnerSolverConfig) -> Self {
        Self {
            lower,
            upper,
            tolerance: 1e-6,
            max_iters: 100,
            inner,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lower > 0.0) {
            return Err(Error::LambdaOutOfDomain(self.lower));
        }
        if !(self.upper >= self.lower) || !self.upper.is_finite() {
            return Err(Error::InvalidParameter {
                name: "upper",
                value: self.upper,
            });
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidParameter {
                name: "tolerance",
                value: self.tolerance,
            });
        }
        self.inner.validate()
    }
}

/// One outer iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct BisectionStep {
    pub lower: f64,
    pub upper: f64,
    /// Midpoint where the inner problem was solved.
    pub lambda: f64,
    pub value: f64,
    pub grad_lambda: f64,
}

impl BisectionStep {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    ZeroGradient,
    Tolerance,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BisectionResult {
    pub lambda: f64,
    pub theta: Vec<f64>,
    pub value: f64,
    pub grad_lambda: f64,
    pub termination: Termination,
    pub trace: Vec<BisectionStep>,
}

fn solve_at<D: DualObjective + ?Sized>(
    dual: &D,
    lambda: f64,
    theta0: &[f64],
    cfg: &InnerSolverConfig,
) -> Result<(Vec<f64>, DualEvaluation)> {
    let inner = inner_solve(&AtLambda { dual, lambda }, theta0, cfg)?;
    let eval = dual.evaluate(lambda, &inner.theta)?;
    Ok((inner.theta, eval))
}

/// Bisection over `λ` around an inner projected-subgradient solver.
///
/// Each iteration solves the inner problem at the bracket midpoint, warm
/// started from the previous `θ`, and keeps the half on which `∂F/∂λ` changes
/// sign. The bracket halves exactly at every step.
pub fn bisection_solve<D: DualObjective + ?Sized>(
    dual: &D,
    cfg: &BisectionConfig,
    theta0: &[f64],
) -> Result<BisectionResult> {
    cfg.validate()?;
    let (_, at_lo) = solve_at(dual, cfg.lower, theta0, &cfg.inner)?;
    let (_, at_hi) = solve_at(dual, cfg.upper, theta0, &cfg.inner)?;
    let (g_lo, g_hi) = (at_lo.grad_lambda, at_hi.grad_lambda);
    if (g_lo > ZERO_GRADIENT && g_hi > ZERO_GRADIENT) || (g_lo < -ZERO_GRADIENT && g_hi < -ZERO_GRADIENT) {
        return Err(Error::InvalidBracket {
            lo: cfg.lower,
            hi: cfg.upper,
            grad_lo: g_lo,
            grad_hi: g_hi,
        });
    }

    let (mut lo, mut hi) = (cfg.lower, cfg.upper);
    let mut theta = theta0.to_vec();
    let mut trace = Vec::new();
    let mut last = None;
    let mut termination = Termination::MaxIterations;
    for _ in 0..cfg.max_iters.max(1) {
        let mid = 0.5 * (lo + hi);
        let (t, eval) = solve_at(dual, mid, &theta, &cfg.inner)?;
        theta = t;
        let a = eval.grad_lambda;
        trace.push(BisectionStep {
            lower: lo,
            upper: hi,
            lambda: mid,
            value: eval.value,
            grad_lambda: a,
        });
        last = Some((mid, eval));
        if a.abs() <= ZERO_GRADIENT {
            termination = Termination::ZeroGradient;
            break;
        }
        if hi - lo < cfg.tolerance {
            termination = Termination::Tolerance;
            break;
        }
        if a > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let (lambda, eval) = last.expect("at least one iteration");
    Ok(BisectionResult {
        lambda,
        theta,
        value: eval.value,
        grad_lambda: eval.grad_lambda,
        termination,
        trace,
    })
}

/// Initial bracket for [`bisection_solve`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    pub lower: f64,
    pub upper: f64,
    /// `∂F/∂λ` stayed positive down to [`LAMBDA_FLOOR`]: the `λ* ≈ 0` regime.
    pub floor_hit: bool,
}

/// Finds `[λ_l, λ_u]` with `∂F/∂λ(λ_l) < 0 < ∂F/∂λ(λ_u)` by geometric search from 1.
pub fn bracket_lambda<D: DualObjective + ?Sized>(
    dual: &D,
    radius: f64,
    theta0: &[f64],
    inner: &InnerSolverConfig,
) -> Result<Bracket> {
    if !(radius > 0.0) {
        return Err(Error::NonPositiveRadius(radius));
    }
    let grad = |lambda: f64| solve_at(dual, lambda, theta0, inner).map(|(_, e)| e.grad_lambda);
    let g1 = grad(1.0)?;
    if g1 == 0.0 {
        return Ok(Bracket {
            lower: 1.0,
            upper: 1.0,
            floor_hit: false,
        });
    }
    if g1 < 0.0 {
        let mut lower = 1.0;
        let mut upper = 2.0;
        loop {
            if grad(upper)? > 0.0 {
                return Ok(Bracket {
                    lower,
                    upper,
                    floor_hit: false,
                });
            }
            lower = upper;
            upper *= 2.0;
            if upper > LAMBDA_CEILING {
                return Err(Error::InvalidBracket {
                    lo: lower,
                    hi: upper,
                    grad_lo: f64::NAN,
                    grad_hi: f64::NAN,
                });
            }
        }
    }
    let mut upper = 1.0;
    let mut lower = 0.5;
    loop {
        if lower < LAMBDA_FLOOR {
            return Ok(Bracket {
                lower: LAMBDA_FLOOR,
                upper,
                floor_hit: true,
            });
        }
        if grad(lower)? < 0.0 {
            return Ok(Bracket {
                lower,
                upper,
                floor_hit: false,
            });
        }
        upper = lower;
        lower *= 0.5;
    }
}

/// Outcome of a full dual solve.
#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    /// Optimal multiplier; `f64::INFINITY` for a zero radius.
    pub lambda: f64,
    pub theta: Vec<f64>,
    pub value: f64,
    /// `λ` sits on [`LAMBDA_FLOOR`]; the constraint is slack.
    pub lambda_at_floor: bool,
    pub trace: Vec<BisectionStep>,
}

/// Bracketing followed by bisection; falls back to the floor when `λ* ≈ 0`.
pub fn solve_dual<D: DualObjective + ?Sized>(
    dual: &D,
    radius: f64,
    theta0: &[f64],
    inner: &InnerSolverConfig,
    tolerance: f64,
    max_iters: usize,
) -> Result<DualSolution> {
    let bracket = bracket_lambda(dual, radius, theta0, inner)?;
    if bracket.floor_hit {
        let (theta, eval) = solve_at(dual, bracket.lower, theta0, inner)?;
        return Ok(DualSolution {
            lambda: bracket.lower,
            theta,
            value: eval.value,
            lambda_at_floor: true,
            trace: Vec::new(),
        });
    }
    let cfg = BisectionConfig {
        lower: bracket.lower,
        upper: bracket.upper,
        tolerance: tolerance * bracket.upper.max(1.0),
        max_iters,
        inner: *inner,
    };
    let r = bisection_solve(dual, &cfg, theta0)?;
    Ok(DualSolution {
        lambda: r.lambda,
        theta: r.theta,
        value: r.value,
        lambda_at_floor: false,
        trace: r.trace,
    })
}

/// Sinkhorn DRO over a frozen pool; `ρ̄ = 0` reduces to KDE-SAA.
pub fn sinkhorn_solve<L: Loss + ?Sized>(
    pool: &SamplePool,
    rho_bar: f64,
    loss: &L,
    inner: &InnerSolverConfig,
    theta0: &[f64],
) -> Result<DualSolution> {
    if rho_bar < 0.0 {
        return Err(Error::InvalidParameter {
            name: "rho_bar",
            value: rho_bar,
        });
    }
    if rho_bar == 0.0 {
        let r = kde_saa_solve(pool, loss, inner, theta0)?;
        return Ok(DualSolution {
            lambda: f64::INFINITY,
            theta: r.theta,
            value: r.value,
            lambda_at_floor: false,
            trace: Vec::new(),
        });
    }
    solve_dual(
        &SinkhornDual::new(pool, rho_bar, loss),
        rho_bar,
        theta0,
        inner,
        1e-6,
        100,
    )
}

/// KL-divergence DRO over the empirical distribution; `η = 0` reduces to SAA.
pub fn kl_dro_solve<L: Loss + ?Sized>(
    data: &EmpiricalDistribution,
    eta: f64,
    loss: &L,
    inner: &InnerSolverConfig,
    theta0: &[f64],
) -> Result<DualSolution> {
    if eta < 0.0 {
        return Err(Error::InvalidParameter {
            name: "eta",
            value: eta,
        });
    }
    if eta == 0.0 {
        let r = saa_solve(data, loss, inner, theta0)?;
        return Ok(DualSolution {
            lambda: f64::INFINITY,
            theta: r.theta,
            value: r.value,
            lambda_at_floor: false,
            trace: Vec::new(),
        });
    }
    solve_dual(&KlDual { data, eta, loss }, eta, theta0, inner, 1e-6, 100)
}

/// Golden-section search for the minimum of a unimodal scalar function.
pub fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64, max_iters: usize) -> (f64, f64) {
    let r = 0.5 * (5.0f64.sqrt() - 1.0);
    let mut a = hi - r * (hi - lo);
    let mut b = lo + r * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..max_iters {
        if hi - lo <= tol {
            break;
        }
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - r * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + r * (hi - lo);
            fb = f(b);
        }
    }
    if fa <= fb {
        (a, fa)
    } else {
        (b, fb)
    }
}
