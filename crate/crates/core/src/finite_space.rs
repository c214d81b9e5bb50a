//! Exact treatment of finite sample spaces.
//!
//! With `ν` the counting measure on atoms `z₁..z_L`, every expectation in the
//! dual is a finite sum. This module solves the dual exactly, provides a
//! primal oracle that sweeps the tilt parameter, and encodes the problem as an
//! exponential-cone program in Conic Benchmark Format (CBF) text.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::cost::CostSpec;
use crate::data::EmpiricalDistribution;
use crate::dual::TiltedMoments;
use crate::error::{Error, Result};
use crate::worstcase::lambda_zero_diagnostic;

/// Loss values on `L` atoms and the kernel masses `q` (row-major `n × L`).
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteInstance {
    pub f: Vec<f64>,
    pub q: Vec<f64>,
    pub n: usize,
    pub rho_bar: f64,
    pub epsilon: f64,
}

impl FiniteInstance {
    pub fn new(f: Vec<f64>, q: Vec<f64>, n: usize, rho_bar: f64, epsilon: f64) -> Result<Self> {
        if f.is_empty() {
            return Err(Error::Empty("support"));
        }
        if n == 0 {
            return Err(Error::Empty("centers"));
        }
        if q.len() != n * f.len() {
            return Err(Error::DimensionMismatch {
                expected: n * f.len(),
                got: q.len(),
            });
        }
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::InvalidEpsilon(epsilon));
        }
        if rho_bar.is_nan() {
            return Err(Error::InvalidParameter {
                name: "rho_bar",
                value: rho_bar,
            });
        }
        if let Some(v) = f.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(*v));
        }
        for row in q.chunks_exact(f.len()) {
            let total: f64 = row.iter().sum();
            if row.iter().any(|v| !(*v >= 0.0)) || (total - 1.0).abs() > 1e-9 {
                return Err(Error::NotProbability("q row"));
            }
        }
        Ok(Self {
            f,
            q,
            n,
            rho_bar,
            epsilon,
        })
    }

    /// Kernel masses `qᵢℓ ∝ exp(−c(x̂ᵢ, z_ℓ)/ε)` under counting measure on `atoms`.
    pub fn from_cost(
        centers: &EmpiricalDistribution,
        atoms: &EmpiricalDistribution,
        cost: &CostSpec,
        f: Vec<f64>,
        rho_bar: f64,
    ) -> Result<Self> {
        if f.len() != atoms.len() {
            return Err(Error::DimensionMismatch {
                expected: atoms.len(),
                got: f.len(),
            });
        }
        let eps = cost.epsilon();
        let mut q = Vec::with_capacity(centers.len() * atoms.len());
        let mut row = vec![0.0; atoms.len()];
        for x in centers.iter() {
            for (r, z) in row.iter_mut().zip(atoms.iter()) {
                *r = -cost.eval(x, z) / eps;
            }
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let total: f64 = row.iter().map(|r| (r - max).exp()).sum();
            q.extend(row.iter().map(|r| (r - max).exp() / total));
        }
        Self::new(f, q, centers.len(), rho_bar, eps)
    }

    pub fn atoms(&self) -> usize {
        self.f.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let l = self.atoms();
        &self.q[i * l..(i + 1) * l]
    }

    pub fn max_f(&self) -> f64 {
        self.f.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `(1/n) Σᵢℓ qᵢℓ f_ℓ`, the value at zero radius.
    pub fn kde_saa_value(&self) -> f64 {
        let mut total = 0.0;
        for i in 0..self.n {
            total += self.row(i).iter().zip(&self.f).map(|(q, f)| q * f).sum::<f64>();
        }
        total / self.n as f64
    }

    /// `λρ̄ + (λε/n) Σᵢ log Σℓ qᵢℓ exp(f_ℓ/(λε))`.
    pub fn dual_value(&self, lambda: f64) -> f64 {
        TiltedMoments::dual_value(self, lambda)
    }
}

/// Log-mean-exp and tilted mean of `values` under weights `q` at temperature `t`.
fn weighted_tilt(q: &[f64], values: &[f64], t: f64) -> (f64, f64) {
    let max = q
        .iter()
        .zip(values)
        .filter(|(q, _)| **q > 0.0)
        .map(|(_, v)| *v)
        .fold(f64::NEG_INFINITY, f64::max);
    let (mut sum, mut weighted) = (0.0, 0.0);
    for (q, v) in q.iter().zip(values) {
        if *q > 0.0 {
            let w = q * ((v - max) / t).exp();
            sum += w;
            weighted += w * (v - max);
        }
    }
    (max / t + sum.ln(), max + weighted / sum)
}

impl TiltedMoments for FiniteInstance {
    fn centers(&self) -> usize {
        self.n
    }
    fn epsilon(&self) -> f64 {
        self.epsilon
    }
    fn rho_bar(&self) -> f64 {
        self.rho_bar
    }
    fn center_moments(&self, i: usize, lambda: f64) -> (f64, f64) {
        weighted_tilt(self.row(i), &self.f, lambda * self.epsilon)
    }
}

/// Which case of the exact dual applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DualRegime {
    /// `ρ̄ < 0`: the ball is empty and the value is `−∞`.
    Infeasible,
    /// `λ* = 0`: the worst case puts all mass on the argmax of `f`.
    LambdaZero,
    /// `ρ̄ = 0` with `λ* = ∞`: the value is the kernel-smoothed average.
    ZeroRadius,
    /// `0 < λ* < ∞`.
    Interior,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiniteDualSolution {
    pub lambda: f64,
    pub value: f64,
    pub regime: DualRegime,
}

/// Minimizes the finite dual exactly by bisection on its derivative.
pub fn exact_dual_discrete(inst: &FiniteInstance) -> Result<FiniteDualSolution> {
    if inst.rho_bar < 0.0 {
        return Ok(FiniteDualSolution {
            lambda: f64::INFINITY,
            value: f64::NEG_INFINITY,
            regime: DualRegime::Infeasible,
        });
    }
    let diag = lambda_zero_diagnostic(&inst.f, &inst.q, inst.rho_bar, inst.epsilon)?;
    if diag.lambda_zero {
        return Ok(FiniteDualSolution {
            lambda: 0.0,
            value: diag.max_f,
            regime: DualRegime::LambdaZero,
        });
    }
    if inst.rho_bar == 0.0 {
        return Ok(FiniteDualSolution {
            lambda: f64::INFINITY,
            value: inst.kde_saa_value(),
            regime: DualRegime::ZeroRadius,
        });
    }
    // F is convex with F'(0⁺) = ρ̄' < 0 and F'(∞) = ρ̄ > 0.
    let grad = |l: f64| inst.dual_grad_lambda(l);
    let (mut lo, mut hi) = (1.0, 1.0);
    while grad(hi) <= 0.0 {
        hi *= 2.0;
        if hi > 1e300 {
            return Err(Error::NonFinite(hi));
        }
    }
    while grad(lo) >= 0.0 {
        lo *= 0.5;
        if lo < 1e-300 {
            return Err(Error::NonFinite(lo));
        }
    }
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if grad(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let (vlo, vhi) = (inst.dual_value(lo), inst.dual_value(hi));
    let (lambda, value) = if vlo <= vhi { (lo, vlo) } else { (hi, vhi) };
    Ok(FiniteDualSolution {
        lambda,
        value,
        regime: DualRegime::Interior,
    })
}

/// Objective and spent budget of the tilt family `γᵢ(t) ∝ qᵢ·exp(f/t)`.
fn tilt_point(inst: &FiniteInstance, t: f64) -> (f64, f64) {
    let (mut objective, mut budget) = (0.0, 0.0);
    for i in 0..inst.n {
        let (log_mgf, mean) = weighted_tilt(inst.row(i), &inst.f, t);
        objective += mean;
        // KL(γ‖q) = E_γ[f]/t − log E_q[exp(f/t)]
        budget += (mean / t - log_mgf).max(0.0);
    }
    let n = inst.n as f64;
    (objective / n, inst.epsilon * budget / n)
}

/// Limit `t → 0⁺`: each row keeps only its reachable maximizers.
fn argmax_point(inst: &FiniteInstance) -> (f64, f64) {
    let (mut objective, mut budget) = (0.0, 0.0);
    for i in 0..inst.n {
        let row = inst.row(i);
        let best = row
            .iter()
            .zip(&inst.f)
            .filter(|(q, _)| **q > 0.0)
            .map(|(_, f)| *f)
            .fold(f64::NEG_INFINITY, f64::max);
        let tie = 1e-12 * (1.0 + best.abs());
        let mass: f64 = row
            .iter()
            .zip(&inst.f)
            .filter(|(q, f)| **q > 0.0 && **f >= best - tie)
            .map(|(q, _)| q)
            .sum();
        objective += best;
        budget -= mass.ln();
    }
    let n = inst.n as f64;
    (objective / n, inst.epsilon * budget / n)
}

/// Number of tilt values swept by [`brute_force_primal`].
pub const PRIMAL_GRID: usize = 10_000;

/// Maximizes the primal over the tilt family by exhaustive sweep.
///
/// The optimal conditionals are `γᵢ ∝ qᵢ·exp(f/t)` for some `t ∈ (0, ∞]`, and
/// both the objective and the spent budget decrease in `t`. The sweep takes
/// the smallest feasible grid `t`, refines it against its infeasible
/// neighbour by bisection, and also considers `t = ∞` and `t → 0⁺`.
pub fn brute_force_primal(inst: &FiniteInstance) -> Result<f64> {
    if inst.rho_bar < 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    if inst.n * inst.atoms() > 10_000 {
        return Err(Error::InvalidParameter {
            name: "n*L",
            value: (inst.n * inst.atoms()) as f64,
        });
    }
    if inst.rho_bar == 0.0 {
        // every finite tilt of a non-constant row spends a positive budget
        return Ok(inst.kde_saa_value());
    }
    let (obj0, budget0) = argmax_point(inst);
    if budget0 <= inst.rho_bar {
        return Ok(obj0);
    }
    let spread = inst.max_f() - inst.f.iter().copied().fold(f64::INFINITY, f64::min);
    let scale = if spread > 0.0 { spread } else { 1.0 };
    let (log_lo, log_hi) = ((scale * 1e-8).ln(), (scale * 1e8).ln());
    let step = (log_hi - log_lo) / (PRIMAL_GRID - 1) as f64;
    let mut best = inst.kde_saa_value();
    let mut prev_infeasible = None;
    for k in 0..PRIMAL_GRID {
        let lt = log_lo + step * k as f64;
        let (obj, budget) = tilt_point(inst, lt.exp());
        if budget <= inst.rho_bar {
            best = best.max(obj);
            if let Some(bad) = prev_infeasible {
                let (mut a, mut b): (f64, f64) = (bad, lt);
                for _ in 0..200 {
                    let mid = 0.5 * (a + b);
                    let (o, bu) = tilt_point(inst, mid.exp());
                    if bu <= inst.rho_bar {
                        b = mid;
                        best = best.max(o);
                    } else {
                        a = mid;
                    }
                }
            }
            break;
        }
        prev_infeasible = Some(lt);
    }
    Ok(best)
}

/// Column of each variable in the conic program.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConicLayout {
    pub n: usize,
    pub l: usize,
}

impl ConicLayout {
    pub fn lambda(&self) -> usize {
        0
    }
    pub fn s(&self, i: usize) -> usize {
        1 + i
    }
    pub fn a(&self, i: usize, l: usize) -> usize {
        1 + self.n + i * self.l + l
    }
    pub fn variables(&self) -> usize {
        1 + self.n + self.n * self.l
    }
}

/// A candidate point `(λ, s, a)` of the conic program.
#[derive(Debug, Clone, PartialEq)]
pub struct ConicPoint {
    pub lambda: f64,
    pub s: Vec<f64>,
    /// Row-major `n × L`.
    pub a: Vec<f64>,
}

impl ConicPoint {
    /// The feasible point induced by a dual multiplier `λ > 0`:
    /// `sᵢ = λε·log Σℓ qᵢℓ e^{f_ℓ/(λε)}` and `aᵢℓ = λε·e^{(f_ℓ − sᵢ)/(λε)}`.
    pub fn from_lambda(inst: &FiniteInstance, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::LambdaOutOfDomain(lambda));
        }
        let t = lambda * inst.epsilon;
        let mut s = Vec::with_capacity(inst.n);
        let mut a = Vec::with_capacity(inst.n * inst.atoms());
        for i in 0..inst.n {
            let (log_mgf, _) = weighted_tilt(inst.row(i), &inst.f, t);
            let si = t * log_mgf;
            s.push(si);
            a.extend(inst.f.iter().map(|f| t * ((f - si) / t).exp()));
        }
        Ok(Self { lambda, s, a })
    }
}

/// Objective of the conic program at `point`.
pub fn conic_objective(inst: &FiniteInstance, point: &ConicPoint) -> f64 {
    inst.rho_bar * point.lambda + point.s.iter().sum::<f64>() / inst.n as f64
}

/// Largest constraint violation of `point`: linear rows, cone memberships and `λ ≥ 0`.
pub fn conic_violation(inst: &FiniteInstance, point: &ConicPoint) -> f64 {
    let t = point.lambda * inst.epsilon;
    let l = inst.atoms();
    let mut worst = (-point.lambda).max(0.0);
    for i in 0..inst.n {
        let lin: f64 = inst
            .row(i)
            .iter()
            .zip(&point.a[i * l..(i + 1) * l])
            .map(|(q, a)| q * a)
            .sum();
        worst = worst.max(lin - t);
        for (f, a) in inst.f.iter().zip(&point.a[i * l..(i + 1) * l]) {
            // a ≥ t·exp((f − s)/t)
            let need = if t > 0.0 {
                t * ((f - point.s[i]) / t).exp()
            } else if f - point.s[i] <= 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            worst = worst.max(need - a);
        }
    }
    worst
}

/// Header comment of the exported CBF file.
const CBF_HEADER: &str = "\
# Sinkhorn DRO on a finite support as an exponential-cone program.
# variables: x0 = lambda >= 0, x(1+i) = s_i, x(1+n+i*L+l) = a_il
# minimize   rho_bar*lambda + (1/n) sum_i s_i
# subject to epsilon*lambda - sum_l q_il a_il >= 0          (i = 0..n-1)
#            (nu, lam, delta) = (epsilon*lambda, a_il, f_l - s_i) in
#            K = closure{(nu, lam, delta): nu > 0, lam >= nu*exp(delta/nu)}
# CBF EXP is {(x1, x2, x3): x1 >= x2*exp(x3/x2), x1, x2 >= 0}, so each cone
# is written as (x1, x2, x3) = (lam, nu, delta) = (a_il, epsilon*lambda, f_l - s_i):
# the first two entries of the triple are swapped, the third is unchanged.
";

/// Encodes the instance as CBF version 2 text.
pub fn to_cbf(inst: &FiniteInstance) -> String {
    let lay = ConicLayout {
        n: inst.n,
        l: inst.atoms(),
    };
    let (n, l) = (lay.n, lay.l);
    let mut out = String::from(CBF_HEADER);
    let mut w = |s: String| {
        out.push_str(&s);
        out.push('\n');
    };
    w(format!(
        "# n = {n}, L = {l}, rho_bar = {:e}, epsilon = {:e}\n",
        inst.rho_bar, inst.epsilon
    ));
    w("VER\n2\n".into());
    w("OBJSENSE\nMIN\n".into());
    w(format!("VAR\n{} 2\nL+ 1\nF {}\n", lay.variables(), n + n * l));
    let rows = n + 3 * n * l;
    let mut con = format!("CON\n{} {}\nL+ {}", rows, 1 + n * l, n);
    for _ in 0..n * l {
        con.push_str("\nEXP 3");
    }
    w(con + "\n");

    let mut obj = format!("OBJACOORD\n{}\n{} {:e}", 1 + n, lay.lambda(), inst.rho_bar);
    for i in 0..n {
        let _ = write!(obj, "\n{} {:e}", lay.s(i), 1.0 / n as f64);
    }
    w(obj + "\n");

    let mut entries = Vec::new();
    let mut consts = Vec::new();
    for i in 0..n {
        entries.push((i, lay.lambda(), inst.epsilon));
        for k in 0..l {
            let q = inst.row(i)[k];
            if q != 0.0 {
                entries.push((i, lay.a(i, k), -q));
            }
        }
    }
    for i in 0..n {
        for k in 0..l {
            let base = n + 3 * (i * l + k);
            entries.push((base, lay.a(i, k), 1.0));
            entries.push((base + 1, lay.lambda(), inst.epsilon));
            entries.push((base + 2, lay.s(i), -1.0));
            if inst.f[k] != 0.0 {
                consts.push((base + 2, inst.f[k]));
            }
        }
    }
    let mut a = format!("ACOORD\n{}", entries.len());
    for (r, c, v) in &entries {
        let _ = write!(a, "\n{r} {c} {v:e}");
    }
    w(a + "\n");
    let mut b = format!("BCOORD\n{}", consts.len());
    for (r, v) in &consts {
        let _ = write!(b, "\n{r} {v:e}");
    }
    w(b);
    out
}

struct Lines<'a> {
    inner: core::iter::Enumerate<core::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<&'a str> {
        for (k, raw) in self.inner.by_ref() {
            let t = raw.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            self.line = k + 1;
            return Ok(t);
        }
        Err(self.err("unexpected end of input"))
    }

    fn err(&self, reason: &'static str) -> Error {
        Error::MalformedConic {
            line: self.line,
            reason,
        }
    }

    fn fields<const K: usize>(&mut self) -> Result<[&'a str; K]> {
        let line = self.next()?;
        let mut out = [""; K];
        let mut it = line.split_whitespace();
        for o in out.iter_mut() {
            *o = it.next().ok_or(self.err("too few fields"))?;
        }
        if it.next().is_some() {
            return Err(self.err("too many fields"));
        }
        Ok(out)
    }

    fn usize(&self, s: &str) -> Result<usize> {
        s.parse().map_err(|_| self.err("expected an integer"))
    }

    fn f64(&self, s: &str) -> Result<f64> {
        s.parse().map_err(|_| self.err("expected a number"))
    }
}

/// Decodes text produced by [`to_cbf`] back into the instance.
pub fn from_cbf(text: &str) -> Result<FiniteInstance> {
    let mut ls = Lines {
        inner: text.lines().enumerate(),
        line: 0,
    };
    let mut var_cones: Vec<(String, usize)> = Vec::new();
    let mut con_cones: Vec<(String, usize)> = Vec::new();
    let mut num_vars = 0;
    let mut objective: Vec<(usize, f64)> = Vec::new();
    let mut entries: Vec<(usize, usize, f64)> = Vec::new();
    let mut consts: Vec<(usize, f64)> = Vec::new();
    let mut version = None;
    while let Ok(key) = ls.next() {
        match key {
            "VER" => version = Some(ls.next()?),
            "OBJSENSE" => {
                if ls.next()? != "MIN" {
                    return Err(ls.err("expected MIN"));
                }
            }
            "VAR" | "CON" => {
                let [total, count] = ls.fields::<2>()?;
                let total = ls.usize(total)?;
                let count = ls.usize(count)?;
                let mut cones = Vec::with_capacity(count);
                for _ in 0..count {
                    let [d, k] = ls.fields::<2>()?;
                    cones.push((String::from(d), ls.usize(k)?));
                }
                if cones.iter().map(|c| c.1).sum::<usize>() != total {
                    return Err(ls.err("cone sizes do not add up"));
                }
                if key == "VAR" {
                    num_vars = total;
                    var_cones = cones;
                } else {
                    con_cones = cones;
                }
            }
            "OBJACOORD" | "BCOORD" => {
                let count = ls.next()?;
                for _ in 0..ls.usize(count)? {
                    let [j, v] = ls.fields::<2>()?;
                    let pair = (ls.usize(j)?, ls.f64(v)?);
                    if key == "OBJACOORD" {
                        objective.push(pair);
                    } else {
                        consts.push(pair);
                    }
                }
            }
            "ACOORD" => {
                let count = ls.next()?;
                for _ in 0..ls.usize(count)? {
                    let [r, c, v] = ls.fields::<3>()?;
                    entries.push((ls.usize(r)?, ls.usize(c)?, ls.f64(v)?));
                }
            }
            _ => return Err(ls.err("unknown section")),
        }
    }
    if version != Some("2") {
        return Err(ls.err("expected VER 2"));
    }
    let n = match con_cones.first() {
        Some((d, k)) if d == "L+" => *k,
        _ => return Err(ls.err("first constraint block must be L+")),
    };
    if n == 0 || con_cones[1..].iter().any(|(d, k)| d != "EXP" || *k != 3) {
        return Err(ls.err("expected EXP 3 cones after the linear block"));
    }
    let cones = con_cones.len() - 1;
    if !cones.is_multiple_of(n) {
        return Err(ls.err("cone count is not a multiple of n"));
    }
    let l = cones / n;
    let lay = ConicLayout { n, l };
    if num_vars != lay.variables() || var_cones.first().map(|c| c.0.as_str()) != Some("L+") {
        return Err(ls.err("variable layout does not match"));
    }
    let rho_bar = objective
        .iter()
        .find(|(j, _)| *j == lay.lambda())
        .map(|p| p.1)
        .unwrap_or(0.0);
    let epsilon = entries
        .iter()
        .find(|(r, c, _)| *r == 0 && *c == lay.lambda())
        .map(|e| e.2)
        .ok_or(ls.err("missing epsilon coefficient"))?;
    let mut q = vec![0.0; n * l];
    let mut f = vec![0.0; l];
    for &(r, c, v) in &entries {
        if r < n && c != lay.lambda() {
            let k = c
                .checked_sub(lay.a(r, 0))
                .filter(|k| *k < l)
                .ok_or(ls.err("stray linear entry"))?;
            q[r * l + k] = -v;
        }
    }
    for &(r, v) in &consts {
        let k = r.checked_sub(n).ok_or(ls.err("constant on a linear row"))?;
        if k % 3 != 2 || k / 3 >= n * l {
            return Err(ls.err("constant outside a cone's third entry"));
        }
        // all rows i share f; the first center's cones carry it
        if k / 3 < l {
            f[k / 3] = v;
        }
    }
    FiniteInstance::new(f, q, n, rho_bar, epsilon)
}
