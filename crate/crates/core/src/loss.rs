//! Parameterized losses `f_θ(z)` and their feasible sets.

use alloc::vec::Vec;
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::optimizer::project_simplex_in_place;

/// Feasible set `Θ` of the decision vector.
#[derive(Debug, Clone, PartialEq)]
pub enum FeasibleSet {
    Unconstrained,
    /// Coordinate-wise bounds.
    Box {
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
    /// Probability simplex.
    Simplex,
    /// Simplex on all coordinates but the last, which is free.
    SimplexTimesReal,
    /// Euclidean ball centered at the origin.
    Ball {
        radius: f64,
    },
}

impl FeasibleSet {
    pub fn interval(lower: f64, upper: f64) -> Self {
        FeasibleSet::Box {
            lower: alloc::vec![lower],
            upper: alloc::vec![upper],
        }
    }

    /// Euclidean projection in place.
    pub fn project(&self, theta: &mut [f64]) {
        match self {
            FeasibleSet::Unconstrained => {}
            FeasibleSet::Box { lower, upper } => {
                for ((t, lo), hi) in theta.iter_mut().zip(lower).zip(upper) {
                    *t = t.max(*lo).min(*hi);
                }
            }
            FeasibleSet::Simplex => project_simplex_in_place(theta),
            FeasibleSet::SimplexTimesReal => {
                let k = theta.len() - 1;
                project_simplex_in_place(&mut theta[..k]);
            }
            FeasibleSet::Ball { radius } => {
                let norm = theta.iter().map(|t| t * t).sum::<f64>().sqrt();
                if norm > *radius {
                    let s = radius / norm;
                    theta.iter_mut().for_each(|t| *t *= s);
                }
            }
        }
    }

    pub fn contains(&self, theta: &[f64], tol: f64) -> bool {
        let mut p = theta.to_vec();
        self.project(&mut p);
        p.iter().zip(theta).all(|(a, b)| (a - b).abs() <= tol)
    }
}

/// A loss `f_θ(z)`, convex in `θ`.
pub trait Loss {
    fn name(&self) -> &str;

    /// Length of `θ`; zero for losses without a decision.
    fn theta_dim(&self) -> usize;

    fn feasible_set(&self) -> FeasibleSet;

    fn value(&self, theta: &[f64], z: &[f64]) -> f64;

    /// Writes a subgradient of `θ ↦ f_θ(z)` into `out`.
    fn theta_subgrad(&self, theta: &[f64], z: &[f64], out: &mut [f64]);

    /// Polynomial growth order `p` of `f` in `z`, documentation only.
    fn growth_order(&self) -> Option<u32> {
        None
    }
}

impl<L: Loss + ?Sized> Loss for &L {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn theta_dim(&self) -> usize {
        (**self).theta_dim()
    }
    fn feasible_set(&self) -> FeasibleSet {
        (**self).feasible_set()
    }
    fn value(&self, theta: &[f64], z: &[f64]) -> f64 {
        (**self).value(theta, z)
    }
    fn theta_subgrad(&self, theta: &[f64], z: &[f64], out: &mut [f64]) {
        (**self).theta_subgrad(theta, z, out)
    }
    fn growth_order(&self) -> Option<u32> {
        (**self).growth_order()
    }
}

/// `f ≡ c`.
#[derive(Debug, Clone, Copy)]
pub struct ConstantLoss {
    pub value: f64,
    pub theta_dim: usize,
}

impl ConstantLoss {
    pub fn new(value: f64) -> Self {
        Self { value, theta_dim: 0 }
    }
}

impl Loss for ConstantLoss {
    fn name(&self) -> &str {
        "constant"
    }
    fn theta_dim(&self) -> usize {
        self.theta_dim
    }
    fn feasible_set(&self) -> FeasibleSet {
        FeasibleSet::Unconstrained
    }
    fn value(&self, _theta: &[f64], _z: &[f64]) -> f64 {
        self.value
    }
    fn theta_subgrad(&self, _theta: &[f64], _z: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn growth_order(&self) -> Option<u32> {
        Some(0)
    }
}

/// `f(z) = aᵀz` with no decision variable.
#[derive(Debug, Clone)]
pub struct FixedLinearLoss {
    pub a: Vec<f64>,
}

impl Loss for FixedLinearLoss {
    fn name(&self) -> &str {
        "fixed-linear"
    }
    fn theta_dim(&self) -> usize {
        0
    }
    fn feasible_set(&self) -> FeasibleSet {
        FeasibleSet::Unconstrained
    }
    fn value(&self, _theta: &[f64], z: &[f64]) -> f64 {
        self.a.iter().zip(z).map(|(a, z)| a * z).sum()
    }
    fn theta_subgrad(&self, _theta: &[f64], _z: &[f64], _out: &mut [f64]) {}
    fn growth_order(&self) -> Option<u32> {
        Some(1)
    }
}

/// `f(z) = ‖z‖²` with no decision variable.
#[derive(Debug, Clone, Copy, Default)]
pub struct SquaredNormLoss;

impl Loss for SquaredNormLoss {
    fn name(&self) -> &str {
        "squared-norm"
    }
    fn theta_dim(&self) -> usize {
        0
    }
    fn feasible_set(&self) -> FeasibleSet {
        FeasibleSet::Unconstrained
    }
    fn value(&self, _theta: &[f64], z: &[f64]) -> f64 {
        z.iter().map(|v| v * v).sum()
    }
    fn theta_subgrad(&self, _theta: &[f64], _z: &[f64], _out: &mut [f64]) {}
    fn growth_order(&self) -> Option<u32> {
        Some(2)
    }
}

/// `f_θ(z) = ‖θ − z‖²` over a box.
#[derive(Debug, Clone)]
pub struct TrackingLoss {
    pub lower: f64,
    pub upper: f64,
    pub dim: usize,
}

impl Loss for TrackingLoss {
    fn name(&self) -> &str {
        "tracking"
    }
    fn theta_dim(&self) -> usize {
        self.dim
    }
    fn feasible_set(&self) -> FeasibleSet {
        FeasibleSet::Box {
            lower: alloc::vec![self.lower; self.dim],
            upper: alloc::vec![self.upper; self.dim],
        }
    }
    fn value(&self, theta: &[f64], z: &[f64]) -> f64 {
        theta.iter().zip(z).map(|(t, z)| (t - z) * (t - z)).sum()
    }
    fn theta_subgrad(&self, theta: &[f64], z: &[f64], out: &mut [f64]) {
        for ((o, t), z) in out.iter_mut().zip(theta).zip(z) {
            *o = 2.0 * (t - z);
        }
    }
    fn growth_order(&self) -> Option<u32> {
        Some(2)
    }
}

/// `f_θ(z) = −θᵀz` over the simplex (negative portfolio return).
#[derive(Debug, Clone, Copy)]
pub struct NegativeReturnLoss {
    pub dim: usize,
}

impl Loss for NegativeReturnLoss {
    fn name(&self) -> &str {
        "negative-return"
    }
    fn theta_dim(&self) -> usize {
        self.dim
    }
    fn feasible_set(&self) -> FeasibleSet {
        FeasibleSet::Simplex
    }
    fn value(&self, theta: &[f64], z: &[f64]) -> f64 {
        -theta.iter().zip(z).map(|(t, z)| t * z).sum::<f64>()
    }
    fn theta_subgrad(&self, _theta: &[f64], z: &[f64], out: &mut [f64]) {
        for (o, z) in out.iter_mut().zip(z) {
            *o = -z;
        }
    }
    fn growth_order(&self) -> Option<u32> {
        Some(1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projections_land_in_the_set() {
        let sets = [
            FeasibleSet::interval(0.0, 1.0),
            FeasibleSet::Simplex,
            FeasibleSet::SimplexTimesReal,
            FeasibleSet::Ball { radius: 2.0 },
        ];
        for set in &sets {
            let mut v = [3.0, -1.0];
            if let FeasibleSet::Box { .. } = set {
                let mut s = [3.0];
                set.project(&mut s);
                assert_eq!(s, [1.0]);
                continue;
            }
            set.project(&mut v);
            assert!(set.contains(&v, 1e-12), "{set:?} {v:?}");
        }
        let mut v = [0.2, 0.9, -5.0];
        FeasibleSet::SimplexTimesReal.project(&mut v);
        assert!((v[0] + v[1] - 1.0).abs() < 1e-12);
        assert_eq!(v[2], -5.0);
    }
}
