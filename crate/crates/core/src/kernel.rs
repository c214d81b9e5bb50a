//! Samplers for the kernel laws `Q_{x,ε}`.
//!
//! * quadratic cost: `N(x, ε I)`
//! * Mahalanobis cost: `N(x, ε Ω⁻¹)`
//! * feature/label cost with `κ = ∞`: `N(x_f, ε I)` on the features, label copied

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::cost::{CostKind, CostSpec};
use crate::error::{Error, Result};
use crate::rng::SeedSpec;

/// Kernel law `Q_{x,ε}` centered at one point.
#[derive(Debug, Clone, Copy)]
pub struct KernelSampler<'a> {
    pub cost: &'a CostSpec,
    pub center: &'a [f64],
}

impl<'a> KernelSampler<'a> {
    pub fn new(cost: &'a CostSpec, center: &'a [f64]) -> Result<Self> {
        cost.check_dim(center.len())?;
        if let CostKind::FeatureLabel { kappa } = cost.kind {
            if kappa.is_finite() {
                return Err(Error::UnsupportedSampling("feature-label with finite kappa"));
            }
        }
        Ok(Self { cost, center })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// Draws one point into `out` (length `dim`).
    pub fn draw_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let sd = self.cost.epsilon().sqrt();
        let d = self.center.len();
        match &self.cost.kind {
            CostKind::Quadratic => {
                for (o, x) in out.iter_mut().zip(self.center) {
                    let g: f64 = StandardNormal.sample(rng);
                    *o = x + sd * g;
                }
            }
            CostKind::Mahalanobis(m) => {
                let g: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
                m.color(&g, out);
                for (o, x) in out.iter_mut().zip(self.center) {
                    *o = x + sd * *o;
                }
            }
            CostKind::FeatureLabel { .. } => {
                for (o, x) in out[..d - 1].iter_mut().zip(self.center) {
                    let g: f64 = StandardNormal.sample(rng);
                    *o = x + sd * g;
                }
                out[d - 1] = self.center[d - 1];
            }
        }
    }
}

/// `count` i.i.d. draws from `Q_{x,ε}`, flat row-major.
pub fn kernel_sample(sampler: &KernelSampler<'_>, count: usize, seed: SeedSpec) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(Error::InvalidParameter {
            name: "count",
            value: 0.0,
        });
    }
    let d = sampler.dim();
    let mut rng = seed.rng();
    let mut out = vec![0.0; count * d];
    for row in out.chunks_exact_mut(d) {
        sampler.draw_into(&mut rng, row);
    }
    Ok(out)
}
