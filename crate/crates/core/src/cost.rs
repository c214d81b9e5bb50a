//! Transport costs, their Gibbs kernels and the adjusted radius.
//!
//! A cost `c(x, z)` together with the regularization `ε` defines the kernel
//! law `Q_{x,ε}(dz) ∝ exp(-c(x,z)/ε) ν(dz)`. All built-in costs are
//! translation invariant, so the log-normalizer `log ∫ exp(-c(x,z)/ε) dν(z)`
//! does not depend on the center and the radius shift
//! `ρ̄ = ρ + ε · log-normalizer` is a single number.
//!
//! For [`CostKind::FeatureLabel`] the last coordinate of every point is the
//! label; the remaining coordinates are features.

use core::f64::consts::PI;

use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum CostKind {
    /// `½‖x − z‖²`.
    Quadratic,
    /// `½ (x − z)ᵀ Ω (x − z)` with `Ω` symmetric positive definite.
    Mahalanobis(Mahalanobis),
    /// `½‖x_f − z_f‖²` when labels agree, `kappa` otherwise.
    FeatureLabel { kappa: f64 },
}

/// Weight matrix `Ω` with its cached factorizations.
#[derive(Debug, Clone, PartialEq)]
pub struct Mahalanobis {
    omega: DMatrix<f64>,
    /// `L⁻ᵀ` where `Ω = L Lᵀ`; maps standard normals to covariance `Ω⁻¹`.
    inv_chol_t: DMatrix<f64>,
    inverse: DMatrix<f64>,
    log_det: f64,
}

impl Mahalanobis {
    pub fn new(omega: DMatrix<f64>) -> Result<Self> {
        let d = omega.nrows();
        if d == 0 || omega.ncols() != d {
            return Err(Error::NotPositiveDefinite);
        }
        let scale = omega.amax().max(1.0);
        if (&omega - omega.transpose()).amax() > 1e-12 * scale {
            return Err(Error::NotPositiveDefinite);
        }
        let chol = omega.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
        let l = chol.l();
        let log_det = 2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let inv_l = l.clone().try_inverse().ok_or(Error::NotPositiveDefinite)?;
        let inverse = chol.inverse();
        Ok(Self {
            omega,
            inv_chol_t: inv_l.transpose(),
            inverse,
            log_det,
        })
    }

    pub fn from_row_major(dim: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                got: entries.len(),
            });
        }
        Self::new(DMatrix::from_row_slice(dim, dim, entries))
    }

    pub fn dim(&self) -> usize {
        self.omega.nrows()
    }

    pub fn omega(&self) -> &DMatrix<f64> {
        &self.omega
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.inverse
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// `aᵀ Ω⁻¹ a`.
    pub fn inverse_quad_form(&self, a: &[f64]) -> f64 {
        let v = DVector::from_column_slice(a);
        v.dot(&(&self.inverse * &v))
    }

    fn quad_form(&self, x: &[f64], z: &[f64]) -> f64 {
        let d = self.dim();
        let mut acc = 0.0;
        for r in 0..d {
            let mut row = 0.0;
            for c in 0..d {
                row += self.omega[(r, c)] * (x[c] - z[c]);
            }
            acc += (x[r] - z[r]) * row;
        }
        acc
    }

    /// Writes `L⁻ᵀ g` into `out`.
    pub(crate) fn color(&self, g: &[f64], out: &mut [f64]) {
        let d = self.dim();
        for r in 0..d {
            out[r] = (r..d).map(|c| self.inv_chol_t[(r, c)] * g[c]).sum();
        }
    }
}

/// Transport cost plus entropic regularization `ε`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostSpec {
    pub kind: CostKind,
    epsilon: f64,
}

impl CostSpec {
    pub fn new(kind: CostKind, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidEpsilon(epsilon));
        }
        if let CostKind::FeatureLabel { kappa } = kind {
            if !(kappa >= 0.0) {
                return Err(Error::InvalidParameter {
                    name: "kappa",
                    value: kappa,
                });
            }
        }
        Ok(Self { kind, epsilon })
    }

    pub fn quadratic(epsilon: f64) -> Result<Self> {
        Self::new(CostKind::Quadratic, epsilon)
    }

    pub fn mahalanobis(omega: DMatrix<f64>, epsilon: f64) -> Result<Self> {
        Self::new(CostKind::Mahalanobis(Mahalanobis::new(omega)?), epsilon)
    }

    /// Feature/label cost with forbidden label flips (`κ = ∞`).
    pub fn feature_label(epsilon: f64) -> Result<Self> {
        Self::new(CostKind::FeatureLabel { kappa: f64::INFINITY }, epsilon)
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        Self::new(self.kind.clone(), epsilon)
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            CostKind::Quadratic => "quadratic",
            CostKind::Mahalanobis(_) => "mahalanobis",
            CostKind::FeatureLabel { .. } => "feature-label",
        }
    }

    pub fn eval(&self, x: &[f64], z: &[f64]) -> f64 {
        match &self.kind {
            CostKind::Quadratic => 0.5 * sq_dist(x, z),
            CostKind::Mahalanobis(m) => 0.5 * m.quad_form(x, z),
            CostKind::FeatureLabel { kappa } => {
                let d = x.len();
                if x[d - 1] == z[d - 1] {
                    0.5 * sq_dist(&x[..d - 1], &z[..d - 1])
                } else {
                    *kappa
                }
            }
        }
    }

    /// Dimension of the continuous (Gaussian) part of a `dim`-dimensional point.
    pub fn continuous_dim(&self, dim: usize) -> usize {
        match self.kind {
            CostKind::FeatureLabel { .. } => dim.saturating_sub(1),
            _ => dim,
        }
    }

    pub fn check_dim(&self, dim: usize) -> Result<()> {
        match &self.kind {
            CostKind::Mahalanobis(m) if m.dim() != dim => Err(Error::DimensionMismatch {
                expected: m.dim(),
                got: dim,
            }),
            CostKind::FeatureLabel { .. } if dim < 2 => Err(Error::DimensionMismatch { expected: 2, got: dim }),
            _ => Ok(()),
        }
    }

    /// `log ∫ exp(-c(x,z)/ε) dν(z)` for points of dimension `dim`.
    pub fn log_normalizer(&self, dim: usize) -> Result<f64> {
        self.check_dim(dim)?;
        let eps = self.epsilon;
        match &self.kind {
            CostKind::Quadratic => Ok(0.5 * dim as f64 * (2.0 * PI * eps).ln()),
            CostKind::Mahalanobis(m) => Ok(0.5 * (dim as f64 * (2.0 * PI * eps).ln() - m.log_det())),
            CostKind::FeatureLabel { kappa } => {
                if kappa.is_finite() {
                    // a flipped label costs κ for every feature vector
                    return Err(Error::InfiniteNormalizer("feature-label with finite kappa"));
                }
                Ok(0.5 * (dim - 1) as f64 * (2.0 * PI * eps).ln())
            }
        }
    }

    /// Log-density of `Q_{x,ε}` at `z` with respect to `ν`.
    pub fn kernel_log_density(&self, x: &[f64], z: &[f64]) -> Result<f64> {
        let c = self.eval(x, z);
        Ok(-c / self.epsilon - self.log_normalizer(x.len())?)
    }
}

/// Adjusted radius `ρ̄ = ρ + ε · log ∫ exp(-c(x,z)/ε) dν(z)`.
///
/// `dim` is the point dimension; for the feature/label cost it includes the
/// label coordinate.
pub fn compute_rho_bar(rho: f64, cost: &CostSpec, dim: usize) -> Result<f64> {
    if !(rho >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "rho",
            value: rho,
        });
    }
    Ok(rho + cost.epsilon() * cost.log_normalizer(dim)?)
}

/// Inverse of [`compute_rho_bar`].
pub fn rho_from_rho_bar(rho_bar: f64, cost: &CostSpec, dim: usize) -> Result<f64> {
    Ok(rho_bar - cost.epsilon() * cost.log_normalizer(dim)?)
}

pub(crate) fn sq_dist(x: &[f64], z: &[f64]) -> f64 {
    x.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Pairwise cost matrix, row-major `rows.len() × cols.len()`.
pub fn cost_matrix<R: AsRef<[f64]>, C: AsRef<[f64]>>(cost: &CostSpec, rows: &[R], cols: &[C]) -> Vec<f64> {
    let mut out = Vec::with_capacity(rows.len() * cols.len());
    for r in rows {
        for c in cols {
            out.push(cost.eval(r.as_ref(), c.as_ref()));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rho_bar_examples() {
        let c = CostSpec::quadratic(1.0 / (2.0 * PI)).unwrap();
        assert!((compute_rho_bar(0.3, &c, 1).unwrap() - 0.3).abs() < 1e-15);

        let c = CostSpec::quadratic(1.0).unwrap();
        assert!((compute_rho_bar(0.0, &c, 2).unwrap() - 1.837_877_066).abs() < 1e-8);

        let c = CostSpec::mahalanobis(DMatrix::from_element(1, 1, 4.0), 1.0).unwrap();
        assert!((compute_rho_bar(0.0, &c, 1).unwrap() - 0.225_791_352_6).abs() < 1e-9);
    }

    #[test]
    fn rho_bar_is_shift_by_constant() {
        let c = CostSpec::quadratic(0.3).unwrap();
        let base = compute_rho_bar(0.0, &c, 3).unwrap();
        for rho in [0.0, 0.1, 2.5] {
            let v = compute_rho_bar(rho, &c, 3).unwrap();
            assert!((v - base - rho).abs() < 1e-14);
            assert!((rho_from_rho_bar(v, &c, 3).unwrap() - rho).abs() < 1e-14);
        }
    }

    #[test]
    fn feature_label_shift_ignores_label() {
        let fl = CostSpec::feature_label(0.5).unwrap();
        let q = CostSpec::quadratic(0.5).unwrap();
        assert_eq!(
            compute_rho_bar(0.1, &fl, 4).unwrap(),
            compute_rho_bar(0.1, &q, 3).unwrap()
        );
        let finite = CostSpec::new(CostKind::FeatureLabel { kappa: 2.0 }, 0.5).unwrap();
        assert!(matches!(
            compute_rho_bar(0.1, &finite, 4),
            Err(Error::InfiniteNormalizer(_))
        ));
    }

    #[test]
    fn cost_is_nonnegative_and_zero_on_diagonal() {
        let omega = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let costs = [
            CostSpec::quadratic(1.0).unwrap(),
            CostSpec::mahalanobis(omega, 1.0).unwrap(),
            CostSpec::feature_label(1.0).unwrap(),
        ];
        let pts = [[0.0, 1.0], [1.5, -1.0], [-2.0, 1.0]];
        for c in &costs {
            for x in &pts {
                assert_eq!(c.eval(x, x), 0.0);
                for z in &pts {
                    assert!(c.eval(x, z) >= 0.0);
                }
            }
        }
        assert_eq!(costs[2].eval(&[0.0, 1.0], &[0.0, -1.0]), f64::INFINITY);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert_eq!(CostSpec::quadratic(0.0), Err(Error::InvalidEpsilon(0.0)));
        assert!(CostSpec::quadratic(-1.0).is_err());
        let not_pd = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert_eq!(CostSpec::mahalanobis(not_pd, 1.0), Err(Error::NotPositiveDefinite));
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.0, 1.0]);
        assert!(CostSpec::mahalanobis(asym, 1.0).is_err());
    }
}
