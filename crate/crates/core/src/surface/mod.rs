//! The deformed sphere `φ(x) = Σ x_i² - 1 + ε ψ(x) = 0`.

mod config;
mod polynomial;

pub use config::{PsiPreset, SurfaceFile};
pub use polynomial::{DeformationField, Exponents, DEFAULT_MAX_DEGREE};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Above this strength the first-order expansion is not trusted; a warning is logged.
pub const EPSILON_WARN_THRESHOLD: f64 = 0.2;

/// Radial bracket searched by [`SurfaceConfig::project`].
pub const PROJECTION_BRACKET: (f64, f64) = (0.5, 1.5);

/// Perturbation strength plus deformation polynomial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceConfig {
    epsilon: f64,
    psi: DeformationField,
}

impl SurfaceConfig {
    pub fn new(epsilon: f64, psi: DeformationField) -> Result<Self> {
        if !epsilon.is_finite() || epsilon < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be finite and non-negative, got {epsilon}"
            )));
        }
        if epsilon > EPSILON_WARN_THRESHOLD {
            log::warn!(
                "epsilon = {epsilon} exceeds {EPSILON_WARN_THRESHOLD}; the averaged description assumes a weak deformation"
            );
        }
        Ok(Self { epsilon, psi })
    }

    /// The round unit sphere.
    pub fn round() -> Self {
        Self {
            epsilon: 0.0,
            psi: DeformationField::zero(),
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn psi(&self) -> &DeformationField {
        &self.psi
    }

    /// Same deformation at a different strength.
    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        Self::new(epsilon, self.psi.clone())
    }

    pub fn phi(&self, x: &Vector3<f64>) -> f64 {
        x.norm_squared() - 1.0 + self.epsilon * self.psi.eval(x)
    }

    /// `∇φ = 2x + ε∇ψ`.
    pub fn phi_grad(&self, x: &Vector3<f64>) -> Vector3<f64> {
        2.0 * x + self.epsilon * self.psi.grad(x)
    }

    pub fn phi_hess(&self, x: &Vector3<f64>) -> Matrix3<f64> {
        Matrix3::identity() * 2.0 + self.psi.hess(x) * self.epsilon
    }

    /// Radial projection onto `φ = 0`.
    ///
    /// Solves `φ(r x̂) = 0` for `r` in [`PROJECTION_BRACKET`] by Newton's method,
    /// falling back to bisection whenever a Newton step leaves the bracket.
    pub fn project(&self, x0: &Vector3<f64>) -> Result<Vector3<f64>> {
        let norm = x0.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "cannot project {:?} radially",
                x0.as_slice()
            )));
        }
        let dir = x0 / norm;
        let f = |r: f64| self.phi(&(dir * r));
        let df = |r: f64| {
            let p = dir * r;
            2.0 * r + self.epsilon * self.psi.grad(&p).dot(&dir)
        };

        let (mut lo, mut hi) = PROJECTION_BRACKET;
        let mut f_lo = f(lo);
        let f_hi = f(hi);
        if f_lo * f_hi > 0.0 {
            return Err(Error::NoRootInBracket {
                lo,
                hi,
                direction: [dir[0], dir[1], dir[2]],
            });
        }

        let mut r = if norm > lo && norm < hi { norm } else { 0.5 * (lo + hi) };
        for _ in 0..200 {
            let fr = f(r);
            if fr.abs() <= 1e-15 {
                break;
            }
            if (fr < 0.0) == (f_lo < 0.0) {
                lo = r;
                f_lo = fr;
            } else {
                hi = r;
            }
            let slope = df(r);
            let newton = r - fr / slope;
            let next = if slope != 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if (next - r).abs() <= 1e-16 * r {
                r = next;
                break;
            }
            r = next;
        }

        let out = dir * r;
        let residual = self.phi(&out);
        if residual.abs() >= 1e-12 {
            return Err(Error::NoRootInBracket {
                lo: PROJECTION_BRACKET.0,
                hi: PROJECTION_BRACKET.1,
                direction: [dir[0], dir[1], dir[2]],
            });
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(a: f64, b: f64, c: f64) -> Vector3<f64> {
        Vector3::new(a, b, c)
    }

    #[test]
    fn phi_examples() {
        let round = SurfaceConfig::round();
        assert_eq!(round.phi(&v(1.0, 0.0, 0.0)), 0.0);
        assert_eq!(round.phi_grad(&v(1.0, 0.0, 0.0)), v(2.0, 0.0, 0.0));
        assert_eq!(round.phi(&v(0.0, 0.0, 2.0)), 3.0);

        let s = SurfaceConfig::new(0.1, DeformationField::monomial([0, 0, 2], 1.0)).unwrap();
        assert!((s.phi(&v(0.0, 0.0, 1.0)) - 0.1).abs() < 1e-15);
        assert!((s.phi_grad(&v(0.0, 0.0, 1.0)) - v(0.0, 0.0, 2.2)).norm() < 1e-15);
    }

    #[test]
    fn negative_epsilon_rejected() {
        assert!(SurfaceConfig::new(-0.01, DeformationField::zero()).is_err());
        assert!(SurfaceConfig::new(f64::NAN, DeformationField::zero()).is_err());
        // Large values only warn.
        assert!(SurfaceConfig::new(0.3, DeformationField::zero()).is_ok());
    }

    #[test]
    fn projection_examples() {
        let round = SurfaceConfig::round();
        let p = round.project(&v(3.0, 4.0, 0.0)).unwrap();
        assert!((p - v(0.6, 0.8, 0.0)).norm() < 1e-15);

        // r²(1 + 0.1) = 1.
        let s = SurfaceConfig::new(0.1, DeformationField::ellipsoid([1.0, 1.0, 1.0])).unwrap();
        let p = s.project(&v(0.0, 0.0, 1.0)).unwrap();
        assert!((p[2] - (1.0f64 / 1.1).sqrt()).abs() < 1e-15);
        assert!(s.phi(&p).abs() < 1e-12);
    }

    #[test]
    fn projection_is_idempotent() {
        let s = SurfaceConfig::new(
            0.08,
            DeformationField::from_terms([([2, 0, 0], 1.0), ([1, 1, 1], -2.0), ([0, 0, 3], 0.5)])
                .unwrap(),
        )
        .unwrap();
        for x0 in [v(0.3, 0.2, -0.9), v(-4.0, 1.0, 2.0), v(0.01, 0.0, 0.0)] {
            let p = s.project(&x0).unwrap();
            assert!(s.phi(&p).abs() < 1e-12);
            let q = s.project(&p).unwrap();
            assert!((q - p).norm() < 1e-12);
        }
    }

    #[test]
    fn projection_fails_without_root() {
        // φ(r x̂) = r² - 1 + 10 r² > 0 on the whole bracket.
        let s = SurfaceConfig::new(10.0, DeformationField::constant(1.0)).unwrap();
        let err = s.project(&v(1.0, 0.0, 0.0)).unwrap_err();
        assert!(matches!(err, Error::NoRootInBracket { .. }));
        assert!(SurfaceConfig::round().project(&Vector3::zeros()).is_err());
    }
}
