//! Funk transform: integrals of a function on the unit sphere over great circles.
//!
//! `(F g)(L) = ∫₀^{2π} g(cos t e1(L) + sin t e2(L)) dt`, where `e1, e2` span the
//! plane orthogonal to `L`. On a great circle a polynomial of degree `d` is a
//! trigonometric polynomial of degree `d`, so the equispaced rule below is exact
//! once it has more than `d` nodes.

mod checks;

pub use checks::{
    check_commutation, check_commutation_central, check_rotation_equivariance, commutation_bound, funk_hecke_eigenvalue_check,
    legendre, run_identity_checks, IdentityCheck,
};

use std::f64::consts::TAU;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::surface::DeformationField;

/// Momenta shorter than this have no well-defined great circle.
pub const MIN_MOMENTUM_NORM: f64 = 1e-12;

pub const DEFAULT_NODES: usize = 64;

/// A scalar function that can be sampled on the unit sphere.
pub trait SphereFunction {
    fn value(&self, x: &Vector3<f64>) -> f64;
}

impl SphereFunction for DeformationField {
    fn value(&self, x: &Vector3<f64>) -> f64 {
        self.eval(x)
    }
}

impl<F> SphereFunction for F
where
    F: Fn(&Vector3<f64>) -> f64,
{
    fn value(&self, x: &Vector3<f64>) -> f64 {
        self(x)
    }
}

/// Right-handed orthonormal frame with `e3` along the momentum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameBasis {
    pub e1: Vector3<f64>,
    pub e2: Vector3<f64>,
    pub e3: Vector3<f64>,
}

impl FrameBasis {
    /// The same circle parametrised from a different starting point, `e1` turned by
    /// `angle` about `e3`.
    pub fn rotated(&self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        let e1 = self.e1 * c + self.e2 * s;
        Self {
            e1,
            e2: self.e3.cross(&e1),
            e3: self.e3,
        }
    }

    /// Point at parameter `t` on the great circle orthogonal to `e3`.
    pub fn circle_point(&self, cos_t: f64, sin_t: f64) -> Vector3<f64> {
        self.e1 * cos_t + self.e2 * sin_t
    }
}

/// Deterministic frame for `L`.
///
/// The seed axis is the standard basis vector along the smallest component of
/// `L/|L|` (first one on ties); `e1` is its normalized projection orthogonal to
/// `e3`, and `e2 = e3 × e1`.
pub fn orthonormal_frame(l: &Vector3<f64>) -> Result<FrameBasis> {
    let norm = l.norm();
    if !(norm > MIN_MOMENTUM_NORM) {
        return Err(Error::ZeroMomentum(norm));
    }
    let e3 = l / norm;
    let mut axis = 0;
    for i in 1..3 {
        if e3[i].abs() < e3[axis].abs() {
            axis = i;
        }
    }
    let mut seed = Vector3::zeros();
    seed[axis] = 1.0;
    let e1 = (seed - e3 * e3[axis]).normalize();
    let e2 = e3.cross(&e1);
    Ok(FrameBasis { e1, e2, e3 })
}

/// Equispaced periodic trapezoid rule on `[0, 2π)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl QuadratureRule {
    pub fn new(n_nodes: usize) -> Result<Self> {
        if n_nodes == 0 {
            return Err(Error::InvalidParameter(
                "quadrature needs at least one node".into(),
            ));
        }
        let mut cos = vec![0.0; n_nodes];
        let mut sin = vec![0.0; n_nodes];
        // With an even count the second half is the exact negation of the first,
        // so antipodal node pairs cancel bit-for-bit on odd integrands.
        let half = if n_nodes.is_multiple_of(2) { n_nodes / 2 } else { n_nodes };
        for k in 0..half {
            let t = TAU * k as f64 / n_nodes as f64;
            let (s, c) = t.sin_cos();
            cos[k] = c;
            sin[k] = s;
            if half < n_nodes {
                cos[k + half] = -c;
                sin[k + half] = -s;
            }
        }
        Ok(Self { cos, sin })
    }

    pub fn n_nodes(&self) -> usize {
        self.cos.len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        let n = self.n_nodes();
        (0..n).map(move |k| TAU * k as f64 / n as f64)
    }

    pub fn weight(&self) -> f64 {
        TAU / self.n_nodes() as f64
    }

    /// Points of the great circle of `frame` at the rule's nodes.
    pub fn circle<'a>(&'a self, frame: &'a FrameBasis) -> impl Iterator<Item = Vector3<f64>> + 'a {
        self.cos
            .iter()
            .zip(&self.sin)
            .map(move |(c, s)| frame.circle_point(*c, *s))
    }
}

impl QuadratureRule {
    // Sums g over the circle, adding antipodal nodes pairwise first when the
    // node count is even so that odd integrands cancel exactly.
    fn paired_sum<T, G>(&self, frame: &FrameBasis, zero: T, g: G) -> T
    where
        T: std::ops::Add<Output = T> + Copy,
        G: Fn(&Vector3<f64>) -> T,
    {
        let n = self.n_nodes();
        let point = |k: usize| frame.circle_point(self.cos[k], self.sin[k]);
        if n.is_multiple_of(2) {
            let half = n / 2;
            (0..half).fold(zero, |acc, k| acc + (g(&point(k)) + g(&point(k + half))))
        } else {
            (0..n).fold(zero, |acc, k| acc + g(&point(k)))
        }
    }
}

impl Default for QuadratureRule {
    fn default() -> Self {
        Self::new(DEFAULT_NODES).expect("default rule")
    }
}

/// `(F g)(L)` with the default frame of `L`.
pub fn funk_transform<G>(g: &G, l: &Vector3<f64>, rule: &QuadratureRule) -> Result<f64>
where
    G: SphereFunction + ?Sized,
{
    let frame = orthonormal_frame(l)?;
    Ok(funk_transform_in_frame(g, &frame, rule))
}

pub fn funk_transform_in_frame<G>(g: &G, frame: &FrameBasis, rule: &QuadratureRule) -> f64
where
    G: SphereFunction + ?Sized,
{
    rule.paired_sum(frame, 0.0, |x| g.value(x)) * rule.weight()
}

/// Componentwise Funk transform of a vector-valued function.
pub fn funk_transform_vector<G>(g: G, l: &Vector3<f64>, rule: &QuadratureRule) -> Result<Vector3<f64>>
where
    G: Fn(&Vector3<f64>) -> Vector3<f64>,
{
    let frame = orthonormal_frame(l)?;
    Ok(rule.paired_sum(&frame, Vector3::zeros(), g) * rule.weight())
}

/// `(l g)(x) = x × ∇g(x)`, the infinitesimal rotations applied to `g`.
pub fn angular_operator(g: &DeformationField, x: &Vector3<f64>) -> Vector3<f64> {
    x.cross(&g.grad(x))
}

/// A proper rotation matrix, checked on construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(Matrix3<f64>);

impl Rotation {
    pub const TOLERANCE: f64 = 1e-12;

    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self> {
        let orthogonality = (m.transpose() * m - Matrix3::identity()).abs().max();
        let det = m.determinant();
        if !(orthogonality <= Self::TOLERANCE) || !((det - 1.0).abs() <= Self::TOLERANCE) {
            return Err(Error::NotARotation { orthogonality, det });
        }
        Ok(Self(m))
    }

    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    /// Rotation by `angle` about coordinate axis `axis` (0, 1, 2), right-handed.
    pub fn about_axis(axis: usize, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        let m = match axis {
            0 => Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c),
            1 => Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c),
            2 => Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0),
            _ => panic!("axis index {axis} out of range"),
        };
        Self(m)
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn inverse(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn apply(&self, x: &Vector3<f64>) -> Vector3<f64> {
        self.0 * x
    }

    pub fn apply_inverse(&self, x: &Vector3<f64>) -> Vector3<f64> {
        self.0.tr_mul(x)
    }
}

/// `(R g)(x) = g(R⁻¹ x)` for any sampled function.
pub struct Rotated<'a, G: ?Sized> {
    pub inner: &'a G,
    pub rotation: Rotation,
}

impl<G: SphereFunction + ?Sized> SphereFunction for Rotated<'_, G> {
    fn value(&self, x: &Vector3<f64>) -> f64 {
        self.inner.value(&self.rotation.apply_inverse(x))
    }
}

/// `(R g)(x) = g(Rᵀ x)` with the coefficients transformed exactly.
pub fn rotate_field(g: &DeformationField, rotation: &Rotation) -> DeformationField {
    g.compose_linear(&rotation.matrix().transpose())
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{FRAC_PI_2, PI};

    use super::*;
    use crate::sampling::{random_polynomial, random_rotation, random_unit_vector, seeded_rng};

    fn v(a: f64, b: f64, c: f64) -> Vector3<f64> {
        Vector3::new(a, b, c)
    }

    fn gram_error(f: &FrameBasis) -> f64 {
        let m = Matrix3::from_columns(&[f.e1, f.e2, f.e3]);
        (m.transpose() * m - Matrix3::identity()).abs().max()
    }

    #[test]
    fn frame_examples() {
        let f = orthonormal_frame(&v(0.0, 0.0, 1.0)).unwrap();
        assert_eq!(f.e3, v(0.0, 0.0, 1.0));
        assert_eq!(f.e1, v(1.0, 0.0, 0.0));
        assert_eq!(f.e2, v(0.0, 1.0, 0.0));

        let f = orthonormal_frame(&v(0.0, 0.0, -5.0)).unwrap();
        assert_eq!(f.e3, v(0.0, 0.0, -1.0));
        assert!((f.e1.cross(&f.e2) - f.e3).norm() < 1e-15);

        let mut rng = seeded_rng(11);
        for _ in 0..200 {
            let l = random_unit_vector(&mut rng) * 3.7;
            let f = orthonormal_frame(&l).unwrap();
            assert!(gram_error(&f) < 1e-14);
            assert!((f.e1.cross(&f.e2) - f.e3).norm() < 1e-14);
        }
        assert!(matches!(
            orthonormal_frame(&v(1e-13, 0.0, 0.0)),
            Err(Error::ZeroMomentum(_))
        ));
    }

    #[test]
    fn rule_weights_and_nodes() {
        for n in [1, 5, 64, 65] {
            let r = QuadratureRule::new(n).unwrap();
            assert!((r.weight() * n as f64 - TAU).abs() < 1e-14);
            let nodes: Vec<f64> = r.nodes().collect();
            assert_eq!(nodes[0], 0.0);
            assert!(nodes.windows(2).all(|w| w[1] > w[0]));
            assert!(*nodes.last().unwrap() < TAU);
        }
        assert!(QuadratureRule::new(0).is_err());
    }

    #[test]
    fn transform_examples() {
        let rule = QuadratureRule::default();
        let one = |_: &Vector3<f64>| 1.0;
        let l = v(0.3, -0.5, 0.8);
        assert!((funk_transform(&one, &l, &rule).unwrap() - TAU).abs() < 1e-13);

        let fine = QuadratureRule::new(512).unwrap();
        let z2 = DeformationField::monomial([0, 0, 2], 1.0);
        let lu = l.normalize();
        let closed = PI * (1.0 - lu[2] * lu[2]);
        assert!((funk_transform(&z2, &l, &rule).unwrap() - closed).abs() < 1e-13);
        assert!((funk_transform(&z2, &l, &fine).unwrap() - closed).abs() < 1e-12);

        let z = DeformationField::coordinate(2);
        assert!(funk_transform(&z, &l, &rule).unwrap().abs() < 1e-14);
    }

    #[test]
    fn angular_operator_examples() {
        let z2 = DeformationField::monomial([0, 0, 2], 1.0);
        assert_eq!(angular_operator(&z2, &v(0.0, 0.0, 1.0)), Vector3::zeros());
        let x2 = DeformationField::monomial([2, 0, 0], 1.0);
        assert_eq!(angular_operator(&x2, &v(0.0, 1.0, 0.0)), Vector3::zeros());
        let xy = DeformationField::monomial([1, 1, 0], 1.0);
        assert_eq!(angular_operator(&xy, &v(1.0, 0.0, 0.0)), v(0.0, 0.0, 1.0));
    }

    #[test]
    fn rotation_examples() {
        let g = DeformationField::from_terms([([2, 1, 0], 1.0), ([0, 0, 3], -0.5)]).unwrap();
        assert_eq!(rotate_field(&g, &Rotation::identity()), g);

        // R3(π/2) maps e1 to e2, so x1 ∘ R3⁻¹ = x2.
        let x1 = DeformationField::coordinate(0);
        let r = Rotation::about_axis(2, FRAC_PI_2);
        let rotated = rotate_field(&x1, &r).pruned(1e-15);
        assert!((rotated.coefficient([0, 1, 0]) - 1.0).abs() < 1e-15);
        assert_eq!(rotated.len(), 1);

        let mut rng = seeded_rng(3);
        for _ in 0..20 {
            let r = random_rotation(&mut rng);
            let g = random_polynomial(&mut rng, 5);
            let back = rotate_field(&rotate_field(&g, &r), &r.inverse());
            assert!(back.max_coefficient_difference(&g) < 1e-12);
        }
    }

    #[test]
    fn non_rotations_rejected() {
        assert!(Rotation::from_matrix(Matrix3::identity() * 2.0).is_err());
        let reflection = Matrix3::new(-1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(matches!(
            Rotation::from_matrix(reflection),
            Err(Error::NotARotation { .. })
        ));
        assert!(Rotation::from_matrix(*Rotation::about_axis(1, 0.3).matrix()).is_ok());
    }

    #[test]
    fn rotated_wrapper_matches_polynomial_rotation() {
        let mut rng = seeded_rng(8);
        let g = random_polynomial(&mut rng, 4);
        let r = random_rotation(&mut rng);
        let wrapped = Rotated { inner: &g, rotation: r };
        let poly = rotate_field(&g, &r);
        for _ in 0..10 {
            let x = random_unit_vector(&mut rng);
            assert!((wrapped.value(&x) - poly.eval(&x)).abs() < 1e-13);
        }
    }

    #[test]
    fn frame_choice_does_not_matter() {
        let mut rng = seeded_rng(21);
        let rule = QuadratureRule::default();
        for _ in 0..50 {
            let g = random_polynomial(&mut rng, 6);
            let l = random_unit_vector(&mut rng);
            let f = orthonormal_frame(&l).unwrap();
            let a = funk_transform_in_frame(&g, &f, &rule);
            let b = funk_transform_in_frame(&g, &f.rotated(1.234), &rule);
            assert!((a - b).abs() < 1e-12);
        }
    }
}
