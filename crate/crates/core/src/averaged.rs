//! The averaged momentum flow on the sphere `|L| = const`.
//!
//! Averaging `L̇` over one revolution along the great circle orthogonal to `L`
//! gives `L̇ = -(ε/2π) F(x × ∇ψ)(L)`. Since the Funk transform commutes with the
//! infinitesimal rotations `x × ∂/∂x`, this equals `-(ε/2π) L × ∇_L(Fψ)`, i.e.
//! `L̇ = {L, H}` with `H = (ε/2π) Fψ` and `{L_i, L_j} = ε_ijk L_k`.
//!
//! A note on strength: `H` above is the averaged Hamiltonian for a force along
//! `x + ε∇ψ`. Geodesics on `Σx² - 1 + εψ = 0` feel a force along
//! `x + (ε/2)∇ψ` (see [`crate::dynamics`]), so their averaged flow is `H` at
//! strength `ε/2`; [`geodesic_reduced_surface`] performs that mapping.

use std::f64::consts::TAU;
use std::io::Write;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::funk::{funk_transform, funk_transform_vector, QuadratureRule, MIN_MOMENTUM_NORM};
use crate::surface::{DeformationField, SurfaceConfig};

/// Default finite-difference step of [`averaged_field_gradient`].
pub const DEFAULT_GRADIENT_STEP: f64 = 1e-5;

/// A nonzero angular momentum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentumPoint(Vector3<f64>);

impl MomentumPoint {
    pub fn new(l: Vector3<f64>) -> Result<Self> {
        let n = l.norm();
        if !(n > MIN_MOMENTUM_NORM) || !n.is_finite() {
            return Err(Error::ZeroMomentum(n));
        }
        Ok(Self(l))
    }

    pub fn vector(&self) -> &Vector3<f64> {
        &self.0
    }

    pub fn direction(&self) -> Vector3<f64> {
        self.0.normalize()
    }
}

fn check_momentum(l: &Vector3<f64>) -> Result<()> {
    MomentumPoint::new(*l).map(|_| ())
}

/// The surface whose averaged Hamiltonian describes geodesics on `surface`:
/// same `ψ`, strength `ε/2`.
pub fn geodesic_reduced_surface(surface: &SurfaceConfig) -> SurfaceConfig {
    surface
        .with_epsilon(0.5 * surface.epsilon())
        .expect("halving a valid strength stays valid")
}

/// `H(L) = (ε/2π) (Fψ)(L)`; depends on the direction of `L` only.
pub fn hamiltonian(l: &Vector3<f64>, surface: &SurfaceConfig, rule: &QuadratureRule) -> Result<f64> {
    let f = funk_transform(surface.psi(), l, rule)?;
    Ok(surface.epsilon() / TAU * f)
}

/// Closed form of `H` when `ψ = c + Σ a_i x_i²`: `εc + (ε/2) Σ a_i (1 - L̂_i²)`.
pub fn hamiltonian_closed_form(l: &Vector3<f64>, surface: &SurfaceConfig) -> Option<f64> {
    let (c0, a) = surface.psi().as_diagonal_quadratic()?;
    let u = l.try_normalize(MIN_MOMENTUM_NORM)?;
    let eps = surface.epsilon();
    Some(eps * c0 + 0.5 * eps * (0..3).map(|i| a[i] * (1.0 - u[i] * u[i])).sum::<f64>())
}

/// `-(ε/2π) F(x × ∇ψ)(L)`: the averaged momentum equation as written, with no
/// differencing.
pub fn averaged_field_direct(
    l: &Vector3<f64>,
    surface: &SurfaceConfig,
    rule: &QuadratureRule,
) -> Result<Vector3<f64>> {
    let psi = surface.psi();
    let f = funk_transform_vector(|x| x.cross(&psi.grad(x)), l, rule)?;
    Ok(f * (-surface.epsilon() / TAU))
}

/// `-(ε/2π) L × ∇_L(Fψ)` with the gradient from central differences of the
/// transform (step `h`), or from the closed form for diagonal quadratics.
pub fn averaged_field_gradient(
    l: &Vector3<f64>,
    surface: &SurfaceConfig,
    rule: &QuadratureRule,
    h: f64,
) -> Result<Vector3<f64>> {
    check_momentum(l)?;
    if let Some((_, a)) = surface.psi().as_diagonal_quadratic() {
        // ∇H ∝ -ε (a_i L_i) up to a radial part; L̇ = -L × ∇H.
        let u = l.normalize();
        let au = Vector3::new(a[0] * u[0], a[1] * u[1], a[2] * u[2]);
        return Ok(u.cross(&au) * surface.epsilon());
    }
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!("gradient step must be positive, got {h}")));
    }
    let grad = transform_gradient(surface.psi(), l, rule, h)?;
    Ok(l.cross(&grad) * (-surface.epsilon() / TAU))
}

fn transform_gradient(
    psi: &DeformationField,
    l: &Vector3<f64>,
    rule: &QuadratureRule,
    h: f64,
) -> Result<Vector3<f64>> {
    let mut grad = Vector3::zeros();
    for i in 0..3 {
        let mut step = Vector3::zeros();
        step[i] = h;
        let plus = funk_transform(psi, &(l + step), rule)?;
        let minus = funk_transform(psi, &(l - step), rule)?;
        grad[i] = (plus - minus) / (2.0 * h);
    }
    Ok(grad)
}

/// `{f, g}(L) = Σ ε_ijk L_k ∂_i f ∂_j g`.
pub fn lie_poisson_bracket(l: &Vector3<f64>, grad_f: &Vector3<f64>, grad_g: &Vector3<f64>) -> f64 {
    let mut sum = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                sum += levi_civita(i, j, k) * l[k] * grad_f[i] * grad_g[j];
            }
        }
    }
    sum
}

fn levi_civita(i: usize, j: usize, k: usize) -> f64 {
    match (i, j, k) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

/// `{G, L_i}` for each `i`, from the structure constants.
pub fn bracket_with_momentum(l: &Vector3<f64>, g: &DeformationField) -> Vector3<f64> {
    let grad = g.grad(l);
    Vector3::from_fn(|i, _| {
        let mut e = Vector3::zeros();
        e[i] = 1.0;
        lie_poisson_bracket(l, &grad, &e)
    })
}

/// Componentwise `|{G, L} - L × ∇G|`; both sides are exact algebra.
pub fn poisson_bracket_structure_check(l: &Vector3<f64>, g: &DeformationField) -> Vector3<f64> {
    let structural = bracket_with_momentum(l, g);
    let cross = l.cross(&g.grad(l));
    (structural - cross).abs()
}

/// Sampled reduced trajectory.
#[derive(Debug, Clone, Default)]
pub struct ReducedPath {
    pub times: Vec<f64>,
    pub points: Vec<Vector3<f64>>,
    pub energies: Vec<f64>,
    /// Largest `||L| - |L0||` produced by a single RK4 step before renormalization.
    pub max_casimir_step_drift: f64,
}

impl ReducedPath {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn max_energy_drift(&self) -> f64 {
        let Some(h0) = self.energies.first() else {
            return 0.0;
        };
        self.energies.iter().map(|h| (h - h0).abs()).fold(0.0, f64::max)
    }

    /// CSV with header `t,L1,L2,L3,H`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,L1,L2,L3,H")?;
        for ((t, l), h) in self.times.iter().zip(&self.points).zip(&self.energies) {
            writeln!(out, "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}", t, l[0], l[1], l[2], h)?;
        }
        Ok(())
    }
}

/// RK4 on `L̇ = averaged_field_direct(L)`, then rescale to `radius`.
/// Returns the new point and the pre-rescaling drift `||L| - radius|`.
pub fn reduced_step(
    l: &Vector3<f64>,
    surface: &SurfaceConfig,
    rule: &QuadratureRule,
    h: f64,
    radius: f64,
) -> Result<(Vector3<f64>, f64)> {
    let f = |p: &Vector3<f64>| averaged_field_direct(p, surface, rule);
    let k1 = f(l)?;
    let k2 = f(&(l + k1 * (0.5 * h)))?;
    let k3 = f(&(l + k2 * (0.5 * h)))?;
    let k4 = f(&(l + k3 * h))?;
    let raw = l + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    let norm = raw.norm();
    if !(norm > MIN_MOMENTUM_NORM) {
        return Err(Error::ZeroMomentum(norm));
    }
    Ok((raw * (radius / norm), (norm - radius).abs()))
}

/// Integrates the reduced flow over `⌈t_end/dt⌉` equal steps, storing every step.
pub fn integrate_averaged(
    l0: &Vector3<f64>,
    surface: &SurfaceConfig,
    t_end: f64,
    dt: f64,
    rule: &QuadratureRule,
) -> Result<ReducedPath> {
    integrate_averaged_with_stride(l0, surface, t_end, dt, rule, 1)
}

pub fn integrate_averaged_with_stride(
    l0: &Vector3<f64>,
    surface: &SurfaceConfig,
    t_end: f64,
    dt: f64,
    rule: &QuadratureRule,
    stride: usize,
) -> Result<ReducedPath> {
    if !(dt > 0.0) || !(t_end > 0.0) || !dt.is_finite() || !t_end.is_finite() || stride == 0 {
        return Err(Error::InvalidParameter(format!(
            "need dt > 0, t_end > 0 and stride > 0, got dt = {dt}, t_end = {t_end}, stride = {stride}"
        )));
    }
    let start = MomentumPoint::new(*l0)?;
    let radius = start.vector().norm();
    let steps = (t_end / dt - 1e-9).ceil().max(1.0) as usize;
    let h = t_end / steps as f64;

    let mut path = ReducedPath::default();
    let mut l = *start.vector();
    path.times.push(0.0);
    path.points.push(l);
    path.energies.push(hamiltonian(&l, surface, rule)?);
    for k in 1..=steps {
        let (next, drift) = reduced_step(&l, surface, rule, h, radius)?;
        path.max_casimir_step_drift = path.max_casimir_step_drift.max(drift);
        l = next;
        if k % stride == 0 || k == steps {
            path.times.push(h * k as f64);
            path.points.push(l);
            path.energies.push(hamiltonian(&l, surface, rule)?);
        }
    }
    Ok(path)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::FRAC_1_SQRT_2;

    use super::*;
    use crate::sampling::{random_odd_polynomial, random_polynomial, random_unit_vector, seeded_rng};

    fn v(a: f64, b: f64, c: f64) -> Vector3<f64> {
        Vector3::new(a, b, c)
    }

    fn surface(eps: f64, psi: DeformationField) -> SurfaceConfig {
        SurfaceConfig::new(eps, psi).unwrap()
    }

    #[test]
    fn hamiltonian_examples() {
        let rule = QuadratureRule::default();
        let mut rng = seeded_rng(2);
        let odd = surface(0.05, random_odd_polynomial(&mut rng, 7));
        let constant = surface(0.05, DeformationField::constant(3.0));
        let ell = surface(0.05, DeformationField::ellipsoid([1.0, 2.0, 3.0]));
        for _ in 0..20 {
            let l = random_unit_vector(&mut rng);
            assert!(hamiltonian(&l, &odd, &rule).unwrap().abs() < 1e-14);
            assert!((hamiltonian(&l, &constant, &rule).unwrap() - 0.15).abs() < 1e-15);
            // (ε/2) Σ a_i (1 - L_i²), from F(x_i²) = π(1 - L_i²).
            let closed = 0.025 * (1.0 * (1.0 - l[0] * l[0]) + 2.0 * (1.0 - l[1] * l[1]) + 3.0 * (1.0 - l[2] * l[2]));
            let h = hamiltonian(&l, &ell, &rule).unwrap();
            assert!((h - closed).abs() < 1e-15);
            assert!((hamiltonian_closed_form(&l, &ell).unwrap() - closed).abs() < 1e-15);
            assert!((hamiltonian(&(l * 3.0), &ell, &rule).unwrap() - h).abs() < 1e-15);
        }
        assert!(matches!(
            hamiltonian(&Vector3::zeros(), &ell, &rule),
            Err(Error::ZeroMomentum(_))
        ));
    }

    #[test]
    fn direct_field_examples() {
        let rule = QuadratureRule::default();
        let zero = surface(0.05, DeformationField::zero());
        assert_eq!(averaged_field_direct(&v(0.2, 0.3, 0.9), &zero, &rule).unwrap(), Vector3::zeros());

        let round = surface(0.05, DeformationField::ellipsoid([0.7, 0.7, 0.7]));
        let mut rng = seeded_rng(4);
        for _ in 0..20 {
            let l = random_unit_vector(&mut rng);
            assert!(averaged_field_direct(&l, &round, &rule).unwrap().norm() < 1e-15);
        }

        let x2 = surface(0.05, DeformationField::monomial([2, 0, 0], 1.0));
        assert!(averaged_field_direct(&v(0.0, 0.0, 1.0), &x2, &rule).unwrap().norm() < 1e-16);
        let l = v(FRAC_1_SQRT_2, 0.0, FRAC_1_SQRT_2);
        let direct = averaged_field_direct(&l, &x2, &rule).unwrap();
        assert!(direct.norm() > 1e-3);
        let grad = averaged_field_gradient(&l, &x2, &rule, DEFAULT_GRADIENT_STEP).unwrap();
        assert!((direct - grad).norm() < 1e-8);
    }

    #[test]
    fn ellipsoid_gradient_field_is_euler_top() {
        let rule = QuadratureRule::default();
        let a = [1.0, 2.0, 3.0];
        let s = surface(0.05, DeformationField::ellipsoid(a));
        let l = v(0.48, -0.6, 0.64);
        let expected = l.cross(&v(a[0] * l[0], a[1] * l[1], a[2] * l[2])) * 0.05;
        let closed = averaged_field_gradient(&l, &s, &rule, DEFAULT_GRADIENT_STEP).unwrap();
        assert!((closed - expected).norm() < 1e-16);
        let direct = averaged_field_direct(&l, &s, &rule).unwrap();
        assert!((direct - expected).norm() < 1e-15);
    }

    #[test]
    fn direct_and_gradient_fields_agree() {
        let rule = QuadratureRule::default();
        let mut rng = seeded_rng(9);
        for _ in 0..30 {
            let s = surface(0.05, random_polynomial(&mut rng, 6));
            let l = random_unit_vector(&mut rng);
            let direct = averaged_field_direct(&l, &s, &rule).unwrap();
            let grad = averaged_field_gradient(&l, &s, &rule, DEFAULT_GRADIENT_STEP).unwrap();
            assert!((direct - grad).norm() < 1e-6);
            assert!(direct.dot(&l).abs() <= 1e-8 * direct.norm().max(1e-300));
        }
    }

    #[test]
    fn poisson_bracket_examples() {
        let l = v(1.0, 0.0, 0.0);
        let l3 = DeformationField::coordinate(2);
        assert_eq!(poisson_bracket_structure_check(&l, &l3), Vector3::zeros());
        // {L3, L1} = L2, {L3, L2} = -L1.
        assert_eq!(bracket_with_momentum(&l, &l3), v(0.0, -1.0, 0.0));

        let casimir = DeformationField::ellipsoid([1.0, 1.0, 1.0]);
        let p = v(0.3, -0.4, 1.2);
        assert_eq!(bracket_with_momentum(&p, &casimir), Vector3::zeros());

        // Basis brackets.
        let e = |i: usize| Vector3::from_fn(|k, _| if k == i { 1.0 } else { 0.0 });
        for i in 0..3 {
            for j in 0..3 {
                let expected = (0..3).map(|k| levi_civita(i, j, k) * p[k]).sum::<f64>();
                assert_eq!(lie_poisson_bracket(&p, &e(i), &e(j)), expected);
            }
        }

        // With G = H of the ellipsoid, L̇ = {L, H} = -{H, L}.
        let rule = QuadratureRule::default();
        let a = [1.0, 2.0, 3.0];
        let s = surface(0.05, DeformationField::ellipsoid(a));
        let h_poly = &DeformationField::constant(0.025 * 6.0)
            - &DeformationField::ellipsoid([0.025 * a[0], 0.025 * a[1], 0.025 * a[2]]);
        let q = v(0.48, -0.6, 0.64);
        assert!(poisson_bracket_structure_check(&q, &h_poly).max() < 1e-16);
        let flow = -bracket_with_momentum(&q, &h_poly);
        let field = averaged_field_gradient(&q, &s, &rule, DEFAULT_GRADIENT_STEP).unwrap();
        assert!((flow - field).norm() < 1e-16);
    }

    #[test]
    fn odd_deformation_does_not_move_momentum() {
        let rule = QuadratureRule::default();
        let mut rng = seeded_rng(12);
        let s = surface(0.05, random_odd_polynomial(&mut rng, 5));
        let l0 = v(0.2, -0.5, 0.84);
        let path = integrate_averaged(&l0, &s, 20.0, 0.1, &rule).unwrap();
        for p in &path.points {
            assert_eq!(*p, l0);
        }
    }

    #[test]
    fn ellipsoid_orbits_stay_near_stable_axes() {
        let rule = QuadratureRule::default();
        let s = surface(0.05, DeformationField::ellipsoid([1.0, 2.0, 3.0]));
        for axis in [0usize, 2] {
            let mut l0 = v(0.05, 0.05, 0.05);
            l0[axis] = 1.0;
            let l0 = l0.normalize();
            let path = integrate_averaged(&l0, &s, 400.0, 0.2, &rule).unwrap();
            let min_cos = path.points.iter().map(|p| p[axis].abs()).fold(1.0, f64::min);
            assert!(min_cos > 0.98, "axis {axis}: {min_cos}");
        }
        // Near the middle axis the orbit follows the separatrix far away.
        let l0 = v(0.02, 1.0, 0.02).normalize();
        let path = integrate_averaged(&l0, &s, 400.0, 0.2, &rule).unwrap();
        let min_cos = path.points.iter().map(|p| p[1].abs()).fold(1.0, f64::min);
        assert!(min_cos < 0.5, "{min_cos}");
        assert!(path.max_energy_drift() < 1e-8);
    }

    #[test]
    fn geodesic_surface_halves_strength() {
        let s = surface(0.08, DeformationField::ellipsoid([1.0, 0.0, -1.0]));
        let r = geodesic_reduced_surface(&s);
        assert_eq!(r.epsilon(), 0.04);
        assert_eq!(r.psi(), s.psi());
    }

    #[test]
    fn csv_output() {
        let rule = QuadratureRule::default();
        let s = surface(0.05, DeformationField::ellipsoid([1.0, 2.0, 3.0]));
        let path = integrate_averaged(&v(0.3, 0.4, 0.5), &s, 1.0, 0.25, &rule).unwrap();
        let mut buf = Vec::new();
        path.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,L1,L2,L3,H\n"));
        assert_eq!(text.lines().count(), 1 + 5);
    }
}
