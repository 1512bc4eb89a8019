//! Numerical checks of the structural identities of the Funk transform.

use std::f64::consts::TAU;

use nalgebra::Vector3;
use serde::Serialize;

use super::{
    funk_transform, funk_transform_in_frame, orthonormal_frame, rotate_field, QuadratureRule,
    Rotated, Rotation, SphereFunction,
};
use crate::error::{Error, Result};
use crate::sampling::{
    random_odd_polynomial, random_polynomial, random_rotation, random_unit_vector, seeded_rng,
};
use crate::surface::{DeformationField, DEFAULT_MAX_DEGREE};

/// Seed of the sample points used by [`funk_hecke_eigenvalue_check`].
pub const FUNK_HECKE_SEED: u64 = 0x5eed_f00d;
const FUNK_HECKE_SAMPLES: usize = 50;

/// `|(F g)(R⁻¹ L) - (F (R g))(L)|`.
pub fn check_rotation_equivariance<G>(
    g: &G,
    rotation: &Rotation,
    l: &Vector3<f64>,
    rule: &QuadratureRule,
) -> Result<f64>
where
    G: SphereFunction + ?Sized,
{
    let lhs = funk_transform(g, &rotation.apply_inverse(l), rule)?;
    let rotated = Rotated {
        inner: g,
        rotation: *rotation,
    };
    let rhs = funk_transform(&rotated, l, rule)?;
    Ok((lhs - rhs).abs())
}

// l_i (F g)(L) ≈ -[(Fg)(R_i(h)⁻¹ L) - (Fg)(R_i(-h)⁻¹ L)] / 2h
fn angular_of_transform(
    g: &DeformationField,
    axis: usize,
    l: &Vector3<f64>,
    rule: &QuadratureRule,
    h: f64,
) -> Result<f64> {
    let plus = funk_transform(g, &Rotation::about_axis(axis, h).apply_inverse(l), rule)?;
    let minus = funk_transform(g, &Rotation::about_axis(axis, -h).apply_inverse(l), rule)?;
    Ok(-(plus - minus) / (2.0 * h))
}

fn transform_of_angular(
    g: &DeformationField,
    axis: usize,
    l: &Vector3<f64>,
    rule: &QuadratureRule,
) -> Result<f64> {
    let component = |x: &Vector3<f64>| x.cross(&g.grad(x))[axis];
    funk_transform(&component, l, rule)
}

fn validate_commutation_args(axis: usize, h: f64) -> Result<()> {
    if axis > 2 {
        return Err(Error::InvalidParameter(format!("axis {axis} out of range")));
    }
    if !(1e-6..=1e-3).contains(&h) {
        return Err(Error::InvalidParameter(format!(
            "finite-difference angle {h} outside [1e-6, 1e-3]"
        )));
    }
    Ok(())
}

/// `|(F(l_i g))(L) - (l_i(F g))(L)|`.
///
/// The right side differentiates `α ↦ (F g)(R_i(α)⁻¹ L)` by central differences
/// at steps `h` and `h/2`, Richardson-combined so the truncation error is
/// `O(h⁴)`. Use [`check_commutation_central`] for the plain difference.
pub fn check_commutation(
    g: &DeformationField,
    axis: usize,
    l: &Vector3<f64>,
    rule: &QuadratureRule,
    h: f64,
) -> Result<f64> {
    validate_commutation_args(axis, h)?;
    let lhs = transform_of_angular(g, axis, l, rule)?;
    let coarse = angular_of_transform(g, axis, l, rule, h)?;
    let fine = angular_of_transform(g, axis, l, rule, 0.5 * h)?;
    let rhs = (4.0 * fine - coarse) / 3.0;
    Ok((lhs - rhs).abs())
}

/// Same as [`check_commutation`] with a single central difference at `h`;
/// its discrepancy is dominated by the `C h²` truncation term.
pub fn check_commutation_central(
    g: &DeformationField,
    axis: usize,
    l: &Vector3<f64>,
    rule: &QuadratureRule,
    h: f64,
) -> Result<f64> {
    validate_commutation_args(axis, h)?;
    let lhs = transform_of_angular(g, axis, l, rule)?;
    let rhs = angular_of_transform(g, axis, l, rule, h)?;
    Ok((lhs - rhs).abs())
}

/// Bound `C h² + 1e-10` for [`check_commutation_central`], with `C` estimated
/// from the Richardson pair `(h, 2h)`.
pub fn commutation_bound(
    g: &DeformationField,
    axis: usize,
    l: &Vector3<f64>,
    rule: &QuadratureRule,
    h: f64,
) -> Result<f64> {
    validate_commutation_args(axis, h)?;
    let d1 = angular_of_transform(g, axis, l, rule, h)?;
    let d2 = angular_of_transform(g, axis, l, rule, 2.0 * h)?;
    // D(2h) - D(h) ≈ 3 C h²; doubled for slack on the leading-term estimate.
    let c = 2.0 * (d2 - d1).abs() / (3.0 * h * h);
    Ok(c * h * h + 1e-10)
}

/// Legendre polynomial `P_l(x)` by the three-term recurrence.
pub fn legendre(l: u32, x: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, x);
    if l == 0 {
        return prev;
    }
    for n in 1..l {
        let n = n as f64;
        let next = ((2.0 * n + 1.0) * x * cur - n * prev) / (n + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// `max |F Y_lm(L) - 2π P_l(0) Y_lm(L)| / max |Y_lm(L)|` over 50 seeded points.
pub fn funk_hecke_eigenvalue_check(l: u32, m: i32, rule: &QuadratureRule) -> Result<f64> {
    if l > DEFAULT_MAX_DEGREE || m.unsigned_abs() > l {
        return Err(Error::InvalidParameter(format!(
            "need 0 <= |m| <= l <= {DEFAULT_MAX_DEGREE}, got l = {l}, m = {m}"
        )));
    }
    let y = DeformationField::harmonic(l, m)?;
    let eigenvalue = TAU * legendre(l, 0.0);
    let mut rng = seeded_rng(FUNK_HECKE_SEED ^ ((l as u64) << 8) ^ (m as i64 as u64));
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    for _ in 0..FUNK_HECKE_SAMPLES {
        let p = random_unit_vector(&mut rng);
        let value = y.eval(&p);
        let transformed = funk_transform(&y, &p, rule)?;
        worst = worst.max((transformed - eigenvalue * value).abs());
        scale = scale.max(value.abs());
    }
    Ok(worst / scale.max(f64::MIN_POSITIVE))
}

/// One row of the identity-check table.
#[derive(Debug, Clone, Serialize)]
pub struct IdentityCheck {
    pub name: String,
    pub discrepancy: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl IdentityCheck {
    fn new(name: impl Into<String>, discrepancy: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            discrepancy,
            tolerance,
            passed: discrepancy.is_finite() && discrepancy < tolerance,
        }
    }
}

/// Runs every identity check with seed `seed` and the given rule.
pub fn run_identity_checks(rule: &QuadratureRule, seed: u64) -> Result<Vec<IdentityCheck>> {
    let mut rng = seeded_rng(seed);
    let mut out = Vec::new();

    let one = |_: &Vector3<f64>| 1.0;
    let z2 = DeformationField::monomial([0, 0, 2], 1.0);
    let (mut c1, mut cz) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let l = random_unit_vector(&mut rng);
        c1 = c1.max((funk_transform(&one, &l, rule)? - TAU).abs());
        let closed = std::f64::consts::PI * (1.0 - l[2] * l[2]);
        cz = cz.max((funk_transform(&z2, &l, rule)? - closed).abs());
    }
    out.push(IdentityCheck::new("F(1) = 2π", c1, 1e-13));
    out.push(IdentityCheck::new("F(x3²) = π(1 - L3²)", cz, 1e-12));

    let mut odd = 0.0f64;
    for d in (1..=7).step_by(2) {
        for i in 0..=d {
            for j in 0..=(d - i) {
                let g = DeformationField::monomial([i, j, d - i - j], 1.0);
                for _ in 0..20 {
                    let l = random_unit_vector(&mut rng);
                    odd = odd.max(funk_transform(&g, &l, rule)?.abs());
                }
            }
        }
    }
    out.push(IdentityCheck::new("odd monomials have zero transform", odd, 1e-12));

    let (mut even, mut linear, mut frame) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..50 {
        let g = random_polynomial(&mut rng, 6);
        let h = random_polynomial(&mut rng, 6);
        let l = random_unit_vector(&mut rng);
        let (a, b) = (rng_coef(&mut rng), rng_coef(&mut rng));
        let fg = funk_transform(&g, &l, rule)?;
        even = even.max((funk_transform(&g, &(-l), rule)? - fg).abs());
        let combo = &g.scaled(a) + &h.scaled(b);
        let lhs = funk_transform(&combo, &l, rule)?;
        let rhs = a * fg + b * funk_transform(&h, &l, rule)?;
        linear = linear.max((lhs - rhs).abs());
        let f = orthonormal_frame(&l)?;
        let angle = rng_coef(&mut rng) * std::f64::consts::PI;
        frame = frame.max((funk_transform_in_frame(&g, &f.rotated(angle), rule) - fg).abs());
    }
    out.push(IdentityCheck::new("evenness F g(-L) = F g(L)", even, 1e-12));
    out.push(IdentityCheck::new("linearity", linear, 1e-12));
    out.push(IdentityCheck::new("frame independence", frame, 1e-12));

    let mut conv = 0.0f64;
    for d in 0..=8u32 {
        let g = random_polynomial(&mut rng, d);
        let l = random_unit_vector(&mut rng);
        let n = d as usize + 2;
        let coarse = funk_transform(&g, &l, &QuadratureRule::new(n)?)?;
        let fine = funk_transform(&g, &l, &QuadratureRule::new(4 * n)?)?;
        conv = conv.max((coarse - fine).abs());
    }
    out.push(IdentityCheck::new("quadrature exact at n = d + 2", conv, 1e-13));

    let mut equiv = 0.0f64;
    for _ in 0..100 {
        let g = random_polynomial(&mut rng, 6);
        let r = random_rotation(&mut rng);
        let l = random_unit_vector(&mut rng);
        equiv = equiv.max(check_rotation_equivariance(&g, &r, &l, rule)?);
        // The polynomial route must agree with the composed-function route.
        let poly = funk_transform(&rotate_field(&g, &r), &l, rule)?;
        let composed = funk_transform(&Rotated { inner: &g, rotation: r }, &l, rule)?;
        equiv = equiv.max((poly - composed).abs());
    }
    out.push(IdentityCheck::new("rotation equivariance", equiv, 1e-10));

    let mut comm = 0.0f64;
    let mut comm_odd = 0.0f64;
    for k in 0..50 {
        let g = random_polynomial(&mut rng, 6);
        let l = random_unit_vector(&mut rng);
        comm = comm.max(check_commutation(&g, k % 3, &l, rule, 1e-4)?);
        let odd = random_odd_polynomial(&mut rng, 5);
        comm_odd = comm_odd.max(check_commutation(&odd, k % 3, &l, rule, 1e-4)?);
    }
    out.push(IdentityCheck::new("F∘l = l∘F (h = 1e-4)", comm, 1e-8));
    out.push(IdentityCheck::new("F∘l = l∘F, odd g", comm_odd, 1e-12));

    for l in 0..=DEFAULT_MAX_DEGREE {
        let mut worst = 0.0f64;
        for m in -(l as i32)..=(l as i32) {
            worst = worst.max(funk_hecke_eigenvalue_check(l, m, rule)?);
        }
        let tol = if l % 2 == 0 { 1e-10 } else { 1e-12 };
        out.push(IdentityCheck::new(format!("Funk-Hecke, degree {l}"), worst, tol));
    }

    Ok(out)
}

fn rng_coef<R: rand::Rng>(rng: &mut R) -> f64 {
    rng.random_range(-1.0..1.0)
}
