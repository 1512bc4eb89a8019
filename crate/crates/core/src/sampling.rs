//! Seeded random inputs for property checks and diagnostics.

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::funk::Rotation;
use crate::surface::DeformationField;

pub type SeededRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform on the unit sphere (rejection from the unit ball).
pub fn random_unit_vector<R: Rng>(rng: &mut R) -> Vector3<f64> {
    loop {
        let p: Vector3<f64> = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n2 = p.norm_squared();
        if n2 > 1e-4 && n2 <= 1.0 {
            return p / n2.sqrt();
        }
    }
}

/// Haar-uniform rotation from a uniform unit quaternion.
pub fn random_rotation<R: Rng>(rng: &mut R) -> Rotation {
    let q = loop {
        let q: Quaternion<f64> = Quaternion::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n2 = q.norm_squared();
        if n2 > 1e-4 && n2 <= 1.0 {
            break q;
        }
    };
    let m = UnitQuaternion::from_quaternion(q).to_rotation_matrix().into_inner();
    Rotation::from_matrix(m).expect("unit quaternion gives a rotation")
}

/// Each monomial of total degree ≤ `max_degree` is kept with probability ½,
/// with a coefficient uniform in [-1, 1].
pub fn random_polynomial<R: Rng>(rng: &mut R, max_degree: u32) -> DeformationField {
    let mut terms = Vec::new();
    for d in 0..=max_degree {
        for i in 0..=d {
            for j in 0..=(d - i) {
                if rng.random_bool(0.5) {
                    terms.push(([i, j, d - i - j], rng.random_range(-1.0..1.0)));
                }
            }
        }
    }
    DeformationField::from_terms_with_max_degree(terms, max_degree).expect("degree bounded")
}

/// Like [`random_polynomial`] but restricted to monomials of odd total degree.
pub fn random_odd_polynomial<R: Rng>(rng: &mut R, max_degree: u32) -> DeformationField {
    let full = random_polynomial(rng, max_degree);
    DeformationField::from_terms_with_max_degree(
        full.terms()
            .filter(|(e, _)| (e[0] + e[1] + e[2]) % 2 == 1)
            .map(|(e, c)| (*e, *c)),
        max_degree,
    )
    .expect("degree bounded")
}
