//! Sparse polynomials in three variables.
//!
//! [`DeformationField`] stores `Σ c_ijk x1^i x2^j x3^k` as a map from exponent
//! triples to coefficients. Evaluation, gradient and Hessian are exact
//! term-by-term derivatives, which is what the constraint multiplier needs.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default bound on the total degree of a user-supplied deformation.
pub const DEFAULT_MAX_DEGREE: u32 = 8;

pub type Exponents = [u32; 3];

/// Sparse polynomial `ψ(x)` in `(x1, x2, x3)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawField", into = "RawField")]
pub struct DeformationField {
    terms: BTreeMap<Exponents, f64>,
}

#[derive(Serialize, Deserialize)]
struct RawField {
    terms: Vec<(u32, u32, u32, f64)>,
}

impl TryFrom<RawField> for DeformationField {
    type Error = Error;

    fn try_from(raw: RawField) -> Result<Self> {
        DeformationField::from_terms(raw.terms.into_iter().map(|(i, j, k, c)| ([i, j, k], c)))
    }
}

impl From<DeformationField> for RawField {
    fn from(field: DeformationField) -> Self {
        RawField {
            terms: field
                .terms
                .into_iter()
                .map(|([i, j, k], c)| (i, j, k, c))
                .collect(),
        }
    }
}

fn degree_of(e: &Exponents) -> u32 {
    e[0] + e[1] + e[2]
}

fn monomial_value(e: &Exponents, x: &Vector3<f64>) -> f64 {
    x[0].powi(e[0] as i32) * x[1].powi(e[1] as i32) * x[2].powi(e[2] as i32)
}

// x^(n-1) * n, with the n = 0 case vanishing.
fn dpow(x: f64, n: u32) -> f64 {
    match n {
        0 => 0.0,
        1 => 1.0,
        _ => n as f64 * x.powi(n as i32 - 1),
    }
}

fn ddpow(x: f64, n: u32) -> f64 {
    match n {
        0 | 1 => 0.0,
        2 => 2.0,
        _ => (n * (n - 1)) as f64 * x.powi(n as i32 - 2),
    }
}

impl DeformationField {
    /// The zero polynomial.
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self::monomial([0, 0, 0], c)
    }

    pub fn monomial(exponents: Exponents, coefficient: f64) -> Self {
        let mut terms = BTreeMap::new();
        if coefficient != 0.0 {
            terms.insert(exponents, coefficient);
        }
        Self { terms }
    }

    /// The coordinate function `x_axis`.
    pub fn coordinate(axis: usize) -> Self {
        let mut e = [0; 3];
        e[axis] = 1;
        Self::monomial(e, 1.0)
    }

    /// Build from `(exponents, coefficient)` pairs, summing duplicates and
    /// rejecting monomials above [`DEFAULT_MAX_DEGREE`].
    pub fn from_terms<I>(terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Exponents, f64)>,
    {
        Self::from_terms_with_max_degree(terms, DEFAULT_MAX_DEGREE)
    }

    pub fn from_terms_with_max_degree<I>(terms: I, max_degree: u32) -> Result<Self>
    where
        I: IntoIterator<Item = (Exponents, f64)>,
    {
        let mut out = BTreeMap::new();
        for (e, c) in terms {
            let degree = degree_of(&e);
            if degree > max_degree {
                return Err(Error::DegreeTooHigh {
                    exponents: e,
                    degree,
                    max: max_degree,
                });
            }
            if !c.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "coefficient of {e:?} is not finite"
                )));
            }
            *out.entry(e).or_insert(0.0) += c;
        }
        out.retain(|_, c| *c != 0.0);
        Ok(Self { terms: out })
    }

    /// `ψ = Σ a_i x_i²`.
    pub fn ellipsoid(a: [f64; 3]) -> Self {
        let mut terms = BTreeMap::new();
        for (axis, &ai) in a.iter().enumerate() {
            if ai != 0.0 {
                let mut e = [0; 3];
                e[axis] = 2;
                terms.insert(e, ai);
            }
        }
        Self { terms }
    }

    /// Real solid harmonic `r^l Y_lm(x/r)` as a homogeneous polynomial of degree `l`.
    ///
    /// Orthonormal on the unit sphere, no Condon-Shortley phase. `m > 0` selects
    /// the `cos(mφ)` member, `m < 0` the `sin(|m|φ)` member.
    pub fn harmonic(l: u32, m: i32) -> Result<Self> {
        let am = m.unsigned_abs();
        if am > l {
            return Err(Error::InvalidParameter(format!(
                "harmonic order |m| = {am} exceeds degree l = {l}"
            )));
        }
        if l > DEFAULT_MAX_DEGREE {
            return Err(Error::DegreeTooHigh {
                exponents: [0, 0, l],
                degree: l,
                max: DEFAULT_MAX_DEGREE,
            });
        }

        // Azimuthal factor: Re or Im of (x1 + i x2)^|m|.
        let mut azimuthal = Self::zero();
        for k in 0..=am {
            let (wanted, sign) = if m >= 0 {
                (k % 2 == 0, if (k / 2) % 2 == 0 { 1.0 } else { -1.0 })
            } else {
                (k % 2 == 1, if ((k.saturating_sub(1)) / 2) % 2 == 0 { 1.0 } else { -1.0 })
            };
            if wanted {
                azimuthal = &azimuthal + &Self::monomial([am - k, k, 0], sign * binomial(am, k));
            }
        }

        // Polar factor: Σ_k a_k x3^(l-2k-|m|) r^(2k), the |m|-th derivative of P_l.
        let r2 = Self::ellipsoid([1.0, 1.0, 1.0]);
        let mut polar = Self::zero();
        let mut r2k = Self::constant(1.0);
        let mut k = 0;
        while 2 * k + am <= l {
            let coeff = if k % 2 == 0 { 1.0 } else { -1.0 } * factorial(2 * l - 2 * k)
                / (2f64.powi(l as i32)
                    * factorial(k)
                    * factorial(l - k)
                    * factorial(l - 2 * k - am));
            let zpow = Self::monomial([0, 0, l - 2 * k - am], coeff);
            polar = &polar + &(&zpow * &r2k);
            r2k = &r2k * &r2;
            k += 1;
        }

        let mut norm = ((2 * l + 1) as f64 / (4.0 * PI) * factorial(l - am) / factorial(l + am)).sqrt();
        if m != 0 {
            norm *= 2f64.sqrt();
        }
        Ok((&azimuthal * &polar).scaled(norm).pruned(0.0))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Total degree; zero for the zero polynomial.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(degree_of).max().unwrap_or(0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Exponents, &f64)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, exponents: Exponents) -> f64 {
        self.terms.get(&exponents).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// `Σ c x^e`.
    pub fn eval(&self, x: &Vector3<f64>) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| c * monomial_value(e, x))
            .sum()
    }

    pub fn grad(&self, x: &Vector3<f64>) -> Vector3<f64> {
        let mut g = Vector3::zeros();
        for (e, c) in &self.terms {
            let p = [
                x[0].powi(e[0] as i32),
                x[1].powi(e[1] as i32),
                x[2].powi(e[2] as i32),
            ];
            g[0] += c * dpow(x[0], e[0]) * p[1] * p[2];
            g[1] += c * p[0] * dpow(x[1], e[1]) * p[2];
            g[2] += c * p[0] * p[1] * dpow(x[2], e[2]);
        }
        g
    }

    /// Exact Hessian; symmetric by construction (off-diagonals are written once).
    pub fn hess(&self, x: &Vector3<f64>) -> Matrix3<f64> {
        let mut h = Matrix3::zeros();
        for (e, c) in &self.terms {
            let p = [
                x[0].powi(e[0] as i32),
                x[1].powi(e[1] as i32),
                x[2].powi(e[2] as i32),
            ];
            let d = [dpow(x[0], e[0]), dpow(x[1], e[1]), dpow(x[2], e[2])];
            let dd = [ddpow(x[0], e[0]), ddpow(x[1], e[1]), ddpow(x[2], e[2])];
            h[(0, 0)] += c * dd[0] * p[1] * p[2];
            h[(1, 1)] += c * p[0] * dd[1] * p[2];
            h[(2, 2)] += c * p[0] * p[1] * dd[2];
            h[(0, 1)] += c * d[0] * d[1] * p[2];
            h[(0, 2)] += c * d[0] * p[1] * d[2];
            h[(1, 2)] += c * p[0] * d[1] * d[2];
        }
        h[(1, 0)] = h[(0, 1)];
        h[(2, 0)] = h[(0, 2)];
        h[(2, 1)] = h[(1, 2)];
        h
    }

    /// Partial derivative with respect to `x_axis`, as a polynomial.
    pub fn partial(&self, axis: usize) -> Self {
        let mut terms = BTreeMap::new();
        for (e, c) in &self.terms {
            if e[axis] > 0 {
                let mut d = *e;
                d[axis] -= 1;
                *terms.entry(d).or_insert(0.0) += c * e[axis] as f64;
            }
        }
        Self { terms }
    }

    /// Euclidean Laplacian, as a polynomial.
    pub fn laplacian(&self) -> Self {
        (0..3).fold(Self::zero(), |acc, axis| {
            &acc + &self.partial(axis).partial(axis)
        })
    }

    /// Components of `x × ∇ψ`, each a polynomial of the same degree.
    pub fn angular(&self) -> [Self; 3] {
        let d = [self.partial(0), self.partial(1), self.partial(2)];
        let x = [Self::coordinate(0), Self::coordinate(1), Self::coordinate(2)];
        [
            &(&x[1] * &d[2]) - &(&x[2] * &d[1]),
            &(&x[2] * &d[0]) - &(&x[0] * &d[2]),
            &(&x[0] * &d[1]) - &(&x[1] * &d[0]),
        ]
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.terms.values_mut().for_each(|c| *c *= s);
        out.terms.retain(|_, c| *c != 0.0);
        out
    }

    /// Drop coefficients with `|c| <= tol`.
    pub fn pruned(mut self, tol: f64) -> Self {
        self.terms.retain(|_, c| c.abs() > tol);
        self
    }

    pub fn powi(&self, n: u32) -> Self {
        (0..n).fold(Self::constant(1.0), |acc, _| &acc * self)
    }

    /// Substitute `x_i → Σ_j m_ij x_j`, i.e. the polynomial `x ↦ ψ(M x)`.
    pub fn compose_linear(&self, m: &Matrix3<f64>) -> Self {
        let forms: Vec<Self> = (0..3)
            .map(|i| {
                let mut f = Self::zero();
                for j in 0..3 {
                    f = &f + &Self::coordinate(j).scaled(m[(i, j)]);
                }
                f
            })
            .collect();
        let degree = self.degree() as usize;
        let powers: Vec<Vec<Self>> = forms
            .iter()
            .map(|f| {
                let mut p = vec![Self::constant(1.0)];
                for n in 1..=degree {
                    let next = &p[n - 1] * f;
                    p.push(next);
                }
                p
            })
            .collect();
        let mut out = Self::zero();
        for (e, c) in &self.terms {
            let term = &(&powers[0][e[0] as usize] * &powers[1][e[1] as usize])
                * &powers[2][e[2] as usize];
            out = &out + &term.scaled(*c);
        }
        out
    }

    /// Every monomial has odd total degree, so `ψ(-x) = -ψ(x)`.
    pub fn is_odd(&self) -> bool {
        self.terms.keys().all(|e| degree_of(e) % 2 == 1)
    }

    pub fn is_even(&self) -> bool {
        self.terms.keys().all(|e| degree_of(e).is_multiple_of(2))
    }

    /// Recognise `c0 + Σ a_i x_i²`, the case with a closed-form Funk transform.
    pub fn as_diagonal_quadratic(&self) -> Option<(f64, [f64; 3])> {
        let mut c0 = 0.0;
        let mut a = [0.0; 3];
        for (e, c) in &self.terms {
            match e {
                [0, 0, 0] => c0 = *c,
                [2, 0, 0] => a[0] = *c,
                [0, 2, 0] => a[1] = *c,
                [0, 0, 2] => a[2] = *c,
                _ => return None,
            }
        }
        Some((c0, a))
    }

    /// Largest coefficient magnitude difference against `other`.
    pub fn max_coefficient_difference(&self, other: &Self) -> f64 {
        let diff = self - other;
        diff.terms.values().fold(0.0, |m, c| m.max(c.abs()))
    }
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

fn binomial(n: u32, k: u32) -> f64 {
    factorial(n) / (factorial(k) * factorial(n - k))
}

impl Add for &DeformationField {
    type Output = DeformationField;

    fn add(self, rhs: &DeformationField) -> DeformationField {
        let mut terms = self.terms.clone();
        for (e, c) in &rhs.terms {
            *terms.entry(*e).or_insert(0.0) += c;
        }
        terms.retain(|_, c| *c != 0.0);
        DeformationField { terms }
    }
}

impl Sub for &DeformationField {
    type Output = DeformationField;

    fn sub(self, rhs: &DeformationField) -> DeformationField {
        self + &(-rhs)
    }
}

impl Neg for &DeformationField {
    type Output = DeformationField;

    fn neg(self) -> DeformationField {
        self.scaled(-1.0)
    }
}

impl Mul for &DeformationField {
    type Output = DeformationField;

    fn mul(self, rhs: &DeformationField) -> DeformationField {
        let mut terms = BTreeMap::new();
        for (a, ca) in &self.terms {
            for (b, cb) in &rhs.terms {
                let e = [a[0] + b[0], a[1] + b[1], a[2] + b[2]];
                *terms.entry(e).or_insert(0.0) += ca * cb;
            }
        }
        terms.retain(|_, c| *c != 0.0);
        DeformationField { terms }
    }
}
