//! Phase portraits of the reduced Hamiltonian on the momentum sphere.
//!
//! The sphere is sampled on a colatitude × longitude grid `θ_i = πi/(n_θ-1)`,
//! `φ_j = 2πj/n_φ`; both poles are grid rows whose nodes share one value and
//! the seam `φ = 2π` is the column `j = 0` again.

mod contour;
mod critical;
mod emit;

pub use contour::{
    distance_to_contour, evenly_spaced_levels, extract_contours, refine_contours, Contour,
    ContourSet, Polyline,
};
pub use critical::{
    find_critical_points, CriticalAnalysis, CriticalKind, CriticalPoint, DegenerateCritical,
    DETERMINANT_TOLERANCE,
};
pub use emit::{emit_portrait, write_portrait_file, PortraitDocument, PortraitFormat};

use std::f64::consts::{PI, TAU};

use nalgebra::Vector3;
use rayon::prelude::*;

use crate::averaged::{averaged_field_direct, hamiltonian};
use crate::error::{Error, Result};
use crate::funk::QuadratureRule;
use crate::surface::SurfaceConfig;

pub const DEFAULT_RESOLUTION: (usize, usize) = (181, 360);
pub const MIN_RESOLUTION: usize = 16;

/// Sampled `H` on the latitude–longitude grid.
#[derive(Debug, Clone)]
pub struct PortraitGrid {
    pub n_theta: usize,
    pub n_phi: usize,
    /// Row-major, `values[i * n_phi + j] = H(θ_i, φ_j)`.
    pub values: Vec<f64>,
    surface: SurfaceConfig,
    rule: QuadratureRule,
}

impl PortraitGrid {
    pub fn surface(&self) -> &SurfaceConfig {
        &self.surface
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    pub fn theta(&self, i: usize) -> f64 {
        PI * i as f64 / (self.n_theta - 1) as f64
    }

    pub fn phi(&self, j: usize) -> f64 {
        TAU * j as f64 / self.n_phi as f64
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_phi + j % self.n_phi]
    }

    pub fn node(&self, i: usize, j: usize) -> Vector3<f64> {
        grid_point(self.theta(i), self.phi(j), i, self.n_theta)
    }

    /// Grid spacing `(Δθ, Δφ)` in radians.
    pub fn spacing(&self) -> (f64, f64) {
        (PI / (self.n_theta - 1) as f64, TAU / self.n_phi as f64)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Smooth `H` at any direction.
    pub fn hamiltonian_at(&self, l: &Vector3<f64>) -> Result<f64> {
        hamiltonian(l, &self.surface, &self.rule)
    }

    /// Tangential gradient of `H` at unit `l`, `∇H - (l·∇H) l = l × L̇`.
    pub fn tangent_gradient(&self, l: &Vector3<f64>) -> Result<Vector3<f64>> {
        Ok(l.cross(&averaged_field_direct(l, &self.surface, &self.rule)?))
    }

    /// `max |H(π-θ, φ+π) - H(θ, φ)|`; requires even `n_phi`.
    pub fn antipodal_asymmetry(&self) -> f64 {
        let half = self.n_phi / 2;
        let mut worst: f64 = 0.0;
        for i in 0..self.n_theta {
            for j in 0..self.n_phi {
                let d = self.value(self.n_theta - 1 - i, j + half) - self.value(i, j);
                worst = worst.max(d.abs());
            }
        }
        worst
    }
}

fn grid_point(theta: f64, phi: f64, i: usize, n_theta: usize) -> Vector3<f64> {
    if i == 0 {
        return Vector3::new(0.0, 0.0, 1.0);
    }
    if i == n_theta - 1 {
        return Vector3::new(0.0, 0.0, -1.0);
    }
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    Vector3::new(st * cp, st * sp, ct)
}

/// Samples `H = (ε/2π) Fψ` on an `n_theta × n_phi` grid, rows in parallel.
pub fn sample_grid(
    surface: &SurfaceConfig,
    resolution: (usize, usize),
    rule: &QuadratureRule,
) -> Result<PortraitGrid> {
    let (n_theta, n_phi) = resolution;
    if n_theta < MIN_RESOLUTION || n_phi < MIN_RESOLUTION {
        return Err(Error::InvalidParameter(format!(
            "grid resolution must be at least {MIN_RESOLUTION}x{MIN_RESOLUTION}, got {n_theta}x{n_phi}"
        )));
    }
    let mut grid = PortraitGrid {
        n_theta,
        n_phi,
        values: Vec::new(),
        surface: surface.clone(),
        rule: rule.clone(),
    };
    let rows: Vec<Vec<f64>> = (0..n_theta)
        .into_par_iter()
        .map(|i| -> Result<Vec<f64>> {
            if i == 0 || i == n_theta - 1 {
                let h = grid.hamiltonian_at(&grid.node(i, 0))?;
                return Ok(vec![h; n_phi]);
            }
            (0..n_phi).map(|j| grid.hamiltonian_at(&grid.node(i, j))).collect()
        })
        .collect::<Result<_>>()?;
    grid.values = rows.concat();
    log::debug!("sampled {n_theta}x{n_phi} portrait grid");
    Ok(grid)
}
