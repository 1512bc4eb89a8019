//! Free motion of a unit-mass particle constrained to the deformed sphere.
//!
//! The constraint force is normal to the surface. It is written here as `λ n`
//! with `n = ½∇φ = x + (ε/2)∇ψ`, so that on the round sphere `n = x` and
//! `λ = -|ẋ|²`. Differentiating `φ(x(t)) = 0` twice fixes the multiplier:
//!
//! ```text
//! λ = -(ẋ·ẋ + (ε/2) ẋᵀ ∇²ψ ẋ) / |x + (ε/2)∇ψ|²
//! ```
//!
//! Integration is classic RK4 on `(x, v)` followed by a stabilization pass that
//! projects `x` back onto `φ = 0`, removes the normal part of `v` and restores
//! the initial speed.

use std::io::Write;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::surface::SurfaceConfig;

/// Tolerance on the on-surface, tangency and speed invariants of a state.
pub const STATE_TOLERANCE: f64 = 1e-9;

/// Unstabilized steps drifting further than this from `φ = 0` are rejected.
pub const MAX_STEP_RESIDUAL: f64 = 1e-3;

const DEGENERATE_GRADIENT: f64 = 1e-12;

/// Position and velocity of the particle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParticleState {
    pub x: Vector3<f64>,
    pub v: Vector3<f64>,
}

impl ParticleState {
    /// Validates that `x` lies on the surface and `v` is a nonzero tangent vector.
    pub fn new(x: Vector3<f64>, v: Vector3<f64>, surface: &SurfaceConfig) -> Result<Self> {
        let residual = surface.phi(&x);
        if !(residual.abs() < STATE_TOLERANCE) {
            return Err(Error::InvalidState(format!(
                "position is off the surface (|phi| = {:e})",
                residual.abs()
            )));
        }
        let speed = v.norm();
        if !(speed > STATE_TOLERANCE) {
            return Err(Error::InvalidState("velocity is zero".into()));
        }
        let normal = surface.phi_grad(&x);
        let tangency = v.dot(&normal).abs() / (speed * normal.norm());
        if !(tangency < STATE_TOLERANCE) {
            return Err(Error::InvalidState(format!(
                "velocity is not tangent to the surface (cosine {tangency:e})"
            )));
        }
        Ok(Self { x, v })
    }

    /// Projects `x0` onto the surface, keeps the tangential part of `v0` and
    /// scales it to unit speed.
    ///
    /// A `v0` with no tangential part (for instance `v0 ∥ x0` on the round
    /// sphere) is rejected.
    pub fn prepare(x0: Vector3<f64>, v0: Vector3<f64>, surface: &SurfaceConfig) -> Result<Self> {
        let x = surface.project(&x0)?;
        let n = surface.phi_grad(&x).normalize();
        let tangential = v0 - n * v0.dot(&n);
        let scale = v0.norm().max(1.0);
        if !(tangential.norm() > 1e-8 * scale) {
            return Err(Error::InvalidState(
                "initial velocity has no component tangent to the surface".into(),
            ));
        }
        Self::new(x, tangential.normalize(), surface)
    }

    pub fn speed(&self) -> f64 {
        self.v.norm()
    }

    pub fn angular_momentum(&self) -> Vector3<f64> {
        angular_momentum(self)
    }
}

/// `L = x × v`.
pub fn angular_momentum(state: &ParticleState) -> Vector3<f64> {
    state.x.cross(&state.v)
}

/// Constraint normal `n = ½∇φ = x + (ε/2)∇ψ`.
pub fn constraint_normal(x: &Vector3<f64>, surface: &SurfaceConfig) -> Vector3<f64> {
    x + 0.5 * surface.epsilon() * surface.psi().grad(x)
}

/// Multiplier `λ` of the constraint force `λ n`; equals `-|v|²` on the round sphere.
pub fn lagrange_multiplier(state: &ParticleState, surface: &SurfaceConfig) -> Result<f64> {
    lagrange_multiplier_at(&state.x, &state.v, surface)
}

fn lagrange_multiplier_at(x: &Vector3<f64>, v: &Vector3<f64>, surface: &SurfaceConfig) -> Result<f64> {
    let n = constraint_normal(x, surface);
    let n2 = n.norm_squared();
    if !(n2.sqrt() >= 0.5 * DEGENERATE_GRADIENT) {
        return Err(Error::DegenerateGradient([x[0], x[1], x[2]]));
    }
    let curvature = v.dot(v) + 0.5 * surface.epsilon() * v.dot(&(surface.psi().hess(x) * v));
    Ok(-curvature / n2)
}

fn acceleration_at(x: &Vector3<f64>, v: &Vector3<f64>, surface: &SurfaceConfig) -> Result<Vector3<f64>> {
    let lambda = lagrange_multiplier_at(x, v, surface)?;
    Ok(constraint_normal(x, surface) * lambda)
}

/// `ẍ = λ n`.
pub fn acceleration(state: &ParticleState, surface: &SurfaceConfig) -> Result<Vector3<f64>> {
    acceleration_at(&state.x, &state.v, surface)
}

/// `dL/dt = x × ẍ = λ (ε/2) (x × ∇ψ)`.
pub fn momentum_rate(state: &ParticleState, surface: &SurfaceConfig) -> Result<Vector3<f64>> {
    let lambda = lagrange_multiplier(state, surface)?;
    Ok(state.x.cross(&surface.psi().grad(&state.x)) * (0.5 * surface.epsilon() * lambda))
}

/// One classic RK4 step of `(ẋ, v̇) = (v, λ n)` without stabilization.
pub fn rk4_step(state: &ParticleState, surface: &SurfaceConfig, h: f64) -> Result<ParticleState> {
    let (x, v) = (state.x, state.v);
    let a1 = acceleration_at(&x, &v, surface)?;
    let (x2, v2) = (x + v * (0.5 * h), v + a1 * (0.5 * h));
    let a2 = acceleration_at(&x2, &v2, surface)?;
    let (x3, v3) = (x + v2 * (0.5 * h), v + a2 * (0.5 * h));
    let a3 = acceleration_at(&x3, &v3, surface)?;
    let (x4, v4) = (x + v3 * h, v + a3 * h);
    let a4 = acceleration_at(&x4, &v4, surface)?;
    Ok(ParticleState {
        x: x + (v + v2 * 2.0 + v3 * 2.0 + v4) * (h / 6.0),
        v: v + (a1 + a2 * 2.0 + a3 * 2.0 + a4) * (h / 6.0),
    })
}

/// Fixed-step integrator holding the surface and the speed to restore.
#[derive(Debug, Clone)]
pub struct GeodesicIntegrator<'a> {
    surface: &'a SurfaceConfig,
    speed: f64,
}

impl<'a> GeodesicIntegrator<'a> {
    pub fn new(surface: &'a SurfaceConfig, start: &ParticleState) -> Self {
        Self {
            surface,
            speed: start.speed(),
        }
    }

    /// RK4 step of length `h` followed by stabilization. `time` is only used
    /// for error reporting.
    pub fn step(&self, state: &ParticleState, h: f64, time: f64) -> Result<ParticleState> {
        let raw = rk4_step(state, self.surface, h)?;
        let residual = self.surface.phi(&raw.x).abs();
        if !(residual <= MAX_STEP_RESIDUAL) {
            return Err(Error::StepTooLarge { residual, time });
        }
        self.stabilize(&raw)
    }

    fn stabilize(&self, raw: &ParticleState) -> Result<ParticleState> {
        let x = self
            .surface
            .project(&raw.x)
            .map_err(|e| Error::ProjectionFailed(Box::new(e)))?;
        let n = self.surface.phi_grad(&x).normalize();
        let v = raw.v - n * raw.v.dot(&n);
        let norm = v.norm();
        if !(norm > 0.0) {
            return Err(Error::InvalidState("velocity collapsed to zero".into()));
        }
        Ok(ParticleState {
            x,
            v: v * (self.speed / norm),
        })
    }
}

/// Stored nodes of an integration.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<ParticleState>,
    pub momenta: Vec<Vector3<f64>>,
}

impl Trajectory {
    fn push(&mut self, t: f64, state: ParticleState) {
        self.times.push(t);
        self.momenta.push(angular_momentum(&state));
        self.states.push(state);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<&ParticleState> {
        self.states.last()
    }

    /// CSV with header `t,x1,x2,x3,v1,v2,v3,L1,L2,L3`, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,x1,x2,x3,v1,v2,v3,L1,L2,L3")?;
        for ((t, s), l) in self.times.iter().zip(&self.states).zip(&self.momenta) {
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                t, s.x[0], s.x[1], s.x[2], s.v[0], s.v[1], s.v[2], l[0], l[1], l[2]
            )?;
        }
        Ok(())
    }
}

/// Default decimation `⌈(1/dt)/256⌉`.
pub fn default_stride(dt: f64) -> usize {
    ((1.0 / dt) / 256.0).ceil().max(1.0) as usize
}

/// Integrates with the default decimation; see [`integrate_trajectory_with_stride`].
pub fn integrate_trajectory(
    start: &ParticleState,
    surface: &SurfaceConfig,
    t_end: f64,
    dt: f64,
) -> Result<Trajectory> {
    integrate_trajectory_with_stride(start, surface, t_end, dt, default_stride(dt))
}

/// Integrates `⌈t_end/dt⌉` equal steps ending exactly at `t_end`, storing the
/// start, every `stride`-th step and the final step.
pub fn integrate_trajectory_with_stride(
    start: &ParticleState,
    surface: &SurfaceConfig,
    t_end: f64,
    dt: f64,
    stride: usize,
) -> Result<Trajectory> {
    if !(dt > 0.0) || !(t_end > 0.0) || !dt.is_finite() || !t_end.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "need dt > 0 and t_end > 0, got dt = {dt}, t_end = {t_end}"
        )));
    }
    if stride == 0 {
        return Err(Error::InvalidParameter("stride must be positive".into()));
    }
    let start = ParticleState::new(start.x, start.v, surface)?;
    let steps = (t_end / dt - 1e-9).ceil().max(1.0) as usize;
    let h = t_end / steps as f64;
    let integrator = GeodesicIntegrator::new(surface, &start);

    let mut traj = Trajectory::default();
    traj.push(0.0, start);
    let mut state = start;
    for k in 1..=steps {
        let t = h * k as f64;
        state = integrator.step(&state, h, t)?;
        if k % stride == 0 || k == steps {
            traj.push(t, state);
        }
    }
    Ok(traj)
}
