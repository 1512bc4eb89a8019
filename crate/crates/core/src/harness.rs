//! Full geodesic dynamics against the averaged flow.
//!
//! Both are sampled every [`MATCH_INTERVAL`] time units and compared through
//! the great-circle angle between unit momentum directions.

use std::io::Write;

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::averaged::{geodesic_reduced_surface, reduced_step};
use crate::dynamics::{GeodesicIntegrator, ParticleState};
use crate::error::{Error, Result};
use crate::funk::QuadratureRule;
use crate::surface::{DeformationField, SurfaceConfig};

pub const MATCH_INTERVAL: f64 = 0.5;
pub const DEFAULT_DT_FULL: f64 = 1e-3;
pub const DEFAULT_DT_AVG: f64 = 1e-2;

/// Deterministic description of the build that produced a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub package: String,
    pub version: String,
    pub target_arch: String,
    pub target_os: String,
}

impl Default for RunMetadata {
    fn default() -> Self {
        Self {
            package: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            target_arch: std::env::consts::ARCH.into(),
            target_os: std::env::consts::OS.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub epsilon: f64,
    /// Strength of the averaged model compared against.
    pub reduced_epsilon: f64,
    pub psi: DeformationField,
    pub t_end: f64,
    pub dt_full: f64,
    pub dt_avg: f64,
    pub n_nodes: usize,
    pub start_x: [f64; 3],
    pub start_v: [f64; 3],
    pub times: Vec<f64>,
    /// Radians between `L_full/|L_full|` and `L_avg/|L_avg|`.
    pub direction_errors: Vec<f64>,
    pub full_momentum_norms: Vec<f64>,
    pub averaged_momentum_norms: Vec<f64>,
    pub max_direction_error: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub metadata: RunMetadata,
}

impl ComparisonReport {
    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Angle between two nonzero vectors.
pub fn direction_angle(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    a.cross(b).norm().atan2(a.dot(b))
}

fn as_array(v: &Vector3<f64>) -> [f64; 3] {
    [v[0], v[1], v[2]]
}

fn sample_times(t_end: f64) -> Vec<f64> {
    let n = (t_end / MATCH_INTERVAL - 1e-9).ceil().max(1.0) as usize;
    (0..=n).map(|k| (MATCH_INTERVAL * k as f64).min(t_end)).collect()
}

fn substeps(span: f64, dt: f64) -> (usize, f64) {
    let m = (span / dt - 1e-9).ceil().max(1.0) as usize;
    (m, span / m as f64)
}

/// Compares geodesics on `surface` with the averaged flow of
/// [`geodesic_reduced_surface`]`(surface)`.
pub fn compare_full_vs_averaged(
    surface: &SurfaceConfig,
    start: &ParticleState,
    t_end: f64,
    dt_full: f64,
    dt_avg: f64,
    rule: &QuadratureRule,
) -> Result<ComparisonReport> {
    compare_against(surface, &geodesic_reduced_surface(surface), start, t_end, dt_full, dt_avg, rule)
}

/// Compares geodesics on `surface` with the averaged flow of `reduced`.
pub fn compare_against(
    surface: &SurfaceConfig,
    reduced: &SurfaceConfig,
    start: &ParticleState,
    t_end: f64,
    dt_full: f64,
    dt_avg: f64,
    rule: &QuadratureRule,
) -> Result<ComparisonReport> {
    for (name, value) in [("t_end", t_end), ("dt_full", dt_full), ("dt_avg", dt_avg)] {
        if !(value > 0.0) || !value.is_finite() {
            return Err(Error::InvalidParameter(format!("{name} must be positive, got {value}")));
        }
    }
    let integrator = GeodesicIntegrator::new(surface, start);
    let l0 = start.angular_momentum();
    let radius = l0.norm();

    let times = sample_times(t_end);
    let mut state = *start;
    let mut l_avg = l0;
    let mut report = ComparisonReport {
        epsilon: surface.epsilon(),
        reduced_epsilon: reduced.epsilon(),
        psi: surface.psi().clone(),
        t_end,
        dt_full,
        dt_avg,
        n_nodes: rule.n_nodes(),
        start_x: as_array(&start.x),
        start_v: as_array(&start.v),
        times: times.clone(),
        direction_errors: vec![0.0],
        full_momentum_norms: vec![radius],
        averaged_momentum_norms: vec![radius],
        max_direction_error: 0.0,
        seed: None,
        metadata: RunMetadata::default(),
    };
    for w in times.windows(2) {
        let span = w[1] - w[0];
        let (m, h) = substeps(span, dt_full);
        for k in 0..m {
            state = integrator.step(&state, h, w[0] + h * k as f64)?;
        }
        let (m, h) = substeps(span, dt_avg);
        for _ in 0..m {
            l_avg = reduced_step(&l_avg, reduced, rule, h, radius)?.0;
        }
        let l_full = state.angular_momentum();
        let err = direction_angle(&l_full, &l_avg);
        report.direction_errors.push(err);
        report.full_momentum_norms.push(l_full.norm());
        report.averaged_momentum_norms.push(l_avg.norm());
        report.max_direction_error = report.max_direction_error.max(err);
    }
    Ok(report)
}

/// Start on a great circle that is not special for any coordinate axis.
pub fn generic_start(surface: &SurfaceConfig) -> Result<ParticleState> {
    ParticleState::prepare(GENERIC_X0.into(), GENERIC_V0.into(), surface)
}

pub const GENERIC_X0: [f64; 3] = [0.62, 0.31, 0.72];
pub const GENERIC_V0: [f64; 3] = [-0.27, 0.93, 0.05];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub epsilon: f64,
    pub t_end: f64,
    pub max_direction_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceStudy {
    pub horizon_constant: f64,
    pub rows: Vec<ConvergenceRow>,
    /// `error(ε_{i+1}) / error(ε_i)`.
    pub ratios: Vec<f64>,
    pub reports: Vec<ComparisonReport>,
}

impl ConvergenceStudy {
    pub fn ratios_below(&self, bound: f64) -> bool {
        self.ratios.iter().all(|r| *r < bound)
    }

    /// CSV with header `epsilon,t_end,max_direction_error,ratio`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "epsilon,t_end,max_direction_error,ratio")?;
        for (k, row) in self.rows.iter().enumerate() {
            let ratio = if k == 0 { String::new() } else { format!("{:.6e}", self.ratios[k - 1]) };
            writeln!(out, "{},{},{:.6e},{}", row.epsilon, row.t_end, row.max_direction_error, ratio)?;
        }
        Ok(())
    }
}

/// Runs one comparison per `ε` in `eps_list` (in parallel) with horizon
/// `c/ε`, or `c` itself when `ε = 0`.
#[allow(clippy::too_many_arguments)]
pub fn epsilon_convergence_study(
    psi: &DeformationField,
    x0: Vector3<f64>,
    v0: Vector3<f64>,
    c: f64,
    eps_list: &[f64],
    dt_full: f64,
    dt_avg: f64,
    rule: &QuadratureRule,
) -> Result<ConvergenceStudy> {
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter("eps_list must be strictly descending".into()));
    }
    let reports: Vec<ComparisonReport> = eps_list
        .par_iter()
        .map(|&eps| {
            let surface = SurfaceConfig::new(eps, psi.clone())?;
            let start = ParticleState::prepare(x0, v0, &surface)?;
            let t_end = if eps > 0.0 { c / eps } else { c };
            compare_full_vs_averaged(&surface, &start, t_end, dt_full, dt_avg, rule)
        })
        .collect::<Result<_>>()?;
    let rows: Vec<ConvergenceRow> = reports
        .iter()
        .map(|r| ConvergenceRow { epsilon: r.epsilon, t_end: r.t_end, max_direction_error: r.max_direction_error })
        .collect();
    let ratios = rows
        .windows(2)
        .map(|w| w[1].max_direction_error / w[0].max_direction_error)
        .collect();
    Ok(ConvergenceStudy { horizon_constant: c, rows, ratios, reports })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{random_odd_polynomial, seeded_rng};

    fn quadratic() -> DeformationField {
        DeformationField::ellipsoid([1.0, 0.0, -1.0])
    }

    #[test]
    fn round_sphere_has_no_error() {
        let s = SurfaceConfig::round();
        let start = generic_start(&s).unwrap();
        let r = compare_full_vs_averaged(&s, &start, 100.0, 1e-3, 1e-2, &QuadratureRule::default()).unwrap();
        assert!(r.max_direction_error < 1e-7, "{}", r.max_direction_error);
        assert_eq!(r.times.len(), 201);
        assert_eq!(r.direction_errors.len(), r.times.len());
        assert_eq!(*r.times.last().unwrap(), 100.0);
    }

    #[test]
    fn odd_deformation_has_no_secular_drift() {
        let rule = QuadratureRule::default();
        let psi = random_odd_polynomial(&mut seeded_rng(31), 3);
        let s = SurfaceConfig::new(0.05, psi).unwrap();
        let start = generic_start(&s).unwrap();
        let r = compare_full_vs_averaged(&s, &start, 80.0, 1e-3, 1e-2, &rule).unwrap();
        assert!(r.max_direction_error < 1.0 * 0.05, "{}", r.max_direction_error);
        let n = r.direction_errors.len();
        let early = r.direction_errors[..n / 4].iter().copied().fold(0.0, f64::max);
        let late = r.direction_errors[3 * n / 4..].iter().copied().fold(0.0, f64::max);
        assert!(late < 2.0 * early, "early {early}, late {late}");
    }

    #[test]
    fn reports_are_reproducible() {
        let rule = QuadratureRule::default();
        let s = SurfaceConfig::new(0.1, quadratic()).unwrap();
        let start = generic_start(&s).unwrap();
        let a = compare_full_vs_averaged(&s, &start, 5.0, 1e-3, 1e-2, &rule).unwrap();
        let b = compare_full_vs_averaged(&s, &start, 5.0, 1e-3, 1e-2, &rule).unwrap();
        assert_eq!(a.to_json_string(), b.to_json_string());
        let back: ComparisonReport = serde_json::from_str(&a.to_json_string()).unwrap();
        assert_eq!(back, a);
        assert_eq!(a.reduced_epsilon, 0.05);
    }

    #[test]
    fn unhalved_strength_does_not_converge() {
        let rule = QuadratureRule::default();
        let x0 = Vector3::from(GENERIC_X0);
        let v0 = Vector3::from(GENERIC_V0);
        let errs: Vec<f64> = [0.1, 0.05]
            .iter()
            .map(|&eps| {
                let s = SurfaceConfig::new(eps, quadratic()).unwrap();
                let start = ParticleState::prepare(x0, v0, &s).unwrap();
                compare_against(&s, &s, &start, 2.0 / eps, 1e-3, 1e-2, &rule)
                    .unwrap()
                    .max_direction_error
            })
            .collect();
        assert!(errs[1] / errs[0] > 0.8, "{errs:?}");
    }

    #[test]
    fn study_zero_row_is_at_noise_floor() {
        let study = epsilon_convergence_study(
            &quadratic(),
            Vector3::from(GENERIC_X0),
            Vector3::from(GENERIC_V0),
            20.0,
            &[0.1, 0.0],
            1e-3,
            1e-2,
            &QuadratureRule::default(),
        )
        .unwrap();
        assert_eq!(study.rows[1].t_end, 20.0);
        assert!(study.rows[1].max_direction_error < 1e-7);
        let mut buf = Vec::new();
        study.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 3);
    }

    #[test]
    fn odd_family_errors_scale_with_eps() {
        let psi = random_odd_polynomial(&mut seeded_rng(32), 3);
        let study = epsilon_convergence_study(
            &psi,
            Vector3::from(GENERIC_X0),
            Vector3::from(GENERIC_V0),
            2.0,
            &[0.1, 0.05, 0.025],
            1e-3,
            1e-2,
            &QuadratureRule::default(),
        )
        .unwrap();
        for r in &study.ratios {
            assert!((r - 0.5).abs() < 0.15, "{:?}", study.ratios);
        }
        for row in &study.rows {
            assert!(row.max_direction_error < 2.0 * row.epsilon);
        }
    }

    #[test]
    fn study_rejects_unsorted_eps() {
        let r = epsilon_convergence_study(
            &quadratic(),
            Vector3::from(GENERIC_X0),
            Vector3::from(GENERIC_V0),
            2.0,
            &[0.05, 0.1],
            1e-3,
            1e-2,
            &QuadratureRule::default(),
        );
        assert!(r.is_err());
    }

    #[test]
    fn direction_angle_examples() {
        let a = Vector3::new(1.0, 0.0, 0.0);
        assert_eq!(direction_angle(&a, &(a * 3.0)), 0.0);
        assert!((direction_angle(&a, &Vector3::new(0.0, 2.0, 0.0)) - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
    }
}
