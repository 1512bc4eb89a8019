use std::cmp::Ordering;

use nalgebra::{Matrix2, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::PortraitGrid;
use crate::error::Result;
use crate::funk::orthonormal_frame;

/// Refined critical points with `|det Hess| <` this are reported as degenerate.
pub const DETERMINANT_TOLERANCE: f64 = 1e-10;

const MAX_NEWTON_ITERATIONS: usize = 25;
const GRADIENT_TOLERANCE: f64 = 1e-12;
const STEP_TOLERANCE: f64 = 1e-14;
const ACCEPT_GRADIENT: f64 = 1e-8;
const MAX_NEWTON_STEP: f64 = 0.2;
const HESSIAN_STEP: f64 = 1e-5;
const MERGE_DISTANCE: f64 = 1e-6;
const FLAT_RELATIVE_RANGE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CriticalKind {
    Maximum,
    Minimum,
    Saddle,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalPoint {
    pub location: Vector3<f64>,
    pub value: f64,
    pub kind: CriticalKind,
}

/// Critical point whose tangent Hessian is numerically singular.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DegenerateCritical {
    pub location: Vector3<f64>,
    pub value: f64,
    pub determinant: f64,
}

#[derive(Debug, Clone, Default)]
pub struct CriticalAnalysis {
    /// Classified points on the full sphere, antipodes included.
    pub points: Vec<CriticalPoint>,
    pub degenerate: Vec<DegenerateCritical>,
    /// The grid is constant to rounding; nothing is reported.
    pub flat: bool,
    /// Discrete candidates whose refinement did not converge.
    pub unconverged: usize,
}

impl CriticalAnalysis {
    pub fn count(&self, kind: CriticalKind) -> usize {
        self.points.iter().filter(|p| p.kind == kind).count()
    }

    /// `#max + #min - #saddle`.
    pub fn euler_characteristic(&self) -> i64 {
        self.count(CriticalKind::Maximum) as i64 + self.count(CriticalKind::Minimum) as i64
            - self.count(CriticalKind::Saddle) as i64
    }

    pub fn is_morse(&self) -> bool {
        !self.flat && self.degenerate.is_empty() && self.euler_characteristic() == 2
    }
}

type Node = (usize, usize);

fn node_id(grid: &PortraitGrid, (i, j): Node) -> usize {
    if i == 0 || i == grid.n_theta - 1 {
        i * grid.n_phi
    } else {
        i * grid.n_phi + j % grid.n_phi
    }
}

/// Total order on nodes: by value, ties broken by node id.
fn compare(grid: &PortraitGrid, a: Node, b: Node) -> Ordering {
    grid.value(a.0, a.1)
        .total_cmp(&grid.value(b.0, b.1))
        .then(node_id(grid, a).cmp(&node_id(grid, b)))
}

fn ring(grid: &PortraitGrid, (i, j): Node) -> Vec<Node> {
    let np = grid.n_phi;
    if i == 0 {
        return (0..np).map(|k| (1, k)).collect();
    }
    if i == grid.n_theta - 1 {
        return (0..np).map(|k| (i - 1, k)).collect();
    }
    let (jm, jp) = ((j + np - 1) % np, (j + 1) % np);
    vec![
        (i - 1, jm),
        (i - 1, j),
        (i - 1, jp),
        (i, jp),
        (i + 1, jp),
        (i + 1, j),
        (i + 1, jm),
        (i, jm),
    ]
}

fn discrete_candidates(grid: &PortraitGrid) -> Vec<Node> {
    let mut nodes = vec![(0, 0), (grid.n_theta - 1, 0)];
    for i in 1..grid.n_theta - 1 {
        nodes.extend((0..grid.n_phi).map(|j| (i, j)));
    }
    nodes
        .into_iter()
        .filter(|&c| {
            let signs: Vec<bool> = ring(grid, c)
                .into_iter()
                .map(|n| compare(grid, n, c) == Ordering::Greater)
                .collect();
            let above = signs.iter().filter(|s| **s).count();
            if above == 0 || above == signs.len() {
                return true;
            }
            let changes = (0..signs.len())
                .filter(|&k| signs[k] != signs[(k + 1) % signs.len()])
                .count();
            changes >= 4
        })
        .collect()
}

/// Gradient of `f(u, v) = H(normalize(p + u e1 + v e2))`.
fn chart_gradient(
    grid: &PortraitGrid,
    p: &Vector3<f64>,
    e1: &Vector3<f64>,
    e2: &Vector3<f64>,
    u: f64,
    v: f64,
) -> Result<Vector2<f64>> {
    let w = p + e1 * u + e2 * v;
    let n = w.norm();
    let t = grid.tangent_gradient(&(w / n))?;
    Ok(Vector2::new(t.dot(e1), t.dot(e2)) / n)
}

struct ChartDerivatives {
    gradient: Vector2<f64>,
    hessian: Matrix2<f64>,
    e1: Vector3<f64>,
    e2: Vector3<f64>,
}

fn chart_derivatives(grid: &PortraitGrid, p: &Vector3<f64>) -> Result<ChartDerivatives> {
    let frame = orthonormal_frame(p)?;
    let (e1, e2) = (frame.e1, frame.e2);
    let h = HESSIAN_STEP;
    let gradient = chart_gradient(grid, p, &e1, &e2, 0.0, 0.0)?;
    let du = (chart_gradient(grid, p, &e1, &e2, h, 0.0)? - chart_gradient(grid, p, &e1, &e2, -h, 0.0)?)
        / (2.0 * h);
    let dv = (chart_gradient(grid, p, &e1, &e2, 0.0, h)? - chart_gradient(grid, p, &e1, &e2, 0.0, -h)?)
        / (2.0 * h);
    let off = 0.5 * (du[1] + dv[0]);
    let hessian = Matrix2::new(du[0], off, off, dv[1]);
    Ok(ChartDerivatives { gradient, hessian, e1, e2 })
}

enum Refined {
    Point(Vector3<f64>, Matrix2<f64>),
    Failed,
}

fn refine(grid: &PortraitGrid, start: Vector3<f64>) -> Result<Refined> {
    let mut p = start;
    for _ in 0..MAX_NEWTON_ITERATIONS {
        let d = chart_derivatives(grid, &p)?;
        let gnorm = d.gradient.norm();
        if gnorm < GRADIENT_TOLERANCE {
            return Ok(Refined::Point(p, d.hessian));
        }
        let Some(inv) = d.hessian.try_inverse() else {
            break;
        };
        let mut step = -(inv * d.gradient);
        let len = step.norm();
        if len > MAX_NEWTON_STEP {
            step *= MAX_NEWTON_STEP / len;
        }
        p = (p + d.e1 * step[0] + d.e2 * step[1]).normalize();
        if len < STEP_TOLERANCE {
            break;
        }
    }
    let d = chart_derivatives(grid, &p)?;
    let gnorm = d.gradient.norm();
    if gnorm < ACCEPT_GRADIENT {
        Ok(Refined::Point(p, d.hessian))
    } else {
        Ok(Refined::Failed)
    }
}

fn classify(hessian: &Matrix2<f64>) -> Option<CriticalKind> {
    let det = hessian.determinant();
    if det.abs() < DETERMINANT_TOLERANCE {
        None
    } else if det < 0.0 {
        Some(CriticalKind::Saddle)
    } else if hessian.trace() < 0.0 {
        Some(CriticalKind::Maximum)
    } else {
        Some(CriticalKind::Minimum)
    }
}

fn contains(points: &[Vector3<f64>], p: &Vector3<f64>) -> bool {
    points.iter().any(|q| (q - p).norm() < MERGE_DISTANCE)
}

/// Detects, refines and classifies the critical points of `H`.
pub fn find_critical_points(grid: &PortraitGrid) -> Result<CriticalAnalysis> {
    let (lo, hi) = (grid.min_value(), grid.max_value());
    if hi - lo <= FLAT_RELATIVE_RANGE * lo.abs().max(hi.abs()) {
        log::info!("portrait grid is flat; no critical points reported");
        return Ok(CriticalAnalysis { flat: true, ..Default::default() });
    }

    let candidates = discrete_candidates(grid);
    log::debug!("{} discrete critical candidates", candidates.len());

    let mut analysis = CriticalAnalysis::default();
    let mut seen: Vec<Vector3<f64>> = Vec::new();
    for (i, j) in candidates {
        let p = match refine(grid, grid.node(i, j))? {
            Refined::Point(p, hessian) => {
                if contains(&seen, &p) {
                    continue;
                }
                let value = grid.hamiltonian_at(&p)?;
                for q in [p, -p] {
                    if contains(&seen, &q) {
                        continue;
                    }
                    seen.push(q);
                    match classify(&hessian) {
                        Some(kind) => analysis.points.push(CriticalPoint { location: q, value, kind }),
                        None => analysis.degenerate.push(DegenerateCritical {
                            location: q,
                            value,
                            determinant: hessian.determinant(),
                        }),
                    }
                }
                p
            }
            Refined::Failed => {
                analysis.unconverged += 1;
                continue;
            }
        };
        log::trace!("critical point at {p:?}");
    }
    analysis.points.sort_by(|a, b| {
        a.kind.cmp(&b.kind).then_with(|| {
            a.location
                .iter()
                .zip(b.location.iter())
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        })
    });
    if !analysis.degenerate.is_empty() {
        log::warn!("{} degenerate critical points", analysis.degenerate.len());
    }
    Ok(analysis)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::averaged::hamiltonian_closed_form;
    use crate::funk::{rotate_field, QuadratureRule, Rotation};
    use crate::portrait::sample_grid;
    use crate::sampling::{random_polynomial, seeded_rng};
    use crate::surface::{DeformationField, SurfaceConfig};

    fn ellipsoid_grid(resolution: (usize, usize)) -> (SurfaceConfig, PortraitGrid) {
        let s = SurfaceConfig::new(0.05, DeformationField::ellipsoid([1.0, 2.0, 3.0])).unwrap();
        let g = sample_grid(&s, resolution, &QuadratureRule::default()).unwrap();
        (s, g)
    }

    #[test]
    fn ellipsoid_has_six_axis_points() {
        let (s, g) = ellipsoid_grid((91, 180));
        let a = find_critical_points(&g).unwrap();
        assert_eq!(a.points.len(), 6);
        assert!(a.degenerate.is_empty());
        assert_eq!(a.euler_characteristic(), 2);
        assert!(a.is_morse());
        for p in &a.points {
            let axis = (0..3).max_by(|&i, &k| p.location[i].abs().total_cmp(&p.location[k].abs())).unwrap();
            assert!((p.location[axis].abs() - 1.0).abs() < 1e-12);
            let expected = match axis {
                0 => CriticalKind::Maximum,
                1 => CriticalKind::Saddle,
                _ => CriticalKind::Minimum,
            };
            assert_eq!(p.kind, expected);
            let mut e = Vector3::zeros();
            e[axis] = 1.0;
            assert!((p.value - hamiltonian_closed_form(&e, &s).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn off_node_extremum_is_refined() {
        // Rotated so the axes fall between grid nodes.
        let r = Rotation::from_matrix(
            Rotation::about_axis(2, 0.3).matrix() * Rotation::about_axis(0, 0.2).matrix(),
        )
        .unwrap();
        let psi = rotate_field(&DeformationField::ellipsoid([1.0, 2.0, 3.0]), &r);
        let s = SurfaceConfig::new(0.05, psi).unwrap();
        let g = sample_grid(&s, (64, 128), &QuadratureRule::default()).unwrap();
        let a = find_critical_points(&g).unwrap();
        assert_eq!(a.points.len(), 6);
        assert!(a.is_morse());
    }

    #[test]
    fn constant_grid_is_flat() {
        let s = SurfaceConfig::new(0.05, DeformationField::constant(1.0)).unwrap();
        let g = sample_grid(&s, (64, 128), &QuadratureRule::default()).unwrap();
        let a = find_critical_points(&g).unwrap();
        assert!(a.flat);
        assert!(a.points.is_empty());
        assert!(!a.is_morse());
    }

    #[test]
    fn random_portraits_satisfy_euler_count() {
        let mut rng = seeded_rng(77);
        let mut morse = 0;
        for _ in 0..4 {
            let s = SurfaceConfig::new(0.05, random_polynomial(&mut rng, 4)).unwrap();
            let g = sample_grid(&s, (91, 180), &QuadratureRule::default()).unwrap();
            let a = find_critical_points(&g).unwrap();
            if a.degenerate.is_empty() && !a.flat {
                assert_eq!(a.euler_characteristic(), 2, "{:?}", a.points);
                morse += 1;
            }
        }
        assert!(morse >= 3);
    }
}
