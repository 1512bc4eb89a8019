use std::collections::HashMap;

use nalgebra::Vector3;

use super::PortraitGrid;
use crate::error::Result;

pub type Polyline = Vec<Vector3<f64>>;

#[derive(Debug, Clone, PartialEq)]
pub struct Contour {
    pub level: f64,
    /// Closed polylines repeat their first vertex at the end.
    pub polylines: Vec<Polyline>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ContourSet {
    pub contours: Vec<Contour>,
}

impl ContourSet {
    pub fn levels(&self) -> Vec<f64> {
        self.contours.iter().map(|c| c.level).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.contours.iter().all(|c| c.polylines.is_empty())
    }
}

type Node = (usize, usize);
type EdgeKey = (usize, usize);

fn node_id(grid: &PortraitGrid, (i, j): Node) -> usize {
    if i == 0 || i == grid.n_theta - 1 {
        i * grid.n_phi
    } else {
        i * grid.n_phi + j % grid.n_phi
    }
}

struct Extractor<'a> {
    grid: &'a PortraitGrid,
    level: f64,
    points: HashMap<EdgeKey, Vector3<f64>>,
    segments: Vec<(EdgeKey, EdgeKey)>,
}

impl Extractor<'_> {
    fn above(&self, n: Node) -> bool {
        self.grid.value(n.0, n.1) >= self.level
    }

    fn crossing(&mut self, a: Node, b: Node) -> Option<EdgeKey> {
        if self.above(a) == self.above(b) {
            return None;
        }
        let (ia, ib) = (node_id(self.grid, a), node_id(self.grid, b));
        let key = (ia.min(ib), ia.max(ib));
        if !self.points.contains_key(&key) {
            let (va, vb) = (self.grid.value(a.0, a.1), self.grid.value(b.0, b.1));
            let t = (self.level - va) / (vb - va);
            let (pa, pb) = (self.grid.node(a.0, a.1), self.grid.node(b.0, b.1));
            self.points.insert(key, (pa + (pb - pa) * t).normalize());
        }
        Some(key)
    }

    fn triangle(&mut self, c: [Node; 3]) {
        let keys: Vec<EdgeKey> = (0..3).filter_map(|k| self.crossing(c[k], c[(k + 1) % 3])).collect();
        if let [a, b] = keys[..] {
            self.segments.push((a, b));
        }
    }

    fn quad(&mut self, c: [Node; 4]) {
        let e: Vec<Option<EdgeKey>> = (0..4).map(|k| self.crossing(c[k], c[(k + 1) % 4])).collect();
        let present: Vec<EdgeKey> = e.iter().flatten().copied().collect();
        match present.len() {
            2 => self.segments.push((present[0], present[1])),
            4 => {
                let center = c.iter().map(|n| self.grid.value(n.0, n.1)).sum::<f64>() / 4.0;
                let e = |k: usize| e[k].expect("all four edges cross");
                if (center >= self.level) == self.above(c[0]) {
                    // c0 and c2 are joined through the center.
                    self.segments.push((e(0), e(1)));
                    self.segments.push((e(2), e(3)));
                } else {
                    self.segments.push((e(3), e(0)));
                    self.segments.push((e(1), e(2)));
                }
            }
            _ => {}
        }
    }

    fn run(mut self) -> Contour {
        let (nt, np) = (self.grid.n_theta, self.grid.n_phi);
        for j in 0..np {
            let jp = (j + 1) % np;
            self.triangle([(0, 0), (1, j), (1, jp)]);
            self.triangle([(nt - 1, 0), (nt - 2, jp), (nt - 2, j)]);
            for i in 1..nt - 2 {
                self.quad([(i, j), (i, jp), (i + 1, jp), (i + 1, j)]);
            }
        }
        let polylines = stitch(&self.segments)
            .into_iter()
            .map(|keys| keys.iter().map(|k| self.points[k]).collect())
            .collect();
        Contour { level: self.level, polylines }
    }
}

fn stitch(segments: &[(EdgeKey, EdgeKey)]) -> Vec<Vec<EdgeKey>> {
    let mut incident: HashMap<EdgeKey, Vec<usize>> = HashMap::new();
    for (s, (a, b)) in segments.iter().enumerate() {
        incident.entry(*a).or_default().push(s);
        incident.entry(*b).or_default().push(s);
    }
    let mut used = vec![false; segments.len()];
    let next = |used: &mut Vec<bool>, at: EdgeKey| -> Option<EdgeKey> {
        let s = *incident[&at].iter().find(|&&s| !used[s])?;
        used[s] = true;
        let (a, b) = segments[s];
        Some(if a == at { b } else { a })
    };

    let mut out = Vec::new();
    for s in 0..segments.len() {
        if used[s] {
            continue;
        }
        used[s] = true;
        let (a, b) = segments[s];
        let mut forward = vec![a, b];
        while let Some(k) = next(&mut used, *forward.last().unwrap()) {
            forward.push(k);
            if k == a {
                break;
            }
        }
        if forward.last() != Some(&a) {
            let mut backward = Vec::new();
            let mut at = a;
            while let Some(k) = next(&mut used, at) {
                backward.push(k);
                at = k;
            }
            backward.reverse();
            backward.extend(forward);
            forward = backward;
        }
        out.push(forward);
    }
    out
}

/// Marching squares on the grid, one [`Contour`] per level.
pub fn extract_contours(grid: &PortraitGrid, levels: &[f64]) -> ContourSet {
    let contours = levels
        .iter()
        .map(|&level| {
            Extractor { grid, level, points: HashMap::new(), segments: Vec::new() }.run()
        })
        .collect();
    ContourSet { contours }
}

/// `n` levels evenly spaced strictly inside `(min H, max H)`.
pub fn evenly_spaced_levels(grid: &PortraitGrid, n: usize) -> Vec<f64> {
    let (lo, hi) = (grid.min_value(), grid.max_value());
    (1..=n).map(|k| lo + (hi - lo) * k as f64 / (n + 1) as f64).collect()
}

/// One Newton step per vertex along the tangent gradient of the smooth `H`.
/// Vertices whose step would exceed one grid cell (near critical points) stay put.
pub fn refine_contours(grid: &PortraitGrid, set: &ContourSet) -> Result<ContourSet> {
    let (dt, dp) = grid.spacing();
    let max_step = dt.max(dp);
    let mut out = set.clone();
    for contour in &mut out.contours {
        for line in &mut contour.polylines {
            for p in line.iter_mut() {
                let g = grid.tangent_gradient(p)?;
                let g2 = g.norm_squared();
                if g2 > 0.0 {
                    let r = grid.hamiltonian_at(p)? - contour.level;
                    let step = g * (r / g2);
                    if step.norm() <= max_step {
                        *p = (*p - step).normalize();
                    }
                }
            }
        }
    }
    Ok(out)
}

fn segment_distance(p: &Vector3<f64>, a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    let d = b - a;
    let len2 = d.norm_squared();
    let t = if len2 > 0.0 { ((p - a).dot(&d) / len2).clamp(0.0, 1.0) } else { 0.0 };
    (p - (a + d * t)).norm()
}

/// Chordal distance from `p` to the nearest segment of `contour`.
pub fn distance_to_contour(p: &Vector3<f64>, contour: &Contour) -> f64 {
    let mut best = f64::INFINITY;
    for line in &contour.polylines {
        if let [only] = &line[..] {
            best = best.min((p - only).norm());
        }
        for w in line.windows(2) {
            best = best.min(segment_distance(p, &w[0], &w[1]));
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::averaged::hamiltonian_closed_form;
    use crate::funk::QuadratureRule;
    use crate::portrait::{find_critical_points, sample_grid, CriticalKind};
    use crate::surface::{DeformationField, SurfaceConfig};

    fn ellipsoid() -> (SurfaceConfig, PortraitGrid) {
        let s = SurfaceConfig::new(0.05, DeformationField::ellipsoid([1.0, 2.0, 3.0])).unwrap();
        let g = sample_grid(&s, (91, 180), &QuadratureRule::default()).unwrap();
        (s, g)
    }

    #[test]
    fn loops_between_saddle_and_max_encircle_the_max_axis() {
        let (s, g) = ellipsoid();
        let h = |e: [f64; 3]| hamiltonian_closed_form(&Vector3::from(e), &s).unwrap();
        let (hmax, hsad) = (h([1.0, 0.0, 0.0]), h([0.0, 1.0, 0.0]));
        let level = 0.5 * (hmax + hsad);
        let set = extract_contours(&g, &[level]);
        let lines = &set.contours[0].polylines;
        assert_eq!(lines.len(), 2);
        for line in lines {
            assert_eq!(line.first(), line.last());
            let sign = line[0][0].signum();
            assert!(line.iter().all(|p| p[0].signum() == sign && p[0].abs() > 0.5));
            // Winds once around the x1 axis.
            let mut turn = 0.0;
            for w in line.windows(2) {
                let a = w[0][2].atan2(w[0][1]);
                let b = w[1][2].atan2(w[1][1]);
                let mut d = b - a;
                if d > std::f64::consts::PI {
                    d -= std::f64::consts::TAU;
                } else if d < -std::f64::consts::PI {
                    d += std::f64::consts::TAU;
                }
                turn += d;
            }
            assert!((turn.abs() - std::f64::consts::TAU).abs() < 1e-9);
        }
    }

    #[test]
    fn separatrix_passes_through_saddles() {
        let (_, g) = ellipsoid();
        let crit = find_critical_points(&g).unwrap();
        let saddle = crit.points.iter().find(|p| p.kind == CriticalKind::Saddle).unwrap();
        let set = extract_contours(&g, &[saddle.value]);
        let (dt, dp) = g.spacing();
        for p in crit.points.iter().filter(|p| p.kind == CriticalKind::Saddle) {
            assert!(distance_to_contour(&p.location, &set.contours[0]) <= dt.max(dp));
        }
    }

    #[test]
    fn constant_field_has_no_contours() {
        let s = SurfaceConfig::new(0.05, DeformationField::constant(2.0)).unwrap();
        let g = sample_grid(&s, (32, 64), &QuadratureRule::default()).unwrap();
        let set = extract_contours(&g, &[0.09, 0.11]);
        assert!(set.is_empty());
        assert_eq!(set.levels(), vec![0.09, 0.11]);
    }

    #[test]
    fn refinement_lands_on_level() {
        let (s, g) = ellipsoid();
        let levels = evenly_spaced_levels(&g, 6);
        let raw = extract_contours(&g, &levels);
        let refined = refine_contours(&g, &raw).unwrap();
        let (dt, dp) = g.spacing();
        let cell = (g.max_value() - g.min_value()) * dt.max(dp);
        for (c0, c1) in raw.contours.iter().zip(&refined.contours) {
            assert!(!c0.polylines.is_empty());
            for (l0, l1) in c0.polylines.iter().zip(&c1.polylines) {
                for (p0, p1) in l0.iter().zip(l1) {
                    assert!((p0.norm() - 1.0).abs() < 1e-14);
                    let h0 = hamiltonian_closed_form(p0, &s).unwrap();
                    let h1 = hamiltonian_closed_form(p1, &s).unwrap();
                    assert!((h0 - c0.level).abs() < cell);
                    assert!((h1 - c0.level).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn refinement_keeps_separatrix_vertices_near() {
        let (_, g) = ellipsoid();
        let hsad = g.hamiltonian_at(&Vector3::y()).unwrap();
        let raw = extract_contours(&g, &[hsad]);
        let refined = refine_contours(&g, &raw).unwrap();
        let (dt, dp) = g.spacing();
        for (l0, l1) in raw.contours[0].polylines.iter().zip(&refined.contours[0].polylines) {
            for (p0, p1) in l0.iter().zip(l1) {
                assert!((p0 - p1).norm() <= dt.max(dp));
            }
        }
    }

    #[test]
    fn polar_levels_use_the_fan() {
        // Levels near the minimum at the poles give small loops around them.
        let (s, g) = ellipsoid();
        let hmin = hamiltonian_closed_form(&Vector3::z(), &s).unwrap();
        let set = extract_contours(&g, &[hmin + 1e-4]);
        let lines = &set.contours[0].polylines;
        assert_eq!(lines.len(), 2);
        for line in lines {
            assert_eq!(line.first(), line.last());
            assert!(line.iter().all(|p| p[2].abs() > 0.99));
        }
    }
}
