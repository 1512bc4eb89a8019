use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{ContourSet, CriticalKind, CriticalPoint, PortraitGrid};
use crate::error::{Error, Result};
use crate::surface::DeformationField;

const SVG_WIDTH: f64 = 800.0;
const SVG_HEIGHT: f64 = 400.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PortraitFormat {
    Svg,
    Csv,
    Json,
}

impl FromStr for PortraitFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "svg" => Ok(Self::Svg),
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            _ => Err(Error::UnsupportedFormat(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalPointRecord {
    pub xyz: [f64; 3],
    pub value: f64,
    pub kind: CriticalKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourRecord {
    pub level: f64,
    pub polylines: Vec<Vec<[f64; 3]>>,
}

/// JSON form of a portrait.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortraitDocument {
    pub epsilon: f64,
    pub psi: DeformationField,
    pub n_theta: usize,
    pub n_phi: usize,
    pub values: Vec<f64>,
    pub critical_points: Vec<CriticalPointRecord>,
    pub contours: Vec<ContourRecord>,
}

fn xyz(p: &Vector3<f64>) -> [f64; 3] {
    [p[0], p[1], p[2]]
}

impl PortraitDocument {
    pub fn new(grid: &PortraitGrid, contours: &ContourSet, critical: &[CriticalPoint]) -> Self {
        Self {
            epsilon: grid.surface().epsilon(),
            psi: grid.surface().psi().clone(),
            n_theta: grid.n_theta,
            n_phi: grid.n_phi,
            values: grid.values.clone(),
            critical_points: critical
                .iter()
                .map(|c| CriticalPointRecord { xyz: xyz(&c.location), value: c.value, kind: c.kind })
                .collect(),
            contours: contours
                .contours
                .iter()
                .map(|c| ContourRecord {
                    level: c.level,
                    polylines: c.polylines.iter().map(|l| l.iter().map(xyz).collect()).collect(),
                })
                .collect(),
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Plate carrée pixel coordinates of a unit vector.
fn project(p: &Vector3<f64>) -> (f64, f64) {
    let theta = p[2].clamp(-1.0, 1.0).acos();
    let phi = p[1].atan2(p[0]).rem_euclid(TAU);
    (phi / TAU * SVG_WIDTH, theta / PI * SVG_HEIGHT)
}

fn kind_color(kind: CriticalKind) -> &'static str {
    match kind {
        CriticalKind::Maximum => "#c0392b",
        CriticalKind::Minimum => "#2c6fbb",
        CriticalKind::Saddle => "#222222",
    }
}

fn render_svg(grid: &PortraitGrid, contours: &ContourSet, critical: &[CriticalPoint]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#,
        w = SVG_WIDTH,
        h = SVG_HEIGHT
    );
    let _ = writeln!(
        s,
        "<title>H on the momentum sphere, epsilon = {}, {}x{} grid</title>",
        grid.surface().epsilon(),
        grid.n_theta,
        grid.n_phi
    );
    let _ = writeln!(s, r##"<rect width="100%" height="100%" fill="#fdfdf8"/>"##);
    let _ = writeln!(s, r##"<g fill="none" stroke="#6a8d5a" stroke-width="1">"##);
    for contour in &contours.contours {
        for line in &contour.polylines {
            let mut pieces: Vec<Vec<(f64, f64)>> = vec![Vec::new()];
            for p in line {
                let q = project(p);
                let piece = pieces.last_mut().expect("nonempty");
                if let Some(prev) = piece.last() {
                    if (q.0 - prev.0).abs() > 0.5 * SVG_WIDTH {
                        pieces.push(Vec::new());
                    }
                }
                pieces.last_mut().expect("nonempty").push(q);
            }
            for piece in pieces.iter().filter(|p| p.len() > 1) {
                let pts: Vec<String> = piece.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
                let _ = writeln!(s, r#"<polyline data-level="{}" points="{}"/>"#, contour.level, pts.join(" "));
            }
        }
    }
    let _ = writeln!(s, "</g>");
    for c in critical {
        let (x, y) = project(&c.location);
        let _ = writeln!(
            s,
            r#"<circle cx="{x:.2}" cy="{y:.2}" r="4" fill="{}"><title>{:?} {}</title></circle>"#,
            kind_color(c.kind),
            c.kind,
            c.value
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Writes the portrait in `format`.
pub fn emit_portrait<W: Write>(
    grid: &PortraitGrid,
    contours: &ContourSet,
    critical: &[CriticalPoint],
    format: PortraitFormat,
    mut out: W,
) -> Result<()> {
    match format {
        PortraitFormat::Json => {
            serde_json::to_writer(&mut out, &PortraitDocument::new(grid, contours, critical))?;
            writeln!(out)?;
        }
        PortraitFormat::Csv => {
            writeln!(out, "theta,phi,H")?;
            for i in 0..grid.n_theta {
                for j in 0..grid.n_phi {
                    writeln!(out, "{:.16e},{:.16e},{:.16e}", grid.theta(i), grid.phi(j), grid.value(i, j))?;
                }
            }
        }
        PortraitFormat::Svg => out.write_all(render_svg(grid, contours, critical).as_bytes())?,
    }
    Ok(())
}

pub fn write_portrait_file(
    path: impl AsRef<Path>,
    grid: &PortraitGrid,
    contours: &ContourSet,
    critical: &[CriticalPoint],
    format: PortraitFormat,
) -> Result<()> {
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    emit_portrait(grid, contours, critical, format, file)
}
