//! JSON surface configuration.
//!
//! ```json
//! {"epsilon": 0.05, "psi": {"terms": [[2, 0, 0, 1.0], [0, 0, 2, -1.0]]}}
//! {"epsilon": 0.05, "psi_preset": {"name": "ellipsoid", "params": [1, 2, 3]}}
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DeformationField, SurfaceConfig};
use crate::error::{Error, Result};

/// Named deformation constructor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsiPreset {
    pub name: String,
    #[serde(default)]
    pub params: Vec<f64>,
}

impl PsiPreset {
    pub fn build(&self) -> Result<DeformationField> {
        match self.name.as_str() {
            "ellipsoid" => match self.params.as_slice() {
                [a1, a2, a3] => Ok(DeformationField::ellipsoid([*a1, *a2, *a3])),
                _ => Err(Error::Config(format!(
                    "preset `ellipsoid` takes 3 params, got {}",
                    self.params.len()
                ))),
            },
            "harmonic" => match self.params.as_slice() {
                [l, m] if is_integer(*l) && is_integer(*m) && *l >= 0.0 => {
                    DeformationField::harmonic(*l as u32, *m as i32)
                }
                _ => Err(Error::Config(
                    "preset `harmonic` takes integer params [l, m]".into(),
                )),
            },
            "zero" => Ok(DeformationField::zero()),
            other => Err(Error::Config(format!("unknown psi preset `{other}`"))),
        }
    }
}

fn is_integer(x: f64) -> bool {
    x.is_finite() && x.fract() == 0.0
}

/// On-disk form of a [`SurfaceConfig`]. Unknown keys are ignored so that run
/// configurations can carry their own parameters in the same file.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SurfaceFile {
    pub epsilon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi: Option<DeformationField>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi_preset: Option<PsiPreset>,
}

impl SurfaceFile {
    pub fn into_config(self) -> Result<SurfaceConfig> {
        let psi = match (self.psi, self.psi_preset) {
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "give either `psi` or `psi_preset`, not both".into(),
                ))
            }
            (Some(psi), None) => psi,
            (None, Some(preset)) => preset.build()?,
            (None, None) => {
                return Err(Error::Config("missing `psi` or `psi_preset`".into()))
            }
        };
        SurfaceConfig::new(self.epsilon, psi)
    }
}

impl From<&SurfaceConfig> for SurfaceFile {
    fn from(s: &SurfaceConfig) -> Self {
        Self {
            epsilon: s.epsilon(),
            psi: Some(s.psi().clone()),
            psi_preset: None,
        }
    }
}

impl SurfaceConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: SurfaceFile = serde_json::from_str(text)?;
        file.into_config()
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&SurfaceFile::from(self)).expect("surface serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_terms() {
        let s = SurfaceConfig::from_json_str(
            r#"{"epsilon": 0.05, "psi": {"terms": [[2,0,0,1.0],[0,0,2,-1.0]]}}"#,
        )
        .unwrap();
        assert_eq!(s.epsilon(), 0.05);
        assert_eq!(s.psi().coefficient([0, 0, 2]), -1.0);
    }

    #[test]
    fn parses_presets() {
        let s = SurfaceConfig::from_json_str(
            r#"{"epsilon": 0.05, "psi_preset": {"name": "ellipsoid", "params": [1, 2, 3]}}"#,
        )
        .unwrap();
        assert_eq!(s.psi(), &DeformationField::ellipsoid([1.0, 2.0, 3.0]));

        let h = SurfaceConfig::from_json_str(
            r#"{"epsilon": 0.01, "psi_preset": {"name": "harmonic", "params": [4, -3]}, "t_end": 5}"#,
        )
        .unwrap();
        assert_eq!(h.psi(), &DeformationField::harmonic(4, -3).unwrap());
    }

    #[test]
    fn rejects_bad_configs() {
        for bad in [
            r#"{"epsilon": 0.05}"#,
            r#"{"epsilon": -0.05, "psi": {"terms": []}}"#,
            r#"{"epsilon": 0.05, "psi_preset": {"name": "torus", "params": []}}"#,
            r#"{"epsilon": 0.05, "psi_preset": {"name": "ellipsoid", "params": [1]}}"#,
            r#"{"epsilon": 0.05, "psi_preset": {"name": "harmonic", "params": [2.5, 0]}}"#,
            r#"{"epsilon": 0.05, "psi": {"terms": [[1.5,0,0,1]]}}"#,
        ] {
            assert!(SurfaceConfig::from_json_str(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn round_trips() {
        let s = SurfaceConfig::new(0.0375, DeformationField::harmonic(3, 2).unwrap()).unwrap();
        let back = SurfaceConfig::from_json_str(&s.to_json_string()).unwrap();
        assert_eq!(back, s);
    }
}
