//! Sinusoidal central-pattern-generator references, `y_j(t) = A_j·sin(ωt + φ_j)`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::model::{read_json, write_json, ModelError};

/// Per-joint amplitudes and phases sharing one frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct GaitParams {
    pub amplitudes_rad: Vec<f64>,
    pub frequency_hz: f64,
    pub phases_rad: Vec<f64>,
}

/// On-disk gait description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaitFile {
    pub amplitudes_deg: Vec<f64>,
    pub frequency_hz: f64,
    pub phases_rad: Vec<f64>,
}

/// Pitch amplitude of the sidewinding gait, degrees.
pub const SIDEWINDING_PITCH_DEG: f64 = 14.0;
/// Yaw amplitude of the sidewinding gait, degrees.
pub const SIDEWINDING_YAW_DEG: f64 = 60.0;
/// Phase multiples of π/2 for joints 1..=11.
pub const SIDEWINDING_PHASE_STEPS: [f64; 11] = [0.0, 0.0, 1.0, 1.0, 2.0, 2.0, 3.0, 3.0, 0.0, 0.0, 1.0];
/// The three gait frequencies of the experimental protocol, Hz.
pub const PROTOCOL_FREQUENCIES_HZ: [f64; 3] = [0.35, 0.5, 0.65];

impl GaitParams {
    /// The 11-joint sidewinding gait: pitch joints (odd, from the head) at
    /// 14°, yaw joints at 60°.
    pub fn sidewinding(frequency_hz: f64) -> Self {
        let amplitudes_rad = (0..11)
            .map(|j| {
                if j % 2 == 0 {
                    SIDEWINDING_PITCH_DEG.to_radians()
                } else {
                    SIDEWINDING_YAW_DEG.to_radians()
                }
            })
            .collect();
        let phases_rad = SIDEWINDING_PHASE_STEPS.iter().map(|k| k * FRAC_PI_2).collect();
        Self {
            amplitudes_rad,
            frequency_hz,
            phases_rad,
        }
    }

    /// All joints held at zero.
    pub fn still(joint_count: usize, frequency_hz: f64) -> Self {
        Self {
            amplitudes_rad: vec![0.0; joint_count],
            frequency_hz,
            phases_rad: vec![0.0; joint_count],
        }
    }

    pub fn joint_count(&self) -> usize {
        self.amplitudes_rad.len()
    }

    pub fn omega(&self) -> f64 {
        2.0 * PI * self.frequency_hz
    }

    pub fn period(&self) -> f64 {
        1.0 / self.frequency_hz
    }

    pub fn validate(&self, joint_count: usize) -> Result<(), ModelError> {
        for (field, len) in [
            ("amplitudes", self.amplitudes_rad.len()),
            ("phases_rad", self.phases_rad.len()),
        ] {
            if len != joint_count {
                return Err(ModelError::LengthMismatch {
                    field: field.into(),
                    expected: joint_count,
                    found: len,
                });
            }
        }
        if !(self.frequency_hz > 0.0 && self.frequency_hz.is_finite()) {
            return Err(ModelError::Invalid {
                field: "frequency_hz".into(),
                reason: format!("must be positive, got {}", self.frequency_hz),
            });
        }
        if let Some(j) = self
            .amplitudes_rad
            .iter()
            .position(|a| !(a.is_finite() && *a >= 0.0))
        {
            return Err(ModelError::Invalid {
                field: format!("amplitudes[{j}]"),
                reason: "must be finite and non-negative".into(),
            });
        }
        if self.phases_rad.iter().any(|p| !p.is_finite()) {
            return Err(ModelError::Invalid {
                field: "phases_rad".into(),
                reason: "must be finite".into(),
            });
        }
        Ok(())
    }

    pub fn to_file(&self) -> GaitFile {
        GaitFile {
            amplitudes_deg: self.amplitudes_rad.iter().map(|a| a.to_degrees()).collect(),
            frequency_hz: self.frequency_hz,
            phases_rad: self.phases_rad.clone(),
        }
    }

    pub fn from_file(file: GaitFile) -> Self {
        Self {
            amplitudes_rad: file.amplitudes_deg.iter().map(|a| a.to_radians()).collect(),
            frequency_hz: file.frequency_hz,
            phases_rad: file.phases_rad,
        }
    }

    /// Loads and checks a gait file against `joint_count`.
    pub fn load(path: impl AsRef<Path>, joint_count: usize) -> Result<Self, ModelError> {
        let gait = Self::from_file(read_json(path.as_ref())?);
        gait.validate(joint_count)?;
        Ok(gait)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ModelError> {
        write_json(path.as_ref(), &self.to_file())
    }
}

/// Joint references at time `t`.
pub fn cpg_reference(t: f64, gait: &GaitParams) -> Vec<f64> {
    let mut out = vec![0.0; gait.joint_count()];
    cpg_reference_into(t, gait, &mut out);
    out
}

pub fn cpg_reference_into(t: f64, gait: &GaitParams, out: &mut [f64]) {
    let wt = gait.omega() * t;
    for ((y, a), phi) in out.iter_mut().zip(&gait.amplitudes_rad).zip(&gait.phases_rad) {
        *y = a * (wt + phi).sin();
    }
}
