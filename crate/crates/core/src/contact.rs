//! Compliant ground contact with Stribeck friction.
//!
//! A contact point below the ground plane `z = 0` receives a spring-damper
//! normal force and, per tangential axis, a friction force made of a
//! velocity-dependent Coulomb/static blend plus a viscous term:
//!
//! ```text
//! F_z = -k1·p_z - k2·ṗ_z
//! F_i = -s_i·F_z·sgn(ṗ_i) - μ_v·ṗ_i                       i = x, y
//! s_i = μ_c - (μ_c - μ_s)·exp(-|ṗ_i|² / v_s²)
//! ```
//!
//! `sgn(0)` is taken as 0, so a point that is not slipping along an axis gets
//! no friction along it. The friction force jumps at zero slip velocity; the
//! integrator timestep has to be small enough to keep that chatter bounded.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::model::{ModelError, RobotModel, StribeckParams};

/// Ground spring-damper constants and friction coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundParams {
    pub k1: f64,
    pub k2: f64,
    pub mu_c: f64,
    pub mu_s: f64,
    pub mu_v: f64,
    pub v_s: f64,
    /// Clamp a negative (pulling) normal force to zero.
    pub clamp_normal: bool,
}

impl GroundParams {
    pub fn new(model: &RobotModel, stribeck: &StribeckParams, clamp_normal: bool) -> Self {
        Self {
            k1: model.ground_spring_n_per_m,
            k2: model.ground_damper_n_s_per_m,
            mu_c: stribeck.mu_c,
            mu_s: stribeck.mu_s,
            mu_v: stribeck.mu_v,
            v_s: stribeck.v_s,
            clamp_normal,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |field: &str, reason: &str| {
            Err(ModelError::Invalid {
                field: field.into(),
                reason: reason.into(),
            })
        };
        if !(self.k1 > 0.0) {
            return bad("k1", "must be positive");
        }
        if !(self.k2 >= 0.0) {
            return bad("k2", "must be non-negative");
        }
        if !(self.v_s > 0.0) {
            return bad("v_s", "must be positive");
        }
        if !(self.mu_c >= 0.0) {
            return bad("mu_c", "must be non-negative");
        }
        if !(self.mu_s >= self.mu_c) {
            return bad("mu_s", "must not be below mu_c");
        }
        if !(self.mu_v >= 0.0) {
            return bad("mu_v", "must be non-negative");
        }
        Ok(())
    }
}

/// Sign function with `sgn(0) = 0`.
pub fn signum0(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Stribeck friction coefficient at slip speed `v`.
pub fn stribeck_coefficient(v: f64, params: &GroundParams) -> f64 {
    let ratio = v / params.v_s;
    params.mu_c - (params.mu_c - params.mu_s) * (-ratio * ratio).exp()
}

/// Normal force before friction, with the optional no-pull clamp.
pub fn normal_force(p_z: f64, v_z: f64, params: &GroundParams) -> f64 {
    if p_z > 0.0 {
        return 0.0;
    }
    let f = -params.k1 * p_z - params.k2 * v_z;
    if params.clamp_normal {
        f.max(0.0)
    } else {
        f
    }
}

/// Ground reaction force on a contact point at `p` moving with `v`.
pub fn ground_reaction(p: &Vector3<f64>, v: &Vector3<f64>, params: &GroundParams) -> Vector3<f64> {
    if p.z > 0.0 {
        return Vector3::zeros();
    }
    let fz = normal_force(p.z, v.z, params);
    let tangential = |vi: f64| {
        -stribeck_coefficient(vi, params) * fz * signum0(vi) - params.mu_v * vi
    };
    Vector3::new(tangential(v.x), tangential(v.y), fz)
}

/// One row of a friction curve: slip speed, coefficient and tangential force.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrictionSample {
    pub v: f64,
    pub s: f64,
    pub f_x: f64,
}

/// Tangential force along x for slip speeds in `[-v_max, v_max]` at a fixed
/// normal load, for plotting.
pub fn friction_curve(
    params: &GroundParams,
    normal_load: f64,
    v_max: f64,
    points: usize,
) -> Vec<FrictionSample> {
    let points = points.max(2);
    // depth that yields the requested load at zero normal velocity
    let depth = -normal_load / params.k1;
    (0..points)
        .map(|k| {
            let v = -v_max + 2.0 * v_max * k as f64 / (points - 1) as f64;
            let f = ground_reaction(&Vector3::new(0.0, 0.0, depth), &Vector3::new(v, 0.0, 0.0), params);
            FrictionSample {
                v,
                s: stribeck_coefficient(v, params),
                f_x: f.x,
            }
        })
        .collect()
}
