//! Servo-driven DC actuators.
//!
//! Each joint runs a PD voltage loop on the position error; the motor turns
//! the voltage into torque, and the drive loses torque to its own damping and
//! to accelerating the reflected rotor inertia. The rotor is rigidly tied to
//! the joint (unit ratio), so rotor rate and acceleration equal the joint's.
//!
//! ```text
//! V     = Kp·(y_ref - q) - Kd·q̇
//! τ     = K_m·V - b·q̇ - J_m·q̈
//! ```
//!
//! The integrator handles `J_m·q̈` implicitly by adding `J_m` to the joint
//! diagonal of the mass matrix; [`ActuatorOutput::drive_torque`] is the
//! remainder and is what gets saturated.

use crate::model::{ActuatorParams, ServoGains};

/// Rotor rate and last commanded voltage of one actuator.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ActuatorState {
    pub rotor_velocity: f64,
    pub voltage: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointState {
    pub angle: f64,
    pub rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActuatorOutput {
    /// `K_m·V - b·q̇`, clamped to the torque limit.
    pub drive_torque: f64,
    /// Reflected rotor inertia to add on the joint diagonal.
    pub reflected_inertia: f64,
    /// Rotor acceleration estimated from the previous rotor rate.
    pub rotor_acceleration: f64,
    /// Drive torque minus the inertial reaction at the estimated acceleration.
    pub delivered_torque: f64,
    pub next: ActuatorState,
}

pub fn actuator_torque(
    reference: f64,
    joint: JointState,
    previous: &ActuatorState,
    params: &ActuatorParams,
    gains: &ServoGains,
    dt: f64,
) -> ActuatorOutput {
    let voltage = gains.kp_v_per_rad * (reference - joint.angle) - gains.kd_v_s_per_rad * joint.rate;
    let limit = gains.torque_limit_n_m;
    let drive_torque = (params.motor_constant * voltage - params.internal_damping * joint.rate)
        .clamp(-limit, limit);
    let rotor_acceleration = if dt > 0.0 {
        (joint.rate - previous.rotor_velocity) / dt
    } else {
        0.0
    };
    ActuatorOutput {
        drive_torque,
        reflected_inertia: params.transmission_inertia,
        rotor_acceleration,
        delivered_torque: drive_torque - params.transmission_inertia * rotor_acceleration,
        next: ActuatorState {
            rotor_velocity: joint.rate,
            voltage,
        },
    }
}
