//! Simulation state of the floating-base chain.

use nalgebra::{DVector, UnitQuaternion, Vector3};

use crate::model::{ModelError, RobotModel};

/// Pose and velocity of the chain.
///
/// The head is the floating base: its linear velocity is expressed in the world
/// frame, its angular velocity in the head body frame. Generalized velocities
/// are ordered `[v_head (3), ω_head (3), joint rates]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub head_position: Vector3<f64>,
    pub head_orientation: UnitQuaternion<f64>,
    pub head_linear_velocity: Vector3<f64>,
    pub head_angular_velocity: Vector3<f64>,
    pub joint_angles: Vec<f64>,
    pub joint_rates: Vec<f64>,
    /// Rotor rates; equal to the joint rates under the unit gear coupling.
    pub actuator_rotor_rates: Vec<f64>,
    pub time: f64,
}

impl SimState {
    /// A straight chain at rest, head at `position`, heading `yaw` about +z.
    pub fn straight(model: &RobotModel, position: Vector3<f64>, yaw: f64) -> Self {
        let n = model.joint_count;
        Self {
            head_position: position,
            head_orientation: UnitQuaternion::from_axis_angle(&Vector3::z_axis(), yaw),
            head_linear_velocity: Vector3::zeros(),
            head_angular_velocity: Vector3::zeros(),
            joint_angles: vec![0.0; n],
            joint_rates: vec![0.0; n],
            actuator_rotor_rates: vec![0.0; n],
            time: 0.0,
        }
    }

    /// Straight chain whose contact points sit `clearance` above the ground.
    pub fn resting(model: &RobotModel, xy: [f64; 2], yaw: f64, clearance: f64) -> Self {
        let z = model.contact_radius_m - model.contact_point_offset_m[2] + clearance;
        Self::straight(model, Vector3::new(xy[0], xy[1], z), yaw)
    }

    pub fn generalized_velocity(&self) -> DVector<f64> {
        let n = self.joint_rates.len();
        let mut v = DVector::zeros(6 + n);
        v.fixed_rows_mut::<3>(0).copy_from(&self.head_linear_velocity);
        v.fixed_rows_mut::<3>(3).copy_from(&self.head_angular_velocity);
        v.rows_mut(6, n).copy_from_slice(&self.joint_rates);
        v
    }

    pub fn set_generalized_velocity(&mut self, v: &DVector<f64>) {
        self.head_linear_velocity = v.fixed_rows::<3>(0).into_owned();
        self.head_angular_velocity = v.fixed_rows::<3>(3).into_owned();
        let n = self.joint_rates.len();
        for j in 0..n {
            self.joint_rates[j] = v[6 + j];
            self.actuator_rotor_rates[j] = v[6 + j];
        }
    }

    pub fn validate(&self, model: &RobotModel) -> Result<(), ModelError> {
        let n = model.joint_count;
        for (field, len) in [
            ("joint_angles", self.joint_angles.len()),
            ("joint_rates", self.joint_rates.len()),
            ("actuator_rotor_rates", self.actuator_rotor_rates.len()),
        ] {
            if len != n {
                return Err(ModelError::LengthMismatch {
                    field: field.into(),
                    expected: n,
                    found: len,
                });
            }
        }
        let norm = self.head_orientation.quaternion().norm();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(ModelError::Invalid {
                field: "head_orientation".into(),
                reason: format!("quaternion norm {norm} is not 1"),
            });
        }
        Ok(())
    }

    /// Largest absolute entry over positions and velocities; NaN if any entry is NaN.
    pub fn max_magnitude(&self) -> f64 {
        let mut m = 0.0f64;
        let mut nan = false;
        let mut see = |x: f64| {
            if x.is_nan() {
                nan = true;
            }
            m = m.max(x.abs());
        };
        self.head_position.iter().for_each(|&x| see(x));
        self.head_linear_velocity.iter().for_each(|&x| see(x));
        self.head_angular_velocity.iter().for_each(|&x| see(x));
        self.joint_angles.iter().for_each(|&x| see(x));
        self.joint_rates.iter().for_each(|&x| see(x));
        if nan {
            f64::NAN
        } else {
            m
        }
    }
}
