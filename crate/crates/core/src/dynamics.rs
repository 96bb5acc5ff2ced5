//! Floating-base equations of motion of the chain.
//!
//! The generalized coordinates are the head pose plus the joint angles; the
//! generalized velocities are `[v_head (world), ω_head (body), joint rates]`.
//! Everything is evaluated in world coordinates: link inertias and joint
//! motion axes are rotated into the world frame once per evaluation, the mass
//! matrix comes from composite rigid bodies and the bias vector from a
//! recursive Newton–Euler pass with zero acceleration.
//!
//! ```text
//! [D_H  D_Ha] [q̈_H]   [H_H]   [0  ]       [J_Hᵀ]
//! [D_aH D_a ] [q̈_a] + [H_a] = [B_a] u  +  [J_aᵀ] F_GRF
//! ```

use nalgebra::{DMatrix, DVector, Matrix3, UnitQuaternion, Vector3};
use thiserror::Error;

use crate::model::{RobotModel, TunableParams};
use crate::spatial::{Force, Motion, RigidInertia};
use crate::state::SimState;

#[derive(Debug, Error, PartialEq)]
pub enum DynamicsError {
    #[error("mass matrix is not positive definite (pivot {pivot} = {value:e})")]
    SingularMassMatrix { pivot: usize, value: f64 },
    #[error("`{what}` has length {found}, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("timestep must be positive and finite, got {0}")]
    InvalidTimestep(f64),
}

/// World pose of one link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkFrame {
    /// Frame origin: the head center for link 0, the front joint otherwise.
    pub origin: Vector3<f64>,
    pub rotation: Matrix3<f64>,
    pub com: Vector3<f64>,
    /// Rear end, where the next joint sits.
    pub rear: Vector3<f64>,
    /// Body point carrying the ground contact.
    pub contact_center: Vector3<f64>,
}

/// Positions, motion subspaces, twists and world inertias for one state.
#[derive(Debug, Clone)]
pub struct Kinematics {
    pub links: Vec<LinkFrame>,
    /// Motion subspace of each joint (one column).
    pub joint_motion: Vec<Motion>,
    /// Columns of the floating-base motion subspace: three world translations
    /// followed by rotations about the head body axes.
    pub base_motion: [Motion; 6],
    /// Spatial velocity of each link.
    pub twists: Vec<Motion>,
    pub inertias: Vec<RigidInertia>,
    /// Ground-contact points `p_C` and their velocities `ṗ_C`.
    pub contact_points: Vec<Vector3<f64>>,
    pub contact_velocities: Vec<Vector3<f64>>,
}

fn local_rotation(axis: Vector3<f64>, angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    if axis.y != 0.0 {
        Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
    } else {
        Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
    }
}

fn com_offset(model: &RobotModel, link: usize) -> f64 {
    if link == 0 {
        0.0
    } else {
        -0.5 * model.links[link].length_m
    }
}

impl Kinematics {
    pub fn new(model: &RobotModel, state: &SimState) -> Self {
        let n = model.module_count;
        let frame = LinkFrame {
            origin: Vector3::zeros(),
            rotation: Matrix3::identity(),
            com: Vector3::zeros(),
            rear: Vector3::zeros(),
            contact_center: Vector3::zeros(),
        };
        let mut kin = Self {
            links: vec![frame; n],
            joint_motion: vec![Motion::zero(); model.joint_count],
            base_motion: [Motion::zero(); 6],
            twists: vec![Motion::zero(); n],
            inertias: vec![RigidInertia::default(); n],
            contact_points: vec![Vector3::zeros(); n],
            contact_velocities: vec![Vector3::zeros(); n],
        };
        kin.update(model, state);
        kin
    }

    /// Recomputes everything for `state` without reallocating.
    pub fn update(&mut self, model: &RobotModel, state: &SimState) {
        self.update_positions(model, state);
        self.update_velocities(model, state);
    }

    fn update_positions(&mut self, model: &RobotModel, state: &SimState) {
        let offset = Vector3::from(model.contact_point_offset_m);
        let drop = Vector3::new(0.0, 0.0, model.contact_radius_m);
        for i in 0..model.module_count {
            let (origin, rotation) = if i == 0 {
                (
                    state.head_position,
                    *state.head_orientation.to_rotation_matrix().matrix(),
                )
            } else {
                let parent = &self.links[i - 1];
                let axis = model.joint_axes[i - 1].local_axis();
                let world_axis = parent.rotation * axis;
                self.joint_motion[i - 1] = Motion::revolute(world_axis, parent.rear);
                (
                    parent.rear,
                    parent.rotation * local_rotation(axis, state.joint_angles[i - 1]),
                )
            };
            let link = &model.links[i];
            let x = rotation.column(0).into_owned();
            let com = origin + x * com_offset(model, i);
            let rear = com - x * (0.5 * link.length_m);
            let contact_center = com + rotation * offset;
            self.links[i] = LinkFrame {
                origin,
                rotation,
                com,
                rear,
                contact_center,
            };
            let principal = Matrix3::from_diagonal(&Vector3::from(link.inertia_kg_m2));
            let inertia_com = rotation * principal * rotation.transpose();
            self.inertias[i] = RigidInertia::from_body(link.mass_kg, &com, &inertia_com);
            self.contact_points[i] = contact_center - drop;
        }
        let head = &self.links[0];
        for k in 0..3 {
            self.base_motion[k] = Motion::new(Vector3::zeros(), Vector3::ith(k, 1.0));
            self.base_motion[k + 3] =
                Motion::revolute(head.rotation.column(k).into_owned(), head.origin);
        }
    }

    fn update_velocities(&mut self, model: &RobotModel, state: &SimState) {
        let mut v = Motion::zero();
        for k in 0..3 {
            v += self.base_motion[k] * state.head_linear_velocity[k];
            v += self.base_motion[k + 3] * state.head_angular_velocity[k];
        }
        self.twists[0] = v;
        for i in 1..model.module_count {
            self.twists[i] = self.twists[i - 1] + self.joint_motion[i - 1] * state.joint_rates[i - 1];
        }
        for i in 0..model.module_count {
            self.contact_velocities[i] = self.twists[i].point_velocity(&self.links[i].contact_center);
        }
    }

    /// Shifts every twist by a pure translation of the base.
    fn translate_velocities(&mut self, dv: &Vector3<f64>) {
        for t in &mut self.twists {
            t.lin += dv;
        }
        for v in &mut self.contact_velocities {
            *v += dv;
        }
    }

    pub fn linear_momentum(&self) -> Vector3<f64> {
        self.inertias
            .iter()
            .zip(&self.twists)
            .map(|(i, v)| i.apply(v).lin)
            .sum()
    }

    /// Rigid-body kinetic energy (rotor inertia excluded).
    pub fn kinetic_energy(&self) -> f64 {
        self.inertias
            .iter()
            .zip(&self.twists)
            .map(|(i, v)| 0.5 * v.dot(&i.apply(v)))
            .sum()
    }

    pub fn potential_energy(&self, model: &RobotModel) -> f64 {
        self.inertias
            .iter()
            .map(|i| i.h.z * model.gravity_m_per_s2)
            .sum()
    }

    /// Velocity-to-point Jacobian (3 × dof) of the contact point on `link`.
    pub fn contact_jacobian(&self, model: &RobotModel, link: usize) -> DMatrix<f64> {
        let p = self.links[link].contact_center;
        let mut jac = DMatrix::zeros(3, model.dof());
        for (k, s) in self.base_motion.iter().enumerate() {
            jac.fixed_view_mut::<3, 1>(0, k)
                .copy_from(&s.point_velocity(&p));
        }
        for j in 0..link {
            jac.fixed_view_mut::<3, 1>(0, 6 + j)
                .copy_from(&self.joint_motion[j].point_velocity(&p));
        }
        jac
    }
}

/// Fills `out` (row-major, dof × dof) with the joint-space mass matrix.
fn mass_matrix_into(model: &RobotModel, kin: &Kinematics, composite: &mut [RigidInertia], out: &mut [f64]) {
    let nb = model.module_count;
    let dof = model.dof();
    debug_assert_eq!(out.len(), dof * dof);
    composite[nb - 1] = kin.inertias[nb - 1];
    for i in (0..nb - 1).rev() {
        composite[i] = composite[i + 1] + kin.inertias[i];
    }
    for j in 0..model.joint_count {
        let col = 6 + j;
        let f = composite[j + 1].apply(&kin.joint_motion[j]);
        for jj in 0..=j {
            let value = kin.joint_motion[jj].dot(&f);
            out[(6 + jj) * dof + col] = value;
            out[col * dof + 6 + jj] = value;
        }
        for (k, s) in kin.base_motion.iter().enumerate() {
            let value = s.dot(&f);
            out[k * dof + col] = value;
            out[col * dof + k] = value;
        }
    }
    for c in 0..6 {
        let f = composite[0].apply(&kin.base_motion[c]);
        for r in 0..=c {
            let value = kin.base_motion[r].dot(&f);
            out[r * dof + c] = value;
            out[c * dof + r] = value;
        }
    }
}

/// Recursive Newton–Euler: generalized forces needed to produce `accel` given
/// the current velocities, gravity and the per-link external forces `ext`.
/// With `accel = None` this is the bias `H` minus the external contribution.
fn inverse_dynamics_into(
    model: &RobotModel,
    kin: &Kinematics,
    state: &SimState,
    accel: Option<&[f64]>,
    ext: Option<&[Force]>,
    forces: &mut [Force],
    out: &mut [f64],
) {
    let nb = model.module_count;
    let omega = kin.twists[0].ang;
    let mut a = Motion::new(
        Vector3::zeros(),
        state.head_linear_velocity.cross(&omega) + Vector3::new(0.0, 0.0, model.gravity_m_per_s2),
    );
    if let Some(acc) = accel {
        for k in 0..6 {
            a += kin.base_motion[k] * acc[k];
        }
    }
    for i in 0..nb {
        if i > 0 {
            let s = &kin.joint_motion[i - 1];
            let rate = state.joint_rates[i - 1];
            a += kin.twists[i].cross(s) * rate;
            if let Some(acc) = accel {
                a += *s * acc[6 + i - 1];
            }
        }
        let v = &kin.twists[i];
        let inertia = &kin.inertias[i];
        let mut f = inertia.apply(&a) + v.cross_force(&inertia.apply(v));
        if let Some(ext) = ext {
            f = f - ext[i];
        }
        forces[i] = f;
    }
    for i in (1..nb).rev() {
        let child = forces[i];
        forces[i - 1] += child;
        out[6 + i - 1] = kin.joint_motion[i - 1].dot(&child);
    }
    for k in 0..6 {
        out[k] = kin.base_motion[k].dot(&forces[0]);
    }
}

/// In-place Cholesky factorization and solve of a row-major SPD system.
fn cholesky_solve(n: usize, a: &mut [f64], b: &mut [f64]) -> Result<(), DynamicsError> {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(DynamicsError::SingularMassMatrix { pivot: j, value: d });
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
    }
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= a[i * n + k] * b[k];
        }
        b[i] = s / a[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in (i + 1)..n {
            s -= a[k * n + i] * b[k];
        }
        b[i] = s / a[i * n + i];
    }
    Ok(())
}

/// The partitioned terms of the equations of motion at one state.
#[derive(Debug, Clone)]
pub struct DynamicsTerms {
    /// Full `(6 + n) × (6 + n)` mass matrix.
    pub mass: DMatrix<f64>,
    /// Coriolis, centrifugal and gravity terms.
    pub bias: DVector<f64>,
    /// One `3 × (6 + n)` Jacobian per contact point.
    pub contact_jacobians: Vec<DMatrix<f64>>,
    joint_count: usize,
}

impl DynamicsTerms {
    pub fn compute(model: &RobotModel, state: &SimState) -> Self {
        let kin = Kinematics::new(model, state);
        Self {
            mass: mass_matrix_from(model, &kin),
            bias: bias_from(model, &kin, state),
            contact_jacobians: (0..model.module_count)
                .map(|i| kin.contact_jacobian(model, i))
                .collect(),
            joint_count: model.joint_count,
        }
    }

    pub fn d_h(&self) -> DMatrix<f64> {
        self.mass.view((0, 0), (6, 6)).into_owned()
    }
    pub fn d_ha(&self) -> DMatrix<f64> {
        self.mass.view((0, 6), (6, self.joint_count)).into_owned()
    }
    pub fn d_ah(&self) -> DMatrix<f64> {
        self.mass.view((6, 0), (self.joint_count, 6)).into_owned()
    }
    pub fn d_a(&self) -> DMatrix<f64> {
        self.mass
            .view((6, 6), (self.joint_count, self.joint_count))
            .into_owned()
    }
    pub fn h_h(&self) -> DVector<f64> {
        self.bias.rows(0, 6).into_owned()
    }
    pub fn h_a(&self) -> DVector<f64> {
        self.bias.rows(6, self.joint_count).into_owned()
    }
    /// Input map: joint torques act on the joint coordinates only.
    pub fn b_a(&self) -> DMatrix<f64> {
        DMatrix::identity(self.joint_count, self.joint_count)
    }
}

fn mass_matrix_from(model: &RobotModel, kin: &Kinematics) -> DMatrix<f64> {
    let dof = model.dof();
    let mut buf = vec![0.0; dof * dof];
    let mut composite = vec![RigidInertia::default(); model.module_count];
    mass_matrix_into(model, kin, &mut composite, &mut buf);
    DMatrix::from_row_slice(dof, dof, &buf)
}

fn bias_from(model: &RobotModel, kin: &Kinematics, state: &SimState) -> DVector<f64> {
    let mut out = vec![0.0; model.dof()];
    let mut forces = vec![Force::zero(); model.module_count];
    inverse_dynamics_into(model, kin, state, None, None, &mut forces, &mut out);
    DVector::from_vec(out)
}

/// Joint-space mass matrix `D` (symmetric positive definite).
pub fn compute_mass_matrix(model: &RobotModel, state: &SimState) -> DMatrix<f64> {
    mass_matrix_from(model, &Kinematics::new(model, state))
}

/// Bias vector `H` such that `D q̈ + H` equals the applied generalized forces.
pub fn compute_bias(model: &RobotModel, state: &SimState) -> DVector<f64> {
    bias_from(model, &Kinematics::new(model, state), state)
}

/// Contact points, their velocities and Jacobians for every link.
#[derive(Debug, Clone)]
pub struct ContactKinematics {
    pub positions: Vec<Vector3<f64>>,
    pub velocities: Vec<Vector3<f64>>,
    pub jacobians: Vec<DMatrix<f64>>,
}

pub fn contact_jacobians(model: &RobotModel, state: &SimState) -> ContactKinematics {
    let kin = Kinematics::new(model, state);
    ContactKinematics {
        jacobians: (0..model.module_count)
            .map(|i| kin.contact_jacobian(model, i))
            .collect(),
        positions: kin.contact_points,
        velocities: kin.contact_velocities,
    }
}

/// Semi-implicit Euler integrator with reusable buffers.
///
/// Each step solves `(D + diag(0, J_rotor)) ν̇ = u + Jᵀ F − H`, updates the
/// velocities, then the pose from the new velocities. Rotor inertias enter the
/// mass matrix so the rotor reaction torque is treated implicitly. After the
/// pose update the base velocity is shifted so that the total linear momentum
/// changes by exactly `dt` times the net external force.
#[derive(Debug, Clone)]
pub struct Integrator {
    state: SimState,
    kin: Kinematics,
    mass: Vec<f64>,
    rhs: Vec<f64>,
    composite: Vec<RigidInertia>,
    forces: Vec<Force>,
    external: Vec<Force>,
    kin_valid: bool,
}

impl Integrator {
    pub fn new(model: &RobotModel, state: SimState) -> Self {
        let dof = model.dof();
        let kin = Kinematics::new(model, &state);
        Self {
            state,
            kin,
            mass: vec![0.0; dof * dof],
            rhs: vec![0.0; dof],
            composite: vec![RigidInertia::default(); model.module_count],
            forces: vec![Force::zero(); model.module_count],
            external: vec![Force::zero(); model.module_count],
            kin_valid: true,
        }
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    /// Mutable access; invalidates the cached kinematics.
    pub fn state_mut(&mut self) -> &mut SimState {
        self.kin_valid = false;
        &mut self.state
    }

    pub fn into_state(self) -> SimState {
        self.state
    }

    pub fn kinematics(&mut self, model: &RobotModel) -> &Kinematics {
        if !self.kin_valid {
            self.kin.update(model, &self.state);
            self.kin_valid = true;
        }
        &self.kin
    }

    /// Advances one step.
    ///
    /// `torques` are the joint drive torques (rotor inertia reaction excluded),
    /// `contact_forces` the world force on each link's contact point and
    /// `rotor_inertia` the per-joint reflected inertia.
    pub fn advance(
        &mut self,
        model: &RobotModel,
        rotor_inertia: &[f64],
        torques: &[f64],
        contact_forces: &[Vector3<f64>],
        dt: f64,
    ) -> Result<(), DynamicsError> {
        let n = model.joint_count;
        let dof = model.dof();
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(DynamicsError::InvalidTimestep(dt));
        }
        for (what, len, expected) in [
            ("torques", torques.len(), n),
            ("rotor_inertia", rotor_inertia.len(), n),
            ("contact_forces", contact_forces.len(), model.module_count),
        ] {
            if len != expected {
                return Err(DynamicsError::LengthMismatch {
                    what,
                    expected,
                    found: len,
                });
            }
        }
        self.kinematics(model);

        mass_matrix_into(model, &self.kin, &mut self.composite, &mut self.mass);
        for j in 0..n {
            self.mass[(6 + j) * dof + 6 + j] += rotor_inertia[j];
        }
        let mut net_force = Vector3::new(0.0, 0.0, -model.total_mass() * model.gravity_m_per_s2);
        for i in 0..model.module_count {
            self.external[i] = Force::at_point(contact_forces[i], &self.kin.links[i].contact_center);
            net_force += contact_forces[i];
        }
        inverse_dynamics_into(
            model,
            &self.kin,
            &self.state,
            None,
            Some(&self.external),
            &mut self.forces,
            &mut self.rhs,
        );
        for r in self.rhs.iter_mut() {
            *r = -*r;
        }
        for j in 0..n {
            self.rhs[6 + j] += torques[j];
        }
        cholesky_solve(dof, &mut self.mass, &mut self.rhs)?;

        let target_momentum = self.kin.linear_momentum() + net_force * dt;
        let s = &mut self.state;
        for k in 0..3 {
            s.head_linear_velocity[k] += dt * self.rhs[k];
            s.head_angular_velocity[k] += dt * self.rhs[3 + k];
        }
        for j in 0..n {
            s.joint_rates[j] += dt * self.rhs[6 + j];
            s.actuator_rotor_rates[j] = s.joint_rates[j];
            s.joint_angles[j] += dt * s.joint_rates[j];
        }
        s.head_position += s.head_linear_velocity * dt;
        let turn = UnitQuaternion::from_scaled_axis(s.head_angular_velocity * dt);
        s.head_orientation = UnitQuaternion::new_normalize(*(s.head_orientation * turn).quaternion());
        s.time += dt;

        self.kin.update(model, &self.state);
        let correction = (target_momentum - self.kin.linear_momentum()) / model.total_mass();
        self.state.head_linear_velocity += correction;
        self.kin.translate_velocities(&correction);
        self.kin_valid = true;
        Ok(())
    }
}

/// One semi-implicit Euler step from `state` under joint torques `u` and
/// per-link contact forces. Rotor inertias come from `tunables`.
pub fn step(
    model: &RobotModel,
    tunables: &TunableParams,
    state: &SimState,
    torques: &[f64],
    contact_forces: &[Vector3<f64>],
    dt: f64,
) -> Result<SimState, DynamicsError> {
    let rotor: Vec<f64> = (0..model.joint_count)
        .map(|j| tunables.actuator(j).transmission_inertia)
        .collect();
    let mut integrator = Integrator::new(model, state.clone());
    integrator.advance(model, &rotor, torques, contact_forces, dt)?;
    Ok(integrator.into_state())
}
