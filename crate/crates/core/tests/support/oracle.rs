//! Forward kinematics on dual numbers.
//!
//! Evaluating the chain pose at `q + ε·v` yields positions and rotation
//! matrices together with their exact time derivatives along the generalized
//! velocity `v`, which gives the kinetic energy without going through the
//! spatial-algebra code under test.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{UnitQuaternion, Vector3};
use rand::Rng;
use sidewinder::model::{JointAxis, RobotModel};
use sidewinder::state::SimState;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dual {
    pub re: f64,
    pub du: f64,
}

impl Dual {
    pub fn new(re: f64, du: f64) -> Self {
        Self { re, du }
    }
    pub fn constant(re: f64) -> Self {
        Self { re, du: 0.0 }
    }
    pub fn sin(self) -> Self {
        Self::new(self.re.sin(), self.du * self.re.cos())
    }
    pub fn cos(self) -> Self {
        Self::new(self.re.cos(), -self.du * self.re.sin())
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, o: Dual) -> Dual {
        Dual::new(self.re + o.re, self.du + o.du)
    }
}

impl Sub for Dual {
    type Output = Dual;
    fn sub(self, o: Dual) -> Dual {
        Dual::new(self.re - o.re, self.du - o.du)
    }
}

impl Mul for Dual {
    type Output = Dual;
    fn mul(self, o: Dual) -> Dual {
        Dual::new(self.re * o.re, self.re * o.du + self.du * o.re)
    }
}

impl Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        Dual::new(-self.re, -self.du)
    }
}

pub type V3 = [Dual; 3];
pub type M3 = [[Dual; 3]; 3];

fn zero() -> Dual {
    Dual::constant(0.0)
}

pub fn matmul(a: &M3, b: &M3) -> M3 {
    let mut out = [[zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                out[i][j] = out[i][j] + a[i][k] * b[k][j];
            }
        }
    }
    out
}

pub fn matvec(a: &M3, v: &V3) -> V3 {
    let mut out = [zero(); 3];
    for i in 0..3 {
        for k in 0..3 {
            out[i] = out[i] + a[i][k] * v[k];
        }
    }
    out
}

fn add3(a: &V3, b: &V3) -> V3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn scale3(a: &V3, s: f64) -> V3 {
    let s = Dual::constant(s);
    [a[0] * s, a[1] * s, a[2] * s]
}

fn column(m: &M3, k: usize) -> V3 {
    [m[0][k], m[1][k], m[2][k]]
}

/// Elementary rotation of a joint by a dual angle.
fn joint_rotation(axis: JointAxis, angle: Dual) -> M3 {
    let (s, c) = (angle.sin(), angle.cos());
    let (o, l) = (zero(), Dual::constant(1.0));
    match axis {
        JointAxis::Pitch => [[c, o, s], [o, l, o], [-s, o, c]],
        JointAxis::Yaw => [[c, -s, o], [s, c, o], [o, o, l]],
    }
}

/// `R·(I + ε[ω]×)`: the head orientation moving with body angular velocity `ω`.
fn head_rotation(state: &SimState) -> M3 {
    let r = state.head_orientation.to_rotation_matrix();
    let r = r.matrix();
    let w = state.head_angular_velocity;
    let skew = [[0.0, -w.z, w.y], [w.z, 0.0, -w.x], [-w.y, w.x, 0.0]];
    let mut out = [[zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let du: f64 = (0..3).map(|k| r[(i, k)] * skew[k][j]).sum();
            out[i][j] = Dual::new(r[(i, j)], du);
        }
    }
    out
}

/// Pose of one link with first derivatives along the state's velocity.
pub struct DualLink {
    pub rotation: M3,
    pub com: V3,
    pub contact_center: V3,
}

pub fn forward_kinematics(model: &RobotModel, state: &SimState) -> Vec<DualLink> {
    let mut out: Vec<DualLink> = Vec::with_capacity(model.module_count);
    let p = state.head_position;
    let v = state.head_linear_velocity;
    let mut origin = [Dual::new(p.x, v.x), Dual::new(p.y, v.y), Dual::new(p.z, v.z)];
    let mut rotation = head_rotation(state);
    let offset = model.contact_point_offset_m.map(Dual::constant);
    for i in 0..model.module_count {
        if i > 0 {
            let prev = &out[i - 1];
            let x = column(&prev.rotation, 0);
            origin = add3(&prev.com, &scale3(&x, -0.5 * model.links[i - 1].length_m));
            let angle = Dual::new(state.joint_angles[i - 1], state.joint_rates[i - 1]);
            rotation = matmul(&prev.rotation, &joint_rotation(model.joint_axes[i - 1], angle));
        }
        let x = column(&rotation, 0);
        let com = if i == 0 {
            origin
        } else {
            add3(&origin, &scale3(&x, -0.5 * model.links[i].length_m))
        };
        let contact_center = add3(&com, &matvec(&rotation, &offset));
        out.push(DualLink {
            rotation,
            com,
            contact_center,
        });
    }
    out
}

pub fn real(v: &V3) -> Vector3<f64> {
    Vector3::new(v[0].re, v[1].re, v[2].re)
}

pub fn deriv(v: &V3) -> Vector3<f64> {
    Vector3::new(v[0].du, v[1].du, v[2].du)
}

/// `Σ ½m|v_com|² + ½ωᵀIω` with `[ω]× = Rᵀ·Ṙ` in body axes.
pub fn kinetic_energy(model: &RobotModel, state: &SimState) -> f64 {
    forward_kinematics(model, state)
        .iter()
        .zip(&model.links)
        .map(|(l, spec)| {
            let v = deriv(&l.com);
            // body angular velocity from the skew matrix Rᵀ·Ṙ
            let rt_rdot = |i: usize, j: usize| -> f64 { (0..3).map(|k| l.rotation[k][i].re * l.rotation[k][j].du).sum() };
            let w = Vector3::new(rt_rdot(2, 1), rt_rdot(0, 2), rt_rdot(1, 0));
            let inertia = Vector3::from(spec.inertia_kg_m2);
            0.5 * spec.mass_kg * v.norm_squared() + 0.5 * w.component_mul(&w).dot(&inertia)
        })
        .sum()
}

pub fn potential_energy(model: &RobotModel, state: &SimState) -> f64 {
    forward_kinematics(model, state)
        .iter()
        .zip(&model.links)
        .map(|(l, spec)| spec.mass_kg * model.gravity_m_per_s2 * l.com[2].re)
        .sum()
}

/// Ground-contact points: contact centers dropped by the capsule radius.
pub fn contact_points(model: &RobotModel, state: &SimState) -> Vec<Vector3<f64>> {
    forward_kinematics(model, state)
        .iter()
        .map(|l| real(&l.contact_center) - Vector3::new(0.0, 0.0, model.contact_radius_m))
        .collect()
}

/// Moves the configuration by `h` along the generalized direction `dq`
/// (head translation in world axes, head rotation in body axes, joints).
pub fn displace(state: &SimState, dq: &[f64], h: f64) -> SimState {
    let mut s = state.clone();
    s.head_position += Vector3::new(dq[0], dq[1], dq[2]) * h;
    let turn = UnitQuaternion::from_scaled_axis(Vector3::new(dq[3], dq[4], dq[5]) * h);
    s.head_orientation = s.head_orientation * turn;
    for (q, d) in s.joint_angles.iter_mut().zip(&dq[6..]) {
        *q += h * d;
    }
    s
}

/// A random pose and velocity, joints within ±1.2 rad.
pub fn random_state<R: Rng>(model: &RobotModel, rng: &mut R) -> SimState {
    let mut s = SimState::straight(model, Vector3::zeros(), 0.0);
    let mut u = |a: f64| rng.random_range(-a..a);
    s.head_position = Vector3::new(u(2.0), u(2.0), u(1.0));
    s.head_orientation = UnitQuaternion::from_euler_angles(u(3.1), u(1.5), u(3.1));
    s.head_linear_velocity = Vector3::new(u(1.0), u(1.0), u(1.0));
    s.head_angular_velocity = Vector3::new(u(2.0), u(2.0), u(2.0));
    for j in 0..model.joint_count {
        s.joint_angles[j] = u(1.2);
        s.joint_rates[j] = u(3.0);
        s.actuator_rotor_rates[j] = s.joint_rates[j];
    }
    s
}
