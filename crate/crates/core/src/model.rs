//! Robot description, identification parameters and the normalized search box.
//!
//! Everything here is plain data: a [`RobotModel`] describes the fixed
//! kinematic/inertial chain and ground constants, [`TunableParams`] holds the
//! unknowns (actuator triples and Stribeck terms), and [`ParamSpace`] maps the
//! unknowns onto the bounded coordinates the policy acts on.

use std::fmt;
use std::fs;
use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors raised while loading or validating model-level data.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to parse {what}: {source}")]
    Parse {
        what: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("invalid value for `{field}`: {reason}")]
    Invalid { field: String, reason: String },
    #[error("length mismatch for `{field}`: expected {expected}, found {found}")]
    LengthMismatch {
        field: String,
        expected: usize,
        found: usize,
    },
    #[error("parameter `{name}` = {value} is outside [{lower}, {upper}]")]
    OutOfBounds {
        name: String,
        value: f64,
        lower: f64,
        upper: f64,
    },
}

fn invalid(field: impl Into<String>, reason: impl Into<String>) -> ModelError {
    ModelError::Invalid {
        field: field.into(),
        reason: reason.into(),
    }
}

fn positive(field: impl Into<String>, value: f64) -> Result<(), ModelError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(invalid(field, format!("must be strictly positive, got {value}")))
    }
}

pub(crate) fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, ModelError> {
    let text = fs::read_to_string(path).map_err(|source| ModelError::Io {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| ModelError::Parse {
        what: path.display().to_string(),
        source,
    })
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), ModelError> {
    let mut text = serde_json::to_string_pretty(value).expect("plain data always serializes");
    text.push('\n');
    fs::write(path, text).map_err(|source| ModelError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Rotation axis of a joint, expressed in the parent link frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JointAxis {
    /// Rotation about the body y axis (lifts the child link).
    Pitch,
    /// Rotation about the body z axis (swings the child link sideways).
    Yaw,
}

impl JointAxis {
    pub fn local_axis(self) -> Vector3<f64> {
        match self {
            JointAxis::Pitch => Vector3::y(),
            JointAxis::Yaw => Vector3::z(),
        }
    }

    /// Odd joints (1-based, counted from the head) pitch, even joints yaw.
    pub fn alternating(joint_count: usize) -> Vec<JointAxis> {
        (0..joint_count)
            .map(|j| if j % 2 == 0 { JointAxis::Pitch } else { JointAxis::Yaw })
            .collect()
    }
}

/// Inertial description of one capsule-shaped module.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkSpec {
    pub mass_kg: f64,
    /// Principal moments about the link center, body axes x (along the chain), y, z.
    pub inertia_kg_m2: [f64; 3],
    pub length_m: f64,
}

/// Fixed position-loop gains of the servos. Not identified.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServoGains {
    pub kp_v_per_rad: f64,
    pub kd_v_s_per_rad: f64,
    pub torque_limit_n_m: f64,
}

/// Kinematic and inertial description of the chain plus ground constants.
///
/// Link 0 is the head (floating base). Joint `j` (0-based) connects link `j`
/// to link `j + 1`. The head frame sits at the head's center; every other link
/// frame sits on its front joint, with the link extending along body `-x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotModel {
    pub module_count: usize,
    pub joint_count: usize,
    pub links: Vec<LinkSpec>,
    pub joint_axes: Vec<JointAxis>,
    /// Body-frame offset of each link's contact center from the link center.
    pub contact_point_offset_m: [f64; 3],
    /// Capsule radius; the contact point sits this far below the contact center.
    pub contact_radius_m: f64,
    pub ground_spring_n_per_m: f64,
    pub ground_damper_n_s_per_m: f64,
    pub gravity_m_per_s2: f64,
    pub servo: ServoGains,
}

const DEFAULT_MODEL: &str = include_str!("../fixtures/model.json");
const DEFAULT_NOMINAL: &str = include_str!("../fixtures/nominal.json");

impl RobotModel {
    /// The shipped 12-module chain.
    pub fn cobra() -> Self {
        Self::from_json(DEFAULT_MODEL).expect("shipped model fixture is valid")
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let model: RobotModel = serde_json::from_str(text).map_err(|source| ModelError::Parse {
            what: "model".into(),
            source,
        })?;
        model.validate()?;
        Ok(model)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        let model: RobotModel = read_json(path.as_ref())?;
        model.validate()?;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ModelError> {
        write_json(path.as_ref(), self)
    }

    /// A single free body with no joints, mostly useful for testing.
    pub fn single_body(link: LinkSpec) -> Self {
        let mut model = Self::cobra();
        model.module_count = 1;
        model.joint_count = 0;
        model.links = vec![link];
        model.joint_axes.clear();
        model
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.module_count != self.joint_count + 1 {
            return Err(invalid(
                "module_count",
                format!(
                    "must equal joint_count + 1 ({}), got {}",
                    self.joint_count + 1,
                    self.module_count
                ),
            ));
        }
        if self.links.len() != self.module_count {
            return Err(ModelError::LengthMismatch {
                field: "links".into(),
                expected: self.module_count,
                found: self.links.len(),
            });
        }
        if self.joint_axes.len() != self.joint_count {
            return Err(ModelError::LengthMismatch {
                field: "joint_axes".into(),
                expected: self.joint_count,
                found: self.joint_axes.len(),
            });
        }
        for (i, link) in self.links.iter().enumerate() {
            positive(format!("links[{i}].mass_kg"), link.mass_kg)?;
            positive(format!("links[{i}].length_m"), link.length_m)?;
            for (k, moment) in link.inertia_kg_m2.iter().enumerate() {
                positive(format!("links[{i}].inertia_kg_m2[{k}]"), *moment)?;
            }
        }
        if self.joint_axes != JointAxis::alternating(self.joint_count) {
            return Err(invalid(
                "joint_axes",
                "must alternate pitch/yaw starting with pitch at joint 1",
            ));
        }
        if !self.contact_point_offset_m.iter().all(|v| v.is_finite()) {
            return Err(invalid("contact_point_offset_m", "must be finite"));
        }
        if !(self.contact_radius_m.is_finite() && self.contact_radius_m >= 0.0) {
            return Err(invalid("contact_radius_m", "must be non-negative"));
        }
        positive("ground_spring_n_per_m", self.ground_spring_n_per_m)?;
        if !(self.ground_damper_n_s_per_m.is_finite() && self.ground_damper_n_s_per_m >= 0.0) {
            return Err(invalid("ground_damper_n_s_per_m", "must be non-negative"));
        }
        if !(self.gravity_m_per_s2.is_finite() && self.gravity_m_per_s2 >= 0.0) {
            return Err(invalid("gravity_m_per_s2", "must be non-negative"));
        }
        positive("servo.kp_v_per_rad", self.servo.kp_v_per_rad)?;
        if !(self.servo.kd_v_s_per_rad.is_finite() && self.servo.kd_v_s_per_rad >= 0.0) {
            return Err(invalid("servo.kd_v_s_per_rad", "must be non-negative"));
        }
        positive("servo.torque_limit_n_m", self.servo.torque_limit_n_m)?;
        Ok(())
    }

    pub fn dof(&self) -> usize {
        6 + self.joint_count
    }

    pub fn total_mass(&self) -> f64 {
        self.links.iter().map(|l| l.mass_kg).sum()
    }

    /// Static penetration when the weight is shared evenly by all contact points.
    pub fn nominal_penetration(&self) -> f64 {
        self.total_mass() * self.gravity_m_per_s2
            / (self.ground_spring_n_per_m * self.module_count as f64)
    }
}

/// Spong-style actuator parameters of one joint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActuatorParams {
    /// Rotor and gearbox inertia reflected to the joint, kg·m².
    pub transmission_inertia: f64,
    /// Viscous loss inside the drive, N·m·s/rad.
    pub internal_damping: f64,
    /// Torque per volt of command, N·m/V.
    pub motor_constant: f64,
}

impl ActuatorParams {
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            transmission_inertia: self.transmission_inertia * factor,
            internal_damping: self.internal_damping * factor,
            motor_constant: self.motor_constant * factor,
        }
    }
}

/// Coulomb, static and viscous friction coefficients plus the Stribeck velocity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StribeckParams {
    pub mu_c: f64,
    pub mu_s: f64,
    /// N·s/m
    pub mu_v: f64,
    /// m/s
    pub v_s: f64,
}

/// Actuator parameters, either one triple shared by every joint or one per joint.
#[derive(Debug, Clone, PartialEq)]
pub enum ActuatorSet {
    Shared(ActuatorParams),
    PerJoint(Vec<ActuatorParams>),
}

/// The identification target.
#[derive(Debug, Clone, PartialEq)]
pub struct TunableParams {
    pub actuators: ActuatorSet,
    pub stribeck: StribeckParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum ScalarOrList {
    Scalar(f64),
    List(Vec<f64>),
}

/// Flat on-disk form of [`TunableParams`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TunableParamsFile {
    transmission_inertia_kg_m2: ScalarOrList,
    internal_damping_n_m_s_per_rad: ScalarOrList,
    motor_constant_n_m_per_v: ScalarOrList,
    mu_c: f64,
    mu_s: f64,
    mu_v_n_s_per_m: f64,
    v_s_m_per_s: f64,
}

impl TunableParams {
    /// Nominal (untuned) parameters shipped with the default model.
    pub fn nominal() -> Self {
        Self::from_json(DEFAULT_NOMINAL).expect("shipped nominal fixture is valid")
    }

    pub fn new(actuators: ActuatorSet, stribeck: StribeckParams) -> Result<Self, ModelError> {
        let params = Self {
            actuators,
            stribeck,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn actuator(&self, joint: usize) -> ActuatorParams {
        match &self.actuators {
            ActuatorSet::Shared(p) => *p,
            ActuatorSet::PerJoint(list) => list[joint],
        }
    }

    pub fn is_per_joint(&self) -> bool {
        matches!(self.actuators, ActuatorSet::PerJoint(_))
    }

    /// Expands a shared triple into `joint_count` copies.
    pub fn to_per_joint(&self, joint_count: usize) -> Self {
        let list = (0..joint_count).map(|j| self.actuator(j)).collect();
        Self {
            actuators: ActuatorSet::PerJoint(list),
            stribeck: self.stribeck,
        }
    }

    pub fn with_actuators_scaled(&self, factor: f64) -> Self {
        let actuators = match &self.actuators {
            ActuatorSet::Shared(p) => ActuatorSet::Shared(p.scaled(factor)),
            ActuatorSet::PerJoint(list) => {
                ActuatorSet::PerJoint(list.iter().map(|p| p.scaled(factor)).collect())
            }
        };
        Self {
            actuators,
            stribeck: self.stribeck,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let check = |name: String, p: &ActuatorParams| -> Result<(), ModelError> {
            positive(format!("{name}.transmission_inertia"), p.transmission_inertia)?;
            positive(format!("{name}.internal_damping"), p.internal_damping)?;
            positive(format!("{name}.motor_constant"), p.motor_constant)
        };
        match &self.actuators {
            ActuatorSet::Shared(p) => check("actuator".into(), p)?,
            ActuatorSet::PerJoint(list) => {
                if list.is_empty() {
                    return Err(invalid("actuators", "per-joint list is empty"));
                }
                for (j, p) in list.iter().enumerate() {
                    check(format!("actuator[{j}]"), p)?;
                }
            }
        }
        let s = &self.stribeck;
        positive("mu_c", s.mu_c)?;
        positive("mu_s", s.mu_s)?;
        positive("mu_v", s.mu_v)?;
        positive("v_s", s.v_s)?;
        if s.mu_s < s.mu_c {
            return Err(invalid(
                "mu_s",
                format!("static coefficient {} is below Coulomb {}", s.mu_s, s.mu_c),
            ));
        }
        Ok(())
    }

    /// Checks the per-joint list length against a model.
    pub fn check_joint_count(&self, joint_count: usize) -> Result<(), ModelError> {
        if let ActuatorSet::PerJoint(list) = &self.actuators {
            if list.len() != joint_count {
                return Err(ModelError::LengthMismatch {
                    field: "actuators".into(),
                    expected: joint_count,
                    found: list.len(),
                });
            }
        }
        Ok(())
    }

    fn to_file(&self) -> TunableParamsFile {
        let column = |f: fn(&ActuatorParams) -> f64| match &self.actuators {
            ActuatorSet::Shared(p) => ScalarOrList::Scalar(f(p)),
            ActuatorSet::PerJoint(list) => ScalarOrList::List(list.iter().map(f).collect()),
        };
        TunableParamsFile {
            transmission_inertia_kg_m2: column(|p| p.transmission_inertia),
            internal_damping_n_m_s_per_rad: column(|p| p.internal_damping),
            motor_constant_n_m_per_v: column(|p| p.motor_constant),
            mu_c: self.stribeck.mu_c,
            mu_s: self.stribeck.mu_s,
            mu_v_n_s_per_m: self.stribeck.mu_v,
            v_s_m_per_s: self.stribeck.v_s,
        }
    }

    fn from_file(file: TunableParamsFile) -> Result<Self, ModelError> {
        use ScalarOrList::*;
        let actuators = match (
            file.transmission_inertia_kg_m2,
            file.internal_damping_n_m_s_per_rad,
            file.motor_constant_n_m_per_v,
        ) {
            (Scalar(j), Scalar(b), Scalar(k)) => ActuatorSet::Shared(ActuatorParams {
                transmission_inertia: j,
                internal_damping: b,
                motor_constant: k,
            }),
            (List(j), List(b), List(k)) => {
                if b.len() != j.len() || k.len() != j.len() {
                    return Err(ModelError::LengthMismatch {
                        field: "actuator lists".into(),
                        expected: j.len(),
                        found: if b.len() != j.len() { b.len() } else { k.len() },
                    });
                }
                ActuatorSet::PerJoint(
                    j.into_iter()
                        .zip(b)
                        .zip(k)
                        .map(|((j, b), k)| ActuatorParams {
                            transmission_inertia: j,
                            internal_damping: b,
                            motor_constant: k,
                        })
                        .collect(),
                )
            }
            _ => {
                return Err(invalid(
                    "actuators",
                    "actuator fields must all be scalars or all be lists",
                ))
            }
        };
        Self::new(
            actuators,
            StribeckParams {
                mu_c: file.mu_c,
                mu_s: file.mu_s,
                mu_v: file.mu_v_n_s_per_m,
                v_s: file.v_s_m_per_s,
            },
        )
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let file: TunableParamsFile =
            serde_json::from_str(text).map_err(|source| ModelError::Parse {
                what: "tunable parameters".into(),
                source,
            })?;
        Self::from_file(file)
    }

    pub fn to_json(&self) -> String {
        let mut text =
            serde_json::to_string_pretty(&self.to_file()).expect("plain data always serializes");
        text.push('\n');
        text
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        Self::from_file(read_json(path.as_ref())?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ModelError> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|source| ModelError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

/// Which scalar a coordinate of the search box controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    TransmissionInertia { joint: Option<usize> },
    InternalDamping { joint: Option<usize> },
    MotorConstant { joint: Option<usize> },
    MuC,
    /// `mu_s - mu_c`; keeps the static coefficient above the Coulomb one.
    StaticExcess,
    MuV,
    StribeckVelocity,
}

impl ParamKind {
    pub fn is_actuator(self) -> bool {
        matches!(
            self,
            ParamKind::TransmissionInertia { .. }
                | ParamKind::InternalDamping { .. }
                | ParamKind::MotorConstant { .. }
        )
    }
}

impl fmt::Display for ParamKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let suffix = |joint: &Option<usize>| joint.map(|j| format!("[{j}]")).unwrap_or_default();
        match self {
            ParamKind::TransmissionInertia { joint } => {
                write!(f, "transmission_inertia{}", suffix(joint))
            }
            ParamKind::InternalDamping { joint } => write!(f, "internal_damping{}", suffix(joint)),
            ParamKind::MotorConstant { joint } => write!(f, "motor_constant{}", suffix(joint)),
            ParamKind::MuC => write!(f, "mu_c"),
            ParamKind::StaticExcess => write!(f, "mu_s - mu_c"),
            ParamKind::MuV => write!(f, "mu_v"),
            ParamKind::StribeckVelocity => write!(f, "v_s"),
        }
    }
}

/// Bounds of one search coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamBound {
    pub kind: ParamKind,
    pub lower: f64,
    pub upper: f64,
    pub nominal: f64,
}

impl ParamBound {
    /// Log-scale map onto [-1, 1]. A box of `[nominal / r, nominal * r]` puts
    /// the nominal value at 0.
    pub fn normalize(&self, value: f64) -> f64 {
        2.0 * (value / self.lower).ln() / (self.upper / self.lower).ln() - 1.0
    }

    pub fn denormalize(&self, x: f64) -> f64 {
        if x >= 1.0 {
            return self.upper;
        }
        if x <= -1.0 {
            return self.lower;
        }
        self.lower * ((x + 1.0) * 0.5 * (self.upper / self.lower).ln()).exp()
    }
}

/// Bounded, normalized coordinates over [`TunableParams`].
///
/// Coordinate order is the actuator block (three per triple, joint-major when
/// per-joint) followed by `mu_c`, `mu_s - mu_c`, `mu_v`, `v_s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpace {
    pub bounds: Vec<ParamBound>,
}

/// Slack allowed on normalized inputs before they count as out of the box.
const BOX_SLACK: f64 = 1e-12;

impl ParamSpace {
    /// Box of `[lower_factor, upper_factor] × nominal` around every coordinate.
    pub fn around(
        nominal: &TunableParams,
        lower_factor: f64,
        upper_factor: f64,
    ) -> Result<Self, ModelError> {
        nominal.validate()?;
        if !(lower_factor > 0.0 && lower_factor < 1.0 && upper_factor > 1.0) {
            return Err(invalid(
                "bounds",
                format!("factors must satisfy 0 < lower < 1 < upper, got {lower_factor}, {upper_factor}"),
            ));
        }
        let make = |kind, nominal: f64| ParamBound {
            kind,
            lower: nominal * lower_factor,
            upper: nominal * upper_factor,
            nominal,
        };
        let mut bounds = Vec::new();
        let mut push_triple = |joint: Option<usize>, p: &ActuatorParams| {
            bounds.push(make(
                ParamKind::TransmissionInertia { joint },
                p.transmission_inertia,
            ));
            bounds.push(make(ParamKind::InternalDamping { joint }, p.internal_damping));
            bounds.push(make(ParamKind::MotorConstant { joint }, p.motor_constant));
        };
        match &nominal.actuators {
            ActuatorSet::Shared(p) => push_triple(None, p),
            ActuatorSet::PerJoint(list) => {
                for (j, p) in list.iter().enumerate() {
                    push_triple(Some(j), p);
                }
            }
        }
        let s = &nominal.stribeck;
        let excess = s.mu_s - s.mu_c;
        if excess <= 0.0 {
            return Err(invalid(
                "mu_s",
                "nominal static coefficient must exceed the Coulomb one to bound mu_s - mu_c",
            ));
        }
        bounds.push(make(ParamKind::MuC, s.mu_c));
        bounds.push(make(ParamKind::StaticExcess, excess));
        bounds.push(make(ParamKind::MuV, s.mu_v));
        bounds.push(make(ParamKind::StribeckVelocity, s.v_s));
        let space = Self { bounds };
        space.validate()?;
        Ok(space)
    }

    /// The default `[0.25×, 4×]` box.
    pub fn default_around(nominal: &TunableParams) -> Result<Self, ModelError> {
        Self::around(nominal, 0.25, 4.0)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for b in &self.bounds {
            if !(b.lower > 0.0 && b.lower < b.nominal && b.nominal < b.upper && b.upper.is_finite())
            {
                return Err(invalid(
                    b.kind.to_string(),
                    format!(
                        "bounds must satisfy 0 < lower < nominal < upper, got {} < {} < {}",
                        b.lower, b.nominal, b.upper
                    ),
                ));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn is_per_joint(&self) -> bool {
        self.bounds.iter().any(|b| {
            matches!(
                b.kind,
                ParamKind::TransmissionInertia { joint: Some(_) }
            )
        })
    }

    /// Indices of the actuator coordinates.
    pub fn actuator_indices(&self) -> Vec<usize> {
        (0..self.dim())
            .filter(|&i| self.bounds[i].kind.is_actuator())
            .collect()
    }

    /// Indices of the Stribeck coordinates.
    pub fn stribeck_indices(&self) -> Vec<usize> {
        (0..self.dim())
            .filter(|&i| !self.bounds[i].kind.is_actuator())
            .collect()
    }

    /// Physical values of every coordinate, in box order.
    pub fn physical(&self, params: &TunableParams) -> Result<Vec<f64>, ModelError> {
        if params.is_per_joint() != self.is_per_joint() {
            return Err(invalid(
                "actuators",
                "shared/per-joint layout does not match the parameter space",
            ));
        }
        self.bounds
            .iter()
            .map(|b| {
                let value = match b.kind {
                    ParamKind::TransmissionInertia { joint } => {
                        params.actuator(joint.unwrap_or(0)).transmission_inertia
                    }
                    ParamKind::InternalDamping { joint } => {
                        params.actuator(joint.unwrap_or(0)).internal_damping
                    }
                    ParamKind::MotorConstant { joint } => {
                        params.actuator(joint.unwrap_or(0)).motor_constant
                    }
                    ParamKind::MuC => params.stribeck.mu_c,
                    ParamKind::StaticExcess => params.stribeck.mu_s - params.stribeck.mu_c,
                    ParamKind::MuV => params.stribeck.mu_v,
                    ParamKind::StribeckVelocity => params.stribeck.v_s,
                };
                Ok(value)
            })
            .collect()
    }

    /// Maps parameters into `[-1, 1]^dim`. Fails if any value is out of its box.
    pub fn normalize(&self, params: &TunableParams) -> Result<Vec<f64>, ModelError> {
        let physical = self.physical(params)?;
        self.bounds
            .iter()
            .zip(physical)
            .map(|(b, value)| {
                let tol = BOX_SLACK * b.upper;
                if !(value >= b.lower - tol && value <= b.upper + tol) {
                    return Err(ModelError::OutOfBounds {
                        name: b.kind.to_string(),
                        value,
                        lower: b.lower,
                        upper: b.upper,
                    });
                }
                Ok(b.normalize(value).clamp(-1.0, 1.0))
            })
            .collect()
    }

    /// Inverse of [`ParamSpace::normalize`].
    pub fn denormalize(&self, x: &[f64]) -> Result<TunableParams, ModelError> {
        if x.len() != self.dim() {
            return Err(ModelError::LengthMismatch {
                field: "normalized coordinates".into(),
                expected: self.dim(),
                found: x.len(),
            });
        }
        for (b, &xi) in self.bounds.iter().zip(x) {
            if !(xi.is_finite() && xi.abs() <= 1.0 + BOX_SLACK) {
                return Err(ModelError::OutOfBounds {
                    name: b.kind.to_string(),
                    value: xi,
                    lower: -1.0,
                    upper: 1.0,
                });
            }
        }
        let values: Vec<f64> = self
            .bounds
            .iter()
            .zip(x)
            .map(|(b, &xi)| b.denormalize(xi))
            .collect();

        let per_joint = self.is_per_joint();
        let mut triples: Vec<ActuatorParams> = Vec::new();
        let mut stribeck = StribeckParams {
            mu_c: 0.0,
            mu_s: 0.0,
            mu_v: 0.0,
            v_s: 0.0,
        };
        let mut excess = 0.0;
        for (b, &v) in self.bounds.iter().zip(&values) {
            let slot = |joint: Option<usize>, triples: &mut Vec<ActuatorParams>| {
                let j = joint.unwrap_or(0);
                if triples.len() <= j {
                    triples.resize(
                        j + 1,
                        ActuatorParams {
                            transmission_inertia: 0.0,
                            internal_damping: 0.0,
                            motor_constant: 0.0,
                        },
                    );
                }
                j
            };
            match b.kind {
                ParamKind::TransmissionInertia { joint } => {
                    let j = slot(joint, &mut triples);
                    triples[j].transmission_inertia = v;
                }
                ParamKind::InternalDamping { joint } => {
                    let j = slot(joint, &mut triples);
                    triples[j].internal_damping = v;
                }
                ParamKind::MotorConstant { joint } => {
                    let j = slot(joint, &mut triples);
                    triples[j].motor_constant = v;
                }
                ParamKind::MuC => stribeck.mu_c = v,
                ParamKind::StaticExcess => excess = v,
                ParamKind::MuV => stribeck.mu_v = v,
                ParamKind::StribeckVelocity => stribeck.v_s = v,
            }
        }
        stribeck.mu_s = stribeck.mu_c + excess;
        let actuators = if per_joint {
            ActuatorSet::PerJoint(triples)
        } else {
            ActuatorSet::Shared(triples[0])
        };
        TunableParams::new(actuators, stribeck)
    }
}
