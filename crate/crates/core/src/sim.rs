//! Closed-loop rollouts and trajectory recording.
//!
//! A rollout starts from a straight chain just above the ground, lets it
//! settle while the servos ease into the gait's starting pose, then runs the
//! gait: every physics step evaluates the CPG references, the actuator torques,
//! the ground reactions and one integrator step. Samples are recorded at a
//! fixed rate after the settle phase, with time measured from its end.
//!
//! Reference ("hardware") trajectories are rollouts under hidden parameters,
//! optionally corrupted with Gaussian measurement noise.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::Vector3;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::actuator::{actuator_torque, ActuatorState, JointState};
use crate::contact::{ground_reaction, GroundParams};
use crate::dynamics::{DynamicsError, Integrator};
use crate::gait::{cpg_reference_into, GaitParams};
use crate::model::{ModelError, ParamSpace, RobotModel, TunableParams};
use crate::rng;
use crate::state::SimState;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("simulation blew up at t = {time:.4} s (state magnitude {magnitude:e})")]
    BlowUp { time: f64, magnitude: f64 },
    #[error("invalid rollout configuration: {0}")]
    Config(String),
    #[error("trajectory file {path}: {reason}")]
    Format { path: String, reason: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Any state entry beyond this magnitude aborts the rollout.
pub const BLOW_UP_LIMIT: f64 = 1e6;

/// Clearance of the contact points at the start of the settle phase, m.
pub const DROP_CLEARANCE_M: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RolloutConfig {
    pub duration_s: f64,
    pub dt_s: f64,
    pub record_rate_hz: f64,
    /// Settle time before recording starts; excluded from the trajectory.
    pub settle_s: f64,
    pub initial_xy_m: [f64; 2],
    pub initial_heading_rad: f64,
    /// Seeds measurement noise.
    pub seed: u64,
    pub clamp_normal_force: bool,
}

impl Default for RolloutConfig {
    fn default() -> Self {
        Self {
            duration_s: 8.0,
            dt_s: 1e-4,
            record_rate_hz: 100.0,
            settle_s: 0.5,
            initial_xy_m: [0.0, 0.0],
            initial_heading_rad: 0.0,
            seed: 0,
            clamp_normal_force: true,
        }
    }
}

impl RolloutConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Config(m));
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return bad(format!("duration must be positive, got {}", self.duration_s));
        }
        if !(self.dt_s > 0.0 && self.dt_s.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt_s));
        }
        if !(self.record_rate_hz > 0.0 && self.record_rate_hz <= 1.0 / self.dt_s * (1.0 + 1e-9)) {
            return bad(format!(
                "record rate {} Hz must be positive and at most 1/dt = {} Hz",
                self.record_rate_hz,
                1.0 / self.dt_s
            ));
        }
        let stride = 1.0 / (self.record_rate_hz * self.dt_s);
        if (stride - stride.round()).abs() > 1e-6 {
            return bad(format!("1/(record rate · dt) = {stride} is not an integer"));
        }
        if !(self.settle_s >= 0.0 && self.settle_s.is_finite()) {
            return bad(format!("settle time must be non-negative, got {}", self.settle_s));
        }
        Ok(())
    }

    fn stride(&self) -> usize {
        (1.0 / (self.record_rate_hz * self.dt_s)).round() as usize
    }

    pub fn sample_count(&self) -> usize {
        (self.duration_s * self.record_rate_hz + 1e-9).floor() as usize + 1
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        crate::model::read_json(path.as_ref())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ModelError> {
        crate::model::write_json(path.as_ref(), self)
    }
}

/// One recorded sample.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySample {
    pub t: f64,
    pub position: [f64; 3],
    /// Head orientation quaternion `(w, x, y, z)`.
    pub orientation: [f64; 4],
    pub joints: Vec<f64>,
    /// CPG references at `t`.
    pub references: Vec<f64>,
}

/// Uniformly sampled head pose and joint record.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub sample_period: f64,
    pub joint_count: usize,
    pub samples: Vec<TrajectorySample>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn joint_series(&self, joint: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s.joints[joint]).collect()
    }

    pub fn reference_series(&self, joint: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s.references[joint]).collect()
    }

    pub fn final_xy(&self) -> [f64; 2] {
        let last = self.samples.last().expect("trajectory is non-empty");
        [last.position[0], last.position[1]]
    }

    pub fn duration(&self) -> f64 {
        match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => b.t - a.t,
            _ => 0.0,
        }
    }

    /// Strictly increasing, uniformly spaced timestamps and fixed column count.
    pub fn validate(&self) -> Result<(), String> {
        if self.samples.is_empty() {
            return Err("no samples".into());
        }
        if !(self.sample_period > 0.0) {
            return Err(format!("sample period {} is not positive", self.sample_period));
        }
        for (k, s) in self.samples.iter().enumerate() {
            if s.joints.len() != self.joint_count || s.references.len() != self.joint_count {
                return Err(format!("sample {k} has the wrong number of joint columns"));
            }
            if k > 0 {
                let dt = s.t - self.samples[k - 1].t;
                if !(dt > 0.0) {
                    return Err(format!("timestamps not increasing at sample {k}"));
                }
                if (dt - self.sample_period).abs() > 1e-6 * self.sample_period.max(1.0) {
                    return Err(format!("non-uniform sampling at sample {k}"));
                }
            }
        }
        Ok(())
    }

    pub fn csv_header(joint_count: usize) -> Vec<String> {
        let mut header: Vec<String> = ["t", "x", "y", "z", "qw", "qx", "qy", "qz"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        header.extend((1..=joint_count).map(|j| format!("q{j}")));
        header.extend((1..=joint_count).map(|j| format!("r{j}")));
        header
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(Self::csv_header(self.joint_count))?;
        let mut row: Vec<String> = Vec::with_capacity(8 + 2 * self.joint_count);
        for s in &self.samples {
            row.clear();
            row.push(s.t.to_string());
            row.extend(s.position.iter().map(|v| v.to_string()));
            row.extend(s.orientation.iter().map(|v| v.to_string()));
            row.extend(s.joints.iter().map(|v| v.to_string()));
            row.extend(s.references.iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self, String> {
        let mut r = csv::Reader::from_reader(reader);
        let header: Vec<String> = r
            .headers()
            .map_err(|e| e.to_string())?
            .iter()
            .map(|s| s.trim().to_string())
            .collect();
        if header.len() < 8 || (header.len() - 8) % 2 != 0 {
            return Err(format!("unexpected column count {}", header.len()));
        }
        let joint_count = (header.len() - 8) / 2;
        if header != Self::csv_header(joint_count) {
            return Err(format!("unexpected header {}", header.join(",")));
        }
        let mut samples = Vec::new();
        for (k, record) in r.records().enumerate() {
            let record = record.map_err(|e| e.to_string())?;
            let values: Vec<f64> = record
                .iter()
                .map(|v| v.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| format!("row {}: {e}", k + 1))?;
            if values.len() != header.len() {
                return Err(format!("row {} has {} columns", k + 1, values.len()));
            }
            samples.push(TrajectorySample {
                t: values[0],
                position: [values[1], values[2], values[3]],
                orientation: [values[4], values[5], values[6], values[7]],
                joints: values[8..8 + joint_count].to_vec(),
                references: values[8 + joint_count..].to_vec(),
            });
        }
        let sample_period = if samples.len() > 1 {
            (samples[samples.len() - 1].t - samples[0].t) / (samples.len() - 1) as f64
        } else {
            1.0
        };
        let traj = Self {
            sample_period,
            joint_count,
            samples,
        };
        traj.validate()?;
        Ok(traj)
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<(), SimError> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|source| SimError::Io {
            path: path.display().to_string(),
            source,
        })?;
        self.write_csv(std::io::BufWriter::new(file))
            .map_err(|e| SimError::Format {
                path: path.display().to_string(),
                reason: e.to_string(),
            })
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self, SimError> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|source| SimError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::read_csv(std::io::BufReader::new(file)).map_err(|reason| SimError::Format {
            path: path.display().to_string(),
            reason,
        })
    }
}

fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * (3.0 - 2.0 * x)
}

fn check_inputs(
    model: &RobotModel,
    tunables: &TunableParams,
    gait: &GaitParams,
    config: &RolloutConfig,
) -> Result<(), SimError> {
    model.validate()?;
    tunables.validate()?;
    tunables.check_joint_count(model.joint_count)?;
    gait.validate(model.joint_count)?;
    config.validate()
}

/// Simulates the gait and records the head pose and joints.
pub fn rollout(
    model: &RobotModel,
    tunables: &TunableParams,
    gait: &GaitParams,
    config: &RolloutConfig,
) -> Result<Trajectory, SimError> {
    check_inputs(model, tunables, gait, config)?;
    let n = model.joint_count;
    let dt = config.dt_s;
    let ground = GroundParams::new(model, &tunables.stribeck, config.clamp_normal_force);
    let actuators: Vec<_> = (0..n).map(|j| tunables.actuator(j)).collect();
    let rotor: Vec<f64> = actuators.iter().map(|a| a.transmission_inertia).collect();

    let mut state = SimState::resting(
        model,
        config.initial_xy_m,
        config.initial_heading_rad,
        DROP_CLEARANCE_M,
    );
    let settle_steps = (config.settle_s / dt).round() as usize;
    state.time = -(settle_steps as f64) * dt;
    let mut integrator = Integrator::new(model, state);

    let stride = config.stride();
    let run_steps = (config.sample_count() - 1) * stride;
    let mut start_pose = vec![0.0; n];
    cpg_reference_into(0.0, gait, &mut start_pose);

    let mut references = vec![0.0; n];
    let mut torques = vec![0.0; n];
    let mut forces = vec![Vector3::zeros(); model.module_count];
    let mut act = vec![ActuatorState::default(); n];
    let mut samples = Vec::with_capacity(config.sample_count());
    // ease into the starting pose over the first 60% of the settle phase
    let ramp_steps = (0.6 * settle_steps as f64).max(1.0);

    for k in 0..settle_steps + run_steps + 1 {
        let t = if k < settle_steps {
            let w = smoothstep(k as f64 / ramp_steps);
            for (r, p) in references.iter_mut().zip(&start_pose) {
                *r = w * p;
            }
            (k as f64 - settle_steps as f64) * dt
        } else {
            let t = (k - settle_steps) as f64 * dt;
            cpg_reference_into(t, gait, &mut references);
            t
        };

        if k >= settle_steps && (k - settle_steps) % stride == 0 {
            let s = integrator.state();
            let magnitude = s.max_magnitude();
            if !(magnitude <= BLOW_UP_LIMIT) {
                return Err(SimError::BlowUp { time: t, magnitude });
            }
            let q = s.head_orientation.quaternion();
            samples.push(TrajectorySample {
                t: (samples.len() as f64) / config.record_rate_hz,
                position: s.head_position.into(),
                orientation: [q.w, q.i, q.j, q.k],
                joints: s.joint_angles.clone(),
                references: references.clone(),
            });
            if k == settle_steps + run_steps {
                break;
            }
        } else if k % 1000 == 0 {
            let magnitude = integrator.state().max_magnitude();
            if !(magnitude <= BLOW_UP_LIMIT) {
                return Err(SimError::BlowUp { time: t, magnitude });
            }
        }

        let kin = integrator.kinematics(model);
        for (f, (p, v)) in forces
            .iter_mut()
            .zip(kin.contact_points.iter().zip(&kin.contact_velocities))
        {
            *f = ground_reaction(p, v, &ground);
        }
        let s = integrator.state();
        for j in 0..n {
            let out = actuator_torque(
                references[j],
                JointState {
                    angle: s.joint_angles[j],
                    rate: s.joint_rates[j],
                },
                &act[j],
                &actuators[j],
                &model.servo,
                dt,
            );
            torques[j] = out.drive_torque;
            act[j] = out.next;
        }
        integrator.advance(model, &rotor, &torques, &forces, dt)?;
    }

    Ok(Trajectory {
        sample_period: 1.0 / config.record_rate_hz,
        joint_count: n,
        samples,
    })
}

/// Standard deviations of additive Gaussian measurement noise.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MeasurementNoise {
    /// Head position noise (motion-capture proxy), m.
    pub position_std_m: f64,
    /// Joint angle noise (encoder proxy), rad.
    pub joint_std_rad: f64,
}

impl MeasurementNoise {
    pub fn is_zero(&self) -> bool {
        self.position_std_m == 0.0 && self.joint_std_rad == 0.0
    }
}

/// Adds seeded Gaussian noise to head positions and joint angles.
pub fn add_measurement_noise(traj: &mut Trajectory, noise: &MeasurementNoise, seed: u64) {
    if noise.is_zero() {
        return;
    }
    let mut rng = rng::stream(seed, &[rng::tag::NOISE]);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    for s in &mut traj.samples {
        for p in &mut s.position {
            *p += noise.position_std_m * unit.sample(&mut rng);
        }
        for q in &mut s.joints {
            *q += noise.joint_std_rad * unit.sample(&mut rng);
        }
    }
}

/// Synthesizes a reference recording from hidden parameters.
///
/// The hidden parameters must lie inside `space`; they are only used to run
/// the simulation and are never embedded in the returned trajectory.
pub fn make_reference(
    model: &RobotModel,
    hidden_truth: &TunableParams,
    gait: &GaitParams,
    config: &RolloutConfig,
    noise: &MeasurementNoise,
    space: &ParamSpace,
) -> Result<Trajectory, SimError> {
    if !(noise.position_std_m >= 0.0 && noise.joint_std_rad >= 0.0) {
        return Err(SimError::Config("noise standard deviations must be non-negative".into()));
    }
    space.normalize(hidden_truth)?;
    let mut traj = rollout(model, hidden_truth, gait, config)?;
    add_measurement_noise(&mut traj, noise, config.seed);
    Ok(traj)
}
