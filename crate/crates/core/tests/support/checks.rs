//! Measured quantities for the dynamics, contact and actuator checks. Each
//! function returns the worst observed error so callers choose the tolerance.

use nalgebra::{DVector, Vector3};
use rand::Rng;
use sidewinder::actuator::{actuator_torque, ActuatorState, JointState};
use sidewinder::contact::{ground_reaction, stribeck_coefficient, GroundParams};
use sidewinder::dynamics::{compute_bias, compute_mass_matrix, contact_jacobians, Integrator};
use sidewinder::model::{ActuatorParams, LinkSpec, RobotModel, ServoGains};
use sidewinder::rng;
use sidewinder::state::SimState;

use super::oracle;

/// Worst relative asymmetry of `D` and worst relative gap between `½νᵀDν`
/// and the dual-number kinetic energy, over `count` random states.
pub fn mass_matrix_errors(model: &RobotModel, count: usize, seed: u64) -> (f64, f64) {
    let mut r = rng::stream(seed, &[]);
    let (mut asym, mut energy) = (0.0f64, 0.0f64);
    for _ in 0..count {
        let s = oracle::random_state(model, &mut r);
        let d = compute_mass_matrix(model, &s);
        let scale = d.abs().max();
        asym = asym.max((&d - d.transpose()).abs().max() / scale);
        let v = s.generalized_velocity();
        let t = 0.5 * v.dot(&(&d * &v));
        let expected = oracle::kinetic_energy(model, &s);
        energy = energy.max((t - expected).abs() / expected.abs());
    }
    (asym, energy)
}

/// Worst entry gap between the analytic contact Jacobians and central
/// differences of the contact points.
pub fn contact_jacobian_error(model: &RobotModel, count: usize, seed: u64) -> f64 {
    let mut r = rng::stream(seed, &[]);
    let h = 1e-6;
    let dof = model.dof();
    let mut worst = 0.0f64;
    for _ in 0..count {
        let s = oracle::random_state(model, &mut r);
        let analytic = contact_jacobians(model, &s);
        for k in 0..dof {
            let mut e = vec![0.0; dof];
            e[k] = 1.0;
            let plus = oracle::contact_points(model, &oracle::displace(&s, &e, h));
            let minus = oracle::contact_points(model, &oracle::displace(&s, &e, -h));
            for (link, jac) in analytic.jacobians.iter().enumerate() {
                let fd = (plus[link] - minus[link]) / (2.0 * h);
                for row in 0..3 {
                    worst = worst.max((jac[(row, k)] - fd[row]).abs());
                }
            }
        }
    }
    worst
}

/// Worst gap between `H(q, 0)` and the gradient of the potential energy.
pub fn gravity_bias_error(model: &RobotModel, count: usize, seed: u64) -> f64 {
    let mut r = rng::stream(seed, &[]);
    let h = 1e-5;
    let dof = model.dof();
    let mut worst = 0.0f64;
    for _ in 0..count {
        let mut s = oracle::random_state(model, &mut r);
        s.set_generalized_velocity(&DVector::zeros(dof));
        let bias = compute_bias(model, &s);
        for k in 0..dof {
            let mut e = vec![0.0; dof];
            e[k] = 1.0;
            let fd = (oracle::potential_energy(model, &oracle::displace(&s, &e, h))
                - oracle::potential_energy(model, &oracle::displace(&s, &e, -h)))
                / (2.0 * h);
            worst = worst.max((bias[k] - fd).abs());
        }
    }
    worst
}

/// Worst relative gap in the power identity `νᵀ·C(q, ν) = ½·νᵀ·Ḋ·ν`, where
/// `C` is the velocity-dependent part of the bias and `Ḋ` is differenced
/// along the motion.
pub fn coriolis_power_error(model: &RobotModel, count: usize, seed: u64) -> f64 {
    let mut r = rng::stream(seed, &[]);
    let h = 1e-6;
    let dof = model.dof();
    let mut worst = 0.0f64;
    for _ in 0..count {
        let s = oracle::random_state(model, &mut r);
        let v = s.generalized_velocity();
        let mut rest = s.clone();
        rest.set_generalized_velocity(&DVector::zeros(dof));
        let c = compute_bias(model, &s) - compute_bias(model, &rest);
        let dir: Vec<f64> = v.iter().copied().collect();
        let d_dot = (compute_mass_matrix(model, &oracle::displace(&s, &dir, h))
            - compute_mass_matrix(model, &oracle::displace(&s, &dir, -h)))
            / (2.0 * h);
        let lhs = v.dot(&c);
        let rhs = 0.5 * v.dot(&(&d_dot * &v));
        worst = worst.max((lhs - rhs).abs() / rhs.abs().max(1.0));
    }
    worst
}

fn coast(model: &RobotModel, state: SimState, dt: f64, steps: usize) -> Integrator {
    let mut integrator = Integrator::new(model, state);
    let zeros = vec![0.0; model.joint_count];
    let forces = vec![Vector3::zeros(); model.module_count];
    for _ in 0..steps {
        integrator
            .advance(model, &zeros, &zeros, &forces, dt)
            .expect("free flight step");
    }
    integrator
}

/// Gap between the head's drop and `½gt²` after `t` seconds of free fall.
pub fn free_fall_error(model: &RobotModel, t: f64, dt: f64) -> f64 {
    let start = SimState::straight(model, Vector3::new(0.0, 0.0, 10.0), 0.3);
    let steps = (t / dt).round() as usize;
    let end = coast(model, start, dt, steps);
    let drop = 10.0 - end.state().head_position.z;
    (drop - 0.5 * model.gravity_m_per_s2 * t * t).abs()
}

/// Relative kinetic-energy change of a spinning, flexing chain in zero
/// gravity after `t` seconds, plus the relative linear-momentum change.
pub fn zero_gravity_drift(model: &RobotModel, t: f64, dt: f64, seed: u64) -> (f64, f64) {
    let mut model = model.clone();
    model.gravity_m_per_s2 = 0.0;
    let mut r = rng::stream(seed, &[]);
    let mut s = oracle::random_state(&model, &mut r);
    s.head_position.z = 5.0;
    for q in s.joint_rates.iter_mut() {
        *q *= 0.5;
    }
    let mut integrator = Integrator::new(&model, s);
    let (e0, p0) = {
        let k = integrator.kinematics(&model);
        (k.kinetic_energy(), k.linear_momentum())
    };
    let steps = (t / dt).round() as usize;
    let zeros = vec![0.0; model.joint_count];
    let forces = vec![Vector3::zeros(); model.module_count];
    for _ in 0..steps {
        integrator.advance(&model, &zeros, &zeros, &forces, dt).expect("step");
    }
    let k = integrator.kinematics(&model);
    let energy = (k.kinetic_energy() - e0).abs() / e0;
    let momentum = (k.linear_momentum() - p0).norm() / p0.norm().max(1e-12);
    (energy, momentum)
}

pub fn sample_ground<R: Rng>(r: &mut R) -> GroundParams {
    let mu_c = r.random_range(0.05..1.0);
    GroundParams {
        k1: r.random_range(1e3..1e5),
        k2: r.random_range(0.0..200.0),
        mu_c,
        mu_s: mu_c + r.random_range(0.0..1.0),
        mu_v: r.random_range(0.0..2.0),
        v_s: r.random_range(1e-3..0.5),
        clamp_normal: r.random_bool(0.5),
    }
}

/// Results of the contact identities over `count` random inputs:
/// `(|s(0) - μ_s|, |s(100 v_s) - μ_c|, above-ground force magnitude, worst
/// excess of |F_t + μ_v ṗ| over μ_s |F_z|)`.
pub fn contact_identity_errors(count: usize, seed: u64) -> (f64, f64, f64, f64) {
    let mut r = rng::stream(seed, &[]);
    let (mut s0, mut s100, mut above, mut bound) = (0.0f64, 0.0f64, 0.0f64, f64::NEG_INFINITY);
    for _ in 0..count {
        let g = sample_ground(&mut r);
        s0 = s0.max((stribeck_coefficient(0.0, &g) - g.mu_s).abs());
        s100 = s100.max((stribeck_coefficient(100.0 * g.v_s, &g) - g.mu_c).abs());
        let v = Vector3::new(r.random_range(-2.0..2.0), r.random_range(-2.0..2.0), r.random_range(-2.0..2.0));
        let lifted = Vector3::new(r.random_range(-5.0..5.0), r.random_range(-5.0..5.0), r.random_range(1e-9..1.0));
        above = above.max(ground_reaction(&lifted, &v, &g).norm());
        let p = Vector3::new(r.random_range(-5.0..5.0), r.random_range(-5.0..5.0), r.random_range(-0.02..0.0));
        let f = ground_reaction(&p, &v, &g);
        let tangential = Vector3::new(f.x + g.mu_v * v.x, f.y + g.mu_v * v.y, 0.0);
        for t in [tangential.x, tangential.y] {
            bound = bound.max(t.abs() - g.mu_s * f.z.abs());
        }
    }
    (s0, s100, above, bound)
}

/// Largest gap between a simulated servo step response on an isolated
/// inertia and the closed-form second-order solution, over `t_end` seconds.
///
/// The rig is a heavy head carrying one link on a pitch joint, with gravity
/// and contact removed, so the joint sees the fixed inertia
/// `I = I_yy + m(L/2)²` plus the rotor inertia.
pub fn servo_step_error(step: f64, t_end: f64, dt: f64) -> f64 {
    let mut model = RobotModel::cobra();
    model.module_count = 2;
    model.joint_count = 1;
    model.links.truncate(2);
    model.links[0] = LinkSpec {
        mass_kg: 1e9,
        inertia_kg_m2: [1e9, 1e9, 1e9],
        length_m: 0.09,
    };
    model.joint_axes.truncate(1);
    model.gravity_m_per_s2 = 0.0;
    model.servo = ServoGains {
        kp_v_per_rad: 40.0,
        kd_v_s_per_rad: 0.5,
        torque_limit_n_m: 1e3,
    };
    let params = ActuatorParams {
        transmission_inertia: 0.002,
        internal_damping: 0.05,
        motor_constant: 1.0,
    };
    let link = &model.links[1];
    let inertia = link.inertia_kg_m2[1] + link.mass_kg * (0.5 * link.length_m).powi(2) + params.transmission_inertia;
    let damping = params.motor_constant * model.servo.kd_v_s_per_rad + params.internal_damping;
    let stiffness = params.motor_constant * model.servo.kp_v_per_rad;

    // θ'' + 2ζω θ' + ω² θ = ω² r, from rest
    let wn = (stiffness / inertia).sqrt();
    let zeta = damping / (2.0 * (stiffness * inertia).sqrt());
    let exact = |t: f64| -> f64 {
        if zeta < 1.0 {
            let wd = wn * (1.0 - zeta * zeta).sqrt();
            step * (1.0 - (-zeta * wn * t).exp() * ((wd * t).cos() + zeta * wn / wd * (wd * t).sin()))
        } else {
            let s1 = -wn * (zeta - (zeta * zeta - 1.0).sqrt());
            let s2 = -wn * (zeta + (zeta * zeta - 1.0).sqrt());
            step * (1.0 + (s2 * (s1 * t).exp() - s1 * (s2 * t).exp()) / (s1 - s2))
        }
    };

    let mut integrator = Integrator::new(&model, SimState::straight(&model, Vector3::new(0.0, 0.0, 1.0), 0.0));
    let mut act = ActuatorState::default();
    let forces = vec![Vector3::zeros(); 2];
    let steps = (t_end / dt).round() as usize;
    let mut worst = 0.0f64;
    for k in 0..steps {
        let s = integrator.state();
        let out = actuator_torque(
            step,
            JointState {
                angle: s.joint_angles[0],
                rate: s.joint_rates[0],
            },
            &act,
            &params,
            &model.servo,
            dt,
        );
        act = out.next;
        integrator
            .advance(&model, &[out.reflected_inertia], &[out.drive_torque], &forces, dt)
            .expect("rig step");
        let t = (k + 1) as f64 * dt;
        worst = worst.max((integrator.state().joint_angles[0] - exact(t)).abs());
    }
    worst
}

fn sample_grid(n: usize, dt: f64) -> Vec<f64> {
    (0..n).map(|k| k as f64 * dt).collect()
}

/// Worst error in amplitude, frequency or wrapped phase when fitting
/// noiseless sidewinding joint signals (both amplitudes, every phase step,
/// all three protocol frequencies, 8 s at 100 Hz).
pub fn sinusoid_exact_error() -> f64 {
    use sidewinder::gait::{GaitParams, PROTOCOL_FREQUENCIES_HZ};
    use sidewinder::metrics::{fit_sinusoid, wrap_angle};
    let t = sample_grid(801, 0.01);
    let mut worst = 0.0f64;
    for f in PROTOCOL_FREQUENCIES_HZ {
        let gait = GaitParams::sidewinding(f);
        for j in 0..gait.joint_count() {
            let (a, phi, w) = (gait.amplitudes_rad[j], gait.phases_rad[j], gait.omega());
            let y: Vec<f64> = t.iter().map(|t| a * (w * t + phi).sin()).collect();
            let fit = fit_sinusoid(&t, &y, f).expect("fit");
            worst = worst
                .max((fit.amplitude - a).abs())
                .max((fit.omega - w).abs())
                .max(wrap_angle(fit.phase - phi).abs());
        }
    }
    worst
}

/// Worst relative amplitude error over `seeds` noisy draws of the 14° pitch
/// signal at 0.5 Hz (8 s at 100 Hz).
pub fn sinusoid_noisy_amplitude_error(seeds: u64, sigma: f64) -> f64 {
    use rand_distr::{Distribution, Normal};
    use sidewinder::metrics::fit_sinusoid;
    use std::f64::consts::PI;
    let t = sample_grid(801, 0.01);
    let amp = 14f64.to_radians();
    let noise = Normal::new(0.0, sigma).expect("normal");
    (0..seeds)
        .map(|seed| {
            let mut r = rng::stream(seed, &[]);
            let y: Vec<f64> = t.iter().map(|t| amp * (PI * t + PI / 2.0).sin() + noise.sample(&mut r)).collect();
            let fit = fit_sinusoid(&t, &y, 0.5).expect("fit");
            (fit.amplitude - amp).abs() / amp
        })
        .fold(0.0, f64::max)
}

/// One-dimensional search problem with reward `-(p - p*)²`.
pub struct Quadratic1d {
    pub target: f64,
}

impl sidewinder::sysid::Environment for Quadratic1d {
    fn dim(&self) -> usize {
        1
    }
    fn initial_state(&self) -> Vec<f64> {
        vec![0.0]
    }
    fn evaluate(&self, state: &[f64]) -> sidewinder::sysid::Evaluation {
        sidewinder::sysid::Evaluation {
            reward: -(state[0] - self.target).powi(2),
            failures: 0,
        }
    }
}

/// Worst deviations measured by the PPO unit checks.
#[derive(Debug, Clone, Copy)]
pub struct PpoUnitReport {
    /// `|mean ratio - 1|` before the first gradient step.
    pub initial_ratio_error: f64,
    /// Largest `objective - ratio·A` over a random batch (must not be positive).
    pub clip_bound_excess: f64,
    /// Largest `objective - (1 + ε)·A` over samples with `A > 0`.
    pub positive_advantage_excess: f64,
    /// Whether the rewards-to-go arithmetic cases came out exactly.
    pub rewards_to_go_exact: bool,
    /// `|mean|` and `|std - 1|` of normalized advantages.
    pub normalized_mean: f64,
    pub normalized_std_error: f64,
}

pub fn ppo_unit_report(seed: u64) -> PpoUnitReport {
    use sidewinder::sysid::ppo::{clipped_objective, ppo_update, PolicyParams, PpoConfig, Sample, Transition};
    use sidewinder::sysid::reward::{normalize_advantages, rewards_to_go};

    let config = PpoConfig::default();
    let dim = 4;
    let mut r = rng::stream(seed, &[]);
    let mut policy = PolicyParams::new(dim, &config, seed);
    let batch: Vec<Sample> = (0..96)
        .map(|k| {
            let state: Vec<f64> = (0..dim).map(|_| r.random_range(-1.0..1.0)).collect();
            let (action, log_prob) = policy.sample(&state, &mut r);
            Sample {
                transition: Transition {
                    next_state: state.clone(),
                    applied: action.clone(),
                    state,
                    action,
                    reward: r.random_range(-1.0..0.0),
                    log_prob,
                    value: 0.0,
                    time_fraction: (k % 8) as f64 / 8.0,
                },
                advantage: r.random_range(-2.0..2.0),
                return_: r.random_range(-1.0..0.0),
            }
        })
        .collect();
    let stats = ppo_update(&mut policy, &batch, &config, seed, 0).expect("update");

    // after the update the ratios spread out; check the min rule on each sample
    let eps = config.clip_epsilon;
    let (mut bound, mut positive) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for s in &batch {
        let t = &s.transition;
        let ratio = (policy.log_prob(&t.state, &t.action) - t.log_prob).exp();
        let objective = clipped_objective(ratio, s.advantage, eps);
        bound = bound.max(objective - ratio * s.advantage);
        if s.advantage > 0.0 {
            positive = positive.max(objective - (1.0 + eps) * s.advantage);
        }
    }
    for (ratio, adv) in [(1.35, 1.0), (0.5, -1.0), (3.0, -0.7), (0.1, 2.0)] {
        bound = bound.max(clipped_objective(ratio, adv, eps) - ratio * adv);
    }

    let rtg_exact = rewards_to_go(&[1.0, 1.0, 1.0], 1.0) == vec![3.0, 2.0, 1.0]
        && rewards_to_go(&[1.0, 2.0], 0.5) == vec![2.0, 2.0]
        && rewards_to_go(&[0.4, -3.0, 7.5], 0.0) == vec![0.4, -3.0, 7.5];

    let mut adv: Vec<f64> = (0..257).map(|_| r.random_range(-50.0..80.0)).collect();
    normalize_advantages(&mut adv);
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let std = (adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n).sqrt();

    PpoUnitReport {
        initial_ratio_error: (stats.initial_mean_ratio - 1.0).abs(),
        clip_bound_excess: bound,
        positive_advantage_excess: positive,
        rewards_to_go_exact: rtg_exact,
        normalized_mean: mean.abs(),
        normalized_std_error: (std - 1.0).abs(),
    }
}
