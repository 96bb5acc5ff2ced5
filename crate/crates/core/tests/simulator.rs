use sidewinder::gait::{cpg_reference, GaitParams};
use sidewinder::model::{ParamSpace, RobotModel, TunableParams};
use sidewinder::sim::{make_reference, rollout, MeasurementNoise, RolloutConfig, Trajectory};

fn config(duration_s: f64) -> RolloutConfig {
    RolloutConfig {
        duration_s,
        ..Default::default()
    }
}

#[test]
fn still_gait_stays_put() {
    let model = RobotModel::cobra();
    let traj = rollout(&model, &TunableParams::nominal(), &GaitParams::still(11, 0.5), &config(10.0)).unwrap();
    let first = traj.samples[0].position;
    for s in &traj.samples {
        let d = (s.position[0] - first[0]).hypot(s.position[1] - first[1]);
        assert!(d < 1e-3, "drifted {d} m by t = {}", s.t);
    }
}

#[test]
fn sidewinding_translates_the_body() {
    let model = RobotModel::cobra();
    let traj = rollout(&model, &TunableParams::nominal(), &GaitParams::sidewinding(0.5), &config(20.0)).unwrap();
    let [x, y] = traj.final_xy();
    let start = traj.samples[0].position;
    let lateral = y - start[1];
    // the chain heads along +x; sidewinding carries it sideways toward -y
    assert!(lateral < -1.0, "lateral displacement {lateral}");
    assert!((x - start[0]).abs() < lateral.abs(), "({x}, {y})");
}

#[test]
fn rollouts_are_bit_identical() {
    let model = RobotModel::cobra();
    let gait = GaitParams::sidewinding(0.65);
    let a = rollout(&model, &TunableParams::nominal(), &gait, &config(2.0)).unwrap();
    let b = rollout(&model, &TunableParams::nominal(), &gait, &config(2.0)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn recording_is_consistent_and_above_the_penetration_bound() {
    let model = RobotModel::cobra();
    let gait = GaitParams::sidewinding(0.5);
    let cfg = config(4.0);
    let traj = rollout(&model, &TunableParams::nominal(), &gait, &cfg).unwrap();
    assert_eq!(traj.len(), cfg.sample_count());
    traj.validate().unwrap();
    let bound = -2.0 * model.nominal_penetration();
    for s in &traj.samples {
        for (r, c) in s.references.iter().zip(cpg_reference(s.t, &gait)) {
            assert!((r - c).abs() < 1e-12);
        }
        assert!(s.position[2] > bound);
        // sidewinding keeps about half of the modules on the ground
        let contact_z = s.position[2] - model.contact_radius_m;
        assert!(contact_z > 2.0 * bound, "contact depth {contact_z} at t = {}", s.t);
    }
}

#[test]
fn truth_tracks_the_gait_closely() {
    let model = RobotModel::cobra();
    let truth = TunableParams::nominal().with_actuators_scaled(1.5);
    let traj = rollout(&model, &truth, &GaitParams::sidewinding(0.5), &config(8.0)).unwrap();
    let mut sum = 0.0;
    for s in &traj.samples {
        sum += s.joints.iter().zip(&s.references).map(|(q, r)| (q - r).powi(2)).sum::<f64>();
    }
    let rms = (sum / (traj.len() * 11) as f64).sqrt();
    assert!(rms.to_degrees() < 2.0, "{} deg", rms.to_degrees());
}

#[test]
fn noiseless_reference_equals_rollout() {
    let model = RobotModel::cobra();
    let truth = TunableParams::nominal().with_actuators_scaled(1.5);
    let space = ParamSpace::default_around(&TunableParams::nominal()).unwrap();
    let gait = GaitParams::sidewinding(0.35);
    let cfg = config(2.0);
    let reference = make_reference(&model, &truth, &gait, &cfg, &MeasurementNoise::default(), &space).unwrap();
    assert_eq!(reference, rollout(&model, &truth, &gait, &cfg).unwrap());
}

#[test]
fn position_noise_has_the_requested_spread() {
    let model = RobotModel::cobra();
    let nominal = TunableParams::nominal();
    let space = ParamSpace::default_around(&nominal).unwrap();
    let gait = GaitParams::sidewinding(0.5);
    let cfg = RolloutConfig {
        duration_s: 20.0,
        dt_s: 5e-4,
        seed: 3,
        ..Default::default()
    };
    let noise = MeasurementNoise {
        position_std_m: 1e-3,
        joint_std_rad: 0.0,
    };
    let clean = rollout(&model, &nominal, &gait, &cfg).unwrap();
    let noisy = make_reference(&model, &nominal, &gait, &cfg, &noise, &space).unwrap();
    let deltas: Vec<f64> = clean
        .samples
        .iter()
        .zip(&noisy.samples)
        .flat_map(|(c, n)| (0..3).map(move |k| n.position[k] - c.position[k]))
        .collect();
    assert!(deltas.len() >= 5000);
    let mean = deltas.iter().sum::<f64>() / deltas.len() as f64;
    let std = (deltas.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (deltas.len() - 1) as f64).sqrt();
    assert!((std - 1e-3).abs() < 0.15e-3, "{std}");
    assert_eq!(clean.samples[5].joints, noisy.samples[5].joints);
}

#[test]
fn hidden_truth_outside_the_box_is_rejected() {
    let model = RobotModel::cobra();
    let nominal = TunableParams::nominal();
    let space = ParamSpace::default_around(&nominal).unwrap();
    let wild = nominal.with_actuators_scaled(10.0);
    assert!(make_reference(&model, &wild, &GaitParams::still(11, 0.5), &config(1.0), &MeasurementNoise::default(), &space).is_err());
}

#[test]
fn csv_file_round_trip() {
    let model = RobotModel::cobra();
    let traj = rollout(&model, &TunableParams::nominal(), &GaitParams::sidewinding(0.5), &config(1.0)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ref.csv");
    traj.save_csv(&path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let header = text.lines().next().unwrap();
    assert!(header.starts_with("t,x,y,z,qw,qx,qy,qz,q1,"));
    assert!(header.ends_with(",r10,r11"));
    assert_eq!(Trajectory::load_csv(&path).unwrap().samples, traj.samples);
}
