use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use sidewinder::contact::{friction_curve, GroundParams};
use sidewinder::gait::GaitParams;
use sidewinder::metrics::{euclidean_error, joint_correlation_summary};
use sidewinder::model::{ParamSpace, RobotModel, TunableParams};
use sidewinder::rng;
use sidewinder::sim::{self, MeasurementNoise, Trajectory};
use sidewinder::sysid::{identify_phases, IdentifyRequest, InternalReward, Phase, PpoConfig, ReferenceRecording};

use crate::error::CliError;
use crate::files::{
    load_json, load_model, load_params, load_rollout, sibling, stem, write_atomic, write_csv, write_json,
    write_trajectory, ManifestBuilder, ReferenceEntry, ReferenceIndex, REFERENCE_INDEX,
};
use crate::{EvaluateArgs, FrictionArgs, IdentifyArgs, InternalRewardArg, MakeReferenceArgs, PhaseArg, RolloutArgs};

/// File name of the hidden parameters inside a reference directory. Nothing
/// downstream of `make-reference` reads it.
pub const SEALED_TRUTH: &str = "truth.sealed.json";

fn params_value(p: &TunableParams) -> Value {
    serde_json::from_str(&p.to_json()).expect("parameter JSON round-trips")
}

fn write_params(path: &Path, p: &TunableParams) -> Result<(), CliError> {
    let mut text = p.to_json();
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Unique output names derived from input file stems.
fn unique_stems(paths: &[PathBuf]) -> Result<Vec<String>, CliError> {
    let stems = paths.iter().map(|p| stem(p)).collect::<Result<Vec<_>, _>>()?;
    let mut seen = BTreeSet::new();
    for s in &stems {
        if !seen.insert(s.as_str()) {
            return Err(CliError::Config(format!("two inputs share the name {s:?}")));
        }
    }
    Ok(stems)
}

/// Default search box around the nominal parameters.
fn space_for(nominal: &TunableParams) -> Result<ParamSpace, CliError> {
    Ok(ParamSpace::default_around(nominal)?)
}

pub fn make_reference(a: &MakeReferenceArgs) -> Result<(), CliError> {
    let mut manifest = ManifestBuilder::start("make-reference");
    let model = load_model(a.sim.model.as_deref())?;
    let truth = TunableParams::load(&a.truth)?;
    let mut nominal = load_params(a.nominal.as_deref())?;
    let mut config = load_rollout(a.rollout.as_deref())?;
    if let Some(seed) = a.seed {
        config.seed = seed;
    }
    if a.sim.no_normal_clamp {
        config.clamp_normal_force = false;
    }
    if !(a.noise_pos_mm >= 0.0 && a.noise_joint_deg >= 0.0) {
        return Err(CliError::Config("noise standard deviations must be non-negative".into()));
    }
    let noise = MeasurementNoise {
        position_std_m: a.noise_pos_mm * 1e-3,
        joint_std_rad: a.noise_joint_deg.to_radians(),
    };
    truth.check_joint_count(model.joint_count)?;
    nominal.check_joint_count(model.joint_count)?;
    if truth.is_per_joint() {
        nominal = nominal.to_per_joint(model.joint_count);
    }
    let space = space_for(&nominal)?;
    for (role, path) in [("model", &a.sim.model), ("nominal", &a.nominal), ("rollout", &a.rollout)] {
        if let Some(p) = path {
            manifest.config(role, p);
        }
    }
    manifest.config("truth", &a.truth);
    manifest.seed(config.seed);

    let stems = unique_stems(&a.gaits)?;
    let gaits = a
        .gaits
        .iter()
        .map(|p| GaitParams::load(p, model.joint_count))
        .collect::<Result<Vec<_>, _>>()?;
    for (k, path) in a.gaits.iter().enumerate() {
        manifest.config(&format!("gait:{}", stems[k]), path);
    }
    let trajectories = gaits
        .par_iter()
        .enumerate()
        .map(|(k, gait)| {
            // each gait gets its own noise stream
            let mut cfg = config.clone();
            cfg.seed = rng::derive_seed(config.seed, &[rng::tag::NOISE, k as u64]);
            sim::make_reference(&model, &truth, gait, &cfg, &noise, &space)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let out = &a.out;
    let mut entries = Vec::new();
    for ((name, gait), traj) in stems.iter().zip(&gaits).zip(&trajectories) {
        let csv = format!("{name}.csv");
        let gait_file = format!("{name}.gait.json");
        write_trajectory(&out.join(&csv), traj)?;
        write_json(&out.join(&gait_file), &gait.to_file())?;
        manifest.output(&out.join(&csv));
        manifest.output(&out.join(&gait_file));
        entries.push(ReferenceEntry {
            name: name.clone(),
            trajectory: csv,
            gait: gait_file,
        });
    }
    let index = ReferenceIndex {
        model: "model.json".into(),
        rollout: "rollout.json".into(),
        nominal: "nominal.json".into(),
        noise,
        references: entries,
    };
    write_json(&out.join(&index.model), &model)?;
    write_json(&out.join(&index.rollout), &config)?;
    write_params(&out.join(&index.nominal), &nominal)?;
    write_params(&out.join(SEALED_TRUTH), &truth)?;
    write_json(&out.join(REFERENCE_INDEX), &index)?;
    for f in [&index.model, &index.rollout, &index.nominal, SEALED_TRUTH, REFERENCE_INDEX] {
        manifest.output(&out.join(f));
    }
    manifest.finish(&out.join("manifest.json"))
}

/// Warning placed in the log header when friction is tuned on untouched actuators.
pub const UNTUNED_ACTUATOR_WARNING: &str =
    "external phase runs on untuned actuator parameters; run the internal phase first or pass --start";

pub fn identify(a: &IdentifyArgs) -> Result<(), CliError> {
    let mut manifest = ManifestBuilder::start("identify");
    manifest.seed(a.seed);
    let index = ReferenceIndex::load(&a.refs)?;
    manifest.config("references", &a.refs.join(REFERENCE_INDEX));
    let model = RobotModel::load(a.refs.join(&index.model))?;
    let config = load_rollout(Some(&a.refs.join(&index.rollout)))?;
    let nominal_path = a.nominal.clone().unwrap_or_else(|| a.refs.join(&index.nominal));
    manifest.config("nominal", &nominal_path);
    let mut nominal = TunableParams::load(&nominal_path)?;
    let mut start = match &a.start {
        Some(p) => {
            manifest.config("start", p);
            TunableParams::load(p)?
        }
        None => nominal.clone(),
    };
    nominal.check_joint_count(model.joint_count)?;
    start.check_joint_count(model.joint_count)?;
    if a.per_joint || start.is_per_joint() {
        nominal = nominal.to_per_joint(model.joint_count);
        start = start.to_per_joint(model.joint_count);
    }
    let space = space_for(&nominal)?;
    space.normalize(&start)?;

    let mut ppo = match &a.ppo {
        Some(p) => {
            manifest.config("ppo", p);
            load_json::<PpoConfig>(p)?
        }
        None => PpoConfig::default(),
    };
    if let Some(m) = a.max_iterations {
        ppo.max_iterations = m;
    }
    ppo.validate().map_err(|e| CliError::Config(e.to_string()))?;

    let references = index
        .references
        .iter()
        .map(|e| {
            Ok(ReferenceRecording {
                name: e.name.clone(),
                gait: GaitParams::load(a.refs.join(&e.gait), model.joint_count)?,
                trajectory: Trajectory::load_csv(a.refs.join(&e.trajectory))?,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    let phases: Vec<Phase> = match a.phase {
        PhaseArg::Internal => vec![Phase::Internal],
        PhaseArg::External => vec![Phase::External],
        PhaseArg::Both => vec![Phase::Internal, Phase::External],
    };
    let internal_reward = match a.internal_reward {
        InternalRewardArg::Cpg => InternalReward::Cpg,
        InternalRewardArg::TrajectoryL2 => InternalReward::TrajectoryL2,
    };
    let mut warnings = Vec::new();
    if a.phase == PhaseArg::External && a.start.is_none() {
        warnings.push(UNTUNED_ACTUATOR_WARNING.to_string());
    }
    for w in &warnings {
        eprintln!("warning: {w}");
    }

    let request = IdentifyRequest {
        model: &model,
        space: &space,
        references: &references,
        rollout: &config,
        ppo: &ppo,
        internal_reward,
        seed: a.seed,
    };
    let mut log = vec![json!({
        "kind": "header",
        "seed": a.seed,
        "phases": phases.iter().map(|p| p.name()).collect::<Vec<_>>(),
        "ppo": ppo,
        "rollout": config,
        "internal_reward": internal_reward,
        "per_joint": nominal.is_per_joint(),
        "references": index.references.iter().map(|e| e.name.as_str()).collect::<Vec<_>>(),
        "nominal": params_value(&nominal),
        "start": params_value(&start),
        "space": space,
        "warnings": warnings,
    })];
    let mut run = || {
        identify_phases(&request, &phases, &start, |r| {
            eprintln!(
                "{} iteration {}: mean reward {:.6e}, best {:.6e}, clip fraction {:.3}",
                r.phase, r.iteration, r.mean_reward, r.best_reward, r.clip_fraction
            );
            let mut v = serde_json::to_value(r).expect("records serialize");
            v["kind"] = json!("iteration");
            log.push(v);
        })
    };
    let outcomes = match a.jobs {
        Some(0) => return Err(CliError::Config("--jobs must be at least 1".into())),
        Some(jobs) => rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| CliError::Config(format!("cannot start {jobs} workers: {e}")))?
            .install(run)?,
        None => run()?,
    };
    for o in &outcomes {
        log.push(json!({
            "kind": "phase",
            "phase": o.phase.name(),
            "initial_reward": o.initial_reward,
            "best_reward": o.best_reward,
            "converged": o.converged,
            "params": params_value(&o.params),
        }));
    }
    let tuned = &outcomes.last().expect("at least one phase").params;

    let log_path = match &a.log {
        Some(p) => p.clone(),
        None => sibling(&a.out, ".log.jsonl")?,
    };
    let mut text = String::new();
    for line in &log {
        text.push_str(&serde_json::to_string(line).expect("log lines serialize"));
        text.push('\n');
    }
    write_atomic(&log_path, text.as_bytes())?;
    write_params(&a.out, tuned)?;
    manifest.output(&a.out);
    manifest.output(&log_path);
    let manifest_path = match &a.manifest {
        Some(p) => p.clone(),
        None => sibling(&a.out, ".manifest.json")?,
    };
    manifest.finish(&manifest_path)
}

fn existing(path: PathBuf) -> Option<PathBuf> {
    path.exists().then_some(path)
}

/// Scores of one parameter set against the reference.
#[derive(Debug, Clone, Serialize)]
struct EvaluationMetrics {
    params: String,
    final_error_m: f64,
    mean_error_m: f64,
    max_error_m: f64,
    mean_correlation: f64,
    per_joint_correlation: Vec<f64>,
    window_samples: usize,
}

pub fn evaluate(a: &EvaluateArgs) -> Result<(), CliError> {
    let mut manifest = ManifestBuilder::start("evaluate");
    let dir = a.reference.parent().unwrap_or(Path::new("")).to_path_buf();
    let ref_stem = stem(&a.reference)?;
    let model_path = a.model.clone().or_else(|| existing(dir.join("model.json")));
    let rollout_path = a.rollout.clone().or_else(|| existing(dir.join("rollout.json")));
    let gait_path = a
        .gait
        .clone()
        .unwrap_or_else(|| dir.join(format!("{ref_stem}.gait.json")));
    let model = load_model(model_path.as_deref())?;
    let mut config = load_rollout(rollout_path.as_deref())?;
    if a.no_normal_clamp {
        config.clamp_normal_force = false;
    }
    let gait = GaitParams::load(&gait_path, model.joint_count)?;
    let reference = Trajectory::load_csv(&a.reference)?;
    manifest.config("reference", &a.reference);
    manifest.config("gait", &gait_path);
    if let Some(p) = &model_path {
        manifest.config("model", p);
    }
    if let Some(p) = &rollout_path {
        manifest.config("rollout", p);
    }
    if reference.joint_count != model.joint_count {
        return Err(CliError::Config(format!(
            "reference has {} joints, the model {}",
            reference.joint_count, model.joint_count
        )));
    }
    if reference.len() != config.sample_count()
        || (reference.sample_period * config.record_rate_hz - 1.0).abs() > 1e-9
    {
        return Err(CliError::Config(format!(
            "reference has {} samples at {} s; the rollout configuration produces {} at {} s",
            reference.len(),
            reference.sample_period,
            config.sample_count(),
            1.0 / config.record_rate_hz
        )));
    }
    let window = (gait.period() * config.record_rate_hz).round() as usize;
    let stems = unique_stems(&a.params)?;
    let params = a
        .params
        .iter()
        .map(|p| {
            let params = TunableParams::load(p)?;
            params.check_joint_count(model.joint_count)?;
            Ok(params)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    for (s, p) in stems.iter().zip(&a.params) {
        manifest.config(&format!("params:{s}"), p);
    }
    let rollouts = params
        .par_iter()
        .map(|p| sim::rollout(&model, p, &gait, &config))
        .collect::<Result<Vec<_>, _>>()?;

    let mut ranking = Vec::new();
    for ((name, path), traj) in stems.iter().zip(&a.params).zip(&rollouts) {
        let error = euclidean_error(&reference, traj)?;
        let corr = joint_correlation_summary(&reference, traj, window)?;
        let metrics = EvaluationMetrics {
            params: path.display().to_string(),
            final_error_m: error.summary.final_value,
            mean_error_m: error.summary.mean,
            max_error_m: error.summary.max,
            mean_correlation: corr.mean_correlation(),
            per_joint_correlation: corr.per_joint.iter().map(|s| s.summary.mean).collect(),
            window_samples: window,
        };
        let files = [
            a.out.join(format!("{name}.metrics.json")),
            a.out.join(format!("{name}.error.csv")),
            a.out.join(format!("{name}.correlation.csv")),
            a.out.join(format!("{name}.trajectory.csv")),
        ];
        write_json(&files[0], &metrics)?;
        write_csv(
            &files[1],
            &["t".into(), "error_m".into()],
            error.timestamps.iter().zip(&error.values).map(|(t, e)| vec![*t, *e]),
        )?;
        let mut header: Vec<String> = ["t", "mean", "min", "max"].map(String::from).to_vec();
        header.extend((1..=model.joint_count).map(|j| format!("c{j}")));
        write_csv(
            &files[2],
            &header,
            (0..corr.mean.values.len()).map(|k| {
                let mut row = vec![corr.mean.timestamps[k], corr.mean.values[k], corr.min.values[k], corr.max.values[k]];
                row.extend(corr.per_joint.iter().map(|s| s.values[k]));
                row
            }),
        )?;
        write_trajectory(&files[3], traj)?;
        for f in &files {
            manifest.output(f);
        }
        ranking.push((name.clone(), metrics));
    }
    ranking.sort_by(|a, b| a.1.mean_error_m.total_cmp(&b.1.mean_error_m));
    let comparison = json!({
        "reference": a.reference.display().to_string(),
        "ranking": ranking
            .iter()
            .enumerate()
            .map(|(rank, (name, m))| json!({
                "rank": rank + 1,
                "name": name,
                "params": m.params,
                "mean_error_m": m.mean_error_m,
                "final_error_m": m.final_error_m,
                "mean_correlation": m.mean_correlation,
            }))
            .collect::<Vec<_>>(),
    });
    let comparison_path = a.out.join("comparison.json");
    write_json(&comparison_path, &comparison)?;
    manifest.output(&comparison_path);
    manifest.finish(&a.out.join("manifest.json"))
}

pub fn rollout(a: &RolloutArgs) -> Result<(), CliError> {
    let model = load_model(a.sim.model.as_deref())?;
    let params = load_params(a.params.as_deref())?;
    let mut config = load_rollout(a.config.as_deref())?;
    if a.sim.no_normal_clamp {
        config.clamp_normal_force = false;
    }
    let gait = GaitParams::load(&a.gait, model.joint_count)?;
    let traj = sim::rollout(&model, &params, &gait, &config)?;
    write_trajectory(&a.out, &traj)
}

pub fn dump_friction_curve(a: &FrictionArgs) -> Result<(), CliError> {
    let model = load_model(a.sim.model.as_deref())?;
    let params = load_params(a.params.as_deref())?;
    let ground = GroundParams::new(&model, &params.stribeck, !a.sim.no_normal_clamp);
    ground.validate()?;
    let load = a
        .normal_load_n
        .unwrap_or(model.total_mass() * model.gravity_m_per_s2 / model.module_count as f64);
    if !(load > 0.0 && a.v_max > 0.0 && a.points >= 2) {
        return Err(CliError::Config(
            "normal load and v-max must be positive and points at least 2".into(),
        ));
    }
    let header = ["v_m_per_s", "s", "f_x_n"].map(String::from);
    let rows = friction_curve(&ground, load, a.v_max, a.points)
        .into_iter()
        .map(|r| vec![r.v, r.s, r.f_x]);
    match &a.out {
        Some(path) => write_csv(path, &header, rows),
        None => {
            let mut w = csv::Writer::from_writer(std::io::stdout().lock());
            let io = |e: csv::Error| CliError::Io(e.to_string());
            w.write_record(&header).map_err(io)?;
            for row in rows {
                w.write_record(row.iter().map(|v| v.to_string())).map_err(io)?;
            }
            w.flush().map_err(|e| CliError::Io(e.to_string()))
        }
    }
}
