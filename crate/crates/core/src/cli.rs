//! Configuration-driven runner behind the `magreduce` binary.
//!
//! A run reads one JSON config, integrates or verifies the chosen model in the
//! chosen mode, and writes a CSV and a JSON report. Exit status: `0` when every
//! configured threshold holds, `1` on threshold or numerical failure, `2` when
//! the config is rejected.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, TAU};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use nalgebra::{DVector, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::lie::{CoVector, LieGroup};
use crate::maglag::{self, MagLagState};
use crate::models::{self, BeanieParams, RotorEulerModel, RotorParams, MODELS};
use crate::numerics::{StepperChoice, Trajectory};
use crate::routh::ReducedState;
use crate::semidirect::{self, DualOrbitChart, OrbitChart, Se2CylinderChart, CHART_FD_STEP};

#[derive(Parser, Debug)]
#[command(name = "magreduce", version, about = "Routh reduction and reduction by stages for magnetic Lagrangian systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run a config and write the trajectory CSV and report JSON.
    Run {
        config: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a config and print the report without writing files.
    Verify {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// List the available models and their modes.
    ListModels,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelName {
    Rotor,
    Beanie,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Full,
    ReduceFullGroup,
    ReduceAbelian,
    VerifyEquivalence,
    VerifyLemma,
}

impl ModelName {
    pub fn modes(self) -> &'static [Mode] {
        match self {
            ModelName::Rotor => &[Mode::Full, Mode::ReduceFullGroup],
            ModelName::Beanie => &[
                Mode::Full,
                Mode::ReduceFullGroup,
                Mode::ReduceAbelian,
                Mode::VerifyEquivalence,
                Mode::VerifyLemma,
            ],
        }
    }
}

/// Momentum level. Rotor: `mu` is the body angular momentum (3 components).
/// Beanie: `mu` is the angular momentum (1 component), `a` the linear momentum (2).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Momentum {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<f64>>,
}

/// Shape position and velocity plus the group pose used by the full model.
/// Rotor pose: Z-X-Z Euler angles, default `(0, π/2, 0)`. Beanie pose: `(θ, x, y)`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialState {
    #[serde(default)]
    pub x: f64,
    #[serde(default)]
    pub xdot: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pose: Option<[f64; 3]>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<String>,
}

fn default_samples() -> usize {
    100
}

fn default_pairs() -> usize {
    10
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelName,
    pub mode: Mode,
    #[serde(default)]
    pub params: serde_json::Value,
    #[serde(default)]
    pub momentum: Momentum,
    #[serde(default)]
    pub initial: InitialState,
    #[serde(default)]
    pub stepper: StepperChoice,
    pub t_end: f64,
    #[serde(default)]
    pub outputs: Outputs,
    #[serde(default)]
    pub seed: u64,
    /// Overrides of the default pass thresholds, keyed by metric name.
    #[serde(default)]
    pub thresholds: BTreeMap<String, f64>,
    /// Random sample points for the verification modes.
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Random tangent pairs per sample point.
    #[serde(default = "default_pairs")]
    pub pairs: usize,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// SHA-256 of the canonical JSON form, leaving out the output locations.
    pub fn hash(&self) -> String {
        let canonical = RunConfig {
            outputs: Outputs::default(),
            ..self.clone()
        };
        let bytes = serde_json::to_vec(&canonical).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    fn file_stem(&self) -> String {
        let model = serde_json::to_value(self.model).expect("model name serializes");
        let mode = serde_json::to_value(self.mode).expect("mode serializes");
        format!("{}-{}", model.as_str().unwrap_or("model"), mode.as_str().unwrap_or("mode"))
    }
}

/// Default pass thresholds for every metric a mode reports.
pub fn default_threshold(metric: &str) -> Option<f64> {
    Some(match metric {
        "energy_drift" | "momentum_map_drift" => 1e-8,
        "casimir_drift" | "nu_drift" | "b_norm_sq_drift" => 1e-9,
        "routhian_identity_residual" => 1e-8,
        "form_identity_residual" | "symplectic_form_residual" => 1e-6,
        "symplectic_energy_residual" | "symplectic_momentum_residual" => 1e-6,
        "trajectory_deviation" => 1e-5,
        "lemma_residual_cylinder_chart" | "lemma_residual_angle_chart" => 1e-6,
        _ => return None,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub metric: String,
    pub value: Option<f64>,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub tool: &'static str,
    pub version: &'static str,
    pub config_sha256: String,
    pub model: ModelName,
    pub mode: Mode,
    pub seed: u64,
    pub samples: usize,
    /// `null` for values that are not finite.
    pub metrics: BTreeMap<String, Option<f64>>,
    pub checks: Vec<Check>,
    pub pass: bool,
}

/// Result of a run held in memory: report plus CSV bytes.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub report: Report,
    pub csv: Vec<u8>,
}

/// A config accepted for execution, with all model objects constructed.
struct Plan {
    cfg: RunConfig,
    job: Job,
}

enum Job {
    RotorFull { model: RotorEulerModel, s0: MagLagState },
    RotorReduced { system: crate::routh::ReducedRouthSystem, s0: ReducedState },
    BeanieFull { params: BeanieParams, s0: MagLagState },
    BeanieReduced { system: crate::routh::ReducedRouthSystem, s0: ReducedState },
    BeanieAbelian { system: semidirect::AbelianRouthSystem, s0: MagLagState },
    BeanieEquivalence { eq: Box<semidirect::StageEquivalence>, s0: ReducedState },
    BeanieLemma { a: CoVector },
}

fn components(name: &str, v: &Option<Vec<f64>>, len: usize) -> Result<Vec<f64>> {
    let v = v
        .as_ref()
        .ok_or_else(|| Error::Config(format!("momentum.{name} is required for this model")))?;
    if v.len() != len {
        return Err(Error::Config(format!("momentum.{name} needs {len} components, got {}", v.len())));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Config(format!("momentum.{name} must be finite")));
    }
    Ok(v.clone())
}

fn params<T: Default + serde::de::DeserializeOwned>(v: &serde_json::Value) -> Result<T> {
    if v.is_null() {
        return Ok(T::default());
    }
    serde_json::from_value(v.clone()).map_err(|e| Error::Config(format!("params: {e}")))
}

fn plan(cfg: RunConfig) -> Result<Plan> {
    if !cfg.model.modes().contains(&cfg.mode) {
        return Err(Error::Config(format!("mode {:?} is not defined for model {:?}", cfg.mode, cfg.model)));
    }
    if !(cfg.t_end.is_finite() && cfg.t_end >= 0.0) {
        return Err(Error::Config(format!("t_end must be non-negative, got {}", cfg.t_end)));
    }
    cfg.stepper.validate()?;
    for name in cfg.thresholds.keys() {
        if default_threshold(name).is_none() {
            return Err(Error::Config(format!("unknown threshold metric {name:?}")));
        }
    }
    if cfg.samples == 0 || cfg.pairs == 0 {
        return Err(Error::Config("samples and pairs must be positive".into()));
    }
    let init = &cfg.initial;
    let job = match cfg.model {
        ModelName::Rotor => {
            let p: RotorParams = params(&cfg.params)?;
            p.validate()?;
            if cfg.momentum.a.is_some() {
                return Err(Error::Config("the rotor has no momentum.a".into()));
            }
            let m = components("mu", &cfg.momentum.mu, 3)?;
            match cfg.mode {
                Mode::Full => {
                    let model = RotorEulerModel::new(p)?;
                    let pose = init.pose.unwrap_or([0.0, FRAC_PI_2, 0.0]);
                    let s0 = model.state_from_momentum(&pose, init.x, init.xdot, &Vector3::from_column_slice(&m))?;
                    Job::RotorFull { model, s0 }
                }
                _ => {
                    let system = models::rotor_reduced_system(&p, &CoVector::from_slice(&m))?;
                    let s0 = system.initial_state(DVector::from_element(1, init.x), DVector::from_element(1, init.xdot));
                    Job::RotorReduced { system, s0 }
                }
            }
        }
        ModelName::Beanie => {
            let p: BeanieParams = params(&cfg.params)?;
            p.validate()?;
            let mu = components("mu", &cfg.momentum.mu, 1)?[0];
            let a = CoVector::from_slice(&components("a", &cfg.momentum.a, 2)?);
            semidirect::check_onto(&LieGroup::se2(), &a)?;
            let pose = init.pose.unwrap_or([0.0; 3]);
            let reduced = || models::beanie_reduced_state(init.x, init.xdot, pose[0], mu, &a);
            match cfg.mode {
                Mode::Full => Job::BeanieFull {
                    params: p,
                    s0: models::beanie_state_from_momentum(&p, init.x, init.xdot, &pose, mu, &a)?,
                },
                Mode::ReduceFullGroup => Job::BeanieReduced {
                    system: models::beanie_reduced_system(&p, mu, &a)?,
                    s0: reduced()?,
                },
                Mode::ReduceAbelian => {
                    let system = semidirect::AbelianRouthSystem::new(&p.lagrangian()?, &a)?;
                    let full = models::beanie_state_from_momentum(&p, init.x, init.xdot, &pose, mu, &a)?;
                    let s0 = MagLagState::from_slices(&[init.x, pose[0]], &[init.xdot, full.v[1]], &[]);
                    Job::BeanieAbelian { system, s0 }
                }
                Mode::VerifyEquivalence => Job::BeanieEquivalence {
                    eq: Box::new(models::beanie_stage_equivalence(&p, mu, &a)?),
                    s0: reduced()?,
                },
                Mode::VerifyLemma => Job::BeanieLemma { a },
            }
        }
    };
    Ok(Plan { cfg, job })
}

fn csv_bytes<S: crate::numerics::StateColumns>(traj: &Trajectory<S>) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    traj.write_csv(&mut out)?;
    Ok(out)
}

fn drift<S>(traj: &Trajectory<S>, f: impl Fn(&S) -> Result<f64>) -> Result<f64> {
    let vals = traj.states.iter().map(f).collect::<Result<Vec<_>>>()?;
    Ok(vals.iter().map(|v| (v - vals[0]).abs()).fold(0.0, f64::max))
}

fn vec_drift<S>(traj: &Trajectory<S>, f: impl Fn(&S) -> DVector<f64>) -> f64 {
    let Some(first) = traj.states.first() else { return 0.0 };
    let v0 = f(first);
    traj.states.iter().map(|s| (f(s) - &v0).amax()).fold(0.0, f64::max)
}

fn execute(plan: &Plan) -> Result<(BTreeMap<String, f64>, Vec<u8>)> {
    let cfg = &plan.cfg;
    let (t_end, stepper) = (cfg.t_end, cfg.stepper);
    let mut metrics = BTreeMap::new();
    let csv = match &plan.job {
        Job::RotorFull { model, s0 } => {
            let traj = model.integrate(s0, t_end, stepper)?;
            metrics.insert("energy_drift".into(), drift(&traj, |s| Ok(model.energy(s)))?);
            metrics.insert("casimir_drift".into(), drift(&traj, |s| Ok(model.project(s).2.norm_squared()))?);
            metrics.insert(
                "momentum_map_drift".into(),
                vec_drift(&traj, |s| DVector::from_column_slice(model.spatial_momentum(s).as_slice())),
            );
            csv_bytes(&traj)?
        }
        Job::RotorReduced { system, s0 } | Job::BeanieReduced { system, s0 } => {
            let traj = system.integrate(s0, t_end, stepper)?;
            let inv = system.monitor(&traj)?;
            metrics.insert("energy_drift".into(), inv.energy_drift);
            metrics.insert("casimir_drift".into(), inv.casimir_drift.unwrap_or(f64::NAN));
            if let Job::BeanieReduced { .. } = plan.job {
                metrics.insert("nu_drift".into(), traj.max_drift(|s| s.nu[0]));
            }
            csv_bytes(&traj)?
        }
        Job::BeanieFull { params, s0 } => {
            let traj = models::integrate_beanie_full(params, s0, t_end, stepper)?;
            metrics.insert("energy_drift".into(), drift(&traj, |s| Ok(models::beanie_full_energy(params, s)))?);
            metrics.insert("nu_drift".into(), traj.max_drift(|s| models::beanie_momenta(params, s)[0]));
            metrics.insert(
                "b_norm_sq_drift".into(),
                traj.max_drift(|s| models::beanie_momenta(params, s).0.rows(1, 2).norm_squared()),
            );
            csv_bytes(&traj)?
        }
        Job::BeanieAbelian { system, s0 } => {
            let traj = maglag::integrate(system, s0, t_end, stepper)?;
            metrics.insert("energy_drift".into(), maglag::energy_drift(system, &traj)?);
            csv_bytes(&traj)?
        }
        Job::BeanieEquivalence { eq, s0 } => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let r = eq.report(&mut rng, cfg.samples, cfg.pairs, s0, t_end, stepper)?;
            metrics.insert("routhian_identity_residual".into(), r.routhian_identity_residual);
            metrics.insert("form_identity_residual".into(), r.form_identity_residual);
            metrics.insert("trajectory_deviation".into(), r.trajectory_deviation);
            metrics.insert("casimir_drift".into(), r.casimir_drift);
            metrics.insert("nu_drift".into(), r.nu_drift);
            metrics.insert("symplectic_form_residual".into(), r.symplectic.max_residual_form);
            metrics.insert("symplectic_energy_residual".into(), r.symplectic.max_residual_energy);
            metrics.insert("symplectic_momentum_residual".into(), r.symplectic.max_residual_momentum);
            let (_, traj) = eq.trajectory_deviation(s0, t_end, stepper)?;
            csv_bytes(&traj)?
        }
        Job::BeanieLemma { a } => {
            let group = LieGroup::se2();
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let cylinder = Se2CylinderChart::new(a)?;
            let angle = DualOrbitChart::new(&group, a)?;
            let mut out = Vec::new();
            writeln!(out, "chart,y0,y1,residual")?;
            let mut worst = [0.0f64; 2];
            for _ in 0..cfg.samples {
                let y = DVector::from_column_slice(&[rng.gen_range(0.0..TAU), rng.gen_range(-2.0..2.0)]);
                let charts: [(&str, &dyn OrbitChart); 2] = [("cylinder", &cylinder), ("angle", &angle)];
                for (k, (name, chart)) in charts.into_iter().enumerate() {
                    let r = semidirect::verify_lemma_b_equals_dtheta(
                        &group,
                        chart,
                        std::slice::from_ref(&y),
                        cfg.pairs,
                        CHART_FD_STEP,
                        &mut rng,
                    )?;
                    worst[k] = worst[k].max(r);
                    writeln!(out, "{name},{:.16e},{:.16e},{:.16e}", y[0], y[1], r)?;
                }
            }
            metrics.insert("lemma_residual_cylinder_chart".into(), worst[0]);
            metrics.insert("lemma_residual_angle_chart".into(), worst[1]);
            out
        }
    };
    Ok((metrics, csv))
}

/// Validates and executes a config in memory.
///
/// The outer error is a config rejection (exit status 2), the inner one a
/// numerical failure during execution (exit status 1).
pub fn run_config(cfg: RunConfig) -> Result<Result<Outcome>> {
    let hash = cfg.hash();
    let plan = plan(cfg)?;
    Ok(execute(&plan).map(|(metrics, csv)| {
        let cfg = &plan.cfg;
        let checks: Vec<Check> = metrics
            .iter()
            .map(|(name, value)| {
                let threshold = cfg
                    .thresholds
                    .get(name)
                    .copied()
                    .or_else(|| default_threshold(name))
                    .expect("every reported metric has a default threshold");
                Check {
                    metric: name.clone(),
                    value: value.is_finite().then_some(*value),
                    threshold,
                    pass: *value <= threshold,
                }
            })
            .collect();
        let pass = checks.iter().all(|c| c.pass);
        Outcome {
            report: Report {
                tool: "magreduce",
                version: env!("CARGO_PKG_VERSION"),
                config_sha256: hash,
                model: cfg.model,
                mode: cfg.mode,
                seed: cfg.seed,
                samples: cfg.samples,
                metrics: metrics.iter().map(|(k, v)| (k.clone(), v.is_finite().then_some(*v))).collect(),
                checks,
                pass,
            },
            csv,
        }
    }))
}

/// Paths written by [`run_to_files`].
#[derive(Clone, Debug, PartialEq)]
pub struct Written {
    pub csv: PathBuf,
    pub report: PathBuf,
}

pub fn write_outcome(cfg: &RunConfig, outcome: &Outcome) -> Result<Written> {
    let dir = cfg.outputs.dir.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir)?;
    let stem = cfg.file_stem();
    let csv = dir.join(cfg.outputs.csv.clone().unwrap_or_else(|| format!("{stem}.csv")));
    let report = dir.join(cfg.outputs.report.clone().unwrap_or_else(|| format!("{stem}.json")));
    fs::write(&csv, &outcome.csv)?;
    let mut json = serde_json::to_vec_pretty(&outcome.report)?;
    json.push(b'\n');
    fs::write(&report, json)?;
    Ok(Written { csv, report })
}

fn print_report(report: &Report) {
    for c in &report.checks {
        let value = c.value.map_or("non-finite".to_string(), |v| format!("{v:.3e}"));
        println!("{} {:<32} {value} (threshold {:.1e})", if c.pass { "PASS" } else { "FAIL" }, c.metric, c.threshold);
    }
}

fn load_with(path: &Path, seed: Option<u64>, out_dir: Option<PathBuf>) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if out_dir.is_some() {
        cfg.outputs.dir = out_dir;
    }
    Ok(cfg)
}

/// Runs the parsed command line and returns the process exit status.
pub fn dispatch(cli: Cli) -> i32 {
    let (cfg, write) = match cli.command {
        Command::ListModels => {
            for (name, about) in MODELS {
                let model: ModelName = serde_json::from_value(serde_json::Value::String((*name).into())).expect("registered model");
                let modes: Vec<String> = model
                    .modes()
                    .iter()
                    .map(|m| serde_json::to_value(m).expect("mode serializes").as_str().unwrap_or_default().to_string())
                    .collect();
                println!("{name:<8} {about}\n         modes: {}", modes.join(", "));
            }
            return 0;
        }
        Command::Run { config, out_dir, seed } => (load_with(&config, seed, out_dir), true),
        Command::Verify { config, seed } => (load_with(&config, seed, None), false),
    };
    let cfg = match cfg {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let outcome = match run_config(cfg.clone()) {
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
        Ok(Err(e)) => {
            eprintln!("numerical failure: {e}");
            return 1;
        }
        Ok(Ok(o)) => o,
    };
    print_report(&outcome.report);
    if write {
        match write_outcome(&cfg, &outcome) {
            Ok(w) => println!("wrote {} and {}", w.csv.display(), w.report.display()),
            Err(e) => {
                eprintln!("error writing outputs: {e}");
                return 1;
            }
        }
    } else {
        match serde_json::to_string_pretty(&outcome.report) {
            Ok(s) => println!("{s}"),
            Err(e) => {
                eprintln!("error: {e}");
                return 1;
            }
        }
    }
    if outcome.report.pass {
        0
    } else {
        1
    }
}

/// Entry point for the binary.
pub fn main_from_env() -> i32 {
    match Cli::try_parse() {
        Ok(cli) => dispatch(cli),
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                2
            } else {
                0
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn beanie(mode: &str, extra: &str) -> RunConfig {
        RunConfig::from_json(&format!(
            r#"{{"model":"beanie","mode":"{mode}","momentum":{{"mu":[1.0],"a":[1.0,0.0]}},
               "initial":{{"x":0.4,"xdot":0.2}},"t_end":0.5{extra}}}"#
        ))
        .unwrap()
    }

    #[test]
    fn schema_rejections() {
        assert!(RunConfig::from_json(r#"{"model":"kite","mode":"full","t_end":1}"#).is_err());
        assert!(RunConfig::from_json(r#"{"model":"rotor","mode":"full","t_end":1,"extra":0}"#).is_err());
        let bad_mode = RunConfig::from_json(r#"{"model":"rotor","mode":"verify-lemma","momentum":{"mu":[1,0,0]},"t_end":1}"#).unwrap();
        assert!(matches!(run_config(bad_mode), Err(Error::Config(_))));
        let cfg = RunConfig::from_json(r#"{"model":"beanie","mode":"full","momentum":{"mu":[1.0],"a":[0.0,0.0]},"t_end":1}"#).unwrap();
        let err = run_config(cfg).unwrap_err();
        assert!(err.to_string().contains("dual action not onto"));
        let unknown = beanie("full", r#","thresholds":{"wobble":1.0}"#);
        assert!(run_config(unknown).is_err());
    }

    #[test]
    fn beanie_full_run_conserves_nu() {
        let out = run_config(beanie("full", "")).unwrap().unwrap();
        assert!(out.report.pass);
        assert!(out.report.metrics["nu_drift"].unwrap() < 1e-12);
        let text = String::from_utf8(out.csv).unwrap();
        assert!(text.starts_with("t,q0,q1,q2,q3,v0,v1,v2,v3\n"));
    }

    #[test]
    fn hash_depends_on_seed() {
        let a = beanie("full", "");
        let mut b = a.clone();
        b.seed = 3;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash(), a.clone().hash());
    }

    #[test]
    fn rotor_reduced_run() {
        let cfg = RunConfig::from_json(
            r#"{"model":"rotor","mode":"reduce-full-group","momentum":{"mu":[1.0,0.5,-0.2]},
                "initial":{"xdot":0.3},"t_end":0.5,"stepper":{"kind":"rk4","h":0.01}}"#,
        )
        .unwrap();
        let out = run_config(cfg).unwrap().unwrap();
        assert!(out.report.pass, "{:?}", out.report.checks);
        assert!(String::from_utf8(out.csv).unwrap().starts_with("t,x0,xdot0,nu0,nu1,nu2\n"));
    }

    #[test]
    fn threshold_override_can_fail_a_run() {
        let out = run_config(beanie("full", r#","thresholds":{"energy_drift":-1.0}"#)).unwrap().unwrap();
        assert!(!out.report.pass);
    }
}
