//! Run configuration: a TOML document with dotted sections, optionally
//! seeded from a named preset and overridden key by key.

use std::path::PathBuf;

use disent_core::dynamics::{DampingParams, IntegratorConfig, Method, SpinDamping};
use disent_core::entangle::{DisentanglementSpec, ThetaFamily};
use disent_core::twospin::{
    experiment_preset, Engine, InitialState, SweepAxis, SweepGrid, TwoSpinParams,
};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// What a run computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Linear steady states over a drive grid.
    Sweep,
    /// Modified master equation from a mixed initial state.
    Master,
    /// Stochastic trajectory ensemble.
    Sde,
    /// Linear steady state of one drive setting.
    Steady,
    /// Entanglement measures of the initial state.
    Measures,
    /// Whatever engine the named preset uses.
    Preset,
}

impl From<Engine> for Command {
    fn from(e: Engine) -> Self {
        match e {
            Engine::Sweep => Command::Sweep,
            Engine::Master => Command::Master,
            Engine::Sde => Command::Sde,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SdeOptions {
    pub n_traj: usize,
    /// Number of leading trajectories written out in full.
    pub keep_records: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub plots: bool,
}

/// Fully resolved and validated configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    pub initial: InitialState,
    pub model: TwoSpinParams,
    pub damping: DampingParams,
    pub disentangle: DisentanglementSpec,
    pub integrator: IntegratorConfig,
    pub sweep: SweepGrid,
    pub sde: SdeOptions,
    pub output: OutputConfig,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    command: Option<Command>,
    preset: Option<String>,
    initial: Option<InitialState>,
    model: Option<RawModel>,
    damping: Option<RawDamping>,
    disentangle: Option<RawDisentangle>,
    integrator: Option<RawIntegrator>,
    sweep: Option<RawSweep>,
    sde: Option<RawSde>,
    output: Option<RawOutput>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    omega_a: Option<f64>,
    delta: Option<f64>,
    omega1: Option<f64>,
    g: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDamping {
    a: Option<RawSpin>,
    b: Option<RawSpin>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpin {
    gamma1: Option<f64>,
    gamma_phi: Option<f64>,
    n0: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDisentangle {
    family: Option<ThetaFamily>,
    gamma_d: Option<f64>,
    gamma_h: Option<f64>,
    beta: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIntegrator {
    dt: Option<f64>,
    t_end: Option<f64>,
    method: Option<Method>,
    seed: Option<u64>,
    renormalize_every_step: Option<bool>,
    log_floor: Option<f64>,
    sample_every: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    delta: Option<RawAxis>,
    omega1: Option<RawAxis>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAxis {
    min: Option<f64>,
    max: Option<f64>,
    n: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSde {
    n_traj: Option<usize>,
    keep_records: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<PathBuf>,
    plots: Option<bool>,
}

/// Defaults for keys that are optional without a preset.
pub const DEFAULT_OUT_DIR: &str = "out";
pub const DEFAULT_N_TRAJ: usize = 200;
pub const DEFAULT_KEEP_RECORDS: usize = 4;

/// Keys that must be present when no preset is named.
const REQUIRED_WITHOUT_PRESET: [&str; 10] = [
    "command",
    "model.delta",
    "model.omega1",
    "model.g",
    "damping.a.gamma1",
    "damping.a.gamma_phi",
    "damping.a.n0",
    "damping.b.gamma1",
    "damping.b.gamma_phi",
    "damping.b.n0",
];

fn base_from_preset(name: &str) -> Result<RunConfig, CliError> {
    let p = experiment_preset(name).map_err(|e| CliError::Config(e.to_string()))?;
    Ok(RunConfig {
        command: p.engine.into(),
        preset: Some(p.name.clone()),
        initial: p.initial,
        model: p.model,
        damping: p.damping,
        disentangle: p.disentangle,
        integrator: p.integrator,
        sweep: p.sweep.unwrap_or_else(SweepGrid::fig1),
        sde: SdeOptions {
            n_traj: p.n_traj.max(1),
            keep_records: p.n_traj.clamp(1, DEFAULT_KEEP_RECORDS),
        },
        output: OutputConfig {
            dir: PathBuf::from(DEFAULT_OUT_DIR),
            plots: true,
        },
    })
}

fn base_default() -> RunConfig {
    RunConfig {
        command: Command::Steady,
        preset: None,
        initial: InitialState::SteadyState,
        model: TwoSpinParams::default(),
        damping: DampingParams::none(),
        disentangle: DisentanglementSpec::none(),
        integrator: IntegratorConfig::default(),
        sweep: SweepGrid::fig1(),
        sde: SdeOptions {
            n_traj: DEFAULT_N_TRAJ,
            keep_records: DEFAULT_KEEP_RECORDS,
        },
        output: OutputConfig {
            dir: PathBuf::from(DEFAULT_OUT_DIR),
            plots: true,
        },
    }
}

fn missing_keys(raw: &RawConfig) -> Vec<&'static str> {
    let model = raw.model.as_ref();
    let spin = |s: Option<&RawSpin>| {
        [
            s.and_then(|s| s.gamma1).is_some(),
            s.and_then(|s| s.gamma_phi).is_some(),
            s.and_then(|s| s.n0).is_some(),
        ]
    };
    let da = spin(raw.damping.as_ref().and_then(|d| d.a.as_ref()));
    let db = spin(raw.damping.as_ref().and_then(|d| d.b.as_ref()));
    let present = [
        raw.command.is_some(),
        model.and_then(|m| m.delta).is_some(),
        model.and_then(|m| m.omega1).is_some(),
        model.and_then(|m| m.g).is_some(),
        da[0],
        da[1],
        da[2],
        db[0],
        db[1],
        db[2],
    ];
    REQUIRED_WITHOUT_PRESET
        .iter()
        .zip(present)
        .filter(|(_, p)| !p)
        .map(|(k, _)| *k)
        .collect()
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn apply_spin(s: &mut SpinDamping, raw: Option<RawSpin>) {
    if let Some(r) = raw {
        set(&mut s.gamma1, r.gamma1);
        set(&mut s.gamma_phi, r.gamma_phi);
        set(&mut s.n0, r.n0);
    }
}

fn apply_axis(ax: &mut SweepAxis, raw: Option<RawAxis>) {
    if let Some(r) = raw {
        set(&mut ax.min, r.min);
        set(&mut ax.max, r.max);
        set(&mut ax.n, r.n);
    }
}

/// Parses and validates a configuration document.
///
/// With `preset = "<name>"` every key defaults to the preset's value;
/// without one, `command`, `model.{delta,omega1,g}` and all six
/// `damping.{a,b}.*` keys are required.
pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    resolve(raw)
}

fn resolve(raw: RawConfig) -> Result<RunConfig, CliError> {
    let mut cfg = match &raw.preset {
        Some(name) => base_from_preset(name)?,
        None => {
            let missing = missing_keys(&raw);
            if !missing.is_empty() {
                return Err(CliError::Config(format!(
                    "missing required keys (or set `preset`): {}",
                    missing.join(", ")
                )));
            }
            base_default()
        }
    };
    match raw.command {
        Some(Command::Preset) => {
            if raw.preset.is_none() {
                return Err(CliError::Config(
                    "command = \"preset\" needs a `preset` key".into(),
                ));
            }
        }
        Some(c) => cfg.command = c,
        None => {}
    }
    set(&mut cfg.initial, raw.initial);
    if let Some(m) = raw.model {
        set(&mut cfg.model.omega_a, m.omega_a);
        set(&mut cfg.model.delta, m.delta);
        set(&mut cfg.model.omega1, m.omega1);
        set(&mut cfg.model.g, m.g);
    }
    if let Some(d) = raw.damping {
        apply_spin(&mut cfg.damping.a, d.a);
        apply_spin(&mut cfg.damping.b, d.b);
    }
    if let Some(d) = raw.disentangle {
        set(&mut cfg.disentangle.family, d.family);
        set(&mut cfg.disentangle.gamma_d, d.gamma_d);
        set(&mut cfg.disentangle.gamma_h, d.gamma_h);
        set(&mut cfg.disentangle.beta, d.beta);
    }
    if let Some(i) = raw.integrator {
        set(&mut cfg.integrator.dt, i.dt);
        set(&mut cfg.integrator.t_end, i.t_end);
        set(&mut cfg.integrator.method, i.method);
        set(&mut cfg.integrator.seed, i.seed);
        set(
            &mut cfg.integrator.renormalize_every_step,
            i.renormalize_every_step,
        );
        set(&mut cfg.integrator.log_floor, i.log_floor);
        set(&mut cfg.integrator.sample_every, i.sample_every);
    }
    if let Some(s) = raw.sweep {
        apply_axis(&mut cfg.sweep.delta, s.delta);
        apply_axis(&mut cfg.sweep.omega1, s.omega1);
    }
    if let Some(s) = raw.sde {
        set(&mut cfg.sde.n_traj, s.n_traj);
        set(&mut cfg.sde.keep_records, s.keep_records);
    }
    if let Some(o) = raw.output {
        set(&mut cfg.output.dir, o.dir);
        set(&mut cfg.output.plots, o.plots);
    }
    // The integration method follows from the engine.
    match cfg.command {
        Command::Master => cfg.integrator.method = Method::Rk4,
        Command::Sde => {
            cfg.integrator.method = Method::EulerMaruyama;
            cfg.initial = InitialState::SteadyStatePure;
        }
        _ => {}
    }
    validate(&cfg)?;
    Ok(cfg)
}

fn bound_err(key: &str, bound: &str, v: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{key} must be {bound} (got {v})"))
}

/// Domain checks, reported with the offending key and bound.
pub fn validate(cfg: &RunConfig) -> Result<(), CliError> {
    let nonneg = [
        ("damping.a.gamma1", cfg.damping.a.gamma1),
        ("damping.a.gamma_phi", cfg.damping.a.gamma_phi),
        ("damping.a.n0", cfg.damping.a.n0),
        ("damping.b.gamma1", cfg.damping.b.gamma1),
        ("damping.b.gamma_phi", cfg.damping.b.gamma_phi),
        ("damping.b.n0", cfg.damping.b.n0),
        ("disentangle.gamma_d", cfg.disentangle.gamma_d),
        ("disentangle.gamma_h", cfg.disentangle.gamma_h),
        ("integrator.sample_every", cfg.integrator.sample_every),
    ];
    for (key, v) in nonneg {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(bound_err(key, ">= 0", v));
        }
    }
    for (key, v) in [
        ("model.delta", cfg.model.delta),
        ("model.omega1", cfg.model.omega1),
        ("model.g", cfg.model.g),
    ] {
        if !v.is_finite() {
            return Err(bound_err(key, "finite", v));
        }
    }
    if !(cfg.model.omega_a > 0.0 && cfg.model.omega_a.is_finite()) {
        return Err(bound_err("model.omega_a", "> 0", cfg.model.omega_a));
    }
    if cfg.disentangle.family == ThetaFamily::None && cfg.disentangle.gamma_d != 0.0 {
        return Err(bound_err(
            "disentangle.gamma_d",
            "0 when disentangle.family = \"none\"",
            cfg.disentangle.gamma_d,
        ));
    }
    if !(cfg.disentangle.beta > 0.0 && cfg.disentangle.beta.is_finite()) {
        return Err(bound_err("disentangle.beta", "> 0", cfg.disentangle.beta));
    }
    let i = &cfg.integrator;
    if !(i.dt > 0.0 && i.dt.is_finite()) {
        return Err(bound_err("integrator.dt", "> 0", i.dt));
    }
    if !(i.t_end >= i.dt && i.t_end.is_finite()) {
        return Err(bound_err("integrator.t_end", ">= integrator.dt", i.t_end));
    }
    if !(i.log_floor > 0.0 && i.log_floor < 1.0) {
        return Err(bound_err("integrator.log_floor", "in (0, 1)", i.log_floor));
    }
    for (key, ax) in [("sweep.delta", cfg.sweep.delta), ("sweep.omega1", cfg.sweep.omega1)] {
        if ax.n < 2 {
            return Err(bound_err(&format!("{key}.n"), ">= 2", ax.n));
        }
        if !(ax.max > ax.min && ax.min.is_finite() && ax.max.is_finite()) {
            return Err(bound_err(&format!("{key}.max"), "> min", ax.max));
        }
    }
    if cfg.sde.n_traj < 1 {
        return Err(bound_err("sde.n_traj", ">= 1", cfg.sde.n_traj));
    }
    if cfg.command == Command::Sde && cfg.disentangle.family == ThetaFamily::Thermalization {
        return Err(CliError::Config(
            "disentangle.family = \"thermalization\" needs a mixed state; use command = \"master\""
                .into(),
        ));
    }
    Ok(())
}

/// Serializes a resolved configuration so that [`parse_config`] returns it
/// unchanged.
pub fn to_toml(cfg: &RunConfig) -> String {
    toml::to_string(cfg).expect("run configuration serializes")
}

/// Annotated reference of every key, printed by `--help`.
pub const CONFIG_REFERENCE: &str = "\
Config keys (TOML, dotted sections):
  command                    sweep | master | sde | steady | measures | preset (required without preset)
  preset                     fig1-sweep, fig2-A1..A3, fig2-B1..B3, fig3-A, fig3-B
  initial                    steady-state | steady-state-pure        [steady-state]
                             (sde always starts from steady-state-pure)
  model.omega_a              Larmor frequency of spin a (unit)       [1]
  model.delta, model.omega1  drive detuning and amplitude             (required without preset)
  model.g                    coupling rate                            (required without preset)
  damping.{a,b}.gamma1       longitudinal rate                        (required without preset)
  damping.{a,b}.gamma_phi    dephasing rate                           (required without preset)
  damping.{a,b}.n0           thermal occupation                       (required without preset)
  disentangle.family         none | corr-suppress | bloch-derank-a | bloch-derank-b |
                             state-matrix-derank | thermalization     [none]
  disentangle.gamma_d        disentanglement rate                     [0]
  disentangle.gamma_h        thermalization rate                      [0]
  disentangle.beta           inverse temperature (thermalization)     [1]
  integrator.dt              time step                                [0.001]
  integrator.t_end           duration                                 [200]
  integrator.seed            RNG seed                                 [0]
  integrator.sample_every    sampling interval                        [0.1]
  integrator.renormalize_every_step                                   [true]
  integrator.log_floor       relative eigenvalue floor of matrix logs [1e-13]
  integrator.method          rk4 | euler-maruyama (set by command)
  sweep.{delta,omega1}.{min,max,n}   drive grid      [delta -2..2 x81, omega1 2/81..2 x81]
  sde.n_traj                 number of trajectories                   [200]
  sde.keep_records           trajectories written in full             [4]
  output.dir                 output directory                         [out]
  output.plots               write SVG plots                          [true]
";
