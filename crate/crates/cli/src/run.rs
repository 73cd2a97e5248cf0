//! Executes a [`RunConfig`] and writes its artifacts.

use std::fs;
use std::path::Path;

use disent_core::dynamics::{
    integrate_master, integrate_sle_ensemble, two_spin_steady_state, SleModel, TrajectoryRecord,
};
use disent_core::entangle::{
    delta_measure, measure_report, weyl_t2_expectation, MeasureEvaluator, MeasureReport,
};
use disent_core::qcore::{projector, ComplexMatrix, Factorization, QuantumState};
use disent_core::twospin::{
    build_hamiltonian, classify_attractor, dominant_eigenvector, effective_temperature,
    run_sweep, thermal_temperature, AttractorVerdict, InitialState, SweepTable,
    DEFAULT_AMP_THRESHOLD, DEFAULT_TRANSIENT_FRACTION,
};
use disent_core::Error as CoreError;
use serde::Serialize;

use crate::config::{to_toml, Command, RunConfig};
use crate::error::CliError;
use crate::svg::{heatmap, line_panels, Panel};

/// Files produced by a run, relative to the output directory.
#[derive(Debug, Clone, Default, Serialize)]
pub struct RunSummary {
    pub data_files: Vec<String>,
    pub plots: Vec<String>,
    pub verdicts: Vec<NamedVerdict>,
}

#[derive(Debug, Clone, Serialize)]
pub struct NamedVerdict {
    pub source: String,
    pub verdict: Option<AttractorVerdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    code_version: &'a str,
    seed: u64,
    config: &'a RunConfig,
    data_files: &'a [String],
    plots: &'a [String],
    verdicts: &'a [NamedVerdict],
}

/// Buffered artifacts, flushed to disk only after all computation is done.
#[derive(Default)]
struct Artifacts {
    files: Vec<(String, String)>,
    summary: RunSummary,
}

impl Artifacts {
    fn data(&mut self, name: impl Into<String>, body: String) {
        let name = name.into();
        self.summary.data_files.push(name.clone());
        self.files.push((name, body));
    }

    fn plot(&mut self, name: impl Into<String>, body: String) {
        let name = name.into();
        self.summary.plots.push(name.clone());
        self.files.push((name, body));
    }
}

fn check_writable(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let probe = dir.join(".write-probe");
    fs::write(&probe, b"").map_err(|e| CliError::io(&probe, e))?;
    fs::remove_file(&probe).map_err(|e| CliError::io(&probe, e))
}

/// Runs the configured computation and writes data, plots and manifest
/// into `cfg.output.dir`.
pub fn run(cfg: &RunConfig) -> Result<RunSummary, CliError> {
    let dir = cfg.output.dir.clone();
    check_writable(&dir)?;
    let mut art = Artifacts::default();
    match cfg.command {
        Command::Sweep => sweep(cfg, &mut art)?,
        Command::Master => master(cfg, &mut art)?,
        Command::Sde => sde(cfg, &mut art)?,
        Command::Steady => steady(cfg, &mut art)?,
        Command::Measures => measures(cfg, &mut art)?,
        Command::Preset => {
            return Err(CliError::Config(
                "command \"preset\" must be resolved before running".into(),
            ))
        }
    }
    art.data("resolved.toml", to_toml(cfg));
    let manifest = Manifest {
        code_version: env!("CARGO_PKG_VERSION"),
        seed: cfg.integrator.seed,
        config: cfg,
        data_files: &art.summary.data_files,
        plots: &art.summary.plots,
        verdicts: &art.summary.verdicts,
    };
    let body = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    art.files.push(("manifest.json".into(), body));
    for (name, body) in &art.files {
        let path = dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        fs::write(&path, body).map_err(|e| CliError::io(&path, e))?;
    }
    Ok(art.summary)
}

/// `{:.16e}` (17 significant digits), `NaN` for non-finite values.
pub fn fmt_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "NaN".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Column names of the sweep CSV.
pub fn sweep_header() -> Vec<String> {
    let mut h = vec!["delta".to_string(), "omega1".to_string()];
    for a in 0..4 {
        for b in 0..4 {
            h.push(format!("B_{a}_{b}"));
        }
    }
    h.extend(["tau_ab", "t_eff", "error"].map(String::from));
    h
}

pub fn sweep_csv(table: &SweepTable) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(sweep_header()).expect("in-memory write");
    for r in &table.rows {
        let mut rec = vec![fmt_float(r.delta), fmt_float(r.omega1)];
        rec.extend(r.bloch.iter().map(|&v| fmt_float(v)));
        rec.push(fmt_float(r.tau_ab));
        rec.push(fmt_float(r.t_eff));
        rec.push(r.error.clone().unwrap_or_default());
        w.write_record(rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

fn sweep(cfg: &RunConfig, art: &mut Artifacts) -> Result<(), CliError> {
    let table = run_sweep(&cfg.model, &cfg.damping, &cfg.sweep)?;
    art.data("sweep.csv", sweep_csv(&table));
    if cfg.output.plots {
        let g = &table.grid;
        let xs: Vec<f64> = (0..g.delta.n).map(|i| g.delta.value(i)).collect();
        let ys: Vec<f64> = (0..g.omega1.n).map(|j| g.omega1.value(j)).collect();
        let mut quantities: Vec<(String, Vec<f64>)> = (0..16)
            .map(|k| {
                (
                    format!("B_{}_{}", k / 4, k % 4),
                    table.rows.iter().map(|r| r.bloch[k]).collect(),
                )
            })
            .collect();
        quantities.push(("tau_ab".into(), table.rows.iter().map(|r| r.tau_ab).collect()));
        quantities.push(("t_eff".into(), table.rows.iter().map(|r| r.t_eff).collect()));
        for (name, z) in quantities {
            art.plot(
                format!("plots/{name}.svg"),
                heatmap(&name, "delta / omega_a", &xs, "omega1 / omega_a", &ys, &z),
            );
        }
    }
    Ok(())
}

fn mixed_initial(cfg: &RunConfig) -> Result<QuantumState, CliError> {
    let h = build_hamiltonian(&cfg.model);
    let rho = two_spin_steady_state(&h, &cfg.damping)?;
    let rho = match cfg.initial {
        InitialState::SteadyState => rho,
        InitialState::SteadyStatePure => projector(&dominant_eigenvector(&rho)?),
    };
    Ok(QuantumState::two_qubit_mixed(rho)?)
}

#[derive(Serialize)]
struct Diagnostics {
    trace_err: f64,
    herm_err: f64,
    min_eig: f64,
}

#[derive(Serialize)]
struct Sample<'a> {
    t: f64,
    k_a: [f64; 3],
    k_b: [f64; 3],
    measures: &'a MeasureReport,
    diagnostics: Diagnostics,
}

/// One JSON object per sample: `t`, `k_a`, `k_b`, `measures`, `diagnostics`.
pub fn record_ndjson(rec: &TrajectoryRecord) -> String {
    let mut out = String::new();
    for k in 0..rec.len() {
        let s = Sample {
            t: rec.times[k],
            k_a: rec.k_a[k],
            k_b: rec.k_b[k],
            measures: &rec.measures[k],
            diagnostics: Diagnostics {
                trace_err: rec.trace_err[k],
                herm_err: rec.herm_err[k],
                min_eig: rec.min_eig[k],
            },
        };
        out.push_str(&serde_json::to_string(&s).expect("sample serializes"));
        out.push('\n');
    }
    out
}

fn bloch_plot(title: &str, rec: &TrajectoryRecord) -> String {
    let comp = |v: &[[f64; 3]], c: usize| v.iter().map(|k| k[c]).collect::<Vec<f64>>();
    let ta = format!("{title}: k_a");
    let tb = format!("{title}: k_b");
    line_panels(
        "t * omega_a",
        &rec.times,
        &[
            Panel {
                title: &ta,
                series: vec![
                    ("x", comp(&rec.k_a, 0)),
                    ("y", comp(&rec.k_a, 1)),
                    ("z", comp(&rec.k_a, 2)),
                ],
            },
            Panel {
                title: &tb,
                series: vec![
                    ("x", comp(&rec.k_b, 0)),
                    ("y", comp(&rec.k_b, 1)),
                    ("z", comp(&rec.k_b, 2)),
                ],
            },
        ],
    )
}

fn verdict_of(source: &str, rec: &TrajectoryRecord) -> Result<NamedVerdict, CliError> {
    match classify_attractor(rec, DEFAULT_TRANSIENT_FRACTION, DEFAULT_AMP_THRESHOLD) {
        Ok(v) => Ok(NamedVerdict {
            source: source.into(),
            verdict: Some(v),
            note: None,
        }),
        Err(e @ CoreError::RecordTooShort { .. }) => Ok(NamedVerdict {
            source: source.into(),
            verdict: None,
            note: Some(e.to_string()),
        }),
        Err(e) => Err(e.into()),
    }
}

fn master(cfg: &RunConfig, art: &mut Artifacts) -> Result<(), CliError> {
    let initial = mixed_initial(cfg)?;
    let h = build_hamiltonian(&cfg.model);
    let rec = integrate_master(&initial, &h, &cfg.disentangle, &cfg.damping, &cfg.integrator)?;
    art.summary
        .verdicts
        .push(verdict_of("trajectory.ndjson", &rec)?);
    art.data("trajectory.ndjson", record_ndjson(&rec));
    if cfg.output.plots {
        art.plot("plots/bloch.svg", bloch_plot("master equation", &rec));
    }
    Ok(())
}

fn sde(cfg: &RunConfig, art: &mut Artifacts) -> Result<(), CliError> {
    let h = build_hamiltonian(&cfg.model);
    let rho = two_spin_steady_state(&h, &cfg.damping)?;
    let psi0 = dominant_eigenvector(&rho)?;
    let model = SleModel::new(
        &h,
        &cfg.damping,
        &cfg.disentangle,
        Factorization::two_qubits(),
        cfg.integrator.log_floor,
    )?;
    let ens = integrate_sle_ensemble(
        &psi0,
        &model,
        &cfg.integrator,
        cfg.sde.n_traj,
        cfg.sde.keep_records.min(cfg.sde.n_traj),
    )?;
    let mean = mean_record(&ens.times, &ens.mean_rho)?;
    art.data("ensemble.ndjson", record_ndjson(&mean));
    for (k, rec) in ens.records.iter().enumerate() {
        let name = format!("trajectories/traj-{k:04}.ndjson");
        art.summary.verdicts.push(verdict_of(&name, rec)?);
        art.data(name, record_ndjson(rec));
    }
    if cfg.output.plots {
        art.plot("plots/ensemble_bloch.svg", bloch_plot("ensemble mean", &mean));
        if let Some(rec) = ens.records.first() {
            art.plot("plots/traj-0000_bloch.svg", bloch_plot("trajectory 0", rec));
        }
    }
    Ok(())
}

fn mean_record(times: &[f64], rhos: &[ComplexMatrix]) -> Result<TrajectoryRecord, CliError> {
    let mut rec = disent_core::dynamics::Recorder::new(Factorization::two_qubits())?;
    for (&t, rho) in times.iter().zip(rhos) {
        rec.push(t, rho, rho)?;
    }
    Ok(rec.finish())
}

#[derive(Serialize)]
struct SteadyOutput {
    delta: f64,
    omega1: f64,
    bloch: Vec<Vec<f64>>,
    k_a: [f64; 3],
    k_b: [f64; 3],
    measures: MeasureReport,
    t_eff: Option<f64>,
    t_bath: Option<f64>,
}

fn steady(cfg: &RunConfig, art: &mut Artifacts) -> Result<(), CliError> {
    let h = build_hamiltonian(&cfg.model);
    let rho = two_spin_steady_state(&h, &cfg.damping)?;
    let eval = MeasureEvaluator::new(Factorization::two_qubits())?;
    let b = disent_core::bases::observable_grid(2, 2)?.bloch(&rho);
    let (k_a, k_b) = eval.bloch_vectors(&rho)?;
    let out = SteadyOutput {
        delta: cfg.model.delta,
        omega1: cfg.model.omega1,
        bloch: (0..4)
            .map(|a| (0..4).map(|c| b.values[(a, c)]).collect())
            .collect(),
        k_a,
        k_b,
        measures: eval.report(&rho)?,
        t_eff: effective_temperature(k_a[2], cfg.model.omega_a).ok(),
        t_bath: thermal_temperature(cfg.damping.a.n0, cfg.model.omega_a).ok(),
    };
    art.data(
        "steady.json",
        serde_json::to_string_pretty(&out).expect("serializes") + "\n",
    );
    Ok(())
}

#[derive(Serialize)]
struct MeasuresOutput {
    initial: InitialState,
    measures: MeasureReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    delta_pure: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    weyl_t2: Option<f64>,
}

fn measures(cfg: &RunConfig, art: &mut Artifacts) -> Result<(), CliError> {
    let h = build_hamiltonian(&cfg.model);
    let rho = two_spin_steady_state(&h, &cfg.damping)?;
    let out = match cfg.initial {
        InitialState::SteadyState => MeasuresOutput {
            initial: cfg.initial,
            measures: measure_report(&QuantumState::two_qubit_mixed(rho)?)?,
            delta_pure: None,
            weyl_t2: None,
        },
        InitialState::SteadyStatePure => {
            let psi = dominant_eigenvector(&rho)?;
            let st = QuantumState::pure(psi.clone(), Some(Factorization::two_qubits()))?;
            MeasuresOutput {
                initial: cfg.initial,
                measures: measure_report(&st)?,
                delta_pure: Some(delta_measure(&psi)?),
                weyl_t2: Some(weyl_t2_expectation(&st)?),
            }
        }
    };
    art.data(
        "measures.json",
        serde_json::to_string_pretty(&out).expect("serializes") + "\n",
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_has_17_significant_digits() {
        assert_eq!(fmt_float(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_float(-2.0), "-2.0000000000000000e0");
        assert_eq!(fmt_float(f64::NAN), "NaN");
        assert_eq!(fmt_float(0.1).parse::<f64>().unwrap(), 0.1);
    }

    #[test]
    fn header_layout() {
        let h = sweep_header();
        assert_eq!(h.len(), 2 + 16 + 3);
        assert_eq!(h[2], "B_0_0");
        assert_eq!(h[17], "B_3_3");
    }
}
