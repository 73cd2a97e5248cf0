//! The driven two-spin system: rotating-frame Hamiltonian, steady-state
//! sweeps over the drive, named experiment presets and attractor
//! classification of Bloch-vector trajectories.
//!
//! Spin a (Larmor frequency `ω_a`, the unit of frequency) is undriven;
//! spin b is driven with amplitude `ω₁` at detuning `Δ` and the frame
//! rotates with the drive. The coupling is `g (S_a+ + S_a-) S_bz`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bases::pauli;
use crate::dynamics::{
    two_spin_steady_state, DampingParams, IntegratorConfig, Method, SpinDamping,
    TrajectoryRecord,
};
use crate::entangle::{DisentanglementSpec, MeasureEvaluator, ThetaFamily};
use crate::error::{Error, Result};
use crate::qcore::{herm_eig, identity, kron, ComplexMatrix, Factorization, StateVector};

/// Drive and coupling parameters, in units of `ω_a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoSpinParams {
    pub omega_a: f64,
    pub delta: f64,
    pub omega1: f64,
    pub g: f64,
}

impl Default for TwoSpinParams {
    fn default() -> Self {
        Self {
            omega_a: 1.0,
            delta: 0.0,
            omega1: 0.0,
            g: 0.0,
        }
    }
}

impl TwoSpinParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega_a > 0.0 && self.omega_a.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "omega_a must be positive, got {}",
                self.omega_a
            )));
        }
        for (name, v) in [
            ("delta", self.delta),
            ("omega1", self.omega1),
            ("g", self.g),
        ] {
            if !v.is_finite() {
                return Err(Error::InvalidConfig(format!("{name} must be finite")));
            }
        }
        Ok(())
    }

    pub fn with_drive(self, delta: f64, omega1: f64) -> Self {
        Self {
            delta,
            omega1,
            ..self
        }
    }
}

/// `ω_a S_az + Δ S_bz + ω₁ S_bx + (g/2) σ_ax ⊗ σ_bz` with `S = σ/2`.
pub fn build_hamiltonian(p: &TwoSpinParams) -> ComplexMatrix {
    let [sx, _, sz] = pauli();
    let i2 = identity(2);
    kron(&sz, &i2).scale(p.omega_a / 2.0)
        + kron(&i2, &sz).scale(p.delta / 2.0)
        + kron(&i2, &sx).scale(p.omega1 / 2.0)
        + kron(&sx, &sz).scale(p.g / 2.0)
}

/// Single driven spin `Δ S_z + ω₁ S_x`.
pub fn single_spin_hamiltonian(delta: f64, omega1: f64) -> ComplexMatrix {
    let [sx, _, sz] = pauli();
    sz.scale(delta / 2.0) + sx.scale(omega1 / 2.0)
}

/// Closed-form steady state `<σ>` of a single driven, damped spin.
pub fn driven_spin_bloch(delta: f64, omega1: f64, s: &SpinDamping) -> [f64; 3] {
    let (t1, t2, p) = (s.t1(), s.t2(), s.p_z0());
    let den = 1.0 + delta * delta * t2 * t2 + omega1 * omega1 * t1 * t2;
    [
        delta * omega1 * t2 * t2 * p / den,
        -omega1 * t2 * p / den,
        (1.0 + delta * delta * t2 * t2) * p / den,
    ]
}

/// `ω_R = √(ω₁² + Δ²)`
pub fn rabi_frequency(p: &TwoSpinParams) -> f64 {
    p.omega1.hypot(p.delta)
}

/// Temperature (in units of `ħω_a/k_B` when `omega_a = 1`) assigned to a
/// spin polarization `k_az ∈ (-1, 0)` through `k_az = -tanh(ω_a / 2T)`.
pub fn effective_temperature(k_az: f64, omega_a: f64) -> Result<f64> {
    if !(k_az > -1.0 && k_az < 0.0) {
        return Err(Error::OutOfDomain {
            value: k_az,
            reason: "k_az must lie in (-1, 0)",
        });
    }
    Ok(omega_a / (2.0 * (-k_az).atanh()))
}

/// Bath temperature of occupation `n₀`, `ω_a / ln((n₀+1)/n₀)`.
pub fn thermal_temperature(n0: f64, omega_a: f64) -> Result<f64> {
    if !(n0 > 0.0) {
        return Err(Error::OutOfDomain {
            value: n0,
            reason: "n0 must be positive for a finite temperature",
        });
    }
    Ok(omega_a / ((n0 + 1.0) / n0).ln())
}

/// One axis of a sweep: `n` evenly spaced values from `min` to `max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

impl SweepAxis {
    pub fn value(&self, k: usize) -> f64 {
        self.min + (self.max - self.min) * k as f64 / (self.n - 1) as f64
    }

    pub fn spacing(&self) -> f64 {
        (self.max - self.min) / (self.n - 1) as f64
    }

    /// Index of the value closest to `x`.
    pub fn nearest(&self, x: f64) -> usize {
        let k = ((x - self.min) / self.spacing()).round();
        k.clamp(0.0, (self.n - 1) as f64) as usize
    }
}

/// Grid of drive parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    pub delta: SweepAxis,
    pub omega1: SweepAxis,
}

impl SweepGrid {
    /// `Δ ∈ [-2, 2]`, `ω₁ = 2k/81` for `k = 1..=81`.
    pub fn fig1() -> Self {
        Self {
            delta: SweepAxis {
                min: -2.0,
                max: 2.0,
                n: 81,
            },
            omega1: SweepAxis {
                min: 2.0 / 81.0,
                max: 2.0,
                n: 81,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, ax) in [("delta", self.delta), ("omega1", self.omega1)] {
            if ax.n < 2 || !(ax.max > ax.min) {
                return Err(Error::InvalidConfig(format!(
                    "sweep axis {name} needs n >= 2 and max > min"
                )));
            }
        }
        Ok(())
    }

    pub fn n_cells(&self) -> usize {
        self.delta.n * self.omega1.n
    }

    /// `(Δ, ω₁)` of cell `index`; `ω₁` varies fastest.
    pub fn cell(&self, index: usize) -> (f64, f64) {
        let (i, j) = (index / self.omega1.n, index % self.omega1.n);
        (self.delta.value(i), self.omega1.value(j))
    }

    /// True when the 3×3 block of cells around `(i, j)` straddles or
    /// touches the matching circle `ω_R = ω_a`.
    pub fn near_matching_circle(&self, i: usize, j: usize, omega_a: f64) -> bool {
        let mut below = false;
        let mut above = false;
        for di in -1i64..=1 {
            for dj in -1i64..=1 {
                let (ii, jj) = (i as i64 + di, j as i64 + dj);
                if ii < 0 || jj < 0 || ii >= self.delta.n as i64 || jj >= self.omega1.n as i64 {
                    continue;
                }
                let r = self
                    .delta
                    .value(ii as usize)
                    .hypot(self.omega1.value(jj as usize));
                below |= r <= omega_a;
                above |= r >= omega_a;
            }
        }
        below && above
    }
}

/// Linear steady-state observables of one drive setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub delta: f64,
    pub omega1: f64,
    /// The 4×4 Bloch matrix, row-major.
    pub bloch: [f64; 16],
    pub tau_ab: f64,
    /// `NaN` when the polarization of spin a is outside `(-1, 0)`.
    pub t_eff: f64,
    /// Solver failure for this cell, if any.
    pub error: Option<String>,
}

impl SweepRow {
    /// `<σ_az>` of spin a.
    pub fn k_az(&self) -> f64 {
        std::f64::consts::SQRT_2 * self.bloch[12]
    }
}

/// Steady state of one drive setting.
pub fn steady_cell(
    template: &TwoSpinParams,
    d: &DampingParams,
    delta: f64,
    omega1: f64,
    eval: &MeasureEvaluator,
) -> SweepRow {
    let p = template.with_drive(delta, omega1);
    let h = build_hamiltonian(&p);
    let row = |bloch, tau_ab, t_eff, error| SweepRow {
        delta,
        omega1,
        bloch,
        tau_ab,
        t_eff,
        error,
    };
    let rho = match two_spin_steady_state(&h, d) {
        Ok(r) => r,
        Err(e) => return row([f64::NAN; 16], f64::NAN, f64::NAN, Some(e.to_string())),
    };
    let b = crate::bases::observable_grid(2, 2)
        .expect("qubit grid")
        .bloch(&rho);
    let mut bloch = [0.0; 16];
    for (k, v) in bloch.iter_mut().enumerate() {
        *v = b.values[(k / 4, k % 4)];
    }
    let tau = eval.report(&rho).map(|r| r.tau_ab).unwrap_or(f64::NAN);
    let k_az = std::f64::consts::SQRT_2 * bloch[12];
    let t_eff = effective_temperature(k_az, p.omega_a).unwrap_or(f64::NAN);
    row(bloch, tau, t_eff, None)
}

/// Steady-state table over a drive grid, in grid order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub grid: SweepGrid,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn row(&self, i: usize, j: usize) -> &SweepRow {
        &self.rows[i * self.grid.omega1.n + j]
    }

    /// `(i, j)` of the cell with the largest `τ_ab`.
    pub fn argmax_tau(&self) -> (usize, usize) {
        let k = self
            .rows
            .iter()
            .enumerate()
            .filter(|(_, r)| r.tau_ab.is_finite())
            .max_by(|a, b| a.1.tau_ab.total_cmp(&b.1.tau_ab))
            .map(|(k, _)| k)
            .unwrap_or(0);
        (k / self.grid.omega1.n, k % self.grid.omega1.n)
    }
}

/// Linear (`Θ = 0`) steady states over the grid. Cells run in parallel;
/// solver failures are recorded in the row and the sweep continues.
pub fn run_sweep(
    template: &TwoSpinParams,
    d: &DampingParams,
    grid: &SweepGrid,
) -> Result<SweepTable> {
    template.validate()?;
    d.validate()?;
    grid.validate()?;
    let eval = MeasureEvaluator::new(Factorization::two_qubits())?;
    let rows = (0..grid.n_cells())
        .into_par_iter()
        .map(|k| {
            let (delta, omega1) = grid.cell(k);
            steady_cell(template, d, delta, omega1, &eval)
        })
        .collect();
    Ok(SweepTable { grid: *grid, rows })
}

/// Kind of long-time behavior of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttractorKind {
    FixedPoint,
    LimitCycle,
    Undetermined,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttractorVerdict {
    pub kind: AttractorKind,
    /// Largest post-transient peak-to-peak excursion over the components of `k_a`.
    pub amplitude: f64,
    pub period_estimate: Option<f64>,
}

pub const DEFAULT_TRANSIENT_FRACTION: f64 = 0.5;
pub const DEFAULT_AMP_THRESHOLD: f64 = 0.02;
/// Minimal post-transient window in units of `1/ω_a`.
pub const MIN_CLASSIFY_WINDOW: f64 = 50.0;

/// Classifies the tail of a trajectory from the spin a Bloch vector.
///
/// Fixed point: every component of `k_a` varies by less than
/// `amp_threshold` after the transient. Limit cycle: the excursion exceeds
/// the threshold and the autocorrelation of `k_a,z` has repeated peaks at
/// lags that agree to 10%.
pub fn classify_attractor(
    rec: &TrajectoryRecord,
    transient_fraction: f64,
    amp_threshold: f64,
) -> Result<AttractorVerdict> {
    let (Some(&t0), Some(&t1)) = (rec.times.first(), rec.times.last()) else {
        return Err(Error::RecordTooShort {
            have: 0.0,
            need: MIN_CLASSIFY_WINDOW,
        });
    };
    let t_start = t0 + transient_fraction * (t1 - t0);
    let window = t1 - t_start;
    if window < MIN_CLASSIFY_WINDOW * (1.0 - 1e-9) {
        return Err(Error::RecordTooShort {
            have: window,
            need: MIN_CLASSIFY_WINDOW,
        });
    }
    let first = rec.times.partition_point(|&t| t < t_start);
    let tail = &rec.k_a[first..];
    let amplitude = (0..3)
        .map(|c| {
            let (lo, hi) = tail.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), k| {
                (lo.min(k[c]), hi.max(k[c]))
            });
            hi - lo
        })
        .fold(0.0, f64::max);
    if amplitude < amp_threshold {
        return Ok(AttractorVerdict {
            kind: AttractorKind::FixedPoint,
            amplitude,
            period_estimate: None,
        });
    }
    let series: Vec<f64> = tail.iter().map(|k| k[2]).collect();
    let dt = (t1 - t_start) / (series.len().max(2) - 1) as f64;
    let period = autocorrelation_period(&series).map(|lag| lag * dt);
    Ok(AttractorVerdict {
        kind: if period.is_some() {
            AttractorKind::LimitCycle
        } else {
            AttractorKind::Undetermined
        },
        amplitude,
        period_estimate: period,
    })
}

/// Mean spacing (in samples) of the autocorrelation peaks, if at least two
/// peaks are found and all spacings agree with their mean to 10%.
fn autocorrelation_period(x: &[f64]) -> Option<f64> {
    let n = x.len();
    if n < 8 {
        return None;
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let y: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let var: f64 = y.iter().map(|v| v * v).sum();
    if var <= 0.0 {
        return None;
    }
    let max_lag = n / 2;
    let acf: Vec<f64> = (0..=max_lag)
        .map(|lag| {
            let s: f64 = y[..n - lag].iter().zip(&y[lag..]).map(|(a, b)| a * b).sum();
            s / var * n as f64 / (n - lag) as f64
        })
        .collect();
    let first_neg = acf.iter().position(|&v| v < 0.0)?;
    let mut peaks = Vec::new();
    for lag in first_neg.max(1)..max_lag {
        if acf[lag] > 0.3 && acf[lag] >= acf[lag - 1] && acf[lag] > acf[lag + 1] {
            peaks.push(refine_peak(&acf, lag));
        }
    }
    if peaks.len() < 2 {
        return None;
    }
    let mut spacings = vec![peaks[0]];
    spacings.extend(peaks.windows(2).map(|w| w[1] - w[0]));
    let mean_spacing = spacings.iter().sum::<f64>() / spacings.len() as f64;
    spacings
        .iter()
        .all(|s| (s - mean_spacing).abs() <= 0.1 * mean_spacing)
        .then_some(mean_spacing)
}

/// Parabolic interpolation of a discrete maximum.
fn refine_peak(y: &[f64], k: usize) -> f64 {
    let (a, b, c) = (y[k - 1], y[k], y[k + 1]);
    let denom = a - 2.0 * b + c;
    if denom.abs() < 1e-300 {
        return k as f64;
    }
    k as f64 + 0.5 * (a - c) / denom
}

/// Which engine a preset runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Engine {
    Sweep,
    Master,
    Sde,
}

/// Initial state rule of a time-domain preset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialState {
    /// Linear steady state of the same model.
    SteadyState,
    /// Dominant eigenvector of the linear steady state.
    SteadyStatePure,
}

/// Complete parameter bundle of a named experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPreset {
    pub name: String,
    pub engine: Engine,
    pub model: TwoSpinParams,
    pub damping: DampingParams,
    pub disentangle: DisentanglementSpec,
    pub integrator: IntegratorConfig,
    pub sweep: Option<SweepGrid>,
    pub initial: InitialState,
    pub n_traj: usize,
}

pub const PRESET_NAMES: [&str; 9] = [
    "fig1-sweep",
    "fig2-A1",
    "fig2-A2",
    "fig2-A3",
    "fig2-B1",
    "fig2-B2",
    "fig2-B3",
    "fig3-A",
    "fig3-B",
];

/// Drive points `(Δ, ω₁)` labelled 1, 2 and 3.
pub fn drive_point(label: u8) -> Option<(f64, f64)> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    match label {
        1 => Some((-s, s)),
        2 => Some((s, s)),
        3 => Some((0.35, 0.92)),
        _ => None,
    }
}

/// Damping of the steady-state sweep.
pub fn fig1_damping() -> DampingParams {
    let g = 1e-3;
    let g1a = 10.0 * g;
    let gpa = 1e-4 * g1a;
    DampingParams {
        a: SpinDamping {
            gamma1: g1a,
            gamma_phi: gpa,
            n0: 10.0,
        },
        b: SpinDamping {
            gamma1: 10.0 * g1a,
            gamma_phi: 10.0 * gpa,
            n0: 1e-4,
        },
    }
}

fn damping_with(g1a: f64, gpa_over_g1a: f64) -> DampingParams {
    let gpa = gpa_over_g1a * g1a;
    DampingParams {
        a: SpinDamping {
            gamma1: g1a,
            gamma_phi: gpa,
            n0: 5e-4,
        },
        b: SpinDamping {
            gamma1: 10.0 * g1a,
            gamma_phi: 10.0 * gpa,
            n0: 1e-5,
        },
    }
}

/// Damping of the master-equation runs.
pub fn fig2_damping() -> DampingParams {
    damping_with(0.1, 0.1)
}

/// Damping of the trajectory runs.
pub fn fig3_damping() -> DampingParams {
    damping_with(1e-3, 0.1)
}

pub fn experiment_preset(name: &str) -> Result<ExperimentPreset> {
    let base_model = TwoSpinParams {
        omega_a: 1.0,
        ..Default::default()
    };
    if name == "fig1-sweep" {
        return Ok(ExperimentPreset {
            name: name.into(),
            engine: Engine::Sweep,
            model: TwoSpinParams { g: 1e-3, ..base_model },
            damping: fig1_damping(),
            disentangle: DisentanglementSpec::none(),
            integrator: IntegratorConfig::default(),
            sweep: Some(SweepGrid::fig1()),
            initial: InitialState::SteadyState,
            n_traj: 0,
        });
    }
    if let Some(rest) = name.strip_prefix("fig2-") {
        let mut chars = rest.chars();
        let family = match chars.next() {
            Some('A') => ThetaFamily::CorrSuppress,
            Some('B') => ThetaFamily::BlochDerankA,
            _ => return Err(Error::UnknownPreset(name.into())),
        };
        let label = match (chars.next().and_then(|c| c.to_digit(10)), chars.next()) {
            (Some(d), None) => d as u8,
            _ => return Err(Error::UnknownPreset(name.into())),
        };
        let (delta, omega1) = drive_point(label).ok_or_else(|| Error::UnknownPreset(name.into()))?;
        return Ok(ExperimentPreset {
            name: name.into(),
            engine: Engine::Master,
            model: TwoSpinParams {
                g: 1.0,
                ..base_model
            }
            .with_drive(delta, omega1),
            damping: fig2_damping(),
            disentangle: DisentanglementSpec::new(family, 0.5),
            integrator: IntegratorConfig {
                dt: 5e-3,
                t_end: 200.0,
                method: Method::Rk4,
                sample_every: 0.05,
                ..Default::default()
            },
            sweep: None,
            initial: InitialState::SteadyState,
            n_traj: 0,
        });
    }
    let gamma_d = match name {
        "fig3-A" => 0.1,
        "fig3-B" => 0.5,
        _ => return Err(Error::UnknownPreset(name.into())),
    };
    let (delta, omega1) = drive_point(2).expect("point 2");
    Ok(ExperimentPreset {
        name: name.into(),
        engine: Engine::Sde,
        model: TwoSpinParams {
            g: 100.0,
            ..base_model
        }
        .with_drive(delta, omega1),
        damping: fig3_damping(),
        disentangle: DisentanglementSpec::new(ThetaFamily::CorrSuppress, gamma_d),
        integrator: IntegratorConfig {
            dt: 1e-4,
            t_end: 20.0,
            method: Method::EulerMaruyama,
            sample_every: 0.01,
            ..Default::default()
        },
        sweep: None,
        initial: InitialState::SteadyStatePure,
        n_traj: 1,
    })
}

impl ExperimentPreset {
    pub fn hamiltonian(&self) -> ComplexMatrix {
        build_hamiltonian(&self.model)
    }

    /// Linear steady state of the preset model.
    pub fn linear_steady_state(&self) -> Result<ComplexMatrix> {
        two_spin_steady_state(&self.hamiltonian(), &self.damping)
    }

    /// Dominant eigenvector of the linear steady state.
    pub fn pure_initial_state(&self) -> Result<StateVector> {
        dominant_eigenvector(&self.linear_steady_state()?)
    }
}

/// Normalized eigenvector of the largest eigenvalue, phase-fixed so that
/// its largest component is real and positive.
pub fn dominant_eigenvector(rho: &ComplexMatrix) -> Result<StateVector> {
    let eig = herm_eig(rho)?;
    let n = rho.nrows();
    let v: StateVector = eig.vectors.column(n - 1).into_owned();
    let (k, _) = v
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
        .expect("nonempty");
    let phase = v[k].conj() / v[k].norm();
    let v = v * phase;
    let norm = v.norm();
    Ok(v.unscale(norm))
}
