//! Time evolution: GKSL and modified master equations, Kraus-step
//! diagnostics, stochastic trajectories and the linear steady-state solver.
//!
//! Spin conventions: `|0>` is spin up (`σz = diag(1, -1)`), the lowering
//! operator is `σ- = |1><0|`, and the spin a factor comes first in every
//! tensor product.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bases::pauli;
use crate::entangle::{
    check_theta, DisentanglementSpec, MeasureEvaluator, MeasureReport, ThetaBuilder,
    ThetaOperator,
};
use crate::error::{Error, Result};
use crate::qcore::{
    c, herm_eig, hermitian_residue, hermitize, identity, kron, trace, ComplexMatrix,
    Factorization, QuantumState, StateVector, C64, DEFAULT_LOG_FLOOR,
};

/// Positivity violations below this abort master-equation runs.
pub const MIN_EIG_ABORT: f64 = -1e-6;

/// Relaxation parameters of one spin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpinDamping {
    /// Longitudinal rate `Γ₁`.
    pub gamma1: f64,
    /// Pure dephasing rate `Γ_φ`.
    pub gamma_phi: f64,
    /// Thermal occupation `n₀`.
    pub n0: f64,
}

impl SpinDamping {
    pub fn new(gamma1: f64, gamma_phi: f64, n0: f64) -> Result<Self> {
        let s = Self {
            gamma1,
            gamma_phi,
            n0,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn zero() -> Self {
        Self {
            gamma1: 0.0,
            gamma_phi: 0.0,
            n0: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("gamma1", self.gamma1),
            ("gamma_phi", self.gamma_phi),
            ("n0", self.n0),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be nonnegative and finite, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Thermal polarization `P_z0 = -1/(2n₀+1)`.
    pub fn p_z0(&self) -> f64 {
        -1.0 / (2.0 * self.n0 + 1.0)
    }

    /// `T₁ = 1/((2n₀+1) Γ₁)`
    pub fn t1(&self) -> f64 {
        -self.p_z0() / self.gamma1
    }

    /// `T₂ = 1/((2n₀+1)(Γ₁/2 + Γ_φ))`
    pub fn t2(&self) -> f64 {
        -self.p_z0() / (self.gamma1 / 2.0 + self.gamma_phi)
    }

    /// Inverse of ([`t1`](Self::t1), [`t2`](Self::t2), [`p_z0`](Self::p_z0)).
    pub fn from_relaxation(t1: f64, t2: f64, p_z0: f64) -> Result<Self> {
        if !(-1.0..0.0).contains(&p_z0) {
            return Err(Error::OutOfDomain {
                value: p_z0,
                reason: "P_z0 must lie in [-1, 0)",
            });
        }
        let gamma1 = -p_z0 / t1;
        let gamma_phi = -p_z0 / t2 - gamma1 / 2.0;
        Self::new(gamma1, gamma_phi, (-1.0 / p_z0 - 1.0) / 2.0)
    }

    /// Single-spin jump operators `√((n₀+1)Γ₁) σ-`, `√(n₀Γ₁) σ+`,
    /// `√((2n₀+1)Γ_φ/2) σz`. Zero-rate channels are omitted.
    pub fn jump_operators(&self) -> Vec<ComplexMatrix> {
        let [_, _, sz] = pauli();
        let n = self.n0;
        [
            ((n + 1.0) * self.gamma1, sigma_minus()),
            (n * self.gamma1, sigma_plus()),
            ((2.0 * n + 1.0) * self.gamma_phi / 2.0, sz),
        ]
        .into_iter()
        .filter(|(rate, _)| *rate > 0.0)
        .map(|(rate, op)| op.scale(rate.sqrt()))
        .collect()
    }
}

/// `σ- = |1><0|`
pub fn sigma_minus() -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(2, 2);
    m[(1, 0)] = c(1.0, 0.0);
    m
}

/// `σ+ = |0><1|`
pub fn sigma_plus() -> ComplexMatrix {
    sigma_minus().adjoint()
}

/// Damping of both spins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DampingParams {
    pub a: SpinDamping,
    pub b: SpinDamping,
}

impl DampingParams {
    pub fn none() -> Self {
        Self {
            a: SpinDamping::zero(),
            b: SpinDamping::zero(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.a.validate()?;
        self.b.validate()
    }

    /// Two-spin jump operators, spin a channels first.
    pub fn jump_operators(&self) -> Vec<ComplexMatrix> {
        let i2 = identity(2);
        let mut ops: Vec<ComplexMatrix> = self
            .a
            .jump_operators()
            .iter()
            .map(|x| kron(x, &i2))
            .collect();
        ops.extend(self.b.jump_operators().iter().map(|x| kron(&i2, x)));
        ops
    }

    /// Uncoupled thermal state `ρ_a ⊗ ρ_b` with `<σz> = P_z0` per spin.
    pub fn thermal_state(&self) -> ComplexMatrix {
        let single = |s: &SpinDamping| {
            let p = s.p_z0();
            ComplexMatrix::from_diagonal(&DVector::from_row_slice(&[
                c((1.0 + p) / 2.0, 0.0),
                c((1.0 - p) / 2.0, 0.0),
            ]))
        };
        kron(&single(&self.a), &single(&self.b))
    }
}

fn check_same_dim(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<()> {
    if a.nrows() != b.nrows() || a.ncols() != b.ncols() {
        return Err(Error::DimensionMismatch {
            expected: b.nrows(),
            found: a.nrows(),
        });
    }
    Ok(())
}

/// `X ρ X^H - ½ {X^H X, ρ}`
pub fn lindblad_dissipator(x: &ComplexMatrix, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
    check_same_dim(x, rho)?;
    let xdx = x.adjoint() * x;
    Ok(x * rho * x.adjoint() - (&xdx * rho + rho * &xdx).scale(0.5))
}

/// Sum of dissipators over a set of jump operators.
pub fn dissipator_sum(jumps: &[ComplexMatrix], rho: &ComplexMatrix) -> Result<ComplexMatrix> {
    let mut out = ComplexMatrix::zeros(rho.nrows(), rho.ncols());
    for x in jumps {
        out += lindblad_dissipator(x, rho)?;
    }
    Ok(out)
}

/// Damping superoperator of the two-spin system applied to `ρ`.
pub fn two_spin_lindblad(rho: &ComplexMatrix, d: &DampingParams) -> Result<ComplexMatrix> {
    if rho.nrows() != 4 || rho.ncols() != 4 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            found: rho.nrows(),
        });
    }
    dissipator_sum(&d.jump_operators(), rho)
}

/// `-i[H, ρ] + Σ D(L)`
pub fn gksl(
    rho: &ComplexMatrix,
    h: &ComplexMatrix,
    jumps: &[ComplexMatrix],
) -> Result<ComplexMatrix> {
    check_same_dim(h, rho)?;
    let i = c(0.0, 1.0);
    Ok((rho * h - h * rho) * i + dissipator_sum(jumps, rho)?)
}

/// Right-hand side of the modified master equation,
/// `i[ρ,H] - Θρ - ρΘ + 2<Θ>ρ/Trρ` plus the two-spin damping when given.
pub fn mme_rhs(
    state: &QuantumState,
    h: &ComplexMatrix,
    theta: Option<&ThetaOperator>,
    d: Option<&DampingParams>,
) -> Result<ComplexMatrix> {
    let rho = state.density();
    let jumps = d.map(|d| d.jump_operators()).unwrap_or_default();
    if let Some(t) = theta {
        check_same_dim(&t.matrix, &rho)?;
        check_theta(&t.matrix)?;
    }
    mme_rhs_matrix(&rho, h, theta.map(|t| &t.matrix), &jumps)
}

/// [`mme_rhs`] on raw matrices.
pub fn mme_rhs_matrix(
    rho: &ComplexMatrix,
    h: &ComplexMatrix,
    theta: Option<&ComplexMatrix>,
    jumps: &[ComplexMatrix],
) -> Result<ComplexMatrix> {
    let mut out = gksl(rho, h, jumps)?;
    if let Some(t) = theta {
        check_same_dim(t, rho)?;
        let t_rho = t * rho;
        let mean = trace(&t_rho).re / trace(rho).re;
        out -= &t_rho + rho * t;
        out += rho.scale(2.0 * mean);
    }
    Ok(out)
}

/// Fixed-step scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Rk4,
    EulerMaruyama,
}

/// Step size, duration and bookkeeping of a run. Times are in units of `1/ω_a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub t_end: f64,
    pub method: Method,
    pub seed: u64,
    pub renormalize_every_step: bool,
    pub log_floor: f64,
    /// Interval between recorded samples; rounded to a whole number of steps.
    pub sample_every: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_end: 200.0,
            method: Method::Rk4,
            seed: 0,
            renormalize_every_step: true,
            log_floor: DEFAULT_LOG_FLOOR,
            sample_every: 0.1,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !(self.t_end >= self.dt && self.t_end.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "t_end must be at least dt, got {}",
                self.t_end
            )));
        }
        if !(self.sample_every >= 0.0 && self.sample_every.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "sample_every must be nonnegative, got {}",
                self.sample_every
            )));
        }
        if !(self.log_floor > 0.0 && self.log_floor < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "log_floor must lie in (0, 1), got {}",
                self.log_floor
            )));
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt).round().max(1.0) as usize
    }

    /// Steps between samples (at least one).
    pub fn stride(&self) -> usize {
        ((self.sample_every / self.dt).round() as usize).max(1)
    }

    /// Number of recorded samples including `t = 0`.
    pub fn n_samples(&self) -> usize {
        self.n_steps() / self.stride() + 1
    }
}

/// Sampled observables of one run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub k_a: Vec<[f64; 3]>,
    pub k_b: Vec<[f64; 3]>,
    pub measures: Vec<MeasureReport>,
    pub trace_err: Vec<f64>,
    pub herm_err: Vec<f64>,
    pub min_eig: Vec<f64>,
}

impl TrajectoryRecord {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn max_trace_err(&self) -> f64 {
        self.trace_err.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_herm_err(&self) -> f64 {
        self.herm_err.iter().copied().fold(0.0, f64::max)
    }

    pub fn min_min_eig(&self) -> f64 {
        self.min_eig.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Accumulates samples of two-qubit states into a [`TrajectoryRecord`].
#[derive(Debug, Clone)]
pub struct Recorder {
    eval: MeasureEvaluator,
    pub record: TrajectoryRecord,
}

impl Recorder {
    pub fn new(factor: Factorization) -> Result<Self> {
        if factor != Factorization::two_qubits() {
            return Err(Error::InvalidDimension(
                "trajectory records are defined for two qubits".into(),
            ));
        }
        Ok(Self {
            eval: MeasureEvaluator::new(factor)?,
            record: TrajectoryRecord::default(),
        })
    }

    /// Appends a sample. `raw` is the state before any renormalization.
    pub fn push(&mut self, t: f64, rho: &ComplexMatrix, raw: &ComplexMatrix) -> Result<f64> {
        let eig = herm_eig(&hermitize(raw))?;
        let (k_a, k_b) = self.eval.bloch_vectors(rho)?;
        let r = &mut self.record;
        r.times.push(t);
        r.k_a.push(k_a);
        r.k_b.push(k_b);
        r.measures.push(self.eval.report(rho)?);
        r.trace_err.push((trace(raw).re - 1.0).abs());
        r.herm_err.push(hermitian_residue(raw));
        r.min_eig.push(eig.min());
        Ok(eig.min())
    }

    pub fn finish(self) -> TrajectoryRecord {
        self.record
    }
}

/// RK4 propagator of the modified master equation with Θ rebuilt from the
/// current stage state.
#[derive(Debug, Clone)]
pub struct MasterIntegrator {
    h: ComplexMatrix,
    jumps: Vec<ComplexMatrix>,
    builder: Option<ThetaBuilder>,
    dt: f64,
}

impl MasterIntegrator {
    pub fn new(
        h: &ComplexMatrix,
        jumps: Vec<ComplexMatrix>,
        builder: Option<ThetaBuilder>,
        dt: f64,
    ) -> Result<Self> {
        for j in &jumps {
            check_same_dim(j, h)?;
        }
        Ok(Self {
            h: h.clone(),
            jumps,
            builder,
            dt,
        })
    }

    pub fn rhs(&self, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        let theta = match &self.builder {
            Some(b) => b.build(rho)?,
            None => None,
        };
        mme_rhs_matrix(rho, &self.h, theta.as_ref().map(|t| &t.matrix), &self.jumps)
    }

    /// One classical RK4 step.
    pub fn step(&self, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        let dt = self.dt;
        let k1 = self.rhs(rho)?;
        let k2 = self.rhs(&hermitize(&(rho + k1.scale(dt / 2.0))))?;
        let k3 = self.rhs(&hermitize(&(rho + k2.scale(dt / 2.0))))?;
        let k4 = self.rhs(&hermitize(&(rho + k3.scale(dt))))?;
        Ok(rho + (k1 + k2.scale(2.0) + k3.scale(2.0) + k4).scale(dt / 6.0))
    }
}

/// Integrates the modified master equation from a mixed two-qubit state.
///
/// Aborts with [`Error::StateHealth`] as soon as the minimum eigenvalue of
/// ρ drops below [`MIN_EIG_ABORT`]; negative eigenvalues are never repaired.
pub fn integrate_master(
    initial: &QuantumState,
    h: &ComplexMatrix,
    spec: &DisentanglementSpec,
    d: &DampingParams,
    cfg: &IntegratorConfig,
) -> Result<TrajectoryRecord> {
    cfg.validate()?;
    if cfg.method != Method::Rk4 {
        return Err(Error::InvalidConfig(
            "master-equation runs use the rk4 method".into(),
        ));
    }
    if initial.is_pure() {
        return Err(Error::InvalidConfig(
            "master-equation runs start from a mixed state".into(),
        ));
    }
    let factor = initial.require_factor()?;
    check_same_dim(h, &initial.density())?;
    let builder = if spec.is_active() {
        Some(ThetaBuilder::new(*spec, factor, Some(h), cfg.log_floor)?)
    } else {
        spec.validate()?;
        None
    };
    let integ = MasterIntegrator::new(h, d.jump_operators(), builder, cfg.dt)?;
    let mut recorder = Recorder::new(factor)?;
    let mut rho = initial.density();
    recorder.push(0.0, &rho, &rho)?;
    let stride = cfg.stride();
    for n in 1..=cfg.n_steps() {
        let t = n as f64 * cfg.dt;
        let raw = integ.step(&rho)?;
        let health = || -> Result<(f64, f64, f64)> {
            let eig = herm_eig(&hermitize(&raw))?;
            Ok((eig.min(), (trace(&raw).re - 1.0).abs(), hermitian_residue(&raw)))
        };
        let (min_eig, trace_err, herm_err) = health()?;
        if min_eig < MIN_EIG_ABORT || !min_eig.is_finite() {
            return Err(Error::StateHealth {
                time: t,
                min_eig,
                trace_err,
                herm_err,
            });
        }
        rho = if cfg.renormalize_every_step {
            let h = hermitize(&raw);
            let tr = trace(&h).re;
            h.unscale(tr)
        } else {
            raw.clone()
        };
        if n % stride == 0 {
            recorder.push(t, &rho, &raw)?;
        }
    }
    Ok(recorder.finish())
}

/// Kraus pair `K₀ = √(2<Θ>τ) I`, `K₁ = I - (iH + Θ)τ`.
pub fn kraus_operators(
    rho: &ComplexMatrix,
    h: &ComplexMatrix,
    theta: &ThetaOperator,
    tau: f64,
) -> Result<(ComplexMatrix, ComplexMatrix)> {
    check_same_dim(h, rho)?;
    check_same_dim(&theta.matrix, rho)?;
    check_theta(&theta.matrix)?;
    let mean = (trace(&(&theta.matrix * rho)) / trace(rho)).re;
    if mean < -1e-12 {
        return Err(Error::NegativeThetaExpectation(mean));
    }
    let n = rho.nrows();
    let k0 = identity(n).scale((2.0 * mean.max(0.0) * tau).sqrt());
    let k1 = identity(n) - (h * c(0.0, 1.0) + &theta.matrix).scale(tau);
    Ok((k0, k1))
}

/// `|<K₀^H K₀ + K₁^H K₁> - 1|`, which is `O(τ²)`.
pub fn kraus_step_error(
    rho: &ComplexMatrix,
    h: &ComplexMatrix,
    theta: &ThetaOperator,
    tau: f64,
) -> Result<f64> {
    let (k0, k1) = kraus_operators(rho, h, theta, tau)?;
    let sum = k0.adjoint() * &k0 + k1.adjoint() * &k1;
    Ok(((trace(&(sum * rho)) / trace(rho)).re - 1.0).abs())
}

/// How the stochastic equation is unravelled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Unravelling {
    /// Norm-preserving diffusive form with noise `(V - <V>)ψ dξ`; its
    /// ensemble average follows the GKSL equation.
    #[default]
    Diffusive,
    /// Linear form `-½ΣV^H V ψ dt + Σ V ψ dξ` followed by renormalization.
    Linear,
}

/// Complex noise increment `√dt (g₁ + i g₂)/√2`.
pub fn noise_increment<R: Rng + ?Sized>(rng: &mut R, dt: f64) -> C64 {
    let g1: f64 = rng.sample(StandardNormal);
    let g2: f64 = rng.sample(StandardNormal);
    C64::new(g1, g2) * (dt / 2.0).sqrt()
}

/// Everything but the Hamiltonian part of one Euler–Maruyama step.
fn stochastic_increment<R: Rng + ?Sized>(
    psi: &StateVector,
    jumps: &[ComplexMatrix],
    theta: Option<&ThetaOperator>,
    dt: f64,
    unravelling: Unravelling,
    rng: &mut R,
) -> StateVector {
    let mut inc = StateVector::zeros(psi.len());
    for v in jumps {
        let v_psi = v * psi;
        let vdv_psi = v.adjoint() * &v_psi;
        let xi = noise_increment(rng, dt);
        match unravelling {
            Unravelling::Linear => {
                inc -= vdv_psi.scale(0.5 * dt);
                inc += &v_psi * xi;
            }
            Unravelling::Diffusive => {
                let m = psi.dotc(&v_psi);
                inc -= vdv_psi.scale(0.5 * dt);
                inc += &v_psi * (m.conj() * dt);
                inc -= psi.scale(0.5 * m.norm_sqr() * dt);
                inc += (&v_psi - psi * m) * xi;
            }
        }
    }
    if let Some(t) = theta {
        inc += t.schrodinger_drift(psi).scale(dt);
    }
    inc
}

/// One Euler–Maruyama step of the (modified) stochastic Schrödinger
/// equation with drift `-iH - ½ΣV^H V - (Θ - <Θ>)` and noise `Σ ξ V ψ`,
/// renormalized to unit norm. Uses the [`Unravelling::Linear`] form.
pub fn sle_step<R: Rng + ?Sized>(
    psi: &StateVector,
    h: &ComplexMatrix,
    jumps: &[ComplexMatrix],
    theta: Option<&ThetaOperator>,
    dt: f64,
    rng: &mut R,
) -> StateVector {
    sle_step_with(psi, h, jumps, theta, dt, Unravelling::Linear, rng)
}

/// [`sle_step`] with a chosen unravelling.
pub fn sle_step_with<R: Rng + ?Sized>(
    psi: &StateVector,
    h: &ComplexMatrix,
    jumps: &[ComplexMatrix],
    theta: Option<&ThetaOperator>,
    dt: f64,
    unravelling: Unravelling,
    rng: &mut R,
) -> StateVector {
    let mut next = psi - (h * psi) * c(0.0, dt);
    next += stochastic_increment(psi, jumps, theta, dt, unravelling, rng);
    let norm = next.norm();
    next.unscale(norm)
}

/// `exp(-i H dt)` for Hermitian `H`.
pub fn unitary_propagator(h: &ComplexMatrix, dt: f64) -> Result<ComplexMatrix> {
    let eig = herm_eig(h)?;
    let mut scaled = eig.vectors.clone();
    for (j, &lam) in eig.values.iter().enumerate() {
        let phase = C64::from_polar(1.0, -lam * dt);
        for i in 0..scaled.nrows() {
            scaled[(i, j)] *= phase;
        }
    }
    Ok(scaled * eig.vectors.adjoint())
}

/// Operators and options shared by all trajectories of an ensemble.
///
/// Each step applies the exact unitary `exp(-iH dt)` followed by an
/// Euler–Maruyama increment of the damping, noise and Θ terms. Splitting
/// off the Hamiltonian keeps the scheme accurate when `|H| dt` is not small
/// compared to the damping rates (strong coupling).
#[derive(Debug, Clone)]
pub struct SleModel {
    pub h: ComplexMatrix,
    pub jumps: Vec<ComplexMatrix>,
    pub builder: Option<ThetaBuilder>,
    pub unravelling: Unravelling,
}

impl SleModel {
    pub fn new(
        h: &ComplexMatrix,
        d: &DampingParams,
        spec: &DisentanglementSpec,
        factor: Factorization,
        log_floor: f64,
    ) -> Result<Self> {
        let builder = if spec.is_active() {
            Some(ThetaBuilder::new(*spec, factor, Some(h), log_floor)?)
        } else {
            spec.validate()?;
            None
        };
        let jumps = d.jump_operators();
        for j in &jumps {
            check_same_dim(j, h)?;
        }
        Ok(Self {
            h: h.clone(),
            jumps,
            builder,
            unravelling: Unravelling::Diffusive,
        })
    }

    fn step<R: Rng + ?Sized>(
        &self,
        u: &ComplexMatrix,
        psi: &StateVector,
        dt: f64,
        rng: &mut R,
    ) -> Result<StateVector> {
        let theta = match &self.builder {
            Some(b) => b.build_pure(psi)?,
            None => None,
        };
        let mut next = u * psi;
        next += stochastic_increment(psi, &self.jumps, theta.as_ref(), dt, self.unravelling, rng);
        let norm = next.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::NotNormalized(norm));
        }
        Ok(next.unscale(norm))
    }
}

/// Ensemble output: the mean density matrix at each sample time and the
/// full records of the first `keep_records` trajectories.
#[derive(Debug, Clone)]
pub struct SleEnsemble {
    pub times: Vec<f64>,
    pub mean_rho: Vec<ComplexMatrix>,
    pub records: Vec<TrajectoryRecord>,
}

impl SleEnsemble {
    /// `(k_a, k_b)` of the ensemble-mean state at each sample.
    pub fn mean_bloch(&self) -> Result<Vec<([f64; 3], [f64; 3])>> {
        let eval = MeasureEvaluator::new(Factorization::two_qubits())?;
        self.mean_rho.iter().map(|r| eval.bloch_vectors(r)).collect()
    }
}

/// Deterministic RNG of trajectory `index` under `seed`.
pub fn trajectory_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

const ENSEMBLE_CHUNK: usize = 32;

/// Runs `n_traj` independent trajectories from `psi0`.
///
/// Trajectories are executed in parallel in fixed-size chunks and summed in
/// index order, so the output does not depend on the thread count.
pub fn integrate_sle_ensemble(
    psi0: &StateVector,
    model: &SleModel,
    cfg: &IntegratorConfig,
    n_traj: usize,
    keep_records: usize,
) -> Result<SleEnsemble> {
    cfg.validate()?;
    if n_traj == 0 {
        return Err(Error::InvalidConfig("n_traj must be at least 1".into()));
    }
    if cfg.method != Method::EulerMaruyama {
        return Err(Error::InvalidConfig(
            "trajectory runs use the euler-maruyama method".into(),
        ));
    }
    let norm = psi0.norm();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::NotNormalized(norm - 1.0));
    }
    check_same_dim(&model.h, &ComplexMatrix::zeros(psi0.len(), psi0.len()))?;
    let u = unitary_propagator(&model.h, cfg.dt)?;
    let n_samples = cfg.n_samples();
    let stride = cfg.stride();
    let times: Vec<f64> = (0..n_samples)
        .map(|k| (k * stride) as f64 * cfg.dt)
        .collect();
    let dim = psi0.len();
    let mut sum = vec![ComplexMatrix::zeros(dim, dim); n_samples];
    let mut records = Vec::new();

    let run_one = |index: usize| -> Result<(Vec<ComplexMatrix>, Option<TrajectoryRecord>)> {
        let mut rng = trajectory_rng(cfg.seed, index as u64);
        let keep = index < keep_records;
        let mut recorder = if keep {
            Some(Recorder::new(Factorization::two_qubits())?)
        } else {
            None
        };
        let mut samples = Vec::with_capacity(n_samples);
        let mut psi = psi0.clone();
        let mut record = |t: f64, psi: &StateVector, samples: &mut Vec<ComplexMatrix>| {
            let rho = psi * psi.adjoint();
            if let Some(r) = recorder.as_mut() {
                r.push(t, &rho, &rho)?;
            }
            samples.push(rho);
            Ok::<(), Error>(())
        };
        record(0.0, &psi, &mut samples)?;
        for n in 1..=cfg.n_steps() {
            psi = model.step(&u, &psi, cfg.dt, &mut rng)?;
            if n % stride == 0 {
                record(n as f64 * cfg.dt, &psi, &mut samples)?;
            }
        }
        Ok((samples, recorder.map(|r| r.finish())))
    };

    let indices: Vec<usize> = (0..n_traj).collect();
    for chunk in indices.chunks(ENSEMBLE_CHUNK) {
        let results: Vec<_> = chunk
            .par_iter()
            .map(|&i| {
                run_one(i).map_err(|e| Error::Trajectory {
                    index: i,
                    source: Box::new(e),
                })
            })
            .collect();
        for res in results {
            let (samples, rec) = res?;
            for (acc, s) in sum.iter_mut().zip(samples.iter()) {
                *acc += s;
            }
            if let Some(r) = rec {
                records.push(r);
            }
        }
    }
    let mean_rho = sum.into_iter().map(|m| m.unscale(n_traj as f64)).collect();
    Ok(SleEnsemble {
        times,
        mean_rho,
        records,
    })
}

/// Column-stacking Liouvillian of `-i[H, ρ] + Σ D(L)`.
pub fn liouvillian(h: &ComplexMatrix, jumps: &[ComplexMatrix]) -> ComplexMatrix {
    let n = h.nrows();
    let id = identity(n);
    let i = c(0.0, 1.0);
    let mut l = (kron(&id, h) - kron(&h.transpose(), &id)) * (-i);
    for x in jumps {
        let xdx = x.adjoint() * x;
        l += kron(&x.conjugate(), x);
        l -= (kron(&id, &xdx) + kron(&xdx.transpose(), &id)).scale(0.5);
    }
    l
}

/// Unique steady state of the linear GKSL equation.
///
/// The Liouvillian null space is found from its singular values; a null
/// space of dimension above one is reported as
/// [`Error::DegenerateSteadyState`].
pub fn steady_state(h: &ComplexMatrix, jumps: &[ComplexMatrix]) -> Result<ComplexMatrix> {
    let n = h.nrows();
    for j in jumps {
        check_same_dim(j, h)?;
    }
    let l = liouvillian(h, jumps);
    let scale = l.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300);
    let svd = l.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let tol = 1e-11 * scale;
    let null: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&k| svd.singular_values[k] <= tol)
        .collect();
    let k = match null.len() {
        0 => svd
            .singular_values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(k, _)| k)
            .expect("nonempty"),
        1 => null[0],
        m => return Err(Error::DegenerateSteadyState(m)),
    };
    // Rows of V^H span the right singular vectors; conjugate to get v.
    let v: Vec<C64> = (0..n * n).map(|j| v_t[(k, j)].conj()).collect();
    let rho = DMatrix::from_column_slice(n, n, &v);
    let tr = trace(&rho);
    let rho = hermitize(&rho.map(|z| z / tr));
    let resid = gksl(&rho, h, jumps)?;
    let resid_norm = resid.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if resid_norm > 1e-10 * scale.max(1.0) {
        return Err(Error::DegenerateSteadyState(0));
    }
    Ok(rho)
}

/// Steady state of a two-spin Hamiltonian with damping.
pub fn two_spin_steady_state(h: &ComplexMatrix, d: &DampingParams) -> Result<ComplexMatrix> {
    steady_state(h, &d.jump_operators())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entangle::{correlation_operator, ThetaFamily};
    use approx::assert_abs_diff_eq;

    fn ket(bits: &[f64]) -> StateVector {
        StateVector::from_iterator(bits.len(), bits.iter().map(|&x| c(x, 0.0)))
    }

    fn max_norm(m: &ComplexMatrix) -> f64 {
        m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn relaxation_round_trip() {
        let s = SpinDamping::new(0.3, 0.07, 2.5).unwrap();
        assert_abs_diff_eq!(1.0 / s.t1(), -s.gamma1 / s.p_z0(), epsilon = 1e-14);
        assert_abs_diff_eq!(-1.0 / s.p_z0(), 2.0 * s.n0 + 1.0, epsilon = 1e-14);
        let back = SpinDamping::from_relaxation(s.t1(), s.t2(), s.p_z0()).unwrap();
        assert_abs_diff_eq!(back.gamma1, s.gamma1, epsilon = 1e-12);
        assert_abs_diff_eq!(back.gamma_phi, s.gamma_phi, epsilon = 1e-12);
        assert_abs_diff_eq!(back.n0, s.n0, epsilon = 1e-12);
        assert!(SpinDamping::new(-1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn dissipator_examples() {
        let rho = ket(&[0.0, 1.0]) * ket(&[0.0, 1.0]).adjoint();
        assert!(max_norm(&lindblad_dissipator(&identity(2), &rho).unwrap()) < 1e-15);
        // X = |0><1| moves population from |1> to |0>.
        let d = lindblad_dissipator(&sigma_plus(), &rho).unwrap();
        assert_abs_diff_eq!(d[(0, 0)].re, 1.0);
        assert_abs_diff_eq!(d[(1, 1)].re, -1.0);
        // σ- = |1><0| decays spin up.
        let up = ket(&[1.0, 0.0]) * ket(&[1.0, 0.0]).adjoint();
        let d = lindblad_dissipator(&sigma_minus(), &up).unwrap();
        assert_abs_diff_eq!(d[(0, 0)].re, -1.0);
        assert_abs_diff_eq!(d[(1, 1)].re, 1.0);
        assert!(lindblad_dissipator(&identity(3), &rho).is_err());
    }

    #[test]
    fn thermal_state_is_stationary() {
        let d = DampingParams {
            a: SpinDamping::new(0.2, 0.05, 1.5).unwrap(),
            b: SpinDamping::new(1.0, 0.3, 0.01).unwrap(),
        };
        let out = two_spin_lindblad(&d.thermal_state(), &d).unwrap();
        assert!(max_norm(&out) < 1e-12);
    }

    #[test]
    fn dephasing_keeps_populations() {
        let d = DampingParams {
            a: SpinDamping::new(0.0, 0.4, 0.3).unwrap(),
            b: SpinDamping::new(0.0, 0.2, 0.0).unwrap(),
        };
        let v = ket(&[0.5, 0.5, 0.5, 0.5]);
        let out = two_spin_lindblad(&(&v * v.adjoint()), &d).unwrap();
        for i in 0..4 {
            assert_abs_diff_eq!(out[(i, i)].norm(), 0.0, epsilon = 1e-15);
        }
        assert!(out[(0, 1)].re < 0.0);
    }

    #[test]
    fn identity_theta_is_inert() {
        let v = ket(&[0.6, 0.0, 0.0, 0.8]);
        let rho = &v * v.adjoint();
        let h = kron(&pauli()[0], &pauli()[2]);
        let plain = mme_rhs_matrix(&rho, &h, None, &[]).unwrap();
        let with = mme_rhs_matrix(&rho, &h, Some(&identity(4).scale(2.7)), &[]).unwrap();
        assert!(max_norm(&(plain - with)) < 1e-14);
    }

    #[test]
    fn kraus_examples() {
        let v = ket(&[0.6, 0.0, 0.0, 0.8]);
        let rho = &v * v.adjoint();
        let h = kron(&pauli()[0], &identity(2));
        let zero = ThetaOperator {
            matrix: ComplexMatrix::zeros(4, 4),
            family: ThetaFamily::CorrSuppress,
            rate: 0.0,
        };
        let e = kraus_step_error(&rho, &ComplexMatrix::zeros(4, 4), &zero, 0.01).unwrap();
        assert!(e < 1e-15);
        let st = QuantumState::two_qubit_pure([c(0.6, 0.), c(0., 0.), c(0., 0.), c(0.8, 0.)])
            .unwrap();
        let theta = correlation_operator(&st).unwrap();
        let e1 = kraus_step_error(&rho, &h, &theta, 1e-2).unwrap();
        let e2 = kraus_step_error(&rho, &h, &theta, 5e-3).unwrap();
        assert_abs_diff_eq!(e1 / e2, 4.0, epsilon = 1e-6);
        let (k0, k1) = kraus_operators(&rho, &ComplexMatrix::zeros(4, 4), &theta, 0.1).unwrap();
        assert!(hermitian_residue(&k0) < 1e-15 && hermitian_residue(&k1) < 1e-15);
        let neg = ThetaOperator {
            matrix: identity(4).scale(-1.0),
            family: ThetaFamily::CorrSuppress,
            rate: 1.0,
        };
        assert!(matches!(
            kraus_step_error(&rho, &h, &neg, 0.1),
            Err(Error::NegativeThetaExpectation(_))
        ));
    }

    #[test]
    fn steady_state_thermal_without_drive() {
        let d = DampingParams {
            a: SpinDamping::new(0.1, 0.01, 0.5).unwrap(),
            b: SpinDamping::new(1.0, 0.1, 0.0).unwrap(),
        };
        let h = kron(&pauli()[2], &identity(2)).scale(0.5);
        let rho = two_spin_steady_state(&h, &d).unwrap();
        assert!(max_norm(&(rho - d.thermal_state())) < 1e-12);
    }

    #[test]
    fn degenerate_steady_state_reported() {
        let h = pauli()[2].clone();
        assert!(matches!(
            steady_state(&h, &[]),
            Err(Error::DegenerateSteadyState(_))
        ));
    }

    #[test]
    fn unitary_sle_step_preserves_norm() {
        let h = kron(&pauli()[0], &pauli()[2]).scale(0.5);
        let psi = ket(&[0.6, 0.0, 0.0, 0.8]);
        let mut rng = trajectory_rng(1, 0);
        let dt = 1e-3;
        let raw = &psi - (&h * &psi) * c(0.0, dt);
        assert!((raw.norm_squared() - 1.0).abs() < 2.0 * dt * dt);
        let next = sle_step(&psi, &h, &[], None, dt, &mut rng);
        assert_abs_diff_eq!(next.norm(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn noise_moments() {
        let mut rng = trajectory_rng(7, 3);
        let dt = 0.01;
        let n = 100_000;
        let draws: Vec<C64> = (0..n).map(|_| noise_increment(&mut rng, dt)).collect();
        let mean_re = draws.iter().map(|z| z.re).sum::<f64>() / n as f64;
        let var_re = draws.iter().map(|z| z.re * z.re).sum::<f64>() / n as f64;
        let sigma = (dt / 2.0 / n as f64).sqrt();
        assert!(mean_re.abs() < 3.0 * sigma);
        assert!((var_re / (dt / 2.0) - 1.0).abs() < 0.05);
        let cross = draws.iter().map(|z| z * z).sum::<C64>() / n as f64;
        assert!(cross.norm() < 5.0 * dt / (n as f64).sqrt());
    }

    #[test]
    fn config_validation() {
        let mut cfg = IntegratorConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.dt = 0.0;
        assert!(cfg.validate().is_err());
        let cfg = IntegratorConfig {
            dt: 0.1,
            t_end: 0.05,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = IntegratorConfig {
            dt: 0.01,
            t_end: 1.0,
            sample_every: 0.1,
            ..Default::default()
        };
        assert_eq!(cfg.n_steps(), 100);
        assert_eq!(cfg.stride(), 10);
        assert_eq!(cfg.n_samples(), 11);
    }
}
