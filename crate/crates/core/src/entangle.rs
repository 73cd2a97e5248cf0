//! Entanglement measures and the state-dependent disentanglement operators Θ.
//!
//! Two kinds of Θ are provided. Deranking operators (`Q_S` from the state
//! matrix, `Q_a`/`Q_b` from the Bloch matrix) have an expectation equal to an
//! entropy-like entanglement measure, so the nonlinear term pushes the
//! corresponding Gram matrix toward rank one. The correlation-suppression
//! operator `Q_ab` has the (scaled) sum of squared covariances `τ_ab` as its
//! expectation. A thermalization operator built from the Helmholtz free
//! energy is included for comparison.
//!
//! Every builder takes the *current* state; operators must be rebuilt
//! whenever the state changes.
//!
//! Caveat: for mixed states the nonlinear master equation is not a function
//! of ρ alone in general (different ensembles with the same ρ evolve
//! differently), so master-equation and trajectory results need not agree
//! when a Θ term is active.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::bases::{gell_mann, observable_grid, weyl_ops, weyl_s_matrix, ObservableGrid};
use crate::error::{Error, Result};
use crate::qcore::{
    entropy_functional, entropy_of_spectrum, herm_eig, hermitian_residue, hermitize, identity,
    kron, kron_all, max_abs, partial_trace_matrix, spectral_log, trace, trace_product,
    ComplexMatrix, Factorization, QuantumState, StateKind, StateVector, Subsystem, C64,
};

/// The `D_a × D_b` reshape of a bipartite pure state, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct StateMatrix(pub ComplexMatrix);

pub fn state_matrix(psi: &StateVector, f: Factorization) -> Result<StateMatrix> {
    f.require_bipartite()?;
    if psi.len() != f.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            found: psi.len(),
        });
    }
    Ok(StateMatrix(ComplexMatrix::from_fn(f.d_a, f.d_b, |r, col| {
        psi[r * f.d_b + col]
    })))
}

/// `G = M M^H`
pub fn g_matrix(m: &StateMatrix) -> ComplexMatrix {
    &m.0 * m.0.adjoint()
}

/// `G` for an arbitrary state: the `μ`-sandwich of ρ, which reduces to the
/// partial trace over b. Equals `M M^H` for pure states.
pub fn g_matrix_of_state(state: &QuantumState) -> Result<ComplexMatrix> {
    let f = state.require_factor()?;
    f.require_bipartite()?;
    Ok(match state.kind() {
        StateKind::Pure(psi) => g_matrix(&state_matrix(psi, f)?),
        StateKind::Mixed(rho) => partial_trace_matrix(rho, f, Subsystem::A),
    })
}

/// State-matrix entanglement `K = -Tr(G log G)` in nats.
pub fn entanglement_k(state: &QuantumState) -> Result<f64> {
    entropy_functional(&g_matrix_of_state(state)?)
}

/// `-Tr(X log X)` without normalizing by the trace, `0 log 0 = 0`.
fn unnormalized_entropy(x: &DMatrix<f64>) -> Result<f64> {
    let eig = herm_eig(&x.map(|v| C64::new(v, 0.0)))?;
    if eig.min() < -1e-8 {
        return Err(Error::NotPsd { min_eig: eig.min() });
    }
    Ok(eig
        .values
        .iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| -v * v.ln())
        .sum())
}

fn real_log(x: &DMatrix<f64>, floor: f64) -> Result<DMatrix<f64>> {
    Ok(spectral_log(&x.map(|v| C64::new(v, 0.0)), floor)?.map(|z| z.re))
}

/// Bloch-matrix entanglement `L = -Tr(α log α)`, `α = B B^T / 2`.
pub fn entanglement_l(state: &QuantumState) -> Result<f64> {
    let f = state.require_factor()?;
    f.require_bipartite()?;
    let grid = observable_grid(f.d_a, f.d_b)?;
    unnormalized_entropy(&grid.bloch(&state.density()).alpha())
}

/// `δ = 4 |ψ1 ψ4 - ψ2 ψ3|²` for a two-qubit pure state.
pub fn delta_measure(psi: &StateVector) -> Result<f64> {
    if psi.len() != 4 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            found: psi.len(),
        });
    }
    Ok(4.0 * (psi[0] * psi[3] - psi[1] * psi[2]).norm_sqr())
}

/// Which Θ family drives the nonlinear term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ThetaFamily {
    #[default]
    None,
    CorrSuppress,
    BlochDerankA,
    BlochDerankB,
    StateMatrixDerank,
    Thermalization,
}

impl ThetaFamily {
    pub const ALL: [ThetaFamily; 6] = [
        ThetaFamily::None,
        ThetaFamily::CorrSuppress,
        ThetaFamily::BlochDerankA,
        ThetaFamily::BlochDerankB,
        ThetaFamily::StateMatrixDerank,
        ThetaFamily::Thermalization,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ThetaFamily::None => "none",
            ThetaFamily::CorrSuppress => "corr-suppress",
            ThetaFamily::BlochDerankA => "bloch-derank-a",
            ThetaFamily::BlochDerankB => "bloch-derank-b",
            ThetaFamily::StateMatrixDerank => "state-matrix-derank",
            ThetaFamily::Thermalization => "thermalization",
        }
    }
}

/// A state-dependent Hermitian Θ, already multiplied by its rate.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaOperator {
    pub matrix: ComplexMatrix,
    pub family: ThetaFamily,
    pub rate: f64,
}

impl ThetaOperator {
    fn new(matrix: ComplexMatrix, family: ThetaFamily, rate: f64) -> Self {
        Self {
            matrix: hermitize(&matrix),
            family,
            rate,
        }
    }

    /// Same operator with its rate replaced.
    pub fn with_rate(&self, rate: f64) -> Self {
        let scale = if self.rate == 0.0 { 0.0 } else { rate / self.rate };
        Self {
            matrix: self.matrix.scale(scale),
            family: self.family,
            rate,
        }
    }

    /// `-(Θ - <Θ>)|ψ>`, the nonlinear part of the modified Schrödinger drift.
    pub fn schrodinger_drift(&self, psi: &StateVector) -> StateVector {
        let t_psi = &self.matrix * psi;
        let mean = psi.dotc(&t_psi) / psi.norm_squared();
        -(t_psi - psi * mean)
    }
}

/// Rates of the nonlinear term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisentanglementSpec {
    pub family: ThetaFamily,
    /// Disentanglement rate `γ_D` (units of ω_a).
    #[serde(default)]
    pub gamma_d: f64,
    /// Thermalization rate `γ_H`.
    #[serde(default)]
    pub gamma_h: f64,
    /// Inverse temperature used by the thermalization family.
    #[serde(default = "default_beta")]
    pub beta: f64,
}

fn default_beta() -> f64 {
    1.0
}

impl Default for DisentanglementSpec {
    fn default() -> Self {
        Self::none()
    }
}

impl DisentanglementSpec {
    pub fn none() -> Self {
        Self {
            family: ThetaFamily::None,
            gamma_d: 0.0,
            gamma_h: 0.0,
            beta: 1.0,
        }
    }

    pub fn new(family: ThetaFamily, gamma_d: f64) -> Self {
        Self {
            family,
            gamma_d: if family == ThetaFamily::None { 0.0 } else { gamma_d },
            ..Self::none()
        }
    }

    pub fn thermalization(gamma_h: f64, beta: f64) -> Self {
        Self {
            family: ThetaFamily::Thermalization,
            gamma_d: 0.0,
            gamma_h,
            beta,
        }
    }

    pub fn is_active(&self) -> bool {
        match self.family {
            ThetaFamily::None => false,
            ThetaFamily::Thermalization => self.gamma_h != 0.0,
            _ => self.gamma_d != 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("gamma_d", self.gamma_d), ("gamma_h", self.gamma_h)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be a nonnegative finite rate, got {v}"
                )));
            }
        }
        if self.family == ThetaFamily::None && self.gamma_d != 0.0 {
            return Err(Error::InvalidConfig(
                "family 'none' requires gamma_d = 0".into(),
            ));
        }
        if self.family == ThetaFamily::Thermalization && !(self.beta > 0.0 && self.beta.is_finite())
        {
            return Err(Error::InvalidConfig(format!(
                "beta must be positive, got {}",
                self.beta
            )));
        }
        Ok(())
    }
}

/// Precomputed operator sets for the correlation-suppression operator.
#[derive(Debug, Clone)]
struct CorrelationBasis {
    /// `λ_a ⊗ I_b ⊗ I_c`
    local_a: Vec<ComplexMatrix>,
    /// `I_a ⊗ λ_b ⊗ I_c`
    local_b: Vec<ComplexMatrix>,
    /// `λ_a ⊗ λ_b ⊗ I_c`, row-major in `(a, b)`
    joint: Vec<ComplexMatrix>,
    eta: f64,
    dim: usize,
}

impl CorrelationBasis {
    fn new(f: Factorization) -> Result<Self> {
        let ga = gell_mann(f.d_a)?.matrices;
        let gb = gell_mann(f.d_b)?.matrices;
        let (ia, ib, ic) = (identity(f.d_a), identity(f.d_b), identity(f.d_c));
        let local_a = ga.iter().map(|x| kron_all(&[x, &ib, &ic])).collect();
        let local_b = gb.iter().map(|y| kron_all(&[&ia, y, &ic])).collect();
        let joint = ga
            .iter()
            .flat_map(|x| gb.iter().map(|y| kron_all(&[x, y, &ic])).collect::<Vec<_>>())
            .collect();
        Ok(Self {
            local_a,
            local_b,
            joint,
            eta: correlation_eta(f.d_a, f.d_b),
            dim: f.dim(),
        })
    }

    /// Covariance matrix `<C_{a,b}> = <λ_a λ_b> - <λ_a><λ_b>` and local means.
    fn covariances(&self, rho: &ComplexMatrix) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let mean_a: Vec<f64> = self
            .local_a
            .iter()
            .map(|o| trace_product(rho, o).re)
            .collect();
        let mean_b: Vec<f64> = self
            .local_b
            .iter()
            .map(|o| trace_product(rho, o).re)
            .collect();
        let nb = mean_b.len();
        let cov = self
            .joint
            .iter()
            .enumerate()
            .map(|(k, o)| trace_product(rho, o).re - mean_a[k / nb] * mean_b[k % nb])
            .collect();
        (cov, mean_a, mean_b)
    }

    fn tau(&self, rho: &ComplexMatrix) -> f64 {
        let (cov, _, _) = self.covariances(rho);
        self.eta * cov.iter().map(|c| c * c).sum::<f64>()
    }

    fn operator(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        let (cov, mean_a, mean_b) = self.covariances(rho);
        let nb = mean_b.len();
        let mut out = ComplexMatrix::zeros(self.dim, self.dim);
        let mut scalar = 0.0;
        for (k, o) in self.joint.iter().enumerate() {
            let w = cov[k];
            if w != 0.0 {
                out += o.scale(w);
                scalar += w * mean_a[k / nb] * mean_b[k % nb];
            }
        }
        for i in 0..self.dim {
            out[(i, i)] -= C64::new(scalar, 0.0);
        }
        out.scale(self.eta)
    }
}

/// Normalization `η_ab` making `τ_ab = 1` on a maximally entangled state:
/// `D² / (4 (D² - 1))` with `D = min(D_a, D_b)`, i.e. `1/3` for two qubits.
pub fn correlation_eta(d_a: usize, d_b: usize) -> f64 {
    let d = d_a.min(d_b) as f64;
    d * d / (4.0 * (d * d - 1.0))
}

/// Correlation-suppression operator `η Tr(C^T <C>)` (rate 1).
pub fn correlation_operator(state: &QuantumState) -> Result<ThetaOperator> {
    let basis = CorrelationBasis::new(state.require_factor()?)?;
    Ok(ThetaOperator::new(
        basis.operator(&state.density()),
        ThetaFamily::CorrSuppress,
        1.0,
    ))
}

/// `τ_ab = <Q_ab>`, the scaled sum of squared covariances.
pub fn tau_ab(state: &QuantumState) -> Result<f64> {
    let basis = CorrelationBasis::new(state.require_factor()?)?;
    Ok(basis.tau(&state.density()))
}

/// `Q_S = -log(G) ⊗ I_b` (rate 1), whose expectation is `K`.
pub fn q_s_operator(state: &QuantumState, floor: f64) -> Result<ThetaOperator> {
    let f = state.require_factor()?;
    f.require_bipartite()?;
    let g = g_matrix_of_state(state)?;
    Ok(ThetaOperator::new(
        q_s_from_g(&g, f, floor)?,
        ThetaFamily::StateMatrixDerank,
        1.0,
    ))
}

fn q_s_from_g(g: &ComplexMatrix, f: Factorization, floor: f64) -> Result<ComplexMatrix> {
    let log_g = spectral_log(g, floor)?;
    Ok(-kron(&log_g, &identity(f.d_b)))
}

/// Bloch-deranking operators `(Q_a, Q_b)` (rate 1); both have expectation `L`.
pub fn q_bloch_operators(
    state: &QuantumState,
    floor: f64,
) -> Result<(ThetaOperator, ThetaOperator)> {
    let f = state.require_factor()?;
    f.require_bipartite()?;
    let grid = observable_grid(f.d_a, f.d_b)?;
    let rho = state.density();
    Ok((
        ThetaOperator::new(q_a_matrix(&grid, &rho, floor)?, ThetaFamily::BlochDerankA, 1.0),
        ThetaOperator::new(q_b_matrix(&grid, &rho, floor)?, ThetaFamily::BlochDerankB, 1.0),
    ))
}

/// `Q_a = -½ Σ_{a,b} G_{a,b} ((log α)^T B)_{a,b}`
fn q_a_matrix(grid: &ObservableGrid, rho: &ComplexMatrix, floor: f64) -> Result<ComplexMatrix> {
    let b = grid.bloch(rho);
    let log_alpha = real_log(&b.alpha(), floor)?;
    let weights = log_alpha.transpose() * &b.values * -0.5;
    Ok(grid.combine(&weights))
}

/// `Q_b = -½ Σ_{a,b} G_{a,b} (B (log β)^T)_{a,b}`
fn q_b_matrix(grid: &ObservableGrid, rho: &ComplexMatrix, floor: f64) -> Result<ComplexMatrix> {
    let b = grid.bloch(rho);
    let log_beta = real_log(&b.beta(), floor)?;
    let weights = &b.values * log_beta.transpose() * -0.5;
    Ok(grid.combine(&weights))
}

/// `Θ = γ_H β (H + β⁻¹ log ρ)`
pub fn thermalization_operator(
    state: &QuantumState,
    h: &ComplexMatrix,
    gamma_h: f64,
    beta: f64,
    floor: f64,
) -> Result<ThetaOperator> {
    let rho = state.density();
    if h.nrows() != rho.nrows() {
        return Err(Error::DimensionMismatch {
            expected: rho.nrows(),
            found: h.nrows(),
        });
    }
    Ok(ThetaOperator::new(
        thermal_matrix(&rho, h, gamma_h, beta, floor)?,
        ThetaFamily::Thermalization,
        gamma_h,
    ))
}

fn thermal_matrix(
    rho: &ComplexMatrix,
    h: &ComplexMatrix,
    gamma_h: f64,
    beta: f64,
    floor: f64,
) -> Result<ComplexMatrix> {
    let log_rho = spectral_log(rho, floor)?;
    Ok((h.scale(beta) + log_rho).scale(gamma_h))
}

/// Rebuilds Θ from a density matrix, reusing precomputed bases.
#[derive(Debug, Clone)]
pub struct ThetaBuilder {
    spec: DisentanglementSpec,
    factor: Factorization,
    floor: f64,
    grid: Option<ObservableGrid>,
    corr: Option<CorrelationBasis>,
    hamiltonian: Option<ComplexMatrix>,
}

impl ThetaBuilder {
    pub fn new(
        spec: DisentanglementSpec,
        factor: Factorization,
        hamiltonian: Option<&ComplexMatrix>,
        floor: f64,
    ) -> Result<Self> {
        spec.validate()?;
        let grid = match spec.family {
            ThetaFamily::BlochDerankA | ThetaFamily::BlochDerankB => {
                factor.require_bipartite()?;
                Some(observable_grid(factor.d_a, factor.d_b)?)
            }
            _ => None,
        };
        if spec.family == ThetaFamily::StateMatrixDerank {
            factor.require_bipartite()?;
        }
        let corr = match spec.family {
            ThetaFamily::CorrSuppress => Some(CorrelationBasis::new(factor)?),
            _ => None,
        };
        let hamiltonian = match spec.family {
            ThetaFamily::Thermalization => Some(
                hamiltonian
                    .ok_or_else(|| {
                        Error::InvalidConfig("thermalization needs a Hamiltonian".into())
                    })?
                    .clone(),
            ),
            _ => None,
        };
        Ok(Self {
            spec,
            factor,
            floor,
            grid,
            corr,
            hamiltonian,
        })
    }

    pub fn spec(&self) -> &DisentanglementSpec {
        &self.spec
    }

    /// Θ for the given density matrix, or `None` when no nonlinear term is
    /// active.
    pub fn build(&self, rho: &ComplexMatrix) -> Result<Option<ThetaOperator>> {
        if !self.spec.is_active() {
            return Ok(None);
        }
        let gamma = self.spec.gamma_d;
        let op = match self.spec.family {
            ThetaFamily::None => return Ok(None),
            ThetaFamily::CorrSuppress => {
                let q = self.corr.as_ref().expect("built in new").operator(rho);
                ThetaOperator::new(q.scale(gamma), ThetaFamily::CorrSuppress, gamma)
            }
            ThetaFamily::BlochDerankA => {
                let q = q_a_matrix(self.grid.as_ref().expect("built in new"), rho, self.floor)?;
                ThetaOperator::new(q.scale(gamma), ThetaFamily::BlochDerankA, gamma)
            }
            ThetaFamily::BlochDerankB => {
                let q = q_b_matrix(self.grid.as_ref().expect("built in new"), rho, self.floor)?;
                ThetaOperator::new(q.scale(gamma), ThetaFamily::BlochDerankB, gamma)
            }
            ThetaFamily::StateMatrixDerank => {
                let g = partial_trace_matrix(rho, self.factor, Subsystem::A);
                let q = q_s_from_g(&g, self.factor, self.floor)?;
                ThetaOperator::new(q.scale(gamma), ThetaFamily::StateMatrixDerank, gamma)
            }
            ThetaFamily::Thermalization => {
                let h = self.hamiltonian.as_ref().expect("built in new");
                let m = thermal_matrix(rho, h, self.spec.gamma_h, self.spec.beta, self.floor)?;
                ThetaOperator::new(m, ThetaFamily::Thermalization, self.spec.gamma_h)
            }
        };
        Ok(Some(op))
    }

    /// Θ for a pure state vector.
    pub fn build_pure(&self, psi: &StateVector) -> Result<Option<ThetaOperator>> {
        if !self.spec.is_active() {
            return Ok(None);
        }
        self.build(&(psi * psi.adjoint()))
    }
}

/// One-shot Θ construction.
pub fn build_theta(
    spec: &DisentanglementSpec,
    state: &QuantumState,
    h: Option<&ComplexMatrix>,
    floor: f64,
) -> Result<Option<ThetaOperator>> {
    let builder = ThetaBuilder::new(*spec, state.require_factor()?, h, floor)?;
    builder.build(&state.density())
}

/// The operator `T₂` with `<ψ|T₂|ψ> = Tr((S^H S)²)` for a `D × D` pure state.
pub fn t2_operator(state: &QuantumState) -> Result<ComplexMatrix> {
    let f = state.require_factor()?;
    f.require_bipartite()?;
    if f.d_a != f.d_b {
        return Err(Error::InvalidDimension(
            "T2 needs equal subsystem dimensions".into(),
        ));
    }
    let psi = state.vector().ok_or(Error::NotPure)?;
    let rho = psi * psi.adjoint();
    let d = f.d_a;
    let w = weyl_ops(d)?;
    let wd: Vec<ComplexMatrix> = w.iter().map(|m| m.adjoint()).collect();
    let dim = d * d;
    let n_ops = d * d;
    // Σ_{n3n4} (W34^H ⊗ X) ρ (W34 ⊗ Y) factors as a superoperator sum; the
    // brute-force eight-index sum is fine for the dimensions used here.
    let mut total = ComplexMatrix::zeros(dim, dim);
    for k12 in 0..n_ops {
        for k34 in 0..n_ops {
            let left = kron(&wd[k34], &wd[k12]) * &rho;
            for k56 in 0..n_ops {
                let mid = &left * kron(&w[k34], &w[k56]) * &rho;
                for k78 in 0..n_ops {
                    total += &mid
                        * kron(&wd[k78], &wd[k56])
                        * &rho
                        * kron(&w[k78], &w[k12]);
                }
            }
        }
    }
    Ok(total.unscale((d as f64).powi(4)))
}

/// `<ψ|T₂|ψ>`, a pure-state entanglement witness in `[1/D², 1]`.
pub fn weyl_t2_expectation(state: &QuantumState) -> Result<f64> {
    let t2 = t2_operator(state)?;
    let psi = state.vector().ok_or(Error::NotPure)?;
    Ok(psi.dotc(&(t2 * psi)).re)
}

/// `Tr((S^H S)²)` evaluated directly from the Weyl `S` matrix.
pub fn s_matrix_t2(state: &QuantumState) -> Result<f64> {
    let s = weyl_s_matrix(state)?;
    let ss = s.adjoint() * &s;
    Ok(trace(&(&ss * &ss)).re)
}

/// Scalar entanglement diagnostics of one state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureReport {
    pub k_entropy: f64,
    pub l_entropy: f64,
    /// `D^D det G`; equals `4|ψ1ψ4 - ψ2ψ3|²` for two-qubit pure states.
    pub delta: f64,
    pub tau_ab: f64,
    pub purity: f64,
}

/// Caches the bases needed to evaluate [`MeasureReport`]s repeatedly.
#[derive(Debug, Clone)]
pub struct MeasureEvaluator {
    factor: Factorization,
    grid: ObservableGrid,
    corr: CorrelationBasis,
}

impl MeasureEvaluator {
    pub fn new(factor: Factorization) -> Result<Self> {
        factor.require_bipartite()?;
        Ok(Self {
            factor,
            grid: observable_grid(factor.d_a, factor.d_b)?,
            corr: CorrelationBasis::new(factor)?,
        })
    }

    pub fn report(&self, rho: &ComplexMatrix) -> Result<MeasureReport> {
        let g = partial_trace_matrix(rho, self.factor, Subsystem::A);
        let g_eig = herm_eig(&g)?;
        let k_entropy = entropy_of_spectrum(&g_eig.values)?;
        let d = self.factor.d_a as f64;
        let det: f64 = g_eig.values.iter().product();
        let l_entropy = unnormalized_entropy(&self.grid.bloch(rho).alpha())?;
        Ok(MeasureReport {
            k_entropy,
            l_entropy,
            delta: d.powf(d) * det,
            tau_ab: self.corr.tau(rho),
            purity: trace_product(rho, rho).re,
        })
    }

    /// `(k_a, k_b)` single-spin Bloch vectors (two qubits only).
    pub fn bloch_vectors(&self, rho: &ComplexMatrix) -> Result<([f64; 3], [f64; 3])> {
        crate::bases::single_spin_bloch_vectors(&self.grid.bloch(rho))
    }
}

pub fn measure_report(state: &QuantumState) -> Result<MeasureReport> {
    MeasureEvaluator::new(state.require_factor()?)?.report(&state.density())
}

/// Checks that a candidate Θ is Hermitian to `1e-10`.
pub fn check_theta(theta: &ComplexMatrix) -> Result<()> {
    let residue = hermitian_residue(theta);
    if residue > 1e-10 * max_abs(theta).max(1.0) {
        return Err(Error::NotHermitian { residue });
    }
    Ok(())
}
