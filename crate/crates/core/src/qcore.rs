//! Dense complex linear algebra on small Hilbert spaces.
//!
//! Everything here works on [`ComplexMatrix`] (a dynamically sized
//! `nalgebra` matrix of `Complex64`). Hilbert spaces in this crate are tiny
//! (two spins, dimension 4), so storage is dense and no attempt is made to
//! exploit sparsity.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type ComplexMatrix = DMatrix<C64>;
pub type StateVector = DVector<C64>;

/// Relative eigenvalue floor used when taking logarithms of PSD matrices.
pub const DEFAULT_LOG_FLOOR: f64 = 1e-13;

const HERMITIAN_TOL: f64 = 1e-10;
const PSD_TOL: f64 = 1e-8;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(n: usize) -> ComplexMatrix {
    ComplexMatrix::identity(n, n)
}

pub fn trace(a: &ComplexMatrix) -> C64 {
    a.diagonal().iter().sum()
}

pub fn max_abs(a: &ComplexMatrix) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `max |A - A^H|`.
pub fn hermitian_residue(a: &ComplexMatrix) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

/// `(A + A^H) / 2`.
pub fn hermitize(a: &ComplexMatrix) -> ComplexMatrix {
    (a + a.adjoint()).scale(0.5)
}

pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a * b - b * a
}

/// `|psi><psi|`
pub fn projector(psi: &StateVector) -> ComplexMatrix {
    psi * psi.adjoint()
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

/// Kronecker product of a list of factors, left to right.
pub fn kron_all(factors: &[&ComplexMatrix]) -> ComplexMatrix {
    let mut out = ComplexMatrix::identity(1, 1);
    for f in factors {
        out = out.kronecker(*f);
    }
    out
}

fn ensure_square(a: &ComplexMatrix) -> Result<usize> {
    if a.nrows() != a.ncols() {
        return Err(Error::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    Ok(a.nrows())
}

/// Spectral decomposition of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermEigen {
    /// Eigenvalues in ascending order.
    pub values: Vec<f64>,
    /// Unitary matrix whose columns are the matching eigenvectors.
    pub vectors: ComplexMatrix,
}

impl HermEigen {
    /// `V diag(f(λ)) V^H`
    pub fn apply<F: Fn(f64) -> f64>(&self, f: F) -> ComplexMatrix {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for (j, &lam) in self.values.iter().enumerate() {
            let fl = f(lam);
            for i in 0..n {
                scaled[(i, j)] *= fl;
            }
        }
        let out = scaled * self.vectors.adjoint();
        hermitize(&out)
    }

    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }
}

/// Eigen-decomposition of a Hermitian matrix. The input is symmetrized
/// before decomposition; inputs further than `1e-10 * max(1, max|A|)` from
/// Hermitian are rejected.
pub fn herm_eig(a: &ComplexMatrix) -> Result<HermEigen> {
    let n = ensure_square(a)?;
    let residue = hermitian_residue(a);
    if residue > HERMITIAN_TOL * max_abs(a).max(1.0) {
        return Err(Error::NotHermitian { residue });
    }
    let sym = hermitize(a);
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |r, col| eig.eigenvectors[(r, order[col])]);
    Ok(HermEigen { values, vectors })
}

fn check_psd(eig: &HermEigen) -> Result<()> {
    if eig.min() < -PSD_TOL {
        return Err(Error::NotPsd { min_eig: eig.min() });
    }
    Ok(())
}

/// Matrix logarithm of a Hermitian PSD matrix, `V diag(log max(λ, floor·λmax)) V^H`.
///
/// `floor` is relative to the largest eigenvalue, so exactly singular
/// matrices (product states, pure states) give a finite result.
pub fn spectral_log(a: &ComplexMatrix, floor: f64) -> Result<ComplexMatrix> {
    let eig = herm_eig(a)?;
    check_psd(&eig)?;
    let top = eig.max();
    if top <= 0.0 {
        return Err(Error::NotPsd { min_eig: top });
    }
    let cut = floor * top;
    Ok(eig.apply(|l| l.max(cut).ln()))
}

/// Spectral entropy `-Tr(p log p)` of `p = A / Tr A`, with `0 log 0 = 0`.
pub fn entropy_functional(a: &ComplexMatrix) -> Result<f64> {
    let eig = herm_eig(a)?;
    check_psd(&eig)?;
    entropy_of_spectrum(&eig.values)
}

pub(crate) fn entropy_of_spectrum(values: &[f64]) -> Result<f64> {
    let total: f64 = values.iter().map(|v| v.max(0.0)).sum();
    if total <= 0.0 {
        return Err(Error::NonPositiveTrace(total));
    }
    Ok(values
        .iter()
        .map(|&v| v.max(0.0) / total)
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.ln())
        .sum())
}

/// Normalized rank `entropy_functional(A) / log D`, in `[0, 1]`.
pub fn normalized_rank(a: &ComplexMatrix) -> Result<f64> {
    let d = ensure_square(a)?;
    if d < 2 {
        return Err(Error::InvalidDimension(
            "normalized rank needs dimension >= 2".into(),
        ));
    }
    Ok(entropy_functional(a)? / (d as f64).ln())
}

/// Subsystem labels for the bipartite part of a [`Factorization`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subsystem {
    A,
    B,
}

/// Tensor structure `D_H = d_a · d_b · d_c`; `c` is a spectator slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Factorization {
    pub d_a: usize,
    pub d_b: usize,
    pub d_c: usize,
}

impl Factorization {
    pub fn new(d_a: usize, d_b: usize, d_c: usize) -> Result<Self> {
        if d_a < 2 || d_b < 2 || d_c < 1 {
            return Err(Error::InvalidDimension(format!(
                "factorization ({d_a}, {d_b}, {d_c}) needs d_a, d_b > 1 and d_c >= 1"
            )));
        }
        Ok(Self { d_a, d_b, d_c })
    }

    pub fn bipartite(d_a: usize, d_b: usize) -> Result<Self> {
        Self::new(d_a, d_b, 1)
    }

    pub fn two_qubits() -> Self {
        Self {
            d_a: 2,
            d_b: 2,
            d_c: 1,
        }
    }

    pub fn dim(&self) -> usize {
        self.d_a * self.d_b * self.d_c
    }

    pub fn is_bipartite(&self) -> bool {
        self.d_c == 1
    }

    pub(crate) fn require_bipartite(&self) -> Result<()> {
        if self.d_c != 1 {
            return Err(Error::InvalidDimension(format!(
                "spectator dimension d_c = {} not supported here",
                self.d_c
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StateKind {
    Pure(StateVector),
    Mixed(ComplexMatrix),
}

/// A normalized pure state or a density operator, optionally tagged with a
/// tensor factorization.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    kind: StateKind,
    factor: Option<Factorization>,
}

impl QuantumState {
    pub fn pure(psi: StateVector, factor: Option<Factorization>) -> Result<Self> {
        check_factor(psi.len(), factor)?;
        let dev = (psi.norm_squared() - 1.0).abs();
        if dev > 1e-10 {
            return Err(Error::NotNormalized(dev));
        }
        Ok(Self {
            kind: StateKind::Pure(psi),
            factor,
        })
    }

    /// Normalizes `psi` before wrapping it.
    pub fn pure_normalized(psi: StateVector, factor: Option<Factorization>) -> Result<Self> {
        let n = psi.norm();
        if n == 0.0 {
            return Err(Error::NotNormalized(1.0));
        }
        Self::pure(psi.unscale(n), factor)
    }

    pub fn mixed(rho: ComplexMatrix, factor: Option<Factorization>) -> Result<Self> {
        let d = ensure_square(&rho)?;
        check_factor(d, factor)?;
        let dev = (trace(&rho) - 1.0).norm();
        if dev > 1e-10 {
            return Err(Error::NotNormalized(dev));
        }
        let residue = hermitian_residue(&rho);
        if residue > 1e-12 * max_abs(&rho).max(1.0) {
            return Err(Error::NotHermitian { residue });
        }
        let eig = herm_eig(&rho)?;
        check_psd(&eig)?;
        Ok(Self {
            kind: StateKind::Mixed(rho),
            factor,
        })
    }

    pub fn two_qubit_pure(amplitudes: [C64; 4]) -> Result<Self> {
        Self::pure(
            StateVector::from_row_slice(&amplitudes),
            Some(Factorization::two_qubits()),
        )
    }

    pub fn two_qubit_mixed(rho: ComplexMatrix) -> Result<Self> {
        Self::mixed(rho, Some(Factorization::two_qubits()))
    }

    /// `rho_a ⊗ rho_b` tagged with the matching bipartite factorization.
    pub fn product(rho_a: &ComplexMatrix, rho_b: &ComplexMatrix) -> Result<Self> {
        let f = Factorization::bipartite(rho_a.nrows(), rho_b.nrows())?;
        Self::mixed(kron(rho_a, rho_b), Some(f))
    }

    pub fn kind(&self) -> &StateKind {
        &self.kind
    }

    pub fn factor(&self) -> Option<Factorization> {
        self.factor
    }

    pub fn require_factor(&self) -> Result<Factorization> {
        self.factor.ok_or(Error::MissingFactorization)
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            StateKind::Pure(psi) => psi.len(),
            StateKind::Mixed(rho) => rho.nrows(),
        }
    }

    pub fn is_pure(&self) -> bool {
        matches!(self.kind, StateKind::Pure(_))
    }

    pub fn vector(&self) -> Option<&StateVector> {
        match &self.kind {
            StateKind::Pure(psi) => Some(psi),
            StateKind::Mixed(_) => None,
        }
    }

    /// The density matrix; pure states are promoted to `|psi><psi|`.
    pub fn density(&self) -> ComplexMatrix {
        match &self.kind {
            StateKind::Pure(psi) => projector(psi),
            StateKind::Mixed(rho) => rho.clone(),
        }
    }

    pub fn purity(&self) -> f64 {
        match &self.kind {
            StateKind::Pure(psi) => psi.norm_squared().powi(2),
            StateKind::Mixed(rho) => (rho * rho).trace().re,
        }
    }

    /// Same state, forgotten as a density matrix.
    pub fn to_mixed(&self) -> Self {
        Self {
            kind: StateKind::Mixed(self.density()),
            factor: self.factor,
        }
    }
}

fn check_factor(dim: usize, factor: Option<Factorization>) -> Result<()> {
    if let Some(f) = factor {
        if f.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: f.dim(),
                found: dim,
            });
        }
    }
    Ok(())
}

/// Reduced density matrix of subsystem `keep`; every other slot (including
/// the spectator) is traced out.
pub fn partial_trace(state: &QuantumState, keep: Subsystem) -> Result<ComplexMatrix> {
    let f = state.require_factor()?;
    let rho = state.density();
    Ok(partial_trace_matrix(&rho, f, keep))
}

pub(crate) fn partial_trace_matrix(
    rho: &ComplexMatrix,
    f: Factorization,
    keep: Subsystem,
) -> ComplexMatrix {
    let (da, db, dc) = (f.d_a, f.d_b, f.d_c);
    let idx = |ia: usize, ib: usize, ic: usize| (ia * db + ib) * dc + ic;
    match keep {
        Subsystem::A => ComplexMatrix::from_fn(da, da, |i, j| {
            let mut s = C64::new(0.0, 0.0);
            for ib in 0..db {
                for ic in 0..dc {
                    s += rho[(idx(i, ib, ic), idx(j, ib, ic))];
                }
            }
            s
        }),
        Subsystem::B => ComplexMatrix::from_fn(db, db, |i, j| {
            let mut s = C64::new(0.0, 0.0);
            for ia in 0..da {
                for ic in 0..dc {
                    s += rho[(idx(ia, i, ic), idx(ia, j, ic))];
                }
            }
            s
        }),
    }
}

/// `Tr(rho · obs)` for a Hermitian observable.
pub fn expectation(state: &QuantumState, obs: &ComplexMatrix) -> Result<f64> {
    let d = state.dim();
    if obs.nrows() != d || obs.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: obs.nrows(),
        });
    }
    let value = match state.kind() {
        StateKind::Pure(psi) => psi.dotc(&(obs * psi)),
        StateKind::Mixed(rho) => trace_product(rho, obs),
    };
    debug_assert!(
        value.im.abs() <= 1e-10 * max_abs(obs).max(1.0),
        "imaginary expectation residue {}",
        value.im
    );
    Ok(value.re)
}

/// `Tr(a · b)` without forming the product.
pub fn trace_product(a: &ComplexMatrix, b: &ComplexMatrix) -> C64 {
    let n = a.nrows();
    let mut s = C64::new(0.0, 0.0);
    for i in 0..n {
        for k in 0..a.ncols() {
            s += a[(i, k)] * b[(k, i)];
        }
    }
    s
}
