//! Operator bases: generalized Gell-Mann matrices, the two-subsystem
//! observable grid `G_{a,b} = Γ_a ⊗ Γ_b`, Bloch matrices, and Weyl
//! (clock-and-shift) operators with the derived Weyl and `S` matrices.
//!
//! All indices are 0-based. Index 0 of a subsystem basis is the scaled
//! identity; indices `1..D²` follow the Gell-Mann order below.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::qcore::{c, identity, kron, trace_product, ComplexMatrix, QuantumState, C64};

/// The `D² - 1` generalized Gell-Mann matrices of dimension `D`.
///
/// Order: symmetric off-diagonal pairs `(j, k)`, `j < k`, lexicographic;
/// then the antisymmetric pairs in the same order; then the `D - 1`
/// diagonal matrices. For `D = 2` this is `(σx, σy, σz)`.
#[derive(Debug, Clone)]
pub struct GellMannSet {
    pub dim: usize,
    pub matrices: Vec<ComplexMatrix>,
}

pub fn gell_mann(d: usize) -> Result<GellMannSet> {
    if d < 2 {
        return Err(Error::InvalidDimension(format!(
            "Gell-Mann set needs d >= 2, got {d}"
        )));
    }
    let mut matrices = Vec::with_capacity(d * d - 1);
    let pairs: Vec<(usize, usize)> = (0..d)
        .flat_map(|j| (j + 1..d).map(move |k| (j, k)))
        .collect();
    for &(j, k) in &pairs {
        let mut m = ComplexMatrix::zeros(d, d);
        m[(j, k)] = c(1.0, 0.0);
        m[(k, j)] = c(1.0, 0.0);
        matrices.push(m);
    }
    for &(j, k) in &pairs {
        let mut m = ComplexMatrix::zeros(d, d);
        m[(j, k)] = c(0.0, -1.0);
        m[(k, j)] = c(0.0, 1.0);
        matrices.push(m);
    }
    for l in 1..d {
        let norm = (2.0 / (l * (l + 1)) as f64).sqrt();
        let mut m = ComplexMatrix::zeros(d, d);
        for j in 0..l {
            m[(j, j)] = c(norm, 0.0);
        }
        m[(l, l)] = c(-(l as f64) * norm, 0.0);
        matrices.push(m);
    }
    Ok(GellMannSet { dim: d, matrices })
}

/// Pauli matrices `(σx, σy, σz)`.
pub fn pauli() -> [ComplexMatrix; 3] {
    let set = gell_mann(2).expect("d = 2 is valid");
    let mut it = set.matrices.into_iter();
    [
        it.next().unwrap(),
        it.next().unwrap(),
        it.next().unwrap(),
    ]
}

/// Subsystem basis `Γ_0 = 2^{1/4} D^{-1/2} I`, `Γ_l = 2^{-1/4} λ_l`.
fn scaled_basis(d: usize) -> Result<Vec<ComplexMatrix>> {
    let gm = gell_mann(d)?;
    let mut out = Vec::with_capacity(d * d);
    out.push(identity(d).scale(2f64.powf(0.25) / (d as f64).sqrt()));
    let s = 2f64.powf(-0.25);
    out.extend(gm.matrices.iter().map(|m| m.scale(s)));
    Ok(out)
}

/// The `D_a² × D_b²` grid of observables `G_{a,b} = Γ_a^(a) ⊗ Γ_b^(b)`.
#[derive(Debug, Clone)]
pub struct ObservableGrid {
    pub d_a: usize,
    pub d_b: usize,
    entries: Vec<ComplexMatrix>,
}

pub fn observable_grid(d_a: usize, d_b: usize) -> Result<ObservableGrid> {
    let ga = scaled_basis(d_a)?;
    let gb = scaled_basis(d_b)?;
    let entries = ga
        .iter()
        .flat_map(|x| gb.iter().map(move |y| kron(x, y)))
        .collect();
    Ok(ObservableGrid { d_a, d_b, entries })
}

impl ObservableGrid {
    pub fn rows(&self) -> usize {
        self.d_a * self.d_a
    }

    pub fn cols(&self) -> usize {
        self.d_b * self.d_b
    }

    pub fn get(&self, a: usize, b: usize) -> &ComplexMatrix {
        &self.entries[a * self.cols() + b]
    }

    /// Bloch matrix of a density matrix of matching dimension.
    pub fn bloch(&self, rho: &ComplexMatrix) -> BlochMatrix {
        let values = DMatrix::from_fn(self.rows(), self.cols(), |a, b| {
            trace_product(rho, self.get(a, b)).re
        });
        BlochMatrix {
            d_a: self.d_a,
            d_b: self.d_b,
            values,
        }
    }

    /// `Σ_{a,b} w_{a,b} G_{a,b}` for a real weight matrix.
    pub fn combine(&self, weights: &DMatrix<f64>) -> ComplexMatrix {
        let dim = self.d_a * self.d_b;
        let mut out = ComplexMatrix::zeros(dim, dim);
        for a in 0..self.rows() {
            for b in 0..self.cols() {
                let w = weights[(a, b)];
                if w != 0.0 {
                    out += self.get(a, b).scale(w);
                }
            }
        }
        out
    }
}

/// Real matrix of expectations `B_{a,b} = <G_{a,b}>`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlochMatrix {
    pub d_a: usize,
    pub d_b: usize,
    pub values: DMatrix<f64>,
}

impl BlochMatrix {
    /// `α = B B^T / 2`
    pub fn alpha(&self) -> DMatrix<f64> {
        &self.values * self.values.transpose() * 0.5
    }

    /// `β = B^T B / 2`
    pub fn beta(&self) -> DMatrix<f64> {
        self.values.transpose() * &self.values * 0.5
    }
}

pub fn bloch_matrix(state: &QuantumState) -> Result<BlochMatrix> {
    let f = state.require_factor()?;
    f.require_bipartite()?;
    let grid = observable_grid(f.d_a, f.d_b)?;
    Ok(grid.bloch(&state.density()))
}

/// Single-spin Bloch vectors `<σ>` of both spins, read off the first column
/// (spin a) and first row (spin b) of the Bloch matrix.
///
/// `B_{l,0} = <σ_l ⊗ I> / sqrt(D_b)`, so the column is rescaled by
/// `sqrt(D_b)` (and the row by `sqrt(D_a)`) to give unit-length vectors
/// for pure product states.
pub fn single_spin_bloch_vectors(b: &BlochMatrix) -> Result<([f64; 3], [f64; 3])> {
    if b.d_a != 2 || b.d_b != 2 {
        return Err(Error::InvalidDimension(format!(
            "single-spin Bloch vectors need two qubits, got ({}, {})",
            b.d_a, b.d_b
        )));
    }
    let s = 2f64.sqrt();
    let v = &b.values;
    Ok((
        [s * v[(1, 0)], s * v[(2, 0)], s * v[(3, 0)]],
        [s * v[(0, 1)], s * v[(0, 2)], s * v[(0, 3)]],
    ))
}

/// Weyl operators `W_{n'n''} = Σ_n e^{2πi n n'/D} |n><n + n''|`, stored
/// at index `n' · D + n''`.
pub fn weyl_ops(d: usize) -> Result<Vec<ComplexMatrix>> {
    if d < 2 {
        return Err(Error::InvalidDimension(format!(
            "Weyl operators need d >= 2, got {d}"
        )));
    }
    let mut ops = Vec::with_capacity(d * d);
    for n1 in 0..d {
        for n2 in 0..d {
            let mut w = ComplexMatrix::zeros(d, d);
            for n in 0..d {
                let phase = 2.0 * PI * (n * n1) as f64 / d as f64;
                w[(n, (n + n2) % d)] = C64::from_polar(1.0, phase);
            }
            ops.push(w);
        }
    }
    Ok(ops)
}

/// Matrix of scaled Weyl expectation values.
#[derive(Debug, Clone, PartialEq)]
pub struct WeylMatrix {
    pub values: ComplexMatrix,
}

impl WeylMatrix {
    /// `Tr(W^H W)`
    pub fn purity(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum()
    }
}

/// Weyl matrix `W_{n'n''} = Tr(W_{n'n''} ρ) / sqrt(D)` of a single system.
pub fn weyl_matrix_single(rho: &ComplexMatrix) -> Result<WeylMatrix> {
    let d = rho.nrows();
    let ops = weyl_ops(d)?;
    let scale = 1.0 / (d as f64).sqrt();
    let values = ComplexMatrix::from_fn(d, d, |n1, n2| trace_product(&ops[n1 * d + n2], rho) * scale);
    Ok(WeylMatrix { values })
}

/// Bipartite Weyl matrix with rows `(n', n''')` and columns `(n'', n'''')`,
/// a-index outer, so that a product state gives `W^(a) ⊗ W^(b)`.
pub fn weyl_matrix(state: &QuantumState) -> Result<WeylMatrix> {
    let f = state.require_factor()?;
    f.require_bipartite()?;
    let (da, db) = (f.d_a, f.d_b);
    let wa = weyl_ops(da)?;
    let wb = weyl_ops(db)?;
    let rho = state.density();
    let scale = 1.0 / ((da * db) as f64).sqrt();
    let values = ComplexMatrix::from_fn(da * db, da * db, |row, col| {
        let (n1, n3) = (row / db, row % db);
        let (n2, n4) = (col / db, col % db);
        let op = kron(&wa[n1 * da + n2], &wb[n3 * db + n4]);
        trace_product(&op, &rho) * scale
    });
    Ok(WeylMatrix { values })
}

/// Weyl `S` matrix of a `D × D` bipartite state:
/// `S_{n'+n''D, n'''+n''''D} = Tr((W_{n'n''} ⊗ W_{n'''n''''}) ρ) / D`.
pub fn weyl_s_matrix(state: &QuantumState) -> Result<ComplexMatrix> {
    let f = state.require_factor()?;
    f.require_bipartite()?;
    if f.d_a != f.d_b {
        return Err(Error::InvalidDimension(format!(
            "S matrix needs d_a = d_b, got ({}, {})",
            f.d_a, f.d_b
        )));
    }
    let d = f.d_a;
    let w = weyl_ops(d)?;
    let rho = state.density();
    let dd = d * d;
    Ok(ComplexMatrix::from_fn(dd, dd, |row, col| {
        let (n1, n2) = (row % d, row / d);
        let (n3, n4) = (col % d, col / d);
        let op = kron(&w[n1 * d + n2], &w[n3 * d + n4]);
        trace_product(&op, &rho) / d as f64
    }))
}
