#![allow(dead_code)]

use disent_core::qcore::{c, kron, ComplexMatrix, StateVector};
use nalgebra::DVector;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

/// Normalized vector from interleaved (re, im) parts.
pub fn vector_from_parts(parts: &[f64]) -> StateVector {
    let v = DVector::from_fn(parts.len() / 2, |k, _| c(parts[2 * k], parts[2 * k + 1]));
    let n = v.norm();
    v.unscale(n)
}

/// Strategy for normalized complex vectors of dimension `n`.
pub fn state_vector(n: usize) -> impl Strategy<Value = StateVector> {
    prop::collection::vec(-1.0f64..1.0, 2 * n)
        .prop_filter("nonzero", |p| p.iter().map(|x| x * x).sum::<f64>() > 1e-2)
        .prop_map(|p| vector_from_parts(&p))
}

/// Strategy for full-rank density matrices of dimension `n`.
pub fn density(n: usize) -> impl Strategy<Value = ComplexMatrix> {
    prop::collection::vec(-1.0f64..1.0, 2 * n * n).prop_map(move |p| density_from_parts(n, &p))
}

pub fn density_from_parts(n: usize, p: &[f64]) -> ComplexMatrix {
    let a = ComplexMatrix::from_fn(n, n, |i, j| c(p[2 * (i * n + j)], p[2 * (i * n + j) + 1]));
    let rho = &a * a.adjoint() + ComplexMatrix::identity(n, n).scale(1e-3);
    let tr = rho.trace().re;
    rho.unscale(tr)
}

pub fn gaussian_vector<R: Rng>(rng: &mut R, n: usize) -> StateVector {
    let v = DVector::from_fn(n, |_, _| {
        c(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let norm = v.norm();
    v.unscale(norm)
}

pub fn gaussian_density<R: Rng>(rng: &mut R, n: usize) -> ComplexMatrix {
    let a = ComplexMatrix::from_fn(n, n, |_, _| {
        c(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let rho = &a * a.adjoint();
    let tr = rho.trace().re;
    rho.unscale(tr)
}

/// Haar-distributed unitary via QR with the phase correction of the R diagonal.
pub fn haar_unitary<R: Rng>(rng: &mut R, n: usize) -> ComplexMatrix {
    let z = ComplexMatrix::from_fn(n, n, |_, _| {
        c(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let qr = z.qr();
    let (mut q, r) = qr.unpack();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = d / d.norm();
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    q
}

pub fn product_vector(a: &StateVector, b: &StateVector) -> StateVector {
    let col = |v: &StateVector| ComplexMatrix::from_column_slice(v.len(), 1, v.as_slice());
    let m = kron(&col(a), &col(b));
    DVector::from_column_slice(m.as_slice())
}
