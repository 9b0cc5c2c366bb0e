//! Brute-force oracles shared by the integration suites. Everything here
//! works on dense statevectors and never touches transfer matrices.
#![allow(dead_code)]

use rmps_core::linalg::{c, CMatrix, CVector, C64};

/// Apply `op` to site `site` of a dense `n`-site state (site 0 most
/// significant).
pub fn apply_local(psi: &CVector, op: &CMatrix, site: usize, n: usize, d: usize) -> CVector {
    let stride = d.pow((n - 1 - site) as u32);
    let mut out = CVector::zeros(psi.len());
    for idx in 0..psi.len() {
        let digit = (idx / stride) % d;
        let base = idx - digit * stride;
        for new in 0..d {
            out[base + new * stride] += op[(new, digit)] * psi[idx];
        }
    }
    out
}

/// `⟨ψ| O[start] ⊗ ⋯ |ψ⟩` by explicit operator application.
pub fn dense_expectation(psi: &CVector, ops: &[CMatrix], start: usize, n: usize, d: usize) -> C64 {
    let mut phi = psi.clone();
    for (k, op) in ops.iter().enumerate() {
        phi = apply_local(&phi, op, start + k, n, d);
    }
    psi.dotc(&phi)
}

/// Reduced density matrix of sites `start..start+len` from the outer product.
pub fn partial_trace(psi: &CVector, start: usize, len: usize, n: usize, d: usize) -> CMatrix {
    let dim = d.pow(len as u32);
    let right = d.pow((n - start - len) as u32);
    let left = d.pow(start as u32);
    let mut rho = CMatrix::zeros(dim, dim);
    for l in 0..left {
        for r in 0..right {
            for a in 0..dim {
                let ia = (l * dim + a) * right + r;
                for b in 0..dim {
                    let ib = (l * dim + b) * right + r;
                    rho[(a, b)] += psi[ia] * psi[ib].conj();
                }
            }
        }
    }
    rho
}

pub fn random_hermitian<R: rand::Rng>(rng: &mut R, d: usize) -> CMatrix {
    let g = CMatrix::from_fn(d, d, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    (&g + g.adjoint()).scale(0.5)
}

pub fn random_complex_matrix<R: rand::Rng>(rng: &mut R, d: usize) -> CMatrix {
    CMatrix::from_fn(d, d, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

pub fn max_dev(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).fold(0.0f64, |m, (x, y)| m.max((x - y).norm()))
}

pub fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}
