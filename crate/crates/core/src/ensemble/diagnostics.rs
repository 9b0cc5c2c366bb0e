//! Average-state convergence and reduced-state eigenvalue statistics,
//! comparing random MPS against Haar-random pure states.

use rayon::prelude::*;

use super::stats::{ks_critical, ks_statistic, Moments};
use super::{EnsembleError, StateEnsemble};
use crate::haar::{self, RngStream};
use crate::linalg::{self, CMatrix, CVector};

/// Domain tag separating the Haar-state streams from the MPS streams.
const HAAR_TAG: u64 = 0x4841_4152;

fn haar_stream(master_seed: u64, sample: usize) -> RngStream {
    RngStream::new(master_seed, 0).derive(HAAR_TAG).substream(sample as u64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub samples: usize,
    pub rmps_d1: f64,
    pub rmps_stderr: f64,
    pub haar_d1: f64,
    pub haar_stderr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceCurve {
    pub dim: usize,
    pub points: Vec<CurvePoint>,
}

/// `‖ρ̄_k − I/dim‖₁` of the running mean over the first `k` states and its
/// standard error: to first order the distance moves with the mean of
/// `⟨ψ|S|ψ⟩`, `S = sign(ρ̄_k − I/dim)`.
fn running_distances(states: &[CVector], grid: &[usize]) -> Result<Vec<(f64, f64)>, EnsembleError> {
    let dim = states[0].len();
    let mixed = linalg::identity(dim).unscale(dim as f64);
    let mut sum = CMatrix::zeros(dim, dim);
    let mut done = 0;
    let mut out = Vec::with_capacity(grid.len());
    for &k in grid {
        for psi in &states[done..k] {
            sum += psi * psi.adjoint();
        }
        done = k;
        let delta = linalg::symmetrize(&(sum.unscale(k as f64) - &mixed));
        let eig = linalg::hermitian_eig(&delta, true)?;
        let d1 = eig.values.iter().map(|v| v.abs()).sum();
        let v = eig.vectors.expect("vectors requested");
        let signs = CVector::from_iterator(dim, eig.values.iter().map(|&l| linalg::c(l.signum(), 0.0)));
        let s = &v * CMatrix::from_diagonal(&signs) * v.adjoint();
        let g: Vec<f64> = states[..k].iter().map(|psi| psi.dotc(&(&s * psi)).re).collect();
        let se = if k > 1 { Moments::from_slice(&g).stderr() } else { 0.0 };
        out.push((d1, se));
    }
    Ok(out)
}

/// Running trace distance between the empirical average state and the
/// maximally mixed state, for the MPS ensemble and for Haar pure states of
/// the same dimension.
pub fn average_state_distance_curve(
    ensemble: &StateEnsemble,
    sample_grid: &[usize],
) -> Result<DistanceCurve, EnsembleError> {
    assert!(!sample_grid.is_empty(), "empty sample grid");
    let total = *sample_grid.last().expect("nonempty");
    let rmps: Vec<CVector> =
        (0..total).into_par_iter().map(|s| ensemble.sample(s).dense_statevector()).collect::<Result<_, _>>()?;
    let dim = rmps[0].len();
    if dim > crate::weingarten::MAX_AVERAGE_DIM {
        return Err(crate::weingarten::WeingartenError::OutputTooLarge {
            dim,
            cap: crate::weingarten::MAX_AVERAGE_DIM,
        }
        .into());
    }
    let haar_states: Vec<CVector> =
        (0..total).into_par_iter().map(|s| haar::haar_state(dim, haar_stream(ensemble.master_seed, s))).collect();
    let a = running_distances(&rmps, sample_grid)?;
    let b = running_distances(&haar_states, sample_grid)?;
    let points = sample_grid
        .iter()
        .zip(a.into_iter().zip(b))
        .map(|(&k, ((rd, rs), (hd, hs)))| CurvePoint {
            samples: k,
            rmps_d1: rd,
            rmps_stderr: rs,
            haar_d1: hd,
            haar_stderr: hs,
        })
        .collect();
    Ok(DistanceCurve { dim, points })
}

/// Reduced state of sites `start..start+len` of a dense state.
pub fn dense_reduced_state(psi: &CVector, phys_dim: usize, n_sites: usize, start: usize, len: usize) -> CMatrix {
    let dim = phys_dim.pow(len as u32);
    let right = phys_dim.pow((n_sites - start - len) as u32);
    let left = phys_dim.pow(start as u32);
    let mut rho = CMatrix::zeros(dim, dim);
    for l in 0..left {
        for r in 0..right {
            let idx = |a: usize| (l * dim + a) * right + r;
            for a in 0..dim {
                let pa = psi[idx(a)];
                for b in 0..dim {
                    rho[(a, b)] += pa * psi[idx(b)].conj();
                }
            }
        }
    }
    rho
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenHistogram {
    pub bins: usize,
    /// Fraction of eigenvalues per bin `[k/bins, (k+1)/bins)`; the last bin
    /// is closed.
    pub rmps_mass: Vec<f64>,
    pub haar_mass: Vec<f64>,
    pub rmps_eigenvalues: Vec<f64>,
    pub haar_eigenvalues: Vec<f64>,
    pub ks_statistic: f64,
    /// 1% critical value with one effective observation per state.
    pub ks_critical: f64,
}

fn bin_masses(values: &[f64], bins: usize) -> Vec<f64> {
    let mut counts = vec![0usize; bins];
    for &v in values {
        let k = ((v.clamp(0.0, 1.0) * bins as f64).floor() as usize).min(bins - 1);
        counts[k] += 1;
    }
    counts.iter().map(|&c| c as f64 / values.len() as f64).collect()
}

/// Pooled eigenvalues of the centered `L`-site reduced state for `samples`
/// MPS and `samples` Haar pure states.
pub fn eigenvalue_histogram(
    ensemble: &StateEnsemble,
    window_len: usize,
    samples: usize,
    bins: usize,
) -> Result<EigenHistogram, EnsembleError> {
    assert!(bins >= 1 && samples >= 1, "need bins and samples");
    let n = ensemble.n_sites;
    let start = (n - window_len) / 2;
    let rmps: Vec<Vec<f64>> = ensemble
        .map(samples, |_, mps| Ok(linalg::hermitian_eigenvalues(&mps.reduced_density_matrix(start, window_len)?)?))?;
    let dim = ensemble.phys_dim.pow(n as u32);
    let haar_eigs: Vec<Vec<f64>> = (0..samples)
        .into_par_iter()
        .map(|s| {
            let psi = haar::haar_state(dim, haar_stream(ensemble.master_seed, s));
            let rho = dense_reduced_state(&psi, ensemble.phys_dim, n, start, window_len);
            linalg::hermitian_eigenvalues(&linalg::symmetrize(&rho))
        })
        .collect::<Result<_, _>>()?;
    let rmps_eigenvalues: Vec<f64> = rmps.into_iter().flatten().collect();
    let haar_eigenvalues: Vec<f64> = haar_eigs.into_iter().flatten().collect();
    Ok(EigenHistogram {
        bins,
        rmps_mass: bin_masses(&rmps_eigenvalues, bins),
        haar_mass: bin_masses(&haar_eigenvalues, bins),
        ks_statistic: ks_statistic(&rmps_eigenvalues, &haar_eigenvalues),
        ks_critical: ks_critical(0.01, samples, samples),
        rmps_eigenvalues,
        haar_eigenvalues,
    })
}
