//! Finite-difference probes of the Lipschitz constant of `U ↦ ⟨ψ(U)|O|ψ(U)⟩`.

use rayon::prelude::*;

use super::{EnsembleError, StateEnsemble};
use crate::haar::{self, RngStream};
use crate::linalg::{self, CMatrix, NormKind};
use crate::mps::{Boundary, Mps, ObservableSpec, SiteSet};

const PROBE_TAG: u64 = 0x4c49_5053;
const DEGENERATE_DISTANCE: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzProbeResult {
    pub scale: f64,
    pub pairs: usize,
    /// Pairs skipped because `‖U₁ − U₂‖₂` fell below 1e−13.
    pub degenerate: usize,
    pub max_ratio: f64,
    pub mean_ratio: f64,
    /// `4 D^{2L+2} N ‖O‖∞^L`.
    pub bound: f64,
}

impl LipschitzProbeResult {
    pub fn slack(&self) -> f64 {
        self.bound / self.max_ratio
    }
}

pub fn lipschitz_bound(phys_dim: usize, window_len: usize, n_sites: usize, op_norm: f64) -> f64 {
    4.0 * (phys_dim as f64).powi(2 * window_len as i32 + 2) * n_sites as f64 * op_norm.powi(window_len as i32)
}

fn expectation_for(ens: &StateEnsemble, u: &CMatrix, obs: &ObservableSpec) -> Result<f64, EnsembleError> {
    let site = haar::extract_site_tensors(u, ens.phys_dim, ens.chi)
        .map_err(|e| crate::mps::MpsError::DimensionMismatch(e.to_string()))?;
    let mps = Mps::new(ens.n_sites, Boundary::default_for(ens.boundary, ens.chi), SiteSet::Homogeneous(site))?
        .normalized()?;
    Ok(mps.expectation(obs)?.re)
}

/// `pairs` draws of `U₁` Haar and `U₂ = U₁ exp(iεH)` with `H` Hermitian of
/// unit Frobenius norm. Homogeneous chains only: every site carries the same
/// unitary.
pub fn lipschitz_probe(
    ens: &StateEnsemble,
    obs: &ObservableSpec,
    pairs: usize,
    scale: f64,
) -> Result<LipschitzProbeResult, EnsembleError> {
    assert!(pairs >= 1 && scale > 0.0, "need pairs ≥ 1 and a positive scale");
    if !ens.homogeneous {
        return Err(EnsembleError::Config {
            key: "homogeneous".into(),
            value: "false".into(),
            reason: "the probe perturbs a single shared unitary".into(),
        });
    }
    let d = ens.chi * ens.phys_dim;
    let ratios: Vec<Option<f64>> = (0..pairs)
        .into_par_iter()
        .map(|p| {
            let mut rng = RngStream::new(ens.master_seed, p as u64).derive(PROBE_TAG).rng();
            let u1 = haar::haar_unitary_from(d, &mut rng);
            let g = haar::ginibre(d, &mut rng);
            let h = (&g + g.adjoint()).scale(0.5);
            let h = h.unscale(linalg::norm(&h, NormKind::Frobenius));
            let u2 = &u1 * linalg::expi_hermitian(&h.scale(scale))?;
            let dist = linalg::norm(&(&u1 - &u2), NormKind::Frobenius);
            if dist < DEGENERATE_DISTANCE {
                return Ok(None);
            }
            let f1 = expectation_for(ens, &u1, obs)?;
            let f2 = expectation_for(ens, &u2, obs)?;
            Ok(Some((f1 - f2).abs() / dist))
        })
        .collect::<Result<_, EnsembleError>>()?;
    let kept: Vec<f64> = ratios.iter().flatten().copied().collect();
    let max_ratio = kept.iter().copied().fold(0.0, f64::max);
    let mean_ratio = if kept.is_empty() { 0.0 } else { kept.iter().sum::<f64>() / kept.len() as f64 };
    Ok(LipschitzProbeResult {
        scale,
        pairs,
        degenerate: pairs - kept.len(),
        max_ratio,
        mean_ratio,
        bound: lipschitz_bound(ens.phys_dim, obs.len(), ens.n_sites, obs.max_operator_norm()),
    })
}
