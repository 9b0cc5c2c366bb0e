//! Ensemble campaigns over random MPS: observable variance, trace distance
//! to the ensemble average, eigenvalue statistics, Lipschitz probes and
//! concentration tails.

mod config;
mod diagnostics;
mod lipschitz;
mod pauli;
pub mod stats;
mod tail;

pub use config::{CampaignConfig, ChiRule, ChiRuleKind, GridPoint, ObservableKind};
pub use diagnostics::{average_state_distance_curve, eigenvalue_histogram, CurvePoint, DistanceCurve, EigenHistogram};
pub use lipschitz::{lipschitz_bound, lipschitz_probe, LipschitzProbeResult};
pub use pauli::{pauli_norm_chain_check, pauli_string, PauliChainReport};
pub use tail::{concentration_tail, ConcentrationFit, TailResult, TailRow};

use rayon::prelude::*;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Instant;
use thiserror::Error;

use crate::haar::RngStream;
use crate::linalg::{self, CMatrix, LinalgError};
use crate::mps::{sample_rmps_stream, BoundaryKind, Mps, MpsError};
use crate::weingarten::WeingartenError;
use stats::Moments;

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error("invalid config: {key} = {value}: {reason}")]
    Config { key: String, value: String, reason: String },
    #[error("no tail events beyond the first epsilon; the fit is undetermined")]
    InsufficientTail,
    #[error("not a density matrix: {0}")]
    NotDensityMatrix(String),
    #[error(transparent)]
    Mps(#[from] MpsError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Weingarten(#[from] WeingartenError),
}

impl EnsembleError {
    /// Numerical failures as opposed to invalid input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Self::Linalg(_) | Self::Mps(MpsError::Linalg(_)) | Self::InsufficientTail)
    }
}

/// Cooperative cancellation, checked between grid points.
#[derive(Debug, Clone, Default)]
pub struct Control {
    cancel: Arc<AtomicBool>,
}

impl Control {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn cancel_flag(&self) -> Arc<AtomicBool> {
        self.cancel.clone()
    }

    pub fn cancel(&self) {
        self.cancel.store(true, Ordering::SeqCst);
    }

    pub fn is_cancelled(&self) -> bool {
        self.cancel.load(Ordering::SeqCst)
    }
}

/// One random-MPS ensemble: sample `s` is drawn from stream `s` of the
/// master seed, so grid points share random numbers sample by sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateEnsemble {
    pub n_sites: usize,
    pub phys_dim: usize,
    pub chi: usize,
    pub boundary: BoundaryKind,
    pub homogeneous: bool,
    pub master_seed: u64,
    pub frozen: bool,
}

impl StateEnsemble {
    pub fn from_config(cfg: &CampaignConfig, point: GridPoint) -> Self {
        Self {
            n_sites: point.n_sites,
            phys_dim: cfg.phys_dim,
            chi: point.chi,
            boundary: cfg.boundary_kind,
            homogeneous: cfg.homogeneous,
            master_seed: cfg.master_seed,
            frozen: cfg.freeze_unitary,
        }
    }

    pub fn stream(&self, sample: usize) -> RngStream {
        RngStream::new(self.master_seed, if self.frozen { 0 } else { sample as u64 })
    }

    pub fn sample(&self, sample: usize) -> Mps {
        sample_rmps_stream(self.n_sites, self.phys_dim, self.chi, self.boundary, self.homogeneous, self.stream(sample))
    }

    /// `g(sample)` for every sample, in sample order.
    pub fn map<T, F>(&self, samples: usize, g: F) -> Result<Vec<T>, EnsembleError>
    where
        T: Send,
        F: Fn(usize, &Mps) -> Result<T, EnsembleError> + Sync,
    {
        (0..samples).into_par_iter().map(|s| g(s, &self.sample(s))).collect()
    }
}

/// Result for one `(N, χ)` grid point. Fields a campaign does not compute
/// are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleRecord {
    pub point: GridPoint,
    pub samples: usize,
    pub f_mean: Option<f64>,
    pub f_var: Option<f64>,
    pub f_stderr: Option<f64>,
    /// Standard error of `f_var`.
    pub f_var_stderr: Option<f64>,
    pub rho_bar: Option<CMatrix>,
    pub d1_mean: Option<f64>,
    pub d1_stderr: Option<f64>,
    pub wall_seconds: f64,
}

impl EnsembleRecord {
    fn empty(point: GridPoint, samples: usize) -> Self {
        Self {
            point,
            samples,
            f_mean: None,
            f_var: None,
            f_stderr: None,
            f_var_stderr: None,
            rho_bar: None,
            d1_mean: None,
            d1_stderr: None,
            wall_seconds: 0.0,
        }
    }
}

/// Per-state expectation values `f = ⟨ψ|O|ψ⟩` at one grid point.
pub fn observable_samples(cfg: &CampaignConfig, point: GridPoint) -> Result<Vec<f64>, EnsembleError> {
    let obs = cfg.observable_for(point.n_sites)?;
    StateEnsemble::from_config(cfg, point).map(cfg.samples, |_, mps| Ok(mps.expectation(&obs)?.re))
}

/// Ensemble mean and variance of `f` at every grid point. On cancellation
/// the records finished so far are returned.
pub fn variance_scan(cfg: &CampaignConfig, control: &Control) -> Result<Vec<EnsembleRecord>, EnsembleError> {
    let points = cfg.validate()?;
    let mut out = Vec::with_capacity(points.len());
    for point in points {
        if control.is_cancelled() {
            break;
        }
        let start = Instant::now();
        let fs = observable_samples(cfg, point)?;
        let m = Moments::from_slice(&fs);
        let mut rec = EnsembleRecord::empty(point, cfg.samples);
        rec.f_mean = Some(m.mean);
        rec.f_var = Some(m.var);
        rec.f_stderr = Some(m.stderr());
        rec.f_var_stderr = Some(m.var_stderr());
        rec.wall_seconds = start.elapsed().as_secs_f64();
        out.push(rec);
    }
    Ok(out)
}

/// Reduced states `ρ_s` of the centered window, in sample order.
pub fn reduced_state_samples(cfg: &CampaignConfig, point: GridPoint) -> Result<Vec<CMatrix>, EnsembleError> {
    let start = (point.n_sites - cfg.window_len) / 2;
    StateEnsemble::from_config(cfg, point)
        .map(cfg.samples, |_, mps| Ok(mps.reduced_density_matrix(start, cfg.window_len)?))
}

/// Mean of matrices accumulated in slice order.
pub fn ordered_mean(mats: &[CMatrix]) -> CMatrix {
    let mut acc = CMatrix::zeros(mats[0].nrows(), mats[0].ncols());
    for m in mats {
        acc += m;
    }
    acc.unscale(mats.len() as f64)
}

/// `E‖ρ_s − ρ̄_s‖₁` with `ρ̄_s` the sample mean at the same grid point.
pub fn distance_scan(cfg: &CampaignConfig, control: &Control) -> Result<Vec<EnsembleRecord>, EnsembleError> {
    let points = cfg.validate()?;
    let max = crate::mps::Limits::default().rdm_max_window;
    if cfg.window_len > max {
        return Err(EnsembleError::Config {
            key: "L".into(),
            value: cfg.window_len.to_string(),
            reason: format!("reduced states are limited to L ≤ {max}"),
        });
    }
    let mut out = Vec::with_capacity(points.len());
    for point in points {
        if control.is_cancelled() {
            break;
        }
        let start = Instant::now();
        let rhos = reduced_state_samples(cfg, point)?;
        let rho_bar = ordered_mean(&rhos);
        let d1: Vec<f64> = rhos
            .par_iter()
            .map(|r| linalg::hermitian_trace_norm(&linalg::symmetrize(&(r - &rho_bar))))
            .collect::<Result<_, _>>()?;
        let m = Moments::from_slice(&d1);
        let mut rec = EnsembleRecord::empty(point, cfg.samples);
        rec.rho_bar = Some(rho_bar);
        rec.d1_mean = Some(m.mean);
        rec.d1_stderr = Some(m.stderr());
        rec.wall_seconds = start.elapsed().as_secs_f64();
        out.push(rec);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    fn small(chi_rule: ChiRuleKind) -> CampaignConfig {
        CampaignConfig { n_grid: vec![4, 6], chi: vec![2], chi_rule, samples: 40, ..Default::default() }
    }

    #[test]
    fn identity_has_no_variance() {
        let cfg = CampaignConfig { observable: ObservableKind::Identity, ..small(ChiRuleKind::Fixed) };
        for r in variance_scan(&cfg, &Control::new()).unwrap() {
            assert!((r.f_mean.unwrap() - 1.0).abs() < 1e-10);
            assert!(r.f_var.unwrap() < 1e-20);
        }
    }

    #[test]
    fn stderr_consistent_with_variance() {
        for r in variance_scan(&small(ChiRuleKind::Linear), &Control::new()).unwrap() {
            let v = r.f_var.unwrap();
            assert!(v >= 0.0);
            assert!((r.f_stderr.unwrap() - (v / r.samples as f64).sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn frozen_ensemble_has_zero_distance() {
        let cfg = CampaignConfig { freeze_unitary: true, ..small(ChiRuleKind::Fixed) };
        for r in distance_scan(&cfg, &Control::new()).unwrap() {
            assert!(r.d1_mean.unwrap() < 1e-12);
            let rb = r.rho_bar.unwrap();
            assert!((linalg::trace(&rb) - c(1.0, 0.0)).norm() < 1e-10);
        }
    }

    #[test]
    fn cancelled_scan_returns_partial() {
        let control = Control::new();
        control.cancel();
        assert!(variance_scan(&small(ChiRuleKind::Fixed), &control).unwrap().is_empty());
    }

    #[test]
    fn observable_bounded_by_trace_distance() {
        let cfg = small(ChiRuleKind::Fixed);
        let point = GridPoint { n_sites: 6, chi: 3 };
        let rhos = reduced_state_samples(&cfg, point).unwrap();
        let bar = ordered_mean(&rhos);
        let op = linalg::pauli_x();
        let op_norm = linalg::norm(&op, linalg::NormKind::Operator);
        for r in &rhos {
            let lhs = (linalg::trace(&(r * &op)) - linalg::trace(&(&bar * &op))).norm();
            let d1 = linalg::hermitian_trace_norm(&linalg::symmetrize(&(r - &bar))).unwrap();
            assert!(lhs <= d1 * op_norm + 1e-12);
        }
    }
}
