//! Campaign configuration: a flat key-value document, validated into a grid
//! of `(N, χ)` points.

use serde::{Deserialize, Serialize};

use super::EnsembleError;
use crate::linalg::{self, CMatrix};
use crate::mps::{BoundaryKind, ObservableSpec};

/// How the bond dimension follows the system size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChiRuleKind {
    Fixed,
    /// `χ = N − L`.
    Linear,
    /// `χ = ceil(N^p)`.
    Poly,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ChiRule {
    Fixed(Vec<usize>),
    LinearBath,
    Poly(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservableKind {
    Identity,
    SigmaX,
    SigmaY,
    SigmaZ,
}

impl ObservableKind {
    pub fn local_op(self) -> CMatrix {
        match self {
            Self::Identity => linalg::identity(2),
            Self::SigmaX => linalg::pauli_x(),
            Self::SigmaY => linalg::pauli_y(),
            Self::SigmaZ => linalg::pauli_z(),
        }
    }
}

/// Every tunable of an experiment. Keys not used by a given experiment are
/// accepted and ignored; unknown keys are rejected at parse time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CampaignConfig {
    #[serde(rename = "D")]
    pub phys_dim: usize,
    #[serde(rename = "L")]
    pub window_len: usize,
    pub boundary_kind: BoundaryKind,
    pub homogeneous: bool,
    #[serde(rename = "N_grid")]
    pub n_grid: Vec<usize>,
    pub chi_rule: ChiRuleKind,
    /// Bond dimensions for the fixed rule, one curve each.
    pub chi: Vec<usize>,
    pub chi_power: f64,
    pub chi_cap: usize,
    pub n_cap: usize,
    pub samples: usize,
    pub master_seed: u64,
    pub observable: ObservableKind,
    pub epsilon_grid: Vec<f64>,
    pub bootstrap: usize,
    /// Checkpoints for the running average-state distance.
    pub sample_grid: Vec<usize>,
    pub bins: usize,
    pub pairs: usize,
    pub perturbation_scales: Vec<f64>,
    /// Reuse sample 0's unitary for every sample.
    pub freeze_unitary: bool,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self {
            phys_dim: 2,
            window_len: 1,
            boundary_kind: BoundaryKind::Open,
            homogeneous: true,
            n_grid: (4..=16).collect(),
            chi_rule: ChiRuleKind::Fixed,
            chi: vec![2, 4, 8],
            chi_power: 2.5,
            chi_cap: 64,
            n_cap: 48,
            samples: 500,
            master_seed: 1_234_567,
            observable: ObservableKind::SigmaX,
            epsilon_grid: Vec::new(),
            bootstrap: 200,
            sample_grid: vec![10, 30, 100, 300, 1000, 3000, 10_000],
            bins: 50,
            pairs: 200,
            perturbation_scales: vec![1e-2, 1e-3, 1e-4],
            freeze_unitary: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GridPoint {
    #[serde(rename = "N")]
    pub n_sites: usize,
    pub chi: usize,
}

fn bad(key: &str, value: impl std::fmt::Display, reason: impl Into<String>) -> EnsembleError {
    EnsembleError::Config { key: key.to_string(), value: value.to_string(), reason: reason.into() }
}

impl CampaignConfig {
    pub fn rule(&self) -> ChiRule {
        match self.chi_rule {
            ChiRuleKind::Fixed => ChiRule::Fixed(self.chi.clone()),
            ChiRuleKind::Linear => ChiRule::LinearBath,
            ChiRuleKind::Poly => ChiRule::Poly(self.chi_power),
        }
    }

    /// Local operators of the centered window.
    pub fn window_ops(&self) -> Vec<CMatrix> {
        vec![self.observable.local_op(); self.window_len]
    }

    pub fn observable_for(&self, n_sites: usize) -> Result<ObservableSpec, EnsembleError> {
        Ok(ObservableSpec::centered(n_sites, self.window_ops())?)
    }

    /// Check every field and expand the grid: fixed-rule points are ordered
    /// by χ, then N.
    pub fn validate(&self) -> Result<Vec<GridPoint>, EnsembleError> {
        if self.phys_dim != 2 {
            return Err(bad("D", self.phys_dim, "only D = 2 is supported by the Pauli observables"));
        }
        if self.window_len == 0 {
            return Err(bad("L", self.window_len, "window must contain at least one site"));
        }
        if self.n_grid.is_empty() {
            return Err(bad("N_grid", "[]", "grid must be nonempty"));
        }
        for &n in &self.n_grid {
            if n <= self.window_len {
                return Err(bad("N_grid", n, format!("violates N > L (L = {})", self.window_len)));
            }
            if n > self.n_cap {
                return Err(bad("N_grid", n, format!("exceeds n_cap = {}", self.n_cap)));
            }
        }
        if self.samples < 2 {
            return Err(bad("samples", self.samples, "need at least 2 samples for a variance"));
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(bad("N_grid", format!("{:?}", self.n_grid), "must be strictly increasing"));
        }
        if let Some(e) = self.epsilon_grid.iter().find(|e| !e.is_finite() || **e < 0.0) {
            return Err(bad("epsilon_grid", e, "entries must be finite and non-negative"));
        }
        if self.epsilon_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(bad("epsilon_grid", format!("{:?}", self.epsilon_grid), "must be strictly increasing"));
        }
        if let Some(s) = self.perturbation_scales.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(bad("perturbation_scales", s, "scales must be positive"));
        }
        if self.bins == 0 {
            return Err(bad("bins", 0, "need at least one bin"));
        }
        if self.sample_grid.is_empty() || self.sample_grid.windows(2).any(|w| w[0] >= w[1]) || self.sample_grid[0] == 0
        {
            return Err(bad(
                "sample_grid",
                format!("{:?}", self.sample_grid),
                "must be nonempty, positive and strictly increasing",
            ));
        }
        let mut points = Vec::new();
        match self.rule() {
            ChiRule::Fixed(chis) => {
                if chis.is_empty() {
                    return Err(bad("chi", "[]", "fixed rule needs at least one bond dimension"));
                }
                for chi in chis {
                    for &n in &self.n_grid {
                        points.push(GridPoint { n_sites: n, chi });
                    }
                }
            }
            ChiRule::LinearBath => {
                for &n in &self.n_grid {
                    points.push(GridPoint { n_sites: n, chi: n - self.window_len });
                }
            }
            ChiRule::Poly(p) => {
                if !(p.is_finite() && p > 0.0) {
                    return Err(bad("chi_power", p, "exponent must be positive"));
                }
                for &n in &self.n_grid {
                    points.push(GridPoint { n_sites: n, chi: (n as f64).powf(p).ceil() as usize });
                }
            }
        }
        for pt in &points {
            if pt.chi == 0 {
                return Err(bad("chi", 0, "bond dimension must be at least 1"));
            }
            if pt.chi > self.chi_cap {
                return Err(bad("chi", pt.chi, format!("exceeds chi_cap = {} at N = {}", self.chi_cap, pt.n_sites)));
            }
            if self.boundary_kind == BoundaryKind::Periodic && pt.chi > crate::mps::Limits::default().pbc_chi_max {
                return Err(bad("chi", pt.chi, "too large for periodic contraction"));
            }
        }
        Ok(points)
    }
}
