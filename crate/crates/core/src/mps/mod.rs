//! Matrix product states generated by sequential Haar-unitary interaction,
//! with transfer-matrix contraction for expectation values, reduced density
//! matrices and transfer-operator spectra.
//!
//! Sites are numbered from 0. The dense statevector orders the computational
//! basis with site 0 as the most significant digit, so a window operator on
//! sites `s..s+L` is `O[s] ⊗ O[s+1] ⊗ ⋯` in the usual Kronecker order.
//!
//! Amplitudes:
//! - open boundaries: `ψ(i₀…i_{N−1}) = ⟨φF| A^{i_{N−1}} ⋯ A^{i₀} |φI⟩`
//!   (site 0 interacts with the ancilla first);
//! - periodic boundaries: `ψ(i₀…i_{N−1}) = Tr[A^{i₀} ⋯ A^{i_{N−1}}]`.

mod contract;

pub use contract::{
    cp_apply, cp_apply_adjoint, dense_transfer_matrix, transfer_spectrum, TransferMatrix, TransferSpectrum,
};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::haar::{self, RngStream, SiteTensors};
use crate::linalg::{self, c, CMatrix, CVector, LinalgError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MpsError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("periodic contraction needs a dense χ²×χ² closure; χ={chi} exceeds the limit {limit}")]
    ChiTooLargeForPbc { chi: usize, limit: usize },
    #[error("window of {len} sites exceeds the limit of {max}")]
    WindowTooLarge { len: usize, max: usize },
    #[error("window [{start}, {end}) does not fit in a chain of {n_sites} sites")]
    WindowOutOfRange { start: usize, end: usize, n_sites: usize },
    #[error("dense statevector of dimension {dim} exceeds the cap {cap}")]
    StateTooLarge { dim: usize, cap: usize },
    #[error("invalid observable: {0}")]
    InvalidObservable(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryKind {
    #[serde(alias = "obc")]
    Open,
    #[serde(alias = "pbc")]
    Periodic,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Boundary {
    /// Unit-norm ancilla states at the start (`left = φI`) and end (`right = φF`).
    Open {
        left: CVector,
        right: CVector,
    },
    Periodic,
}

impl Boundary {
    /// Open boundaries with `φI = φF = |0⟩`.
    pub fn open_default(chi: usize) -> Self {
        let e0 = basis_vector(chi, 0);
        Boundary::Open { left: e0.clone(), right: e0 }
    }

    pub fn kind(&self) -> BoundaryKind {
        match self {
            Boundary::Open { .. } => BoundaryKind::Open,
            Boundary::Periodic => BoundaryKind::Periodic,
        }
    }

    pub fn default_for(kind: BoundaryKind, chi: usize) -> Self {
        match kind {
            BoundaryKind::Open => Self::open_default(chi),
            BoundaryKind::Periodic => Boundary::Periodic,
        }
    }
}

pub fn basis_vector(dim: usize, k: usize) -> CVector {
    let mut v = CVector::zeros(dim);
    v[k] = c(1.0, 0.0);
    v
}

#[derive(Debug, Clone, PartialEq)]
pub enum SiteSet {
    Homogeneous(SiteTensors),
    PerSite(Vec<SiteTensors>),
}

/// Caps on the dense parts of a contraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    pub pbc_chi_max: usize,
    pub rdm_max_window: usize,
    pub dense_state_max: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Self { pbc_chi_max: 64, rdm_max_window: 3, dense_state_max: 1 << 14 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mps {
    n_sites: usize,
    phys_dim: usize,
    bond_dim: usize,
    boundary: Boundary,
    tensors: SiteSet,
    /// Raw contractions are divided by this; 1 for an unnormalized state.
    norm_factor: f64,
    limits: Limits,
}

impl Mps {
    pub fn new(n_sites: usize, boundary: Boundary, tensors: SiteSet) -> Result<Self, MpsError> {
        if n_sites == 0 {
            return Err(MpsError::DimensionMismatch("an MPS needs at least one site".into()));
        }
        let first = match &tensors {
            SiteSet::Homogeneous(s) => s,
            SiteSet::PerSite(v) => {
                if v.len() != n_sites {
                    return Err(MpsError::DimensionMismatch(format!("{} site tensors for {n_sites} sites", v.len())));
                }
                &v[0]
            }
        };
        let (phys_dim, bond_dim) = (first.phys_dim(), first.bond_dim());
        if let SiteSet::PerSite(v) = &tensors {
            if v.iter().any(|s| s.phys_dim() != phys_dim || s.bond_dim() != bond_dim) {
                return Err(MpsError::DimensionMismatch("all sites must share D and χ".into()));
            }
        }
        if let Boundary::Open { left, right } = &boundary {
            if left.len() != bond_dim || right.len() != bond_dim {
                return Err(MpsError::DimensionMismatch(format!("boundary vectors must have length χ={bond_dim}")));
            }
            for v in [left, right] {
                if (v.norm() - 1.0).abs() > 1e-10 {
                    return Err(MpsError::DimensionMismatch("boundary vectors must be unit-norm".into()));
                }
            }
        }
        Ok(Self { n_sites, phys_dim, bond_dim, boundary, tensors, norm_factor: 1.0, limits: Limits::default() })
    }

    pub fn with_limits(mut self, limits: Limits) -> Self {
        self.limits = limits;
        self
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn phys_dim(&self) -> usize {
        self.phys_dim
    }

    pub fn bond_dim(&self) -> usize {
        self.bond_dim
    }

    pub fn boundary(&self) -> &Boundary {
        &self.boundary
    }

    pub fn tensors(&self) -> &SiteSet {
        &self.tensors
    }

    pub fn limits(&self) -> Limits {
        self.limits
    }

    pub fn norm_factor(&self) -> f64 {
        self.norm_factor
    }

    pub fn is_homogeneous(&self) -> bool {
        matches!(self.tensors, SiteSet::Homogeneous(_))
    }

    pub fn site(&self, k: usize) -> &SiteTensors {
        match &self.tensors {
            SiteSet::Homogeneous(s) => s,
            SiteSet::PerSite(v) => &v[k],
        }
    }

    /// Divide by `√⟨ψ̃|ψ̃⟩` of the raw tensors, recording the factor.
    pub fn normalize(&mut self) -> Result<(), MpsError> {
        self.norm_factor = 1.0;
        let raw = self.norm_squared()?;
        self.norm_factor = raw;
        Ok(())
    }

    pub fn normalized(mut self) -> Result<Self, MpsError> {
        self.normalize()?;
        Ok(self)
    }

    /// Dense amplitudes, length `D^N`, including the normalization factor.
    pub fn dense_statevector(&self) -> Result<CVector, MpsError> {
        let dim = self.phys_dim.checked_pow(self.n_sites as u32).filter(|&d| d <= self.limits.dense_state_max).ok_or(
            MpsError::StateTooLarge {
                dim: self.phys_dim.saturating_pow(self.n_sites as u32),
                cap: self.limits.dense_state_max,
            },
        )?;
        let mut out = CVector::zeros(dim);
        let scale = c(1.0 / self.norm_factor.sqrt(), 0.0);
        match &self.boundary {
            Boundary::Open { left, right } => {
                // partial products A^{i_k}⋯A^{i_0}|φI⟩, depth first
                let mut stack: Vec<(usize, usize, CVector)> = vec![(0, 0, left.clone())];
                while let Some((depth, index, v)) = stack.pop() {
                    if depth == self.n_sites {
                        out[index] = right.dotc(&v) * scale;
                        continue;
                    }
                    for i in 0..self.phys_dim {
                        let w = self.site(depth).matrix(i) * &v;
                        stack.push((depth + 1, index * self.phys_dim + i, w));
                    }
                }
            }
            Boundary::Periodic => {
                let mut stack: Vec<(usize, usize, CMatrix)> = vec![(0, 0, linalg::identity(self.bond_dim))];
                while let Some((depth, index, m)) = stack.pop() {
                    if depth == self.n_sites {
                        out[index] = linalg::trace(&m) * scale;
                        continue;
                    }
                    for i in 0..self.phys_dim {
                        let w = &m * self.site(depth).matrix(i);
                        stack.push((depth + 1, index * self.phys_dim + i, w));
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Random MPS from sequential Haar-unitary generation: one unitary of size
/// χD shared by every site (`homogeneous`) or one independent unitary per
/// site. The returned state is normalized.
pub fn sample_rmps<R: Rng + ?Sized>(
    n_sites: usize,
    phys_dim: usize,
    chi: usize,
    boundary: BoundaryKind,
    homogeneous: bool,
    rng: &mut R,
) -> Mps {
    assert!(n_sites >= 1 && phys_dim >= 2 && chi >= 1, "need N ≥ 1, D ≥ 2, χ ≥ 1");
    let tensors = if homogeneous {
        SiteSet::Homogeneous(haar::random_site(phys_dim, chi, rng))
    } else {
        SiteSet::PerSite((0..n_sites).map(|_| haar::random_site(phys_dim, chi, rng)).collect())
    };
    Mps::new(n_sites, Boundary::default_for(boundary, chi), tensors)
        .and_then(Mps::normalized)
        .expect("sampled tensors are consistent and the default limits hold")
}

/// [`sample_rmps`] drawing from a fresh generator for `stream`.
pub fn sample_rmps_stream(
    n_sites: usize,
    phys_dim: usize,
    chi: usize,
    boundary: BoundaryKind,
    homogeneous: bool,
    stream: RngStream,
) -> Mps {
    sample_rmps(n_sites, phys_dim, chi, boundary, homogeneous, &mut stream.rng())
}

/// A window of `L` local operators starting at `window_start`; identity on
/// every other site.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservableSpec {
    window_start: usize,
    ops: Vec<CMatrix>,
    hermitian: Vec<bool>,
}

impl ObservableSpec {
    pub fn new(window_start: usize, ops: Vec<CMatrix>) -> Result<Self, MpsError> {
        if ops.is_empty() {
            return Err(MpsError::InvalidObservable("empty window".into()));
        }
        let d = ops[0].nrows();
        for op in &ops {
            if op.nrows() != d || op.ncols() != d {
                return Err(MpsError::InvalidObservable(format!("local operators must all be {d}x{d}")));
            }
            if !linalg::is_finite(op) {
                return Err(MpsError::InvalidObservable("non-finite entry".into()));
            }
        }
        let hermitian =
            ops.iter().map(|o| linalg::hermitian_defect(o) <= 1e-12 * linalg::max_abs(o).max(1.0)).collect();
        Ok(Self { window_start, ops, hermitian })
    }

    /// Window starting at `floor((N − L)/2)`, i.e. centered in the chain.
    pub fn centered(n_sites: usize, ops: Vec<CMatrix>) -> Result<Self, MpsError> {
        let len = ops.len();
        if len > n_sites {
            return Err(MpsError::WindowOutOfRange { start: 0, end: len, n_sites });
        }
        Self::new((n_sites - len) / 2, ops)
    }

    pub fn window_start(&self) -> usize {
        self.window_start
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn ops(&self) -> &[CMatrix] {
        &self.ops
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian.iter().all(|&h| h)
    }

    pub fn op_at(&self, site: usize) -> Option<&CMatrix> {
        site.checked_sub(self.window_start).and_then(|k| self.ops.get(k))
    }

    /// `max_k ‖O[k]‖∞`.
    pub fn max_operator_norm(&self) -> f64 {
        self.ops.iter().map(|o| linalg::norm(o, linalg::NormKind::Operator)).fold(0.0, f64::max)
    }

    fn check(&self, mps: &Mps) -> Result<(), MpsError> {
        let end = self.window_start + self.ops.len();
        if end > mps.n_sites() {
            return Err(MpsError::WindowOutOfRange { start: self.window_start, end, n_sites: mps.n_sites() });
        }
        if self.ops[0].nrows() != mps.phys_dim() {
            return Err(MpsError::DimensionMismatch(format!(
                "operators are {0}x{0} but D={1}",
                self.ops[0].nrows(),
                mps.phys_dim()
            )));
        }
        Ok(())
    }
}
