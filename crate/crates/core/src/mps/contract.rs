//! Transfer-matrix contraction.
//!
//! The transfer operator of a site with local operator `O` acts on χ×χ
//! matrices as `X ↦ Σᵢⱼ ⟨j|O|i⟩ Aⁱ X Aʲ†`. Sweeps only ever apply this map
//! (O(D²χ³) per site); the dense χ²×χ² form
//! `E_O = Σᵢⱼ ⟨j|O|i⟩ conj(Aʲ) ⊗ Aⁱ` (column-stacking `vec`) exists for
//! diagnostics and tests.

use super::{Boundary, Mps, MpsError, ObservableSpec};
use crate::haar::SiteTensors;
use crate::linalg::{self, c, CMatrix, KrylovOptions, C64};

/// `Σᵢⱼ ⟨j|O|i⟩ Aⁱ X Aʲ†`. With `O = I` this is the CP map `Σᵢ Aⁱ X Aⁱ†`.
pub fn cp_apply(x: &CMatrix, op: &CMatrix, site: &SiteTensors) -> Result<CMatrix, MpsError> {
    check_dims(x, Some(op), site)?;
    Ok(cp_apply_unchecked(x, Some(op), site))
}

/// Heisenberg-picture dual of the identity transfer map: `Y ↦ Σᵢ Aⁱ† Y Aⁱ`.
pub fn cp_apply_adjoint(y: &CMatrix, site: &SiteTensors) -> CMatrix {
    let chi = site.bond_dim();
    site.matrices().iter().fold(CMatrix::zeros(chi, chi), |acc, a| acc + a.adjoint() * y * a)
}

fn check_dims(x: &CMatrix, op: Option<&CMatrix>, site: &SiteTensors) -> Result<(), MpsError> {
    let chi = site.bond_dim();
    if x.nrows() != chi || x.ncols() != chi {
        return Err(MpsError::DimensionMismatch(format!("X is {}x{}, expected {chi}x{chi}", x.nrows(), x.ncols())));
    }
    if let Some(op) = op {
        let d = site.phys_dim();
        if op.nrows() != d || op.ncols() != d {
            return Err(MpsError::DimensionMismatch(format!(
                "operator is {}x{}, expected {d}x{d}",
                op.nrows(),
                op.ncols()
            )));
        }
    }
    Ok(())
}

/// `op = None` means identity.
pub(crate) fn cp_apply_unchecked(x: &CMatrix, op: Option<&CMatrix>, site: &SiteTensors) -> CMatrix {
    let chi = site.bond_dim();
    let mats = site.matrices();
    match op {
        None => mats
            .iter()
            .fold(CMatrix::zeros(chi, chi), |acc, a| acc + linalg::matmul(&linalg::matmul(a, x), &a.adjoint())),
        Some(op) => {
            // Y_j = X Aʲ†, then Σᵢ Aⁱ (Σⱼ O_{ji} Y_j)
            let ys: Vec<CMatrix> = mats.iter().map(|a| linalg::matmul(x, &a.adjoint())).collect();
            let mut out = CMatrix::zeros(chi, chi);
            for (i, a) in mats.iter().enumerate() {
                let mut inner = CMatrix::zeros(chi, chi);
                let mut any = false;
                for (j, y) in ys.iter().enumerate() {
                    let w = op[(j, i)];
                    if w != C64::new(0.0, 0.0) {
                        inner += y * w;
                        any = true;
                    }
                }
                if any {
                    out += linalg::matmul(a, &inner);
                }
            }
            out
        }
    }
}

/// `E_O = Σᵢⱼ ⟨j|O|i⟩ conj(Aʲ) ⊗ Aⁱ`, so that `vec(cp_apply(X)) = E_O vec(X)`.
pub fn dense_transfer_matrix(op: Option<&CMatrix>, site: &SiteTensors) -> CMatrix {
    let chi = site.bond_dim();
    let mats = site.matrices();
    let mut e = CMatrix::zeros(chi * chi, chi * chi);
    for (i, ai) in mats.iter().enumerate() {
        for (j, aj) in mats.iter().enumerate() {
            let w = match op {
                Some(o) => o[(j, i)],
                None if i == j => c(1.0, 0.0),
                None => continue,
            };
            if w != C64::new(0.0, 0.0) {
                e += linalg::kron(&aj.map(|z| z.conj()), ai) * w;
            }
        }
    }
    e
}

/// A site's transfer operator, either as its action or materialized.
#[derive(Debug, Clone)]
pub enum TransferMatrix {
    Implicit { site: SiteTensors, op: Option<CMatrix> },
    Dense { chi: usize, matrix: CMatrix },
}

impl TransferMatrix {
    pub fn implicit(site: SiteTensors, op: Option<CMatrix>) -> Self {
        TransferMatrix::Implicit { site, op }
    }

    pub fn chi(&self) -> usize {
        match self {
            TransferMatrix::Implicit { site, .. } => site.bond_dim(),
            TransferMatrix::Dense { chi, .. } => *chi,
        }
    }

    pub fn to_dense(&self) -> Self {
        match self {
            TransferMatrix::Implicit { site, op } => {
                TransferMatrix::Dense { chi: site.bond_dim(), matrix: dense_transfer_matrix(op.as_ref(), site) }
            }
            dense => dense.clone(),
        }
    }

    pub fn apply(&self, x: &CMatrix) -> CMatrix {
        match self {
            TransferMatrix::Implicit { site, op } => cp_apply_unchecked(x, op.as_ref(), site),
            TransferMatrix::Dense { chi, matrix } => {
                let v = matrix * linalg::vec_cols(x);
                linalg::unvec_cols(v.as_slice(), *chi, *chi)
            }
        }
    }
}

/// Leading eigenvalues of the identity transfer operator `E_I`.
#[derive(Debug, Clone)]
pub struct TransferSpectrum {
    /// Sorted by modulus, descending.
    pub eigenvalues: Vec<C64>,
    /// `|λ₂|` within 1e-8 of `|λ₁|`: the fixed point is not unique.
    pub degenerate: bool,
}

impl TransferSpectrum {
    pub fn leading(&self) -> C64 {
        self.eigenvalues[0]
    }

    /// `|λ₂|`, the correlation-decay rate, when at least two were computed.
    pub fn second_modulus(&self) -> Option<f64> {
        self.eigenvalues.get(1).map(|z| z.norm())
    }
}

pub fn transfer_spectrum(site: &SiteTensors, k: usize) -> Result<TransferSpectrum, MpsError> {
    transfer_spectrum_with(site, k, &KrylovOptions::default())
}

/// `k` largest-modulus eigenvalues of `E_I`, computed from the map action
/// without forming the χ²×χ² matrix.
pub fn transfer_spectrum_with(
    site: &SiteTensors,
    k: usize,
    opts: &KrylovOptions,
) -> Result<TransferSpectrum, MpsError> {
    let chi = site.bond_dim();
    let dim = chi * chi;
    // at least two, so the degeneracy flag is meaningful
    let wanted = k.max(2).min(dim);
    let apply = |x: &[C64], y: &mut [C64]| {
        let xm = linalg::unvec_cols(x, chi, chi);
        let ym = cp_apply_unchecked(&xm, None, site);
        y.copy_from_slice(ym.as_slice());
    };
    let mut eigenvalues = linalg::implicit_top_eigs(dim, apply, wanted, opts)?;
    let degenerate = eigenvalues.len() >= 2 && (eigenvalues[1].norm() - eigenvalues[0].norm()).abs() < 1e-8;
    eigenvalues.truncate(k.max(1).min(dim));
    Ok(TransferSpectrum { eigenvalues, degenerate })
}

impl Mps {
    /// Contract `⟨ψ|⊗ₖ S[k]|ψ⟩` for raw tensors, with `ops(site)` giving the
    /// local operator (`None` = identity).
    fn raw_contract<'o, F>(&self, ops: F) -> Result<C64, MpsError>
    where
        F: Fn(usize) -> Option<&'o CMatrix>,
    {
        let n = self.n_sites();
        let chi = self.bond_dim();
        match self.boundary() {
            Boundary::Open { left, right } => {
                let mut x = left * left.adjoint();
                for k in 0..n {
                    x = cp_apply_unchecked(&x, ops(k), self.site(k));
                }
                Ok((right.adjoint() * x * right)[(0, 0)])
            }
            Boundary::Periodic => {
                if chi > self.limits().pbc_chi_max {
                    return Err(MpsError::ChiTooLargeForPbc { chi, limit: self.limits().pbc_chi_max });
                }
                // Tr of the composed map, site N−1 applied first
                let mut total = C64::new(0.0, 0.0);
                for alpha in 0..chi {
                    for beta in 0..chi {
                        let mut x = CMatrix::zeros(chi, chi);
                        x[(alpha, beta)] = c(1.0, 0.0);
                        for k in (0..n).rev() {
                            x = cp_apply_unchecked(&x, ops(k), self.site(k));
                        }
                        total += x[(alpha, beta)];
                    }
                }
                Ok(total)
            }
        }
    }

    /// `⟨ψ|ψ⟩` of the represented state (1 after normalization).
    pub fn norm_squared(&self) -> Result<f64, MpsError> {
        Ok(self.raw_contract(|_| None)?.re / self.norm_factor())
    }

    /// `⟨ψ|O|ψ⟩`.
    pub fn expectation(&self, obs: &ObservableSpec) -> Result<C64, MpsError> {
        obs.check(self)?;
        Ok(self.raw_contract(|k| obs.op_at(k))? / self.norm_factor())
    }

    /// Reduced density matrix of sites `start..start+len`, `D^len × D^len`,
    /// with the first window site as the most significant index.
    pub fn reduced_density_matrix(&self, start: usize, len: usize) -> Result<CMatrix, MpsError> {
        let max = self.limits().rdm_max_window;
        if len == 0 || len > max {
            return Err(MpsError::WindowTooLarge { len, max });
        }
        let n = self.n_sites();
        if start + len > n {
            return Err(MpsError::WindowOutOfRange { start, end: start + len, n_sites: n });
        }
        let d = self.phys_dim();
        let dim = d.pow(len as u32);
        let mut rho = CMatrix::zeros(dim, dim);
        match self.boundary() {
            Boundary::Open { left, right } => {
                let mut x = left * left.adjoint();
                for k in 0..start {
                    x = cp_apply_unchecked(&x, None, self.site(k));
                }
                let mut y = right * right.adjoint();
                for k in (start + len..n).rev() {
                    y = cp_apply_adjoint(&y, self.site(k));
                }
                // open ket/bra indices through the window
                let mut blocks: Vec<(usize, usize, CMatrix)> = vec![(0, 0, x)];
                for k in start..start + len {
                    let mats = self.site(k).matrices();
                    let mut next = Vec::with_capacity(blocks.len() * d * d);
                    for (r, col, xb) in &blocks {
                        let right_factors: Vec<CMatrix> = mats.iter().map(|a| xb * a.adjoint()).collect();
                        for (i, a) in mats.iter().enumerate() {
                            for (j, xr) in right_factors.iter().enumerate() {
                                next.push((r * d + i, col * d + j, a * xr));
                            }
                        }
                    }
                    blocks = next;
                }
                for (r, col, xb) in blocks {
                    rho[(r, col)] = linalg::trace(&(&y * xb));
                }
            }
            Boundary::Periodic => {
                // entry (r, c) is the expectation of the string |c⟩⟨r|
                for r in 0..dim {
                    for col in 0..dim {
                        let ops: Vec<CMatrix> = (0..len)
                            .map(|k| {
                                let shift = d.pow((len - 1 - k) as u32);
                                let mut m = CMatrix::zeros(d, d);
                                m[((col / shift) % d, (r / shift) % d)] = c(1.0, 0.0);
                                m
                            })
                            .collect();
                        rho[(r, col)] = self.raw_contract(|k| k.checked_sub(start).and_then(|w| ops.get(w)))?;
                    }
                }
            }
        }
        Ok(rho.unscale(self.norm_factor()))
    }
}
