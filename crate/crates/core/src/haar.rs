//! Haar-distributed unitaries and pure states, seeded streams, and extraction
//! of MPS site tensors from a sequential-generation unitary.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, c, CMatrix, CVector, C64};

/// A reproducible random stream: ChaCha20 keyed by `master_seed`, with
/// `stream_index` selecting one of 2⁶⁴ independent streams. Output is
/// identical on every platform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub master_seed: u64,
    pub stream_index: u64,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        Self { master_seed, stream_index }
    }

    /// The stream for sample `index` under the same master seed.
    pub fn substream(&self, index: u64) -> Self {
        Self::new(self.master_seed, index)
    }

    /// A new master seed derived from this one and a domain tag, so that two
    /// ensembles drawn "from the same seed" do not share streams.
    pub fn derive(&self, tag: u64) -> Self {
        Self::new(splitmix64(self.master_seed ^ splitmix64(tag)), self.stream_index)
    }

    pub fn rng(&self) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_index);
        rng
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HaarError {
    #[error("unitary is {rows}x{cols}, expected {expected}x{expected} for chi={chi}, D={phys_dim}")]
    DimensionMismatch { rows: usize, cols: usize, expected: usize, chi: usize, phys_dim: usize },
    #[error("matrix is not unitary: ‖U†U - I‖ = {defect:e}")]
    NotUnitary { defect: f64 },
}

/// Standard complex Gaussian: real and imaginary parts have variance 1/2.
pub fn complex_gaussian<R: rand::Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    c(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// d×d Ginibre matrix, filled column by column.
pub fn ginibre<R: rand::Rng + ?Sized>(d: usize, rng: &mut R) -> CMatrix {
    let data: Vec<C64> = (0..d * d).map(|_| complex_gaussian(rng)).collect();
    CMatrix::from_vec(d, d, data)
}

/// Haar unitary: QR of a Ginibre matrix with `Q` multiplied by the phases of
/// `diag(R)`, which makes the distribution exactly invariant.
pub fn haar_unitary_from<R: rand::Rng + ?Sized>(d: usize, rng: &mut R) -> CMatrix {
    assert!(d >= 1, "unitary dimension must be positive");
    let qr = ginibre(d, rng).qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..d {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 { rjj / rjj.norm() } else { c(1.0, 0.0) };
        for i in 0..d {
            q[(i, j)] *= phase;
        }
    }
    q
}

pub fn haar_unitary(d: usize, stream: RngStream) -> CMatrix {
    haar_unitary_from(d, &mut stream.rng())
}

pub fn haar_state_from<R: rand::Rng + ?Sized>(d: usize, rng: &mut R) -> CVector {
    assert!(d >= 1, "state dimension must be positive");
    let v = CVector::from_iterator(d, (0..d).map(|_| complex_gaussian(rng)));
    let n = v.norm();
    v / c(n, 0.0)
}

pub fn haar_state(d: usize, stream: RngStream) -> CVector {
    haar_state_from(d, &mut stream.rng())
}

/// `‖U†U − I‖∞` (largest entry).
pub fn unitarity_defect(u: &CMatrix) -> f64 {
    linalg::max_abs(&(linalg::matmul(&u.adjoint(), u) - linalg::identity(u.ncols())))
}

/// One site of an MPS: `D` matrices of size χ×χ.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteTensors {
    phys_dim: usize,
    bond_dim: usize,
    mats: Vec<CMatrix>,
}

impl SiteTensors {
    /// Builds a site from explicit matrices. All must be χ×χ.
    pub fn from_matrices(mats: Vec<CMatrix>) -> Self {
        assert!(!mats.is_empty(), "a site needs at least one matrix");
        let chi = mats[0].nrows();
        assert!(mats.iter().all(|m| m.nrows() == chi && m.ncols() == chi), "site matrices must all be {chi}x{chi}");
        Self { phys_dim: mats.len(), bond_dim: chi, mats }
    }

    pub fn phys_dim(&self) -> usize {
        self.phys_dim
    }

    pub fn bond_dim(&self) -> usize {
        self.bond_dim
    }

    pub fn matrices(&self) -> &[CMatrix] {
        &self.mats
    }

    pub fn matrix(&self, i: usize) -> &CMatrix {
        &self.mats[i]
    }

    /// `Σᵢ A^{i†} A^i`.
    pub fn isometry_gram(&self) -> CMatrix {
        self.mats
            .iter()
            .fold(CMatrix::zeros(self.bond_dim, self.bond_dim), |acc, a| acc + linalg::matmul(&a.adjoint(), a))
    }

    /// Largest entry of `Σᵢ A^{i†} A^i − I`.
    pub fn isometry_defect(&self) -> f64 {
        linalg::max_abs(&(self.isometry_gram() - linalg::identity(self.bond_dim)))
    }
}

/// Row/column of the joint ancilla⊗physical index: ancilla-major,
/// `flat = α·D + i`.
#[inline]
pub fn joint_index(ancilla: usize, phys: usize, phys_dim: usize) -> usize {
    ancilla * phys_dim + phys
}

/// `A^i_{αβ} = ⟨i,α|U|β,0⟩ = U[α·D + i, β·D]`.
pub fn extract_site_tensors(u: &CMatrix, phys_dim: usize, chi: usize) -> Result<SiteTensors, HaarError> {
    let expected = chi * phys_dim;
    if u.nrows() != expected || u.ncols() != expected {
        return Err(HaarError::DimensionMismatch { rows: u.nrows(), cols: u.ncols(), expected, chi, phys_dim });
    }
    let defect = unitarity_defect(u);
    if defect > 1e-10 {
        return Err(HaarError::NotUnitary { defect });
    }
    let mats = (0..phys_dim)
        .map(|i| {
            CMatrix::from_fn(chi, chi, |alpha, beta| {
                u[(joint_index(alpha, i, phys_dim), joint_index(beta, 0, phys_dim))]
            })
        })
        .collect();
    Ok(SiteTensors { phys_dim, bond_dim: chi, mats })
}

/// A Haar-random site: one unitary of size χD drawn from `rng`.
pub fn random_site<R: rand::Rng + ?Sized>(phys_dim: usize, chi: usize, rng: &mut R) -> SiteTensors {
    let u = haar_unitary_from(chi * phys_dim, rng);
    extract_site_tensors(&u, phys_dim, chi).expect("Haar unitary has the right shape")
}
