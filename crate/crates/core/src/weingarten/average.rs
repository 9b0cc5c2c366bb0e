//! Ensemble-average states `ρ̄ = E|ψ⟩⟨ψ|`: exact by Weingarten contraction,
//! or by deterministic parallel sampling.

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::{cached_table, Permutation, WeingartenError};
use crate::haar::{self, RngStream};
use crate::linalg::{c, CMatrix, CVector, C64};
use crate::mps::{Boundary, Mps, SiteSet};

/// Largest chain length for [`average_state_exact`].
pub const EXACT_MAX_ORDER: usize = 4;
/// Cap on `D^N` for dense average states.
pub const MAX_AVERAGE_DIM: usize = 256;

const CHUNK: usize = 64;

/// Unnormalized exact average and its trace `E⟨ψ̃|ψ̃⟩`.
#[derive(Debug, Clone)]
pub struct ExactAverage {
    pub rho: CMatrix,
    pub trace: f64,
}

impl ExactAverage {
    pub fn normalized(&self) -> CMatrix {
        self.rho.unscale(self.trace)
    }
}

/// Whether each sampled projector is divided by its own norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weighting {
    Normalized,
    /// Raw sequential-generation amplitudes; comparable with
    /// [`average_state_exact`] entry for entry.
    Raw,
}

#[derive(Debug, Clone)]
pub struct McAverageSpec {
    pub n_sites: usize,
    pub phys_dim: usize,
    pub chi: usize,
    pub boundary: Boundary,
    pub homogeneous: bool,
    pub weighting: Weighting,
}

#[derive(Debug, Clone)]
pub struct McAverage {
    pub mean: CMatrix,
    pub stderr_re: DMatrix<f64>,
    pub stderr_im: DMatrix<f64>,
    pub samples: usize,
}

fn output_dim(n_sites: usize, phys_dim: usize) -> Result<usize, WeingartenError> {
    phys_dim
        .checked_pow(n_sites as u32)
        .filter(|&d| d <= MAX_AVERAGE_DIM)
        .ok_or(WeingartenError::OutputTooLarge { dim: phys_dim.saturating_pow(n_sites as u32), cap: MAX_AVERAGE_DIM })
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        Self((0..n).collect())
    }

    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut y = x;
        while self.0[y] != r {
            let next = self.0[y];
            self.0[y] = r;
            y = next;
        }
        r
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra] = rb;
        }
    }
}

/// Exact `E[ψ̃_i ψ̃_j*]` for the homogeneous open chain
/// `ψ̃_i = ⟨φF|A^{i_{N−1}}⋯A^{i_0}|φI⟩` built from one Haar unitary of size
/// `χD`.
///
/// Each amplitude is a product of `N` entries `U[(α_{k+1},i_k),(α_k,0)]`, so
/// the moment sum pairs the ket bonds `α` with the bra bonds `β` through
/// `(σ, τ) ∈ S_N × S_N`. The bond network depends on `(σ, τ)` only, while the
/// physical indices enter through `i_k = j_{σ(k)}`.
pub fn average_state_exact(
    n_sites: usize,
    phys_dim: usize,
    chi: usize,
    phi_i: &CVector,
    phi_f: &CVector,
) -> Result<ExactAverage, WeingartenError> {
    if n_sites > EXACT_MAX_ORDER {
        return Err(WeingartenError::OrderTooLarge { order: n_sites, max: EXACT_MAX_ORDER });
    }
    assert!(n_sites >= 1 && phys_dim >= 1 && chi >= 1, "need N, D, χ ≥ 1");
    let dim = output_dim(n_sites, phys_dim)?;
    if phi_i.len() != chi || phi_f.len() != chi {
        return Err(WeingartenError::DimensionMismatch(format!(
            "boundary vectors have lengths {} and {}, expected χ = {chi}",
            phi_i.len(),
            phi_f.len()
        )));
    }
    let n = n_sites;
    let table = cached_table(n, chi * phys_dim)?;
    let perms = Permutation::all(n);

    // bond variables: α_k = k, β_k = n+1+k
    let vars = 2 * (n + 1);
    let weight = |v: usize, a: usize| -> C64 {
        match v {
            0 => phi_i[a],
            v if v == n => phi_f[a].conj(),
            v if v == n + 1 => phi_i[a].conj(),
            v if v == 2 * n + 1 => phi_f[a],
            _ => c(1.0, 0.0),
        }
    };
    let weighted = |v: usize| v == 0 || v == n || v == n + 1 || v == 2 * n + 1;
    let network = |sigma: &Permutation, tau: &Permutation| -> C64 {
        let mut uf = UnionFind::new(vars);
        for k in 0..n {
            uf.union(k + 1, n + 1 + sigma.apply(k) + 1);
            uf.union(k, n + 1 + tau.apply(k));
        }
        let mut groups: Vec<Vec<usize>> = vec![Vec::new(); vars];
        for v in 0..vars {
            let r = uf.find(v);
            groups[r].push(v);
        }
        let mut value = c(1.0, 0.0);
        for g in groups.iter().filter(|g| !g.is_empty()) {
            let members: Vec<usize> = g.iter().copied().filter(|&v| weighted(v)).collect();
            if members.is_empty() {
                value *= chi as f64;
            } else {
                let s: C64 = (0..chi).map(|a| members.iter().map(|&v| weight(v, a)).product::<C64>()).sum();
                value *= s;
            }
        }
        value
    };

    let coefficients: Vec<C64> = perms
        .iter()
        .map(|sigma| {
            let s_inv = sigma.inverse();
            perms.iter().map(|tau| network(sigma, tau) * table.value(&tau.compose(&s_inv))).sum()
        })
        .collect();

    let digits = |mut x: usize| -> Vec<usize> {
        let mut out = vec![0; n];
        for k in (0..n).rev() {
            out[k] = x % phys_dim;
            x /= phys_dim;
        }
        out
    };
    let all_digits: Vec<Vec<usize>> = (0..dim).map(digits).collect();
    let mut rho = CMatrix::zeros(dim, dim);
    for (si, sigma) in perms.iter().enumerate() {
        if coefficients[si] == c(0.0, 0.0) {
            continue;
        }
        for (i, di) in all_digits.iter().enumerate() {
            for (j, dj) in all_digits.iter().enumerate() {
                if (0..n).all(|k| di[k] == dj[sigma.apply(k)]) {
                    rho[(i, j)] += coefficients[si];
                }
            }
        }
    }
    let trace = (0..dim).map(|i| rho[(i, i)].re).sum();
    Ok(ExactAverage { rho, trace })
}

/// `|ψ⟩⟨ψ|` for one ensemble member drawn from `stream`.
pub fn sample_projector(spec: &McAverageSpec, stream: RngStream) -> Result<CMatrix, WeingartenError> {
    let psi = sample_state(spec, stream)?;
    Ok(&psi * psi.adjoint())
}

fn sample_state(spec: &McAverageSpec, stream: RngStream) -> Result<CVector, WeingartenError> {
    let mut rng = stream.rng();
    let sites = if spec.homogeneous {
        SiteSet::Homogeneous(haar::random_site(spec.phys_dim, spec.chi, &mut rng))
    } else {
        SiteSet::PerSite((0..spec.n_sites).map(|_| haar::random_site(spec.phys_dim, spec.chi, &mut rng)).collect())
    };
    let mut mps = Mps::new(spec.n_sites, spec.boundary.clone(), sites)?;
    if spec.weighting == Weighting::Normalized {
        mps.normalize()?;
    }
    Ok(mps.dense_statevector()?)
}

/// Sample mean of projectors with entrywise standard errors. Sample `s`
/// draws from `stream.substream(s)` and partial sums are combined in sample
/// order, so the result does not depend on the thread count.
pub fn average_state_mc(spec: &McAverageSpec, samples: usize, stream: RngStream) -> Result<McAverage, WeingartenError> {
    assert!(samples >= 1, "need at least one sample");
    let dim = output_dim(spec.n_sites, spec.phys_dim)?;
    let chunks: Vec<(usize, usize)> = (0..samples).step_by(CHUNK).map(|lo| (lo, (lo + CHUNK).min(samples))).collect();
    type Partial = (CMatrix, DMatrix<f64>, DMatrix<f64>);
    let partials: Vec<Result<Partial, WeingartenError>> = chunks
        .par_iter()
        .map(|&(lo, hi)| {
            let mut sum = CMatrix::zeros(dim, dim);
            let mut sq_re = DMatrix::<f64>::zeros(dim, dim);
            let mut sq_im = DMatrix::<f64>::zeros(dim, dim);
            for s in lo..hi {
                let p = sample_projector(spec, stream.substream(s as u64))?;
                sum += &p;
                sq_re += p.map(|z| z.re * z.re);
                sq_im += p.map(|z| z.im * z.im);
            }
            Ok((sum, sq_re, sq_im))
        })
        .collect();
    let mut sum = CMatrix::zeros(dim, dim);
    let mut sq_re = DMatrix::<f64>::zeros(dim, dim);
    let mut sq_im = DMatrix::<f64>::zeros(dim, dim);
    for part in partials {
        let (s, r, i) = part?;
        sum += s;
        sq_re += r;
        sq_im += i;
    }
    let nf = samples as f64;
    let mean = sum.unscale(nf);
    let se = |sq: &DMatrix<f64>, part: fn(&C64) -> f64| {
        DMatrix::from_fn(dim, dim, |r, s| {
            if samples < 2 {
                return 0.0;
            }
            let m = part(&mean[(r, s)]);
            let var = ((sq[(r, s)] - nf * m * m) / (nf - 1.0)).max(0.0);
            (var / nf).sqrt()
        })
    };
    Ok(McAverage { stderr_re: se(&sq_re, |z| z.re), stderr_im: se(&sq_im, |z| z.im), mean, samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg;
    use crate::mps::basis_vector;
    use crate::weingarten::haar_moment;

    fn e0(chi: usize) -> CVector {
        basis_vector(chi, 0)
    }

    #[test]
    fn single_site_product_is_maximally_mixed() {
        let avg = average_state_exact(1, 2, 1, &e0(1), &e0(1)).unwrap();
        let want = linalg::identity(2).scale(0.5);
        assert!((&avg.rho - want).norm() < 1e-12);
        assert!((avg.trace - 1.0).abs() < 1e-12);
    }

    /// `E[ψ̃_i ψ̃_j*]` by expanding both amplitudes into bond sums and
    /// evaluating every moment separately.
    fn brute_force(n: usize, d: usize, chi: usize, phi_i: &CVector, phi_f: &CVector) -> CMatrix {
        let dim = d.pow(n as u32);
        let big = chi * d;
        let bonds = chi.pow((n + 1) as u32);
        let split = |mut x: usize, base: usize, len: usize| -> Vec<usize> {
            let mut out = vec![0; len];
            for k in (0..len).rev() {
                out[k] = x % base;
                x /= base;
            }
            out
        };
        let mut rho = CMatrix::zeros(dim, dim);
        for i in 0..dim {
            let pi = split(i, d, n);
            for j in 0..dim {
                let pj = split(j, d, n);
                let mut total = c(0.0, 0.0);
                for a in 0..bonds {
                    let al = split(a, chi, n + 1);
                    for b in 0..bonds {
                        let be = split(b, chi, n + 1);
                        let w = phi_i[al[0]] * phi_f[al[n]].conj() * phi_i[be[0]].conj() * phi_f[be[n]];
                        if w == c(0.0, 0.0) {
                            continue;
                        }
                        let mut rows = Vec::new();
                        let mut cols = Vec::new();
                        for k in 0..n {
                            rows.push(haar::joint_index(al[k + 1], pi[k], d));
                            cols.push(haar::joint_index(al[k], 0, d));
                        }
                        for k in 0..n {
                            rows.push(haar::joint_index(be[k + 1], pj[k], d));
                            cols.push(haar::joint_index(be[k], 0, d));
                        }
                        total += w * haar_moment(big, &rows, &cols).unwrap();
                    }
                }
                rho[(i, j)] = total;
            }
        }
        rho
    }

    #[test]
    fn contraction_matches_moment_expansion() {
        let mut rng = RngStream::new(3, 0).rng();
        let phi_i = haar::haar_state_from(2, &mut rng);
        let phi_f = haar::haar_state_from(2, &mut rng);
        for (a, b) in [(e0(2), e0(2)), (phi_i, phi_f)] {
            let exact = average_state_exact(2, 2, 2, &a, &b).unwrap();
            let brute = brute_force(2, 2, 2, &a, &b);
            assert!((&exact.rho - &brute).norm() < 1e-12);
        }
        let exact = average_state_exact(3, 2, 1, &e0(1), &e0(1)).unwrap();
        assert!((&exact.rho - brute_force(3, 2, 1, &e0(1), &e0(1))).norm() < 1e-12);
    }

    #[test]
    fn hermitian_and_positive() {
        let mut rng = RngStream::new(4, 0).rng();
        for (n, d, chi) in [(1, 2, 2), (2, 2, 2), (2, 3, 2), (3, 2, 2), (4, 2, 2), (3, 2, 3), (4, 2, 1), (2, 2, 4)] {
            let phi_i = haar::haar_state_from(chi, &mut rng);
            let phi_f = haar::haar_state_from(chi, &mut rng);
            let avg = average_state_exact(n, d, chi, &phi_i, &phi_f).unwrap();
            assert!(linalg::hermitian_defect(&avg.rho) < 1e-10, "{n} {d} {chi}");
            let ev = linalg::hermitian_eigenvalues(&avg.rho).unwrap();
            assert!(ev[0] > -1e-10, "{n} {d} {chi}: {}", ev[0]);
            assert!(avg.trace > 0.0);
        }
    }

    #[test]
    fn global_phase_of_boundary_cancels() {
        let mut rng = RngStream::new(5, 0).rng();
        let phi_i = haar::haar_state_from(2, &mut rng);
        let phi_f = haar::haar_state_from(2, &mut rng);
        let a = average_state_exact(3, 2, 2, &phi_i, &phi_f).unwrap();
        let rotated = phi_i.map(|z| z * C64::from_polar(1.0, 0.83));
        let b = average_state_exact(3, 2, 2, &rotated, &phi_f).unwrap();
        assert!((&a.rho - &b.rho).norm() < 1e-12);
    }

    #[test]
    fn exact_limits() {
        let v = e0(2);
        assert!(matches!(average_state_exact(5, 2, 2, &v, &v), Err(WeingartenError::OrderTooLarge { .. })));
        assert!(matches!(average_state_exact(4, 5, 2, &v, &v), Err(WeingartenError::OutputTooLarge { .. })));
        assert!(matches!(average_state_exact(2, 2, 3, &v, &v), Err(WeingartenError::DimensionMismatch(_))));
    }

    fn spec(n: usize, chi: usize, weighting: Weighting) -> McAverageSpec {
        McAverageSpec {
            n_sites: n,
            phys_dim: 2,
            chi,
            boundary: Boundary::open_default(chi),
            homogeneous: true,
            weighting,
        }
    }

    #[test]
    fn one_sample_is_its_projector() {
        let sp = spec(3, 2, Weighting::Normalized);
        let stream = RngStream::new(6, 0);
        let avg = average_state_mc(&sp, 1, stream).unwrap();
        let p = sample_projector(&sp, stream.substream(0)).unwrap();
        assert_eq!(avg.mean, p);
        assert!((linalg::trace(&p) - c(1.0, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn sampling_is_thread_count_independent() {
        let sp = spec(3, 2, Weighting::Raw);
        let stream = RngStream::new(7, 0);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| average_state_mc(&sp, 500, stream).unwrap());
        let b = four.install(|| average_state_mc(&sp, 500, stream).unwrap());
        assert_eq!(a.mean, b.mean);
        assert_eq!(a.stderr_re, b.stderr_re);
    }

    #[test]
    fn single_site_sampling_converges_to_identity_half() {
        let avg = average_state_mc(&spec(1, 1, Weighting::Normalized), 20_000, RngStream::new(8, 0)).unwrap();
        for r in 0..2 {
            for s in 0..2 {
                let want = if r == s { 0.5 } else { 0.0 };
                assert!((avg.mean[(r, s)].re - want).abs() <= 4.0 * avg.stderr_re[(r, s)].max(1e-12));
                assert!(avg.mean[(r, s)].im.abs() <= 4.0 * avg.stderr_im[(r, s)].max(1e-12));
            }
        }
    }
}
