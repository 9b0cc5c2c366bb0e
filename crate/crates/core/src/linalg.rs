//! Dense complex matrix kernels, the three unitarily invariant norms, and
//! eigensolvers (Hermitian dense, general dense, and an implicit Krylov
//! solver for operators that are only available as a matrix-vector product).
//!
//! Layout: every matrix is a column-major [`nalgebra::DMatrix`]. Whenever a
//! χ×χ matrix is flattened into a χ² vector (`vec`), columns are stacked, so
//! `vec(A X B) = (Bᵀ ⊗ A) vec(X)`. The transfer matrices in [`crate::mps`]
//! are built against this convention.

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Largest dimension for which operator/trace norms go through a full SVD.
pub const DENSE_SVD_LIMIT: usize = 512;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not Hermitian: max |A - A†| = {asymmetry:e}")]
    NotHermitian { asymmetry: f64 },
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("eigensolver did not converge after {iterations} restarts ({converged} of {wanted} eigenvalues locked)")]
    NoConvergence { iterations: usize, converged: usize, wanted: usize },
    #[error("requested {k} eigenvalues of a {dim}-dimensional map")]
    TooManyEigenvalues { k: usize, dim: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NormKind {
    /// Largest singular value.
    Operator,
    /// `sqrt(Tr A†A)`.
    Frobenius,
    /// Sum of singular values.
    Trace,
}

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn pauli_x() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)])
}

pub fn pauli_y() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)])
}

pub fn pauli_z() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)])
}

/// Kronecker product with the standard block layout: block `(i, j)` of the
/// result is `a[(i, j)] * b`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Stack the columns of `x` into a vector.
pub fn vec_cols(x: &CMatrix) -> CVector {
    CVector::from_column_slice(x.as_slice())
}

/// Inverse of [`vec_cols`].
pub fn unvec_cols(v: &[C64], rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_column_slice(rows, cols, v)
}

pub fn trace(a: &CMatrix) -> C64 {
    a.diagonal().iter().sum()
}

pub fn is_finite(a: &CMatrix) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Largest entrywise modulus of `A - A†`.
pub fn hermitian_defect(a: &CMatrix) -> f64 {
    let n = a.nrows().min(a.ncols());
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn max_abs(a: &CMatrix) -> f64 {
    a.iter().fold(0.0f64, |m, z| m.max(z.norm()))
}

/// `(A + A†) / 2`.
pub fn symmetrize(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()).scale(0.5)
}

pub fn norm(a: &CMatrix, kind: NormKind) -> f64 {
    match kind {
        NormKind::Frobenius => a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt(),
        NormKind::Operator => {
            if a.nrows().max(a.ncols()) <= DENSE_SVD_LIMIT {
                singular_values(a).into_iter().fold(0.0, f64::max)
            } else {
                operator_norm_iterative(a, 1e-12, 10_000)
            }
        }
        NormKind::Trace => singular_values(a).into_iter().sum(),
    }
}

pub fn singular_values(a: &CMatrix) -> Vec<f64> {
    if a.is_empty() {
        return Vec::new();
    }
    a.singular_values().iter().copied().collect()
}

/// Power iteration on `A†A`; used for the operator norm of large matrices.
fn operator_norm_iterative(a: &CMatrix, tol: f64, max_iter: usize) -> f64 {
    let mut rng = ChaCha20Rng::seed_from_u64(0x5eed_0fa1);
    let mut v = CVector::from_fn(a.ncols(), |_, _| c(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)));
    v /= c(v.norm(), 0.0);
    let mut sigma = 0.0;
    for _ in 0..max_iter {
        let w = a.adjoint() * (a * &v);
        let lambda = w.norm();
        if lambda == 0.0 {
            return 0.0;
        }
        v = w / c(lambda, 0.0);
        let next = lambda.sqrt();
        if (next - sigma).abs() <= tol * next {
            return next;
        }
        sigma = next;
    }
    sigma
}

#[derive(Debug, Clone)]
pub struct HermitianEig {
    /// Ascending.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors as columns, matching `values`.
    pub vectors: Option<CMatrix>,
}

/// Hermitian tolerance used by [`hermitian_eig`], relative to the largest
/// entry once that exceeds one.
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Eigen-decomposition of a Hermitian matrix. The input is symmetrized before
/// decomposition; an asymmetry above [`HERMITIAN_TOL`] is rejected.
pub fn hermitian_eig(a: &CMatrix, want_vectors: bool) -> Result<HermitianEig, LinalgError> {
    if a.nrows() != a.ncols() {
        return Err(LinalgError::NotSquare { rows: a.nrows(), cols: a.ncols() });
    }
    let asymmetry = hermitian_defect(a);
    if asymmetry > HERMITIAN_TOL * max_abs(a).max(1.0) {
        return Err(LinalgError::NotHermitian { asymmetry });
    }
    let n = a.nrows();
    if n == 0 {
        return Ok(HermitianEig { values: Vec::new(), vectors: want_vectors.then(|| CMatrix::zeros(0, 0)) });
    }
    let eig = SymmetricEigen::new(symmetrize(a));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = want_vectors.then(|| CMatrix::from_fn(n, n, |r, col| eig.eigenvectors[(r, order[col])]));
    Ok(HermitianEig { values, vectors })
}

/// Eigenvalues of Hermitian `a`, ascending.
pub fn hermitian_eigenvalues(a: &CMatrix) -> Result<Vec<f64>, LinalgError> {
    hermitian_eig(a, false).map(|e| e.values)
}

/// `‖A‖₁` of a Hermitian matrix, via its spectrum.
pub fn hermitian_trace_norm(a: &CMatrix) -> Result<f64, LinalgError> {
    Ok(hermitian_eigenvalues(a)?.iter().map(|x| x.abs()).sum())
}

/// Sort by modulus, descending. Ties are broken by argument for a stable
/// ordering of conjugate pairs.
pub fn sort_by_modulus_desc(values: &mut [C64]) {
    values.sort_by(|a, b| b.norm().total_cmp(&a.norm()).then_with(|| b.arg().total_cmp(&a.arg())));
}

/// All eigenvalues of a general square complex matrix via the complex Schur
/// form, sorted by modulus descending.
pub fn general_eigenvalues(a: &CMatrix) -> Result<Vec<C64>, LinalgError> {
    if a.nrows() != a.ncols() {
        return Err(LinalgError::NotSquare { rows: a.nrows(), cols: a.ncols() });
    }
    if a.nrows() == 0 {
        return Ok(Vec::new());
    }
    let (_, t) = Schur::new(a.clone()).unpack();
    let mut values: Vec<C64> = t.diagonal().iter().copied().collect();
    sort_by_modulus_desc(&mut values);
    Ok(values)
}

/// Eigenvectors of an upper-triangular matrix by back substitution. Column `k`
/// is the eigenvector for `t[(k, k)]`.
fn triangular_eigenvectors(t: &CMatrix) -> CMatrix {
    let n = t.nrows();
    let scale = max_abs(t).max(1.0);
    let mut v = CMatrix::zeros(n, n);
    for k in 0..n {
        let lambda = t[(k, k)];
        v[(k, k)] = c(1.0, 0.0);
        for i in (0..k).rev() {
            let mut s = C64::new(0.0, 0.0);
            for j in (i + 1)..=k {
                s += t[(i, j)] * v[(j, k)];
            }
            let mut denom = t[(i, i)] - lambda;
            if denom.norm() < f64::EPSILON * scale {
                denom = c(f64::EPSILON * scale, 0.0);
            }
            v[(i, k)] = -s / denom;
        }
        let nrm = v.column(k).norm();
        v.column_mut(k).unscale_mut(nrm);
    }
    v
}

#[derive(Debug, Clone)]
pub struct KrylovOptions {
    /// Relative residual tolerance for locking an eigenpair.
    pub tol: f64,
    /// Restart cap; `None` selects `10 · dim`.
    pub max_restarts: Option<usize>,
    /// Krylov subspace size per restart; `None` selects `max(2k + 8, 24)`.
    pub krylov_dim: Option<usize>,
    /// Seed for the start vector.
    pub seed: u64,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_restarts: None, krylov_dim: None, seed: 0x6b72_796c }
    }
}

fn project_out(q: &[CVector], w: &mut CVector) {
    // two rounds of classical Gram-Schmidt
    for _ in 0..2 {
        for qi in q {
            let coef = qi.dotc(w);
            w.axpy(-coef, qi, c(1.0, 0.0));
        }
    }
}

/// `k` largest-modulus eigenvalues of a linear map given only by its action
/// `apply(x, y)` (writes `y = M x`), sorted by modulus descending.
///
/// Explicitly restarted Arnoldi with locking: converged Ritz vectors are
/// appended to a partial Schur basis `Q`, and later cycles run on the deflated
/// operator `(I - QQ†) M` restricted to the complement of `Q`.
pub fn implicit_top_eigs<F>(dim: usize, apply: F, k: usize, opts: &KrylovOptions) -> Result<Vec<C64>, LinalgError>
where
    F: Fn(&[C64], &mut [C64]),
{
    if k > dim {
        return Err(LinalgError::TooManyEigenvalues { k, dim });
    }
    if k == 0 {
        return Ok(Vec::new());
    }
    let max_restarts = opts.max_restarts.unwrap_or(10 * dim).max(1);
    let base_m = opts.krylov_dim.unwrap_or((2 * k + 8).max(24));

    let mut rng = ChaCha20Rng::seed_from_u64(opts.seed);
    let mut random_vector = |q: &[CVector]| {
        let mut v = CVector::from_fn(dim, |_, _| c(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)));
        project_out(q, &mut v);
        let n = v.norm();
        v / c(n, 0.0)
    };

    let matvec = |x: &CVector| {
        let mut y = CVector::zeros(dim);
        apply(x.as_slice(), y.as_mut_slice());
        y
    };

    let mut locked: Vec<CVector> = Vec::new();
    let mut values: Vec<C64> = Vec::new();
    let mut start = random_vector(&locked);

    for _restart in 0..max_restarts {
        let free = dim - locked.len();
        let m = base_m.min(free);
        // Arnoldi on the deflated operator.
        let mut basis: Vec<CVector> = vec![start.clone()];
        let mut h = CMatrix::zeros(m + 1, m);
        let mut steps = 0;
        for j in 0..m {
            let mut w = matvec(&basis[j]);
            project_out(&locked, &mut w);
            for _ in 0..2 {
                for (i, b) in basis.iter().enumerate() {
                    let coef = b.dotc(&w);
                    h[(i, j)] += coef;
                    w.axpy(-coef, b, c(1.0, 0.0));
                }
            }
            steps = j + 1;
            let beta = w.norm();
            if beta <= 1e-13 * (1.0 + h.column(j).norm()) {
                // invariant subspace: Ritz values are exact
                break;
            }
            h[(j + 1, j)] = c(beta, 0.0);
            if j + 1 == m {
                break;
            }
            basis.push(w / c(beta, 0.0));
        }

        let hm = h.view((0, 0), (steps, steps)).into_owned();
        let (z, t) = Schur::new(hm).unpack();
        let tv = triangular_eigenvectors(&t);
        let ritz_coeffs = &z * &tv;
        let mut order: Vec<usize> = (0..steps).collect();
        order.sort_by(|&a, &b| t[(b, b)].norm().total_cmp(&t[(a, a)].norm()));

        let wanted = k - values.len();
        let mut restart_vec = CVector::zeros(dim);
        for (rank, &idx) in order.iter().take(wanted).enumerate() {
            let theta = t[(idx, idx)];
            let coeffs = ritz_coeffs.column(idx);
            let mut y = CVector::zeros(dim);
            for (i, b) in basis.iter().take(steps).enumerate() {
                y.axpy(coeffs[i], b, c(1.0, 0.0));
            }
            project_out(&locked, &mut y);
            let ny = y.norm();
            if ny == 0.0 {
                continue;
            }
            y /= c(ny, 0.0);
            let mut r = matvec(&y);
            project_out(&locked, &mut r);
            r.axpy(-theta, &y, c(1.0, 0.0));
            let resid = r.norm();
            if rank == 0 && resid <= opts.tol * theta.norm().max(1.0) {
                // Only the dominant pair is locked; the next cycle re-sorts the
                // remaining spectrum on the deflated operator.
                values.push(theta);
                locked.push(y);
            } else {
                restart_vec += y;
            }
        }

        if values.len() == k {
            sort_by_modulus_desc(&mut values);
            return Ok(values);
        }
        if locked.len() == dim {
            break;
        }
        project_out(&locked, &mut restart_vec);
        let nr = restart_vec.norm();
        start = if nr > 1e-12 { restart_vec / c(nr, 0.0) } else { random_vector(&locked) };
    }
    Err(LinalgError::NoConvergence { iterations: max_restarts, converged: values.len(), wanted: k })
}

/// Dense matrix of a linear map on `dim`-vectors, one column per basis vector.
pub fn materialize<F>(dim: usize, apply: F) -> CMatrix
where
    F: Fn(&[C64], &mut [C64]),
{
    let mut m = CMatrix::zeros(dim, dim);
    let mut e = vec![C64::new(0.0, 0.0); dim];
    let mut y = vec![C64::new(0.0, 0.0); dim];
    for j in 0..dim {
        e[j] = c(1.0, 0.0);
        y.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
        apply(&e, &mut y);
        m.column_mut(j).copy_from_slice(&y);
        e[j] = C64::new(0.0, 0.0);
    }
    m
}

/// Below this inner dimension the direct complex product is faster.
const SPLIT_GEMM_MIN: usize = 24;

/// `A B`. Large products go through four real GEMMs on the real and
/// imaginary parts, which run far faster than the generic complex kernel.
pub fn matmul(a: &CMatrix, b: &CMatrix) -> CMatrix {
    assert_eq!(a.ncols(), b.nrows(), "matmul dimension mismatch");
    if a.nrows().min(a.ncols()).min(b.ncols()) < SPLIT_GEMM_MIN {
        return a * b;
    }
    let (ar, ai) = (a.map(|z| z.re), a.map(|z| z.im));
    let (br, bi) = (b.map(|z| z.re), b.map(|z| z.im));
    let re = &ar * &br - &ai * &bi;
    let im = &ar * &bi + &ai * &br;
    CMatrix::from_fn(a.nrows(), b.ncols(), |r, s| C64::new(re[(r, s)], im[(r, s)]))
}

/// `exp(i A)` for Hermitian `A`.
pub fn expi_hermitian(a: &CMatrix) -> Result<CMatrix, LinalgError> {
    let eig = hermitian_eig(a, true)?;
    let v = eig.vectors.expect("vectors requested");
    let phases = CVector::from_iterator(eig.values.len(), eig.values.iter().map(|&l| C64::from_polar(1.0, l)));
    Ok(&v * CMatrix::from_diagonal(&phases) * v.adjoint())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_matrix(rng: &mut impl Rng, r: usize, cols: usize) -> CMatrix {
        CMatrix::from_fn(r, cols, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    fn random_unitary(rng: &mut impl Rng, n: usize) -> CMatrix {
        let g = random_matrix(rng, n, n);
        g.qr().q()
    }

    fn assert_close(a: &CMatrix, b: &CMatrix, tol: f64) {
        assert_eq!(a.shape(), b.shape());
        let d = max_abs(&(a - b));
        assert!(d < tol, "max deviation {d:e} > {tol:e}");
    }

    #[test]
    fn kron_identity_and_scalar() {
        assert_close(&kron(&identity(2), &identity(2)), &identity(4), 0.0 + 1e-300);
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let a = random_matrix(&mut rng, 3, 2);
        let two = CMatrix::from_element(1, 1, c(2.0, 0.0));
        assert_close(&kron(&two, &a), &a.scale(2.0), 1e-15);
    }

    #[test]
    fn kron_mixed_product() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let (a, b, cm, d) = (
            random_matrix(&mut rng, 2, 2),
            random_matrix(&mut rng, 2, 2),
            random_matrix(&mut rng, 2, 2),
            random_matrix(&mut rng, 2, 2),
        );
        let lhs = kron(&a, &b) * kron(&cm, &d);
        let rhs = kron(&(&a * &cm), &(&b * &d));
        assert_close(&lhs, &rhs, 1e-12);
    }

    #[test]
    fn kron_block_layout() {
        let a = CMatrix::from_row_slice(1, 2, &[c(1., 0.), c(2., 0.)]);
        let b = CMatrix::from_row_slice(2, 1, &[c(3., 0.), c(5., 0.)]);
        let k = kron(&a, &b);
        assert_eq!(k.shape(), (2, 2));
        assert_eq!(k[(0, 1)], c(6., 0.));
        assert_eq!(k[(1, 0)], c(5., 0.));
    }

    #[test]
    fn vec_identity_matches_layout() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let (a, x, b) = (random_matrix(&mut rng, 3, 3), random_matrix(&mut rng, 3, 3), random_matrix(&mut rng, 3, 3));
        let lhs = vec_cols(&(&a * &x * &b));
        let rhs = kron(&b.transpose(), &a) * vec_cols(&x);
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn norms_of_identity_and_diagonal() {
        let i5 = identity(5);
        assert!((norm(&i5, NormKind::Operator) - 1.0).abs() < 1e-14);
        assert!((norm(&i5, NormKind::Frobenius) - 5f64.sqrt()).abs() < 1e-14);
        assert!((norm(&i5, NormKind::Trace) - 5.0).abs() < 1e-13);
        let d = CMatrix::from_diagonal(&CVector::from_vec(vec![c(3., 0.), c(-4., 0.)]));
        assert!((norm(&d, NormKind::Operator) - 4.0).abs() < 1e-14);
        assert!((norm(&d, NormKind::Frobenius) - 5.0).abs() < 1e-14);
        assert!((norm(&d, NormKind::Trace) - 7.0).abs() < 1e-13);
    }

    #[test]
    fn iterative_operator_norm_agrees_with_svd() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let a = random_matrix(&mut rng, 40, 40);
        let svd = singular_values(&a).into_iter().fold(0.0, f64::max);
        let it = operator_norm_iterative(&a, 1e-13, 100_000);
        assert!((svd - it).abs() < 1e-8 * svd, "{svd} vs {it}");
    }

    #[test]
    fn trace_holder_inequality_on_random_pairs() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        for _ in 0..200 {
            let a = random_matrix(&mut rng, 6, 6);
            let b = random_matrix(&mut rng, 6, 6);
            let lhs = trace(&(&a * &b)).norm();
            let rhs = norm(&a, NormKind::Operator) * norm(&b, NormKind::Trace);
            assert!(lhs <= rhs * (1.0 + 1e-10), "{lhs} > {rhs}");
        }
    }

    #[test]
    fn norms_are_ordered_and_unitarily_invariant() {
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        for trial in 0..1000 {
            let n = 1 + trial % 7;
            let a = random_matrix(&mut rng, n, n);
            let op = norm(&a, NormKind::Operator);
            let fro = norm(&a, NormKind::Frobenius);
            let tr = norm(&a, NormKind::Trace);
            assert!(op <= fro * (1.0 + 1e-12) && fro <= tr * (1.0 + 1e-12));
            if trial % 10 == 0 {
                let u = random_unitary(&mut rng, n);
                let v = random_unitary(&mut rng, n);
                let uav = &u * &a * &v;
                for kind in [NormKind::Operator, NormKind::Frobenius, NormKind::Trace] {
                    let x = norm(&a, kind);
                    assert!((norm(&uav, kind) - x).abs() < 1e-10 * x.max(1.0));
                }
            }
        }
    }

    #[test]
    fn hermitian_eig_known_spectra() {
        let d = CMatrix::from_diagonal(&CVector::from_vec(vec![c(0.8, 0.), c(0.2, 0.)]));
        let v = hermitian_eigenvalues(&d).unwrap();
        assert!((v[0] - 0.2).abs() < 1e-15 && (v[1] - 0.8).abs() < 1e-15);
        let v = hermitian_eigenvalues(&pauli_x()).unwrap();
        assert!((v[0] + 1.0).abs() < 1e-14 && (v[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn hermitian_eig_matches_quadratic_formula() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        for _ in 0..100 {
            let a: f64 = rng.random_range(-2.0..2.0);
            let d: f64 = rng.random_range(-2.0..2.0);
            let b = c(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            let m = CMatrix::from_row_slice(2, 2, &[c(a, 0.), b, b.conj(), c(d, 0.)]);
            let disc = (((a - d) / 2.0).powi(2) + b.norm_sqr()).sqrt();
            let mid = (a + d) / 2.0;
            let v = hermitian_eigenvalues(&m).unwrap();
            assert!((v[0] - (mid - disc)).abs() < 1e-12);
            assert!((v[1] - (mid + disc)).abs() < 1e-12);
        }
    }

    #[test]
    fn hermitian_eig_reconstructs() {
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        let g = random_matrix(&mut rng, 9, 9);
        let h = symmetrize(&g);
        let e = hermitian_eig(&h, true).unwrap();
        let v = e.vectors.unwrap();
        let lam = CMatrix::from_diagonal(&CVector::from_iterator(9, e.values.iter().map(|&x| c(x, 0.))));
        let err = norm(&(&h - &v * lam * v.adjoint()), NormKind::Frobenius);
        assert!(err < 1e-9 * norm(&h, NormKind::Frobenius));
        assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn hermitian_eig_rejects_asymmetric() {
        let m = CMatrix::from_row_slice(2, 2, &[c(1., 0.), c(1., 0.), c(0., 0.), c(1., 0.)]);
        assert!(matches!(hermitian_eig(&m, false), Err(LinalgError::NotHermitian { .. })));
    }

    #[test]
    fn implicit_eigs_identity_and_diagonal() {
        let id = |x: &[C64], y: &mut [C64]| y.copy_from_slice(x);
        let v = implicit_top_eigs(4, id, 2, &KrylovOptions::default()).unwrap();
        assert!(v.iter().all(|z| (z - c(1.0, 0.0)).norm() < 1e-12));

        let diag = [1.0, 0.5, 0.1];
        let f = |x: &[C64], y: &mut [C64]| {
            for i in 0..3 {
                y[i] = x[i] * diag[i];
            }
        };
        let v = implicit_top_eigs(3, f, 2, &KrylovOptions::default()).unwrap();
        assert!((v[0] - c(1.0, 0.0)).norm() < 1e-10);
        assert!((v[1] - c(0.5, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn implicit_eigs_match_dense_on_nonnormal_matrix() {
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let n = 60;
        let a = random_matrix(&mut rng, n, n);
        let dense = general_eigenvalues(&a).unwrap();
        let apply = |x: &[C64], y: &mut [C64]| {
            let r = &a * CVector::from_column_slice(x);
            y.copy_from_slice(r.as_slice());
        };
        let got = implicit_top_eigs(n, apply, 4, &KrylovOptions::default()).unwrap();
        for (g, d) in got.iter().zip(dense.iter()) {
            assert!((g.norm() - d.norm()).abs() < 1e-8, "{g} vs {d}");
        }
        for g in &got {
            assert!(dense.iter().any(|d| (d - g).norm() < 1e-8), "{g} not in dense spectrum");
        }
    }

    #[test]
    fn implicit_eigs_rejects_large_k() {
        let id = |x: &[C64], y: &mut [C64]| y.copy_from_slice(x);
        assert!(matches!(
            implicit_top_eigs(2, id, 3, &KrylovOptions::default()),
            Err(LinalgError::TooManyEigenvalues { .. })
        ));
    }

    #[test]
    fn expi_of_hermitian_is_unitary() {
        let mut rng = ChaCha20Rng::seed_from_u64(10);
        let h = symmetrize(&random_matrix(&mut rng, 5, 5));
        let u = expi_hermitian(&h).unwrap();
        assert_close(&(u.adjoint() * &u), &identity(5), 1e-12);
    }
}
