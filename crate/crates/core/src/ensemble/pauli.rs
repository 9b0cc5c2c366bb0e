//! Pauli-string expansion of a reduced-state difference and the chain of
//! norm inequalities connecting observable deviations to trace distance.

use super::EnsembleError;
use crate::linalg::{self, CMatrix, NormKind};

/// `P_x = σ^{x_0} ⊗ ⋯ ⊗ σ^{x_{L−1}}` with `x` read in base 4, most
/// significant digit first, and `σ⁰ = I`.
pub fn pauli_string(x: usize, len: usize) -> CMatrix {
    let mut out = linalg::identity(1);
    for k in (0..len).rev() {
        let digit = (x / 4usize.pow(k as u32)) % 4;
        let p = match digit {
            0 => linalg::identity(2),
            1 => linalg::pauli_x(),
            2 => linalg::pauli_y(),
            _ => linalg::pauli_z(),
        };
        out = linalg::kron(&out, &p);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PauliChainReport {
    /// `max_x |p_x|` with `p_x = Tr(P_x Δρ)/2^L`.
    pub max_abs_p: f64,
    pub hs_norm: f64,
    pub trace_norm: f64,
    /// `|‖Δρ‖₂² − 2^L Σ p_x²|`.
    pub parseval_defect: f64,
    /// `2^L ‖Δρ‖₂`.
    pub hs_bound: f64,
    /// `4^{3L/2} max_x |Tr(P_x Δρ)|`.
    pub pauli_bound: f64,
    /// `‖Δρ‖₁ ≤ hs_bound ≤ pauli_bound`.
    pub chain_holds: bool,
}

fn check_density(rho: &CMatrix, dim: usize, name: &str) -> Result<(), EnsembleError> {
    if rho.nrows() != dim || rho.ncols() != dim {
        return Err(EnsembleError::NotDensityMatrix(format!(
            "{name} is {}x{}, expected {dim}x{dim}",
            rho.nrows(),
            rho.ncols()
        )));
    }
    let tr = linalg::trace(rho);
    if (tr.re - 1.0).abs() > 1e-8 || tr.im.abs() > 1e-8 {
        return Err(EnsembleError::NotDensityMatrix(format!("{name} has trace {tr}")));
    }
    let ev = linalg::hermitian_eigenvalues(rho).map_err(|e| EnsembleError::NotDensityMatrix(format!("{name}: {e}")))?;
    if ev[0] < -1e-8 {
        return Err(EnsembleError::NotDensityMatrix(format!("{name} has eigenvalue {}", ev[0])));
    }
    Ok(())
}

pub fn pauli_norm_chain_check(rho: &CMatrix, rho_bar: &CMatrix, len: usize) -> Result<PauliChainReport, EnsembleError> {
    let dim = 1usize << len;
    check_density(rho, dim, "rho")?;
    check_density(rho_bar, dim, "rho_bar")?;
    let delta = linalg::symmetrize(&(rho - rho_bar));
    let scale = dim as f64;
    let mut max_q = 0.0f64;
    let mut sum_p2 = 0.0;
    for x in 0..4usize.pow(len as u32) {
        // Tr(PΔ) is real for Hermitian P and Δ
        let q = linalg::trace(&(pauli_string(x, len) * &delta)).re;
        max_q = max_q.max(q.abs());
        sum_p2 += (q / scale).powi(2);
    }
    let hs_norm = linalg::norm(&delta, NormKind::Frobenius);
    let trace_norm = linalg::hermitian_trace_norm(&delta)?;
    let hs_bound = scale * hs_norm;
    let pauli_bound = 8f64.powi(len as i32) * max_q;
    let tol = 1e-12;
    Ok(PauliChainReport {
        max_abs_p: max_q / scale,
        hs_norm,
        trace_norm,
        parseval_defect: (hs_norm * hs_norm - scale * sum_p2).abs(),
        hs_bound,
        pauli_bound,
        chain_holds: trace_norm <= hs_bound + tol && hs_bound <= pauli_bound + tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    #[test]
    fn pauli_strings_orthogonal() {
        for l in 1..=2 {
            let n = 4usize.pow(l as u32);
            for x in 0..n {
                for y in 0..n {
                    let t = linalg::trace(&(pauli_string(x, l) * pauli_string(y, l)));
                    let want = if x == y { (1 << l) as f64 } else { 0.0 };
                    assert!((t - c(want, 0.0)).norm() < 1e-14);
                }
            }
        }
        assert_eq!(pauli_string(1, 2), linalg::kron(&linalg::identity(2), &linalg::pauli_x()));
    }

    #[test]
    fn equal_states() {
        let r = linalg::identity(2).scale(0.5);
        let rep = pauli_norm_chain_check(&r, &r, 1).unwrap();
        assert_eq!(rep.trace_norm, 0.0);
        assert_eq!(rep.max_abs_p, 0.0);
        assert!(rep.chain_holds);
    }

    #[test]
    fn pure_against_mixed_qubit() {
        let mut rho = CMatrix::zeros(2, 2);
        rho[(0, 0)] = c(1.0, 0.0);
        let rep = pauli_norm_chain_check(&rho, &linalg::identity(2).scale(0.5), 1).unwrap();
        assert!((rep.trace_norm - 1.0).abs() < 1e-14);
        assert!((rep.hs_norm - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-14);
        assert!((rep.hs_bound - std::f64::consts::SQRT_2).abs() < 1e-14);
        assert!(rep.parseval_defect < 1e-14);
        assert!(rep.chain_holds);
    }

    #[test]
    fn rejects_non_states() {
        let r = linalg::identity(2);
        assert!(matches!(pauli_norm_chain_check(&r, &r.scale(0.5), 1), Err(EnsembleError::NotDensityMatrix(_))));
        assert!(pauli_norm_chain_check(&r.scale(0.5), &linalg::identity(4).scale(0.25), 1).is_err());
    }
}
