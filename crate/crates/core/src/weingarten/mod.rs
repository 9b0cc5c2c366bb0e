//! Haar moments over `U(d)` by Weingarten calculus, and the exact
//! ensemble-average state of homogeneous open-boundary random MPS.

mod average;
mod perm;

pub use average::{
    average_state_exact, average_state_mc, sample_projector, ExactAverage, McAverage, McAverageSpec, Weighting,
    EXACT_MAX_ORDER, MAX_AVERAGE_DIM,
};
pub use perm::{factorial, Permutation};

use nalgebra::DMatrix;
use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex, OnceLock};
use thiserror::Error;

use crate::linalg::{c, C64};

/// Largest moment order with a tabulated Weingarten function (`6! = 720`).
pub const MAX_ORDER: usize = 6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WeingartenError {
    #[error("moment order {order} exceeds the supported maximum {max}")]
    OrderTooLarge { order: usize, max: usize },
    #[error("index tuples must have equal even length, got {rows} and {cols}")]
    BadIndexTuple { rows: usize, cols: usize },
    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("output dimension {dim} exceeds the cap {cap}")]
    OutputTooLarge { dim: usize, cap: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    Mps(#[from] crate::mps::MpsError),
}

/// `Wg(π, d)` for every `π ∈ S_N`, indexed by lexicographic rank.
#[derive(Debug, Clone, PartialEq)]
pub struct WeingartenTable {
    order: usize,
    dim: usize,
    values: Vec<f64>,
    /// Set when `d < N`: the Gram matrix is singular and the table holds
    /// its Moore–Penrose pseudo-inverse.
    pseudo_inverse: bool,
}

/// `G_{σ,τ} = d^{#cycles(στ⁻¹)}` over `S_N` in lexicographic order.
pub fn gram_matrix(order: usize, dim: usize) -> DMatrix<f64> {
    let perms = Permutation::all(order);
    let d = dim as f64;
    DMatrix::from_fn(perms.len(), perms.len(), |r, s| {
        d.powi(perms[r].compose(&perms[s].inverse()).cycle_count() as i32)
    })
}

/// Invert the Gram matrix of `S_N` at dimension `d`.
pub fn weingarten_function(order: usize, dim: usize) -> Result<WeingartenTable, WeingartenError> {
    if order > MAX_ORDER {
        return Err(WeingartenError::OrderTooLarge { order, max: MAX_ORDER });
    }
    assert!(dim >= 1, "unitary dimension must be positive");
    let gram = gram_matrix(order, dim);
    let eig = gram.symmetric_eigen();
    let top = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let cut = 1e-9 * top;
    let inv_vals = eig.eigenvalues.map(|v| if v.abs() > cut { 1.0 / v } else { 0.0 });
    let vecs = &eig.eigenvectors;
    // only the column of the identity is needed: Wg(π) = W[π, id]
    let id_row = vecs.row(0).transpose().component_mul(&inv_vals);
    let column = vecs * id_row;
    Ok(WeingartenTable { order, dim, values: column.iter().copied().collect(), pseudo_inverse: dim < order })
}

type TableCache = Mutex<HashMap<(usize, usize), Arc<WeingartenTable>>>;

/// Shared table for `(N, d)`, built once per process.
pub fn cached_table(order: usize, dim: usize) -> Result<Arc<WeingartenTable>, WeingartenError> {
    static CACHE: OnceLock<TableCache> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(t) = cache.lock().expect("table cache poisoned").get(&(order, dim)) {
        return Ok(t.clone());
    }
    let table = Arc::new(weingarten_function(order, dim)?);
    let mut guard = cache.lock().expect("table cache poisoned");
    Ok(guard.entry((order, dim)).or_insert(table).clone())
}

impl WeingartenTable {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_pseudo_inverse(&self) -> bool {
        self.pseudo_inverse
    }

    pub fn value(&self, perm: &Permutation) -> f64 {
        assert_eq!(perm.len(), self.order, "permutation degree differs from table order");
        self.values[perm.rank()]
    }

    pub fn value_by_rank(&self, rank: usize) -> f64 {
        self.values[rank]
    }

    /// One value per cycle type; the table is a class function so every
    /// member of the class holds the same number.
    pub fn by_cycle_type(&self) -> BTreeMap<Vec<usize>, f64> {
        Permutation::all(self.order).into_iter().map(|p| (p.cycle_type(), self.values[p.rank()])).collect()
    }

    /// `W_{σ,τ} = Wg(στ⁻¹)`.
    pub fn matrix(&self) -> DMatrix<f64> {
        let perms = Permutation::all(self.order);
        DMatrix::from_fn(perms.len(), perms.len(), |r, s| self.value(&perms[r].compose(&perms[s].inverse())))
    }
}

/// `E[U_{a₁b₁}⋯U_{a_Nb_N} Ū_{c₁e₁}⋯Ū_{c_Ne_N}]` over Haar `U(d)`, with
/// `rows = (a₁…a_N, c₁…c_N)` and `cols = (b₁…b_N, e₁…e_N)`.
pub fn haar_moment(dim: usize, rows: &[usize], cols: &[usize]) -> Result<C64, WeingartenError> {
    if rows.len() != cols.len() || !rows.len().is_multiple_of(2) {
        return Err(WeingartenError::BadIndexTuple { rows: rows.len(), cols: cols.len() });
    }
    if let Some(&index) = rows.iter().chain(cols).find(|&&v| v >= dim) {
        return Err(WeingartenError::IndexOutOfRange { index, dim });
    }
    let order = rows.len() / 2;
    if order > MAX_ORDER {
        return Err(WeingartenError::OrderTooLarge { order, max: MAX_ORDER });
    }
    let table = cached_table(order, dim)?;
    let (a, cc) = rows.split_at(order);
    let (b, e) = cols.split_at(order);
    let matching = |x: &[usize], y: &[usize]| -> Vec<Permutation> {
        Permutation::all(order).into_iter().filter(|p| (0..order).all(|k| x[k] == y[p.apply(k)])).collect()
    };
    let sigmas = matching(a, cc);
    let taus = matching(b, e);
    let mut total = 0.0;
    for s in &sigmas {
        let s_inv = s.inverse();
        for t in &taus {
            total += table.value(&t.compose(&s_inv));
        }
    }
    Ok(c(total, 0.0))
}
