//! Random matrix product state ensembles built by sequential Haar-unitary
//! generation, transfer-matrix contraction, exact Haar averaging through
//! Weingarten calculus, and typicality diagnostics over the ensemble.

pub mod ensemble;
pub mod experiments;
pub mod haar;
pub mod linalg;
pub mod mps;
pub mod weingarten;
