//! ERP classification on the covariance manifold with classical and
//! quantum-fidelity kernels.
//!
//! The crate implements a complete P300 detection pipeline:
//!
//! 1. temporal filtering and epoching ([`dsp`])
//! 2. supervised spatial filtering and super-trial covariance
//!    augmentation ([`erp_spatial`])
//! 3. Riemannian geometry on symmetric positive-definite matrices:
//!    distances, geometric means, tangent-space projection, and a
//!    minimum-distance-to-mean classifier ([`spd_manifold`])
//! 4. a statevector simulator for a second-order Pauli-Z feature map and
//!    the fidelity kernel it induces, exact or shot-sampled
//!    ([`quantum_kernel`])
//! 5. a kernel SVM trained by sequential minimal optimization ([`svm`])
//! 6. stratified cross-validation and reporting ([`evaluation`])
//! 7. subject storage and a synthetic generator ([`dataset_io`])
//!
//! Heavy loops are data-parallel when the default `parallel` feature is
//! enabled and sequential otherwise; results are bitwise identical either
//! way and independent of thread count.

// Negated float comparisons (`!(x > 0.0)`) are deliberate: they reject NaN,
// which the suggested `partial_cmp` rewrite hides. Index loops over qubits,
// channels, and samples mirror the usual notation for this material.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod dataset_io;
pub mod dsp;
pub mod error;
pub mod erp_spatial;
pub mod evaluation;
mod par;
pub mod quantum_kernel;
pub mod spd_manifold;
pub mod svm;
pub mod types;

pub use error::{Error, Result};
pub use types::Label;

pub use par::with_threads;
