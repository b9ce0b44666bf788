//! Quantum embedding kernels on a statevector simulator.
//!
//! A parameterized ansatz maps a feature vector to a quantum state; the
//! kernel between two points is the squared overlap of their states. The
//! ansatz parameters can be trained to maximize kernel-target alignment, and
//! the resulting Gram matrices feed a precomputed-kernel SVM.

pub mod circuit;
pub mod datasets;
pub mod error;
pub mod experiment;
pub mod kernel;
pub mod linalg;
pub mod statesim;
pub mod svm;
pub mod train;

pub use circuit::{AnsatzSpec, Architecture, Circuit, GateCounts};
pub use error::{Error, Result};
pub use kernel::{Embedding, KernelMatrix};
