//! Tensor-network laboratory for feature-map quantum models.
//!
//! The crate compiles parametrized quantum circuits into coefficient matrix
//! product states over the trigonometric feature basis, analyzes their
//! entanglement and approximability, and trains basis-equivalent classical
//! MPS and kernel models on function-regression tasks.
//!
//! Modules follow the pipeline:
//!
//! - [`tensor`], [`mps`], [`mpo`]: dense tensor algebra and chain machinery.
//! - [`pauli`]: Pauli strings, transfer matrices, dense coefficient engine.
//! - [`encoding`]: pre-processing function families behind a name registry.
//! - [`circuits`]: circuit descriptions, operator builders, reference
//!   simulators.
//! - [`coeffs`]: extraction of coefficient MPSs from circuits.
//! - [`analysis`]: entropy profiles, truncation errors, Gram matrices,
//!   function distances.
//! - [`learn`]: feature maps, MPS regression, kernels, ridge solutions.
//! - [`datakit`]: dataset generation and ingestion.

pub mod analysis;
pub mod circuits;
pub mod coeffs;
pub mod datakit;
pub mod encoding;
pub mod error;
pub mod learn;
pub mod mpo;
pub mod mps;
pub mod pauli;
pub mod tensor;

pub use error::{Error, Result};
