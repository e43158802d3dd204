//! Cross-condition prediction of compressor 2f tonal noise with
//! domain-invariant partial least squares.
//!
//! - [`model`]: PLS / di-PLS fitting, prediction and latent projection.
//! - [`spectral`]: 2f band levels from multichannel waveforms.
//! - [`synthbench`]: synthetic multi-condition benchmark suites.
//! - [`evaluation`]: leave-one-condition-out evaluation and diagnostics.
//! - [`io`]: dataset CSV, manifests and waveform containers.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod io;
pub mod model;
pub mod spectral;
pub mod synthbench;

pub use dataset::DomainDataset;
pub use error::{Error, ErrorClass, Result};
pub use model::{fit, Centering, Domain, FitConfig, FittedModel};
