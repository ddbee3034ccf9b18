//! Envelope-based modal damping estimation.
//!
//! The crate synthesizes modal impulse responses with known ground truth,
//! fits the width parameter of nine envelope-estimation windows/filters
//! against those ground-truth envelopes, estimates damping ratios from
//! ensembles of noisy, misaligned recordings, and benchmarks the result
//! against frequency-domain identification baselines (peak picking,
//! SDOF local fit, Yoshida three-point, LSRF and pLSCF).
//!
//! Module map:
//!
//! - [`signal_model`]: modal synthesis, observation model, datasets
//! - [`spectral`]: DFT contract, fast circular filtering, FRF construction
//! - [`kernels`]: the nine envelope estimators and envelope extraction
//! - [`segment`]: evaluation-segment selection and the envelope MSE
//! - [`optimizer`]: multi-start width fitting and the fit registry
//! - [`estimator`]: impact detection, alignment/averaging, log-linear fit
//! - [`baselines`]: frequency-domain comparison methods
//! - [`harness`]: scenario sweeps, interference study, CLI plumbing

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod kernels;
pub mod linalg;
pub mod optimizer;
pub mod rng;
pub mod segment;
pub mod signal_model;
pub mod spectral;

pub use error::{Error, Result};
pub use estimator::{DampingEstimate, EnsembleConfig};
pub use kernels::{Envelope, KernelForm, KernelSpec};
pub use segment::SegmentPolicy;
pub use signal_model::{ModalMode, ModalSystem, TimeRecord};
pub use spectral::{ComplexSpectrum, FrfData};

pub use num_complex::Complex64;
