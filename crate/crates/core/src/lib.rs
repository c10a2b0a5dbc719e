//! Streaming sparse PCA with Oja's algorithm.
//!
//! The crate covers spiked covariance models and samplers, a log-scale Oja
//! core, support estimation from Oja iterates, two-phase sparse PCA
//! pipelines, probability boosting, baselines, closed-form moment and tail
//! envelopes, and report helpers.
//!
//! ```
//! use oja_sparse::cov_models::make_single_spike;
//! use oja_sparse::sampling::{Family, SampleStream};
//! use oja_sparse::sparse_pca::pipeline_trunc_vec;
//! use oja_sparse::oja::default_learning_rate;
//!
//! let model = make_single_spike(50, 3, 3.0, None).unwrap();
//! let n = 4000;
//! let eta = default_learning_rate(n as f64, model.gap()).unwrap();
//! let mut data = SampleStream::new(&model, n, 1, Family::Gaussian);
//! let out = pipeline_trunc_vec(&mut data, &model, 3, eta, 1).unwrap();
//! assert!(out.sin2 < 0.5);
//! ```

pub mod baselines;
pub mod boost;
pub mod bounds;
pub mod cov_models;
pub mod error;
pub mod experiment;
pub mod oja;
pub mod report;
pub mod rng;
pub mod sampling;
pub mod sparse_pca;
pub mod support;
pub mod trials;

pub use error::{Error, Result};
