//! Clustering-friendly representation learning: instance discrimination with
//! feature decorrelation (IDFD) and feature orthogonalization (IDFO).
//!
//! The crate covers the loss functions and their gradients, a small
//! feed-forward encoder trained with a memory bank, spectral and k-means
//! clustering, partition metrics, the temperature toy model, and an
//! experiment runner that writes CSV and JSON reports.

pub mod augment;
pub mod bank;
pub mod checkpoint;
pub mod config;
pub mod dataset;
pub mod encoder;
pub mod error;
pub mod experiment;
pub mod kmeans;
pub mod linalg;
pub mod losses;
pub mod metrics;
pub mod rng;
pub mod spectral;
pub mod temperature;
pub mod train;
