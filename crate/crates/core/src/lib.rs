//! SqueezeFit: low-rank metric learning by semidefinite "squeezing".
//!
//! Given labeled points `(x_i, y_i)` in `R^d`, the convex program
//!
//! ```text
//! minimize tr M   subject to   zᵀ M z ≥ Δ²  for every cross-class difference z,
//!                              0 ⪯ M ⪯ I
//! ```
//!
//! looks for a low-rank operator that keeps differently-labeled points at
//! least `Δ` apart. This crate provides first-order solvers for the program
//! and its hinge-penalized, nearest-neighbor-pruned and identity-relaxed
//! variants, dual-certificate verification of candidate optima, planted-model
//! generators for recovery experiments, and PCA/LDA/k-NN baselines.
//!
//! The modules mirror the pipeline:
//!
//! - [`spectral`]: dense symmetric linear algebra on [`SymMatrix`].
//! - [`dataset`]: labeled data, constraint sets, k-d trees and generators.
//! - [`solver`]: the program variants and their solvers.
//! - [`duality`]: dual objective, complementary slackness and certification.
//! - [`analysis`]: contact vectors, Δ-fixedness, SNR and statistical dimension.
//! - [`baselines`]: PCA, LDA and k-nearest-neighbor classification.
//! - [`cli`]: experiment orchestration behind the `squeezefit` binary.

pub mod analysis;
pub mod baselines;
pub mod cli;
pub mod dataset;
pub mod duality;
mod error;
pub mod solver;
pub mod spectral;

pub use dataset::{ConstraintSet, DifferencePair, KdTree, LabeledDataset, PlantedModel};
pub use duality::{CertificateReport, DualCertificate, Verdict};
pub use error::{Error, Result};
pub use solver::{Mode, SqueezeConfig, SqueezeResult};
pub use spectral::{EigenDecomposition, SymMatrix};
