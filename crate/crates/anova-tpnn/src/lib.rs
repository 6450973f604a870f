//! Identifiable functional ANOVA models built from tensor product neural
//! networks whose basis functions satisfy the sum-to-zero condition by
//! construction.
//!
//! The crate fits models of the form
//! `f(x) = beta0 + sum over subsets S of f_S(x_S)`, where each component
//! `f_S` is a linear combination of tensor products of sigmoid basis
//! functions that integrate to zero along every axis. Structural
//! sum-to-zero makes the decomposition unique, which in turn makes
//! per-component interpretation stable across refits and yields exact
//! SHAP attributions by summation.
//!
//! Entry points:
//! - [`data`]: CSV ingestion, rank transform to [0, 1], splitting,
//!   synthetic benchmark generators.
//! - [`basis`]: the sum-to-zero basis functions and their gradients.
//! - [`model`]: model assembly, evaluation, JSON persistence.
//! - [`train`]: mini-batch Adam with analytic gradients, validation-based
//!   epoch selection, monotone constraints.
//! - [`interpret`]: SHAP attribution, importance scores, stability
//!   scoring, purification, selection AUROC.
//! - [`synthbench`]: end-to-end synthetic experiments.
//! - [`cli`]: the command implementations behind the `anova-tpnn` binary.
//!
//! See the `examples/` directory for one runnable program per capability.

pub mod basis;
pub mod cli;
pub mod data;
pub mod error;
pub mod interpret;
pub mod model;
pub mod synthbench;
pub mod train;

pub use error::{Error, Result};
