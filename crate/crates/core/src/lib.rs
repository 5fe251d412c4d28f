//! # multiquery
//!
//! Multi-query analyses around arbitrary forward models: parameter studies,
//! global sensitivity analysis, Gaussian process surrogates, forward
//! uncertainty propagation, Bayesian calibration and optimization.
//!
//! A forward model is anything implementing [`models::Model`]: an
//! in-process function, an external executable driven through templated
//! input files ([`driver`], [`scheduler`]), a trained surrogate, or a
//! likelihood wrapping another model. Methods only ever see the model
//! contract, so they nest freely:
//!
//! ```text
//! method (SMC) ─▶ surrogate (GP) ─▶ likelihood ─▶ driver ─▶ external solver
//! ```
//!
//! Runs can be assembled in code or from a block-structured JSON
//! configuration ([`workflow`]); results are persisted as versioned JSON
//! plus CSV companions.
//!
//! ```
//! use multiquery::designs::sobol_design;
//! use multiquery::models::{register_function_model, Model};
//! use multiquery::parameters::{build_space, Distribution};
//!
//! let space = build_space([
//!     ("a", Distribution::uniform(0.0, 1.0)),
//!     ("b", Distribution::uniform(0.0, 1.0)),
//! ])?;
//! let design = sobol_design(&space, 8, 1)?;
//! let model = register_function_model("sum", Some(2))?;
//! let result = model.evaluate(&design)?;
//! assert_eq!(result.len(), 8);
//! # Ok::<(), multiquery::Error>(())
//! ```

pub mod designs;
pub mod driver;
pub mod error;
pub mod inference;
pub mod models;
pub mod optimize;
pub mod parameters;
pub mod scheduler;
pub mod sensitivity;
pub mod surrogate;
pub mod uq;
pub mod workflow;

pub use error::{Error, Result};
