//! Reduced characteristic-operator evolution for continuously monitored
//! open quantum systems.
//!
//! The system is a truncated two-mode Fock space; the environment is a
//! `d`-channel boson field in a coherent state, monitored through commuting
//! observables (counting, homodyne, or mixtures). The joint characteristic
//! functional of the time-integrated output increments is obtained by
//! evolving a single trace-class operator under a time-dependent,
//! non-Hermitian generator and taking a trace at the end.
//!
//! ```
//! use std::sync::Arc;
//! use contmeas::evolution::{evolve, EvolutionConfig};
//! use contmeas::fock::{pure_density, TruncatedSpace};
//! use contmeas::measurement::dpo_observables;
//! use contmeas::*;
//! use num_complex::Complex64;
//!
//! # fn main() -> contmeas::Result<()> {
//! let split = [Complex64::new(1.0 / 3f64.sqrt(), 0.0); 3];
//! let p = DpoParams::from_splits(1.0, 0.2, 0.5, 0.0, 1.0, 0.0, split, split, 0.0, Complex64::new(0.6, 0.0))?;
//! let space = TruncatedSpace::new(6, 3);
//! let k = TestFunction::constant(vec![0.3, 0.0, 0.0], 0.0, 1.0)?;
//! let ctx = GeneratorContext::new(
//!     Arc::new(dpo_model(&p, space)?),
//!     Arc::new(dpo_observables(p.theta3, p.omega_c)),
//!     FieldProfile::dpo_laser(&p, f64::INFINITY)?,
//!     k,
//! )?;
//! let rho0 = pure_density(&space.basis(0, 0)?);
//! let phi = evolve(&ctx, &rho0, &EvolutionConfig::new(1.0))?.final_phi();
//! assert!(phi.norm() <= 1.0 + 1e-9);
//! # Ok(())
//! # }
//! ```
// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod config;
pub mod error;
pub mod evolution;
pub mod fock;
pub mod generator;
pub mod measurement;
pub mod model;
pub mod oracle;
pub mod statistics;
pub mod timefn;

pub use error::{Error, Result};
pub use fock::{DensityOperator, StateVector, SystemOperator, TruncatedSpace};
pub use generator::{apply_generator, b_of_lambda, k_of_lambda_r, FieldProfile, Generator, GeneratorContext};
pub use measurement::{ObservableKind, ObservableSpec, TestFunction};
pub use model::{check_dissipativity, dpo_model, DpoParams, ModelSpec};
pub use timefn::TimeFunction;
