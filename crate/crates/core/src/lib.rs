//! Nonnegative matrix factorization `V ≈ WH` by Krasnosel'skiĭ–Mann
//! fixed-point iteration of nonexpansive projected-gradient maps, with
//! multiplicative-update and alternating-least-squares baselines and a
//! seeded benchmark harness.
//!
//! ```
//! use kmnmf::{harness, solvers};
//!
//! let spec = harness::GeneratorSpec::new(20, 10, 3, 1.0, 7).unwrap();
//! let problem = solvers::NmfProblem::new(harness::generate_v(&spec), spec.rank).unwrap();
//! let (w0, h0) = harness::generate_init(&spec, 0);
//! let out = solvers::run(&problem, &solvers::SolverConfig::fixed_point(0.25), w0, h0).unwrap();
//! assert!(out.state.rms_value < out.trace[0].rms);
//! ```

pub mod error;
pub mod harness;
pub mod linalg;
pub mod matrix_io;
pub mod operators;
pub mod rng;
pub mod solvers;
pub mod verify;

pub use error::{NmfError, Result};
pub use linalg::Matrix;
pub use operators::StepPolicy;
pub use solvers::{Algorithm, IterationState, NmfProblem, SolverConfig, StopReason};
