//! Nested Schur-complement block preconditioning for 6x6-block Jacobians of
//! fracture contact thermo-poromechanics.
//!
//! The pipeline regularizes the contact block by a right transformation,
//! eliminates it exactly, approximates the mechanics elimination with a
//! fixed-stress diagonal, drops the interface fluxes through their diagonal
//! and hands the remaining pressure-temperature system to CPR or System-AMG.
//! GMRES or FGMRES drives the preconditioned system.

pub mod contact;
pub mod error;
pub mod harness;
pub mod krylov;
pub mod operator;
pub mod precond;
pub mod problem;
pub mod pt;
pub mod schur;
pub mod sparse;
pub mod subsolvers;

pub use contact::{apply_transform, build_qr, form_s1, recover_solution, TransformedSystem};
pub use error::{Error, Result};
pub use krylov::{fgmres, gmres, KrylovConfig, SolveReport};
pub use operator::LinearOperator;
pub use precond::{solve, AssembledPreconditioner, PreconditionerConfig};
pub use problem::{generate, ContactState, GeneratedProblem, MaterialParams, ProblemSpec};
pub use pt::PtVariant;
pub use sparse::{Block, BlockLayout, CsrMatrix};
