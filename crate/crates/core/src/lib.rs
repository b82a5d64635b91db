//! Robust PCA with partial subspace knowledge.
//!
//! The central routine is [`solvers::solve_mod_pcp`], an inexact augmented
//! Lagrangian solver for modified principal component pursuit: given an
//! observation `M = L + S` and an orthonormal basis `G` that partially spans
//! the column space of `L`, it minimizes `||L_new||_* + λ||S||_1` subject to
//! `L_new + G Xᵀ + S = M`. Plain PCP is the special case of an empty `G`.
//!
//! Around the solver the crate provides incoherence diagnostics
//! ([`diagnostics`]), an executable dual-certificate construction
//! ([`certificate`]), seeded synthetic generators ([`datagen`]), a
//! piecewise-batch online pipeline ([`online`]) and an experiment harness
//! that writes CSV tables ([`harness`]).

pub mod certificate;
pub mod datagen;
pub mod diagnostics;
pub mod error;
pub mod harness;
pub mod io;
pub mod matrix;
pub mod model;
pub mod online;
pub mod rng;
pub mod solvers;

pub use error::{Error, ErrorClass, Result};
pub use matrix::{Mat, OrthoBasis, RankFloor, SupportSet, SvdResult};
pub use model::ProblemInstance;
pub use solvers::{AlmConfig, SolveResult};
