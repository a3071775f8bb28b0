//! Ginzburg-Landau approximation of the half-harmonic map heat flow.
//!
//! The flow of a map `u: R^m x (0,T) -> N`, `N` a closed manifold in `R^l`,
//! is realised through its degenerate parabolic extension to the upper half
//! space with weight `y^a`, `a = 1 - 2s`, and a penalised nonlinear boundary
//! condition. The crate provides the discrete extension, the penalised flow
//! (explicit and minimizing-movement schemes), the backward-kernel
//! monotonicity machinery, regularity diagnostics and a Green-function lab
//! for the linearised oblique problem.

pub mod cli;
pub mod config;
pub mod cosine;
pub mod diagnostics;
pub mod error;
pub mod extension;
pub mod flow;
pub mod greenlab;
pub mod grid;
pub mod io;
pub mod kernels;
pub mod linalg;
pub mod manifold;
pub mod profiles;
pub mod special;

pub use error::{Error, Result};
pub use grid::{Field, GridConfig, HalfSpaceGrid, Trace};
pub use manifold::{PenaltyParams, TargetManifold};
