// index loops over fixed tensor ranks read better than iterator chains here
#![allow(clippy::needless_range_loop)]

//! Numerical machinery for a probabilistic compactness criterion on closed
//! 2-D Riemannian manifolds: the curvature floor rho^h, h-Brownian motion
//! and its Hessian flow, Feynman-Kac semigroups and the potential kernel,
//! and a weighted spectral engine that cross-validates every Monte Carlo
//! estimate deterministically. The `myers` binary drives everything from a
//! JSON config.

pub mod config;
pub mod criterion;
pub mod error;
pub mod expr;
pub mod flows;
pub mod geometry;
pub mod linalg;
pub mod report;
pub mod sde;
pub mod spectral;
pub mod validate;

pub use error::{MyersError, Result};
