//! Quasiconformal-style extension machinery: dyadic piecewise-affine
//! extensions of boundary homeomorphisms, their weighted Sobolev energies,
//! and the snowflake construction used as a test case.

// `!(x > 0.0)` is used on purpose so NaN lands in the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod boundary;
pub mod disk;
pub mod energy;
pub mod error;
pub mod export;
pub mod extension;
pub mod geometry;
pub mod par;
pub mod quadrature;
pub mod snowflake;

pub use boundary::{CircleMap, Interval, MonotoneMap};
pub use error::{Error, Result};
pub use extension::{
    apex, build_cell, build_extension, build_extension_with, check_homeomorphism, DyadicInterval,
    ExtensionMesh, HomeomorphismReport, PentagonCell,
};
pub use geometry::{AffineFunctional, AffineMap, Point, Triangle};
pub use par::Parallelism;
pub use snowflake::{eval_g, ChoiceOracle, SnowflakeSpec, SnowflakeState};
