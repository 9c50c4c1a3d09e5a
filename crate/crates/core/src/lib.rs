//! Simulation and analysis of the projected multi-agent subgradient method
//! when links between agents fail more often the further apart their
//! estimates are.
//!
//! The numerical core is generic over [`Scalar`] (`f32` or `f64`); the
//! `*64` aliases below fix the usual double-precision instantiation.

// `!(x > 0)` rejects NaN along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod communication;
mod error;
pub mod export;
pub mod geometry;
pub mod iteration;
pub mod matrix;
pub mod problems;
pub mod rng;
mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Point64 = geometry::Point<f64>;
pub type ConvexSet64 = geometry::ConvexSet<f64>;
pub type Objective64 = geometry::Objective<f64>;
pub type ProblemInstance64 = problems::ProblemInstance<f64>;
pub type CommModel64 = communication::CommModel<f64>;
pub type StepSchedule64 = iteration::StepSchedule<f64>;
pub type Trace64 = iteration::Trace<f64>;

pub type Point32 = geometry::Point<f32>;
pub type ProblemInstance32 = problems::ProblemInstance<f32>;
pub type CommModel32 = communication::CommModel<f32>;
pub type Trace32 = iteration::Trace<f32>;
