//! Safety filtering of reference controls with dynamic high-order control
//! barrier functions.
//!
//! The crate is `no_std` (it needs `alloc`) and contains everything that is
//! pure computation: the double-integrator ego model, obstacle motion
//! scripts, oriented-rectangle geometry, barrier constraints, the two-variable
//! QP safety modifier, reference-control providers, the closed-loop
//! simulator with its experiment presets, and trajectory metrics.
//!
//! File formats and the command-line front end live in the `dhocbf` crate.

#![no_std]

extern crate alloc;

pub mod barrier;
pub mod dynamics;
mod error;
pub mod geometry;
pub mod math;
pub mod metrics;
pub mod oracle;
pub mod planner;
pub mod safety_filter;
pub mod simulator;

pub use error::Error;
pub use math::Vec2;

pub type Result<T, E = Error> = core::result::Result<T, E>;
