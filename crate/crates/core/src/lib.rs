//! Parallel transport for vector bundles with connection.
//!
//! The crate computes transport maps from connection 1-forms (by a fixed-step
//! Runge–Kutta solve and by ordered products of exponentials), recovers
//! connection forms from black-box transport, glues chart-local data along
//! a Čech cocycle, and evaluates oriented 1-dimensional bordism words with
//! the resulting field theory.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bordism;
pub mod connection;
pub mod descent;
pub mod error;
pub mod experiment;
pub mod matcore;
pub mod presets;
pub mod reconstruct;
pub mod transport;
pub mod verify;

pub use error::{Error, Result};
pub use matcore::{EndMap, Field, GaugeMap, Norm, Scalar};
