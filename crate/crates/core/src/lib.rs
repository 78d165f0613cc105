//! Simulated vibrissal tactile arrays and the perception stack that runs on
//! them.
//!
//! The crate is organised the way data flows through an experiment:
//!
//! * [`sim`] models static and whisking whisker arrays, rod contact and the
//!   camera frames seen by the internal marker camera.
//! * [`pipeline`] turns frames back into ordered marker deflection series.
//! * [`perception`] trains histogram likelihood models over location classes
//!   and cross-validates them.
//! * [`active`] integrates evidence over contacts with recursive Bayes and
//!   moves the sensor toward a fixation point.
//! * [`harness`] wires everything into reproducible experiment protocols.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod active;
pub mod harness;
pub mod perception;
pub mod pipeline;
pub mod seed;
pub mod series;
pub mod sim;

pub use series::{DeflectionSeries, SeriesMeta};
