//! Histogram regression estimation from individual stable sequences.
//!
//! The crate computes exact interval discrepancies between empirical and
//! limiting measures, runs the adaptive stopping-time histogram estimator on
//! a stream of pairs `(x_i, y_i)`, generates stable sequences, and builds the
//! spliced sequences on which a fixed estimation procedure keeps oscillating.

// `!(a < b)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adversary;
pub mod measures;
pub mod par;
pub mod partitions;
pub mod regression;
pub mod estimator;
pub mod evaluation;
pub mod generators;
pub mod io;
