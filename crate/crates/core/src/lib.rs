//! Timetable-independent capacity analysis of railway junctions.
//!
//! A junction (routes plus a conflict matrix) and an operating program are
//! turned into a continuous-time Markov chain whose stationary distribution
//! yields per-route expected queue lengths and loss probabilities. These are
//! compared against waiting-train thresholds to decide whether a layout
//! offers sufficient quality, and which maximum mean service time it can
//! absorb.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod approx;
pub mod bundled;
#[cfg(feature = "cli")]
pub mod cli;
pub mod config;
pub mod ctmc;
pub mod junction;
pub mod simulator;
pub mod solver;

pub use junction::{
    ClassCounts, ConflictMatrix, Demand, Junction, OperatingProgram, RateSet, Route, TrainClass,
};
