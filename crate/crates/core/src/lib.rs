//! Bluetooth angle-of-arrival toolkit: anchor orientation calibration,
//! least-squares tag positioning, a simulation oracle and evaluation metrics.

pub mod calibration;
pub mod geometry;
pub mod model;
pub mod positioning;
pub mod simulation;
pub mod cli;
pub mod io;
pub mod metrics;
