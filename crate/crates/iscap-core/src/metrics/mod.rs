//! Closed-form performance metrics of a Gaussian input distribution.

pub mod powering;
pub mod rate;
pub mod sensing;
