//! Command-line front end for sphere-constrained high-index saddle
//! dynamics: configuration resolution, the run/converge/check commands and
//! the trajectory/table serializers.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
