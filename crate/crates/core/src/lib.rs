//! Monte Carlo simulation of the alerting performance of a smartphone-based
//! earthquake early warning network.
//!
//! A campaign repeatedly samples a network of `n` active phones out of a
//! catalog of candidate locations, simulates which phones detect the P wave
//! and when, and runs a sliding-window count detector on the server side.
//! The resulting detection delays, detection locations and population
//! warning times are summarized per network size with 95% Monte Carlo bands.

pub mod detection;
pub mod geo;
pub mod montecarlo;
pub mod network;
pub mod scenario;
pub mod warning;
pub mod synthetic;
pub mod config;
pub mod output;
pub mod cli;
