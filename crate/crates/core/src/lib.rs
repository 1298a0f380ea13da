//! Toolkit for a cloud digital-signage link pool and its invisible
//! screen-to-camera side channel.
//!
//! - [`queueing`]: closed-form M/M/c analysis of the link pool (state
//!   probabilities, waiting probability, system rejection and utilization).
//! - [`des`]: discrete-event simulation of static-partition vs
//!   dynamic-borrowing channel allocation.
//! - [`isc`]: segment intensity-modulation codec for embedding bits in
//!   displayed frames, with distortion models and invisibility metrics.
//! - [`framing`]: preamble/length/CRC framing of link text payloads.
//! - [`ppm`]: binary PPM (P6) frame I/O.
//! - [`cli`]: the `siglink` command-line entry point.

pub mod cli;
pub mod des;
pub mod framing;
pub mod isc;
pub mod ppm;
pub mod queueing;
