//! Binary-antipodal AWGN channel, finite-length bounds and the Monte Carlo
//! harness.

pub mod bounds;
pub mod channel;
pub mod harness;

pub use bounds::{bound_crossing, e0, rcb, spb, Bound};
pub use channel::{modulate_and_transmit, ChannelModel};
pub use harness::{run_curve, DecoderKind, RunOptions, SimRecord, StopRule};
