//! Non-binary turbo codes over GF(2^m) built from time-variant memory-1
//! convolutional codes, decodable as turbo codes or as LDPC codes.

// Index loops mirror the matrix and trellis notation.
#![allow(clippy::needless_range_loop)]

pub mod bp;
pub mod construction;
pub mod encoder;
pub mod error;
pub mod galois;
pub mod graph;
pub mod interleaver;
pub mod pmf;
pub mod sim;
pub mod trellis;
pub mod turbo;

pub use error::{Error, Result};
