//! Two-party secure CNN inference over the ring `Z_2^64`.
//!
//! Two compute servers hold ABY2.0-style shares of an image and a model
//! (each value `x` is a public `Δ_x` plus an additively shared mask `δ_x`
//! with `x = Δ_x − δ_x`) and evaluate convolution, dense, ReLU, indicator
//! and argmax layers without either server learning the data. The
//! multiplicative gates consume correlated randomness from one of two
//! interchangeable backends: a trusted dealer or a third-party helper node
//! that only ever sees masks. A splitting layer bounds peak memory by
//! running convolutions kernel-by-kernel and over horizontal row chunks,
//! persisting intermediate shares to files.
//!
//! The crate is organised bottom-up:
//!
//! * [`ring`] — wrapping `Z_2^64` arithmetic and fixed-point encoding
//! * [`tensor`] — shapes, ring tensors and clear tensor kernels
//! * [`net`] — length-prefixed frames and transports (TCP / in-memory)
//! * [`correlated`] — dealer/helper cross terms and multiplication triples
//! * [`session`] — per-party protocol state and the peer channel
//! * [`sharing`] — share generation, reconstruction, re-sharing, share files
//! * [`comparison`] — boolean-shared adders, sign extraction, secure ReLU
//! * [`ops`] — tensorised secure gates (hadamard, matmul, conv, argmax, ...)
//! * [`splitter`] — vertical/horizontal/NN split planning and execution
//! * [`pipeline`] — model ingestion, the clear oracle, and the role drivers
//! * [`sim`] — in-process harness wiring parties and a service over pipes

pub mod comparison;
pub mod correlated;
pub mod error;
pub mod net;
pub mod ops;
pub mod pipeline;
pub mod ring;
pub mod rng;
pub mod session;
pub mod sharing;
pub mod sim;
pub mod splitter;
pub mod tensor;

pub use error::{Error, Result};
pub use ring::{FixedPointConfig, RingElem};

/// Compute-party identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Party {
    P0,
    P1,
}

impl Party {
    pub fn index(self) -> usize {
        match self {
            Party::P0 => 0,
            Party::P1 => 1,
        }
    }

    pub fn other(self) -> Party {
        match self {
            Party::P0 => Party::P1,
            Party::P1 => Party::P0,
        }
    }

    pub fn from_index(i: usize) -> Result<Party> {
        match i {
            0 => Ok(Party::P0),
            1 => Ok(Party::P1),
            _ => Err(Error::Config(format!("invalid party index {i}"))),
        }
    }
}

impl std::fmt::Display for Party {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "P{}", self.index())
    }
}
