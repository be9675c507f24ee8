//! Importance-aware unequal error protection.
//!
//! Features of a semantic representation carry different importance
//! weights. This crate assigns them subchannels, decides how many to
//! transmit, picks QAM orders and distributes power so that the
//! importance-weighted distortion is minimized, and simulates the resulting
//! digital link bit by bit.

pub mod ber;
pub mod cli;
pub mod error;
pub mod harness;
pub mod importance;
pub mod link;
pub mod matching;
pub mod modulation;
pub mod power;
pub mod solver;

pub use error::{Error, Result};
