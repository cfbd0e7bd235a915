//! Desk-scale laboratory for low-latency joint speech enhancement and analog
//! joint source-channel transmission over an AWGN channel.
//!
//! The crate is organized around the signal path:
//!
//! * [`tensor`] — dense f64 tensors with reverse-mode autodiff,
//! * [`signal`] — WAV I/O, synthetic corpus generation, SNR-controlled mixing,
//! * [`channel`] — power normalization and the AWGN channel,
//! * [`metrics`] — SI-SDR / ESTOI / MSE metrics and the training losses,
//! * [`models`] — the TransNet codec and the causal enhancer, composable in
//!   either order, plus checkpoint serialization,
//! * [`training`] — Adam, early stopping, the separate and joint protocols,
//! * [`streaming`] — frame-synchronous inference with bounded state,
//! * [`verify`] — the runnable property suite behind `jscc verify`.

pub mod channel;
pub mod error;
pub mod metrics;
pub mod models;
pub mod rng;
pub mod signal;
pub mod streaming;
pub mod tensor;
pub mod training;
pub mod verify;

pub mod dsp;

pub use error::{Error, Result};
pub use tensor::{Graph, NodeId, Tensor};
