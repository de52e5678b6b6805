//! Appearance-motion correspondence model for video anomaly detection.
//!
//! A single frame goes through an Inception front-end and a shared strided
//! encoder, then two decoders: one reconstructs the frame, the other (with
//! U-Net skips) predicts the optical flow to the next frame. A conditional
//! discriminator judges (frame, flow) pairs during training. At test time the
//! flow error picks the worst 16x16 patch and both streams' errors at that
//! patch are combined into a log score.
//!
//! This crate is `no_std` + `alloc`. File formats, configuration and the
//! command line live in the `amc` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod data;
pub mod error;
pub mod eval;
pub mod flowviz;
pub mod losses;
mod math;
pub mod model;
pub mod nn;
pub mod optim;
pub mod scoring;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use tensor::{Shape, Tensor};
