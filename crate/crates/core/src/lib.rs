//! Watermark-based set-membership inference for generative models.
//!
//! The crate is organised around the attack pipeline:
//!
//! - [`codec`]: key-seeded block-DCT watermark embedder and decoder.
//! - [`stats`]: bit-match summaries, null calibration and the exact binomial
//!   `p_avg` / `p_max` tests.
//! - [`dataset`]: procedural labelled corpus, manifests, and marking of an
//!   attribute-defined subset.
//! - [`genproxy`]: surrogate generator (memorize-and-corrupt or bit-channel)
//!   plus the attribute predictor stub.
//! - [`harness`]: end-to-end attack runs, sweeps and report emission.

pub mod codec;
pub mod dataset;
pub mod genproxy;
pub mod harness;
pub mod image;
pub mod kvfile;
pub mod rng;
pub mod stats;

pub use codec::{BitPayload, CodecConfig, CodecError, SoftDecode, WatermarkKey};
pub use image::ImageBuffer;
