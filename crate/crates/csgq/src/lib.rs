//! Multiple description coding of compressive measurements via graded
//! quantization (CS-GQ).
//!
//! A sparse signal is acquired through a random Gaussian projection, and the
//! measurement vector is encoded into two descriptions: each description
//! quantizes half of the measurements with a fine uniform quantizer (`B`
//! bits) and the other half with a coarse one (`b` bits), the assignments
//! being swapped between the two descriptions. The coarse grid is staggered
//! by half a fine step so that a receiver holding both descriptions can
//! intersect the two quantization bins and dequantize on a refined central
//! partition.
//!
//! The crate provides:
//!
//! * [`signal_model`] — test-signal and sensing-matrix generation,
//!   measurement, distortion metrics, exhaustive restricted-isometry
//!   constant estimation at tiny scale;
//! * [`graded_quantizer`] — the staggered fine/coarse quantizer pair,
//!   index partitioning, description encoding, side and central
//!   dequantization;
//! * [`admm_decoder`] — the constrained ℓ1 solver (ADMM with a
//!   proximal-gradient inner loop) used for side and central decoding, the
//!   oracle decoder and the stable-recovery bound evaluator;
//! * [`rd_optimizer`] — closed-form oracle distortion formulas, average
//!   distortion under description loss, and selection of the coarse rate;
//! * [`transport`] — MTU-limited bit-exact packetization with the
//!   interleaved dual pattern, memoryless and Gilbert-Elliott erasure
//!   channels, reassembly of received packets into decoder inputs.
//!
//! Everything is deterministic under explicit 64-bit seeds; see [`rng`] for
//! the pseudo-random generator contract.

pub mod admm_decoder;
pub mod error;
pub mod graded_quantizer;
pub mod linalg;
pub mod rd_optimizer;
pub mod rng;
pub mod signal_model;
pub mod transport;

pub use error::{CsgqError, Result};
