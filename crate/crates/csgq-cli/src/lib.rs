//! Experiment harness wiring the codec, decoders and channel simulator
//! into reproducible benchmark runs with CSV output.

pub mod config;
pub mod experiments;
pub mod table;
