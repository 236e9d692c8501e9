//! Tracking-by-detection toolkit: a transformer motion predictor driven by a
//! historical trajectory embedding, a constant-velocity Kalman baseline,
//! Hungarian data association, CLEAR-MOT/IDF1 evaluation, and a deterministic
//! synthetic scenario generator for desk-scale benchmarks.

pub mod embedding;
pub mod metrics;
pub mod model;
pub mod mot;
pub mod train;
pub mod assoc;
pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod geometry;
pub mod kalman;
pub mod optim;
pub mod synth;
pub mod tensor;
pub mod tracker;

pub use geometry::{BBox, ImageDims};
pub use tensor::{Tape, TensorId};
