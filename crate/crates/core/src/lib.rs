//! Attention-based end-to-end keyword spotting.

pub mod config;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod layers;
pub mod models;
pub mod numerics;
pub mod parallel;
pub mod streaming;
pub mod training;

pub use error::{KwsError, Result};
