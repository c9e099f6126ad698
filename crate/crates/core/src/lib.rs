//! Template-guided motion forensics.
//!
//! A procedural template is embedded into an image, the image is pushed
//! through simulated image-to-video motion, the motion is estimated back from
//! the surviving template, and each frame is warped back to the source and
//! fused by confidence.

pub mod buffer;
pub mod cli;
pub mod config;
pub mod degrade;
pub mod error;
pub mod estimator;
pub mod filter;
pub mod io;
pub mod metrics;
pub mod mol;
pub mod motion;
pub mod pipeline;
pub mod reversal;
pub mod sim;
pub mod template;
pub mod warp;

pub use buffer::{BoolMask, ConfidenceMap, FlowField, ImageBuffer, ScalarMap};
pub use error::{Error, Result};
