//! Unsupervised MDL morphological segmentation, segmentation metrics, and
//! generation of statistically matched pseudo-lexicons.

pub mod corpus;
pub mod error;
pub mod frequency;
pub mod metrics;
pub mod pipeline;
pub mod pseudogen;
pub mod segmenter;
pub mod textmodel;

pub use error::{Error, Level, Result};
