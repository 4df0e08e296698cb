//! Synthesis of multi-modal remote sensing visual question answering datasets.
//!
//! The crate tiles VHR orthophotos into 200 m patches, aligns multi-spectral and SAR context
//! windows with each patch, prepares continuous normalized SAR imagery, generates template
//! question/answer pairs from vector annotation layers, balances them and exports splits.

pub mod annotation;
pub mod balance;
pub mod config;
pub mod dataset;
pub mod error;
pub mod fixture;
pub mod geo;
pub mod json;
pub mod pipeline;
pub mod projection;
pub mod raster;
pub mod question;
pub mod sar;
pub mod seed;

pub use error::{Error, Result};
