pub mod coco;
pub mod commands;
pub mod diffusion;
pub mod error;
pub mod jsonl;
pub mod layout;
pub mod matching;
pub mod metrics;
pub mod mosaic;
pub mod ot;
pub mod render;
pub mod synth;
pub mod tokens;

pub use error::{Error, Result};
