//! Vector font classification from TrueType outlines.
//!
//! The pipeline: parse TrueType binaries ([`font`]), convert glyph outlines
//! between four representations ([`outline`]), tokenize and embed them
//! ([`token`]), and train/evaluate a CLS-token Transformer encoder
//! ([`model`], [`experiment`]).

pub mod experiment;
pub mod font;
pub mod model;
pub mod outline;
pub mod token;

pub use font::{parse_font, FontError, FontFile, GlyphOutline, Point};
pub use model::{EncoderConfig, ModelParams};
pub use outline::{CommandPath, Representation};
pub use token::{QuantizerConfig, TokenSequence, TokenizerLimits};
