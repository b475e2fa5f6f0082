//! Multimodal feature extraction and ensemble learning for detecting
//! depression signals in social-media user timelines.

// `!(x > 0.0)` is how parameter checks reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bundle;
pub mod corpus;
pub mod dimred;
pub mod eval;
pub mod features;
pub mod lexicon;
pub mod ml;
pub mod pipeline;
pub mod synth;
mod text;
pub mod topics;
pub mod webcontext;
