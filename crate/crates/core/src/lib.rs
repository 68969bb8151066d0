//! Core of the hitnet toolkit.
//!
//! Everything here is `no_std` with `alloc`: the HIT spec language and its
//! word-problem oracles, exact embeddings of the torus, the wedge of two
//! circles and the Klein bottle, a small tape-based autodiff engine, the six
//! loop decoders, training, and the evaluation metrics.
//!
//! File formats, the CLI and multi-threaded orchestration live in the
//! `hitnet-harness` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod autograd;
pub mod decoders;
pub mod geometry;
pub mod hit_spec;
pub mod metrics;
pub mod nn;
pub mod optim;
pub mod probe;
pub mod rng;
pub mod train;

pub use hit_spec::{parse_hit_spec, GroupClass, HitSpec, Letter, NormalForm, Word};
pub use rng::Rng;
pub use decoders::{Decoder, DecoderKind, Hyper, TypeTag};
pub use geometry::{PointCloud, Space};
