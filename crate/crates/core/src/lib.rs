//! Cardinality sketches and what they give away.
//!
//! This crate implements four classic distinct-count sketches (KMV, PCSA,
//! LogLog, HyperLogLog) behind one small interface: create an empty sketch,
//! `add` elements, `merge` sketches built from different streams, `estimate`
//! the number of distinct elements seen. All four hash elements with a keyed
//! 64-bit cryptographic hash, so a sketch never stores elements, only hash
//! material.
//!
//! On top of the sketches sit three analysis toolkits:
//!
//! * [`bounds`] evaluates how accurate a cardinality estimator is *allowed*
//!   to be once you demand that single elements stay deniable, and computes
//!   the average and per-target privacy loss of HyperLogLog sketches.
//! * [`attack`] runs the corresponding attacks: membership inference against
//!   a single sketch, Monte-Carlo surveys of how often sketches ignore a
//!   non-member, intersection of co-occurring sketches, and a probing attack
//!   against a rounding estimate API.
//! * [`store`] and [`service`] are a small file-backed sketch store and a
//!   transport-agnostic query service over it, with a raw and a restricted
//!   policy mode, used both as plumbing for experiments and as the thing the
//!   external attack talks to.

pub mod attack;
pub mod bounds;
pub mod hash;
pub mod service;
pub mod sketch;
pub mod store;

pub use hash::{hash_element, HashValue, Salt};
pub use sketch::{theoretical_rse, Algo, FormatError, Sketch, SketchError};
