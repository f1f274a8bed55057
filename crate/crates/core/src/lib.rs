//! Exact-arithmetic machinery for planar embeddings of inverse limits of
//! piecewise-linear interval maps.

// Errors carry the exact rationals that caused them.
#![allow(clippy::result_large_err)]

pub mod access;
pub mod chains;
pub mod compose;
pub mod geometry;
pub mod intervals;
pub mod permute;
pub mod plmap;
pub mod rational;
pub mod render;

pub use plmap::{builtin, parse_plmap, resolve_map, Branch, Direction, MapError, PLMap};
pub use rational::{q, Rational};
