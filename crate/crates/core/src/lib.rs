//! Convertible erasure codes for merging stripes with low conversion
//! bandwidth.
//!
//! The crate builds pairs of MDS codes where `ς` stripes of an `[kI+rI, kI]`
//! code are merged into one stripe of an `[ςkI+rF, ςkI]` code, and performs
//! that conversion while downloading as few subsymbols as possible. Lower
//! bounds, a max-flow oracle and a file-backed cluster simulation check the
//! constructions.

pub mod error;
pub mod flow;
pub mod galois;
pub mod linear_code;
pub mod base_convertible;
pub mod bounds;
pub mod cli;
pub mod cluster;
pub mod piggyback;
pub mod trace;

pub use error::{Error, Result};
