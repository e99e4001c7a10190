//! Jet-level Finsler geometry.
//!
//! The crate evaluates Finsler energies as truncated Taylor series, derives the
//! Berwald spray, connection and curvature from them, and decides whether the
//! curvature vector fields and their covariant derivatives generate all
//! `k`-jets of vector fields on the indicatrix.

pub mod error;
pub mod jet;
pub mod metric;
pub mod berwald;
pub mod indicatrix;
pub mod holonomy;
pub mod scan;
pub mod transport;

pub use error::{Error, Result};
pub use jet::{MultiIndex, TaylorJet};
