//! Numerical laboratory for C⁰/C¹-Hamiltonian twist maps on degenerate and
//! non-degenerate Liouville domains.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`] : collar profiles and the square-root / squaring maps.
//! * [`hamflow`] : Hamiltonians on collars, vector-field splitting, adaptive flows, twist checks.
//! * [`extension`] : linear-at-infinity extensions to the completion.
//! * [`action`] : action functional and the action-growth verifier.
//! * [`smoothing`] : the ε-family smoothing an infinitely wrapping Hamiltonian.
//! * [`index`] : linearised flows, block decomposition and Robbin–Salamon indices.
//! * [`models`] : Katok/Brieskorn example, convex billiards, synthetic annulus.
//! * [`orbits`] : periodic points, prime-iterate survey, Lagrangian chords.
//! * [`cli`] : experiment orchestration used by the `twistlab` binary.

pub mod action;
pub mod cli;
pub mod error;
pub mod extension;
pub mod geometry;
pub mod hamflow;
pub mod index;
pub mod interp;
pub mod linalg;
pub mod models;
pub mod orbits;
pub mod smoothing;

pub use error::{Error, Result};
